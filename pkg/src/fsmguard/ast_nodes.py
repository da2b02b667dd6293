"""AST for one parsed FSM module.

Equality between nodes is structural: spans and other layout trivia do not
participate, so a parse -> emit -> parse round trip compares equal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .source import Span

_NOSPAN = Span(1, 1)


@dataclass
class Port:
    name: str
    direction: str                      # input / output / inout
    kind: str = "wire"                  # wire / reg
    width: int = 1
    span: Span = field(default=_NOSPAN, compare=False)


@dataclass
class ParamDecl:
    """One state parameter with its sized binary encoding."""

    name: str
    width: int
    bits: str                           # e.g. "000"; index 0 is the MSB
    span: Span = field(default=_NOSPAN, compare=False)
    was_localparam: bool = field(default=False, compare=False)


@dataclass
class Assign:
    lhs: str
    rhs: str                            # normalized expression text
    span: Span = field(default=_NOSPAN, compare=False)


@dataclass
class Branch:
    guard: Optional[str]                # None for a bare else branch
    body: list["Stmt"]
    guard_inputs: tuple[str, ...] = field(default=(), compare=False)
    span: Span = field(default=_NOSPAN, compare=False)


@dataclass
class IfChain:
    branches: list[Branch]
    span: Span = field(default=_NOSPAN, compare=False)

    @property
    def has_else(self) -> bool:
        return bool(self.branches) and self.branches[-1].guard is None


Stmt = Union[Assign, IfChain]


@dataclass
class CaseArm:
    label: Optional[str]                # None for the default arm
    body: list[Stmt]
    span: Span = field(default=_NOSPAN, compare=False)


@dataclass
class SeqBlock:
    """The single sequential always block: clocked state register update."""

    clock: str
    reset: str
    reset_async: bool
    reset_cond: str                     # normalized condition text
    reset_target: str                   # declared state parameter
    span: Span = field(default=_NOSPAN, compare=False)


@dataclass
class CombBlock:
    """The single combinational always block holding the case statement."""

    sens_star: bool
    sens_list: tuple[str, ...]
    leading: list[Assign]               # defaults assigned before the case
    subject: str                        # case subject (current-state register)
    arms: list[CaseArm]
    default_arm: Optional[CaseArm]
    span: Span = field(default=_NOSPAN, compare=False)

    def leading_target_for(self, lhs: str) -> Optional[str]:
        for a in self.leading:
            if a.lhs == lhs:
                return a.rhs
        return None


@dataclass
class FsmAst:
    module_name: str
    ports: list[Port]
    parameters: list[ParamDecl]
    state_cur: str
    state_next: str
    state_width: int
    seq: SeqBlock
    comb: CombBlock
    protected_annotations: frozenset[str] = frozenset()
    # Layout trivia carried for the linter, never compared.
    stray_semis: tuple[Span, ...] = field(default=(), compare=False)
    localparam_spans: tuple[Span, ...] = field(default=(), compare=False)
    comments: tuple[str, ...] = field(default=(), compare=False)
    span: Span = field(default=_NOSPAN, compare=False)

    # -- convenience ----------------------------------------------------
    @property
    def param_names(self) -> list[str]:
        return [p.name for p in self.parameters]

    def param(self, name: str) -> ParamDecl:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def encodings(self) -> dict[str, str]:
        return {p.name: p.bits for p in self.parameters}

    @property
    def data_inputs(self) -> list[str]:
        """Input ports other than the clock and reset, in port order."""
        skip = {self.seq.clock, self.seq.reset}
        return [p.name for p in self.ports if p.direction == "input" and p.name not in skip]

    def arm_for(self, label: str) -> Optional[CaseArm]:
        for arm in self.comb.arms:
            if arm.label == label:
                return arm
        return None

    def unused_encodings(self) -> list[str]:
        used = {p.bits for p in self.parameters}
        width = self.state_width
        return [format(i, f"0{width}b") for i in range(2 ** width)
                if format(i, f"0{width}b") not in used]

    def interface_key(self) -> tuple:
        """Everything an edit must leave untouched: name, ports, clock/reset."""
        return (
            self.module_name,
            tuple((p.name, p.direction, p.kind, p.width) for p in self.ports),
            self.seq.clock,
            self.seq.reset,
        )
