"""State-transition graph extraction and the graph/bit primitives every
security rule shares."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

from .ast_nodes import Assign, CaseArm, FsmAst, IfChain, Stmt
from .source import Span

_NOSPAN = Span(1, 1)

_CONST_FALSE = {"0", "1'b0"}
_CONST_TRUE = {"1", "1'b1"}


class StgError(ValueError):
    pass


@dataclass(frozen=True)
class Encoding:
    """Fixed-width bit vector; index 0 is the most significant bit."""

    bits: str

    def __post_init__(self) -> None:
        if not self.bits or any(c not in "01" for c in self.bits):
            raise ValueError(f"bad encoding {self.bits!r}")

    @property
    def width(self) -> int:
        return len(self.bits)

    @classmethod
    def from_int(cls, value: int, width: int) -> "Encoding":
        return cls(format(value, f"0{width}b"))

    def bit(self, index: int) -> int:
        return int(self.bits[index])

    def __str__(self) -> str:
        return self.bits


def hamming_distance(a: Encoding, b: Encoding) -> int:
    """Number of differing bit positions between two equal-width encodings."""
    if a.width != b.width:
        raise StgError(f"width mismatch: {a.bits} vs {b.bits}")
    return sum(1 for x, y in zip(a.bits, b.bits) if x != y)


class GuardKind(Enum):
    EXPR = "expr"       # opaque condition text
    ALWAYS = "always"   # unconditional transition
    HOLD = "hold"       # implicit hold (arm did not fully assign next-state)


@dataclass(frozen=True)
class Guard:
    kind: GuardKind
    text: str = ""
    inputs: tuple[str, ...] = ()

    @property
    def is_constant_false(self) -> bool:
        return self.kind is GuardKind.EXPR and self.text.strip() in _CONST_FALSE

    def display(self) -> str:
        if self.kind is GuardKind.ALWAYS:
            return "1"
        if self.kind is GuardKind.HOLD:
            return "hold"
        return self.text

    @classmethod
    def always(cls) -> "Guard":
        return cls(GuardKind.ALWAYS)

    @classmethod
    def hold(cls, text: str = "") -> "Guard":
        return cls(GuardKind.HOLD, text)

    @classmethod
    def expr(cls, text: str, inputs: Iterable[str] = ()) -> "Guard":
        return cls(GuardKind.EXPR, text, tuple(inputs))


@dataclass(frozen=True)
class State:
    name: str
    encoding: Encoding
    protected: bool = False
    span: Span = field(default=_NOSPAN, compare=False)


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    guard: Guard
    span: Span = field(default=_NOSPAN, compare=False)

    @property
    def is_self(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True)
class Stg:
    states: tuple[State, ...]
    transitions: tuple[Transition, ...]
    reset_state: str
    width: int
    default_arm_target: Optional[str] = None

    def __post_init__(self) -> None:
        names = {s.name for s in self.states}
        if self.reset_state not in names:
            raise StgError(f"reset state {self.reset_state} is not declared")
        for s in self.states:
            if s.encoding.width != self.width:
                raise StgError(f"state {s.name} width differs from STG width")
        for t in self.transitions:
            if t.source not in names or t.target not in names:
                raise StgError(f"transition {t.source}->{t.target} references unknown state")

    def state(self, name: str) -> State:
        for s in self.states:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def state_names(self) -> list[str]:
        return [s.name for s in self.states]

    @property
    def protected_names(self) -> frozenset[str]:
        return frozenset(s.name for s in self.states if s.protected)

    def encoding_of(self, name: str) -> Encoding:
        return self.state(name).encoding

    def out_edges(self, name: str) -> list[Transition]:
        return [t for t in self.transitions if t.source == name and not t.guard.is_constant_false]

    def in_edges(self, name: str) -> list[Transition]:
        return [t for t in self.transitions if t.target == name and not t.guard.is_constant_false]


# -- extraction -----------------------------------------------------------

def _negate(guards: list[str]) -> str:
    return " && ".join(f"!({g})" for g in guards)


def _eval_block(stmts: list[Stmt], next_reg: str):
    """Walk one statement list.

    Returns (guarded, base, covered) where guarded is a list of
    (guard_texts, inputs, target) for conditional next-state outcomes, base is
    the unconditional target in effect after the block (None if none), and
    covered says whether every path through the block assigns next-state.
    """
    guarded: list[tuple[list[str], tuple[str, ...], str]] = []
    base: Optional[str] = None
    covered = False
    for stmt in stmts:
        if isinstance(stmt, Assign):
            if stmt.lhs != next_reg:
                continue
            base = stmt.rhs
            covered = True
            guarded = []  # a later unconditional assignment wins on every path
        else:
            chain_guards: list[str] = []
            chain_edges: list[tuple[list[str], tuple[str, ...], str]] = []
            all_branches_cover = True
            assigns_next = False
            for br in stmt.branches:
                sub_guarded, sub_base, sub_cov = _eval_block(br.body, next_reg)
                if br.guard is not None:
                    this_guard = [br.guard]
                    this_inputs = br.guard_inputs
                    chain_guards.append(br.guard)
                else:
                    neg = _negate(chain_guards)
                    this_guard = [neg] if neg else []
                    this_inputs = ()
                for sub_texts, sub_inputs, target in sub_guarded:
                    chain_edges.append((this_guard + sub_texts, this_inputs + sub_inputs, target))
                    assigns_next = True
                if sub_base is not None:
                    chain_edges.append((list(this_guard), this_inputs, sub_base))
                    assigns_next = True
                if not sub_cov:
                    all_branches_cover = False
            if assigns_next:
                guarded.extend(chain_edges)
                if stmt.has_else and all_branches_cover:
                    covered = True
                    base = None  # every path reassigned inside the chain
    return guarded, base, covered


def _chain_guard_texts(stmts: list[Stmt]) -> list[str]:
    texts: list[str] = []
    for stmt in stmts:
        if isinstance(stmt, IfChain):
            texts.extend(br.guard for br in stmt.branches if br.guard is not None)
    return texts


def _arm_transitions(arm_label: str, arm: CaseArm, ast: FsmAst,
                     leading_target: Optional[str]) -> list[Transition]:
    guarded, base, covered = _eval_block(arm.body, ast.state_next)
    edges: list[Transition] = []
    for texts, inputs, target in guarded:
        text = " && ".join(texts) if texts else "1"
        guard = Guard.expr(text, inputs) if texts else Guard.always()
        edges.append(Transition(arm_label, target, guard, arm.span))
    fall_guards = _chain_guard_texts(arm.body)
    fall_text = _negate(fall_guards)
    if covered and base is not None:
        guard = Guard.expr(fall_text) if fall_text else Guard.always()
        edges.append(Transition(arm_label, base, guard, arm.span))
    elif not covered:
        if leading_target is not None:
            guard = Guard.expr(fall_text) if fall_text else Guard.always()
            edges.append(Transition(arm_label, leading_target, guard, arm.span))
        else:
            edges.append(Transition(arm_label, arm_label, Guard.hold(fall_text), arm.span))
    return edges


def extract_stg(ast: FsmAst, protected: Iterable[str] = ()) -> Stg:
    """Build the STG: one transition per reachable assignment path per arm.

    Arms that never fully assign next-state fall back to the comb block's
    leading default when one exists, otherwise they hold (self edge).
    Declared states without an arm take the default arm's target, then the
    leading default, then hold.
    """
    protected_set = set(protected) | set(ast.protected_annotations)
    declared = set(ast.param_names)
    for name in protected_set:
        if name not in declared:
            raise StgError(f"protected state {name} is not declared")

    states = tuple(
        State(p.name, Encoding(p.bits), p.name in protected_set, p.span)
        for p in ast.parameters
    )
    leading_target = ast.comb.leading_target_for(ast.state_next)
    default_target: Optional[str] = None
    if ast.comb.default_arm is not None:
        _, dbase, dcov = _eval_block(ast.comb.default_arm.body, ast.state_next)
        default_target = dbase if dbase is not None else leading_target

    transitions: list[Transition] = []
    arm_labels = set()
    for arm in ast.comb.arms:
        assert arm.label is not None
        arm_labels.add(arm.label)
        transitions.extend(_arm_transitions(arm.label, arm, ast, leading_target))
    for p in ast.parameters:
        if p.name in arm_labels:
            continue
        if default_target is not None:
            transitions.append(Transition(p.name, default_target, Guard.always(), p.span))
        elif leading_target is not None:
            transitions.append(Transition(p.name, leading_target, Guard.always(), p.span))
        else:
            transitions.append(Transition(p.name, p.name, Guard.hold(), p.span))

    return Stg(
        states=states,
        transitions=tuple(transitions),
        reset_state=ast.seq.reset_target,
        width=ast.state_width,
        default_arm_target=default_target,
    )


# -- graph queries ---------------------------------------------------------

def reachable_states(stg: Stg) -> frozenset[str]:
    """Fixed point of may-traversal from reset; constant-false guards are
    never traversable."""
    seen = {stg.reset_state}
    frontier = [stg.reset_state]
    succ: dict[str, list[str]] = {}
    for t in stg.transitions:
        if not t.guard.is_constant_false:
            succ.setdefault(t.source, []).append(t.target)
    while frontier:
        name = frontier.pop()
        for nxt in succ.get(name, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return frozenset(seen)


def unprotected_transitions(stg: Stg) -> list[Transition]:
    """Transitions whose endpoints are both unprotected, in source order.

    Self edges stay in the list; rule checks decide separately whether to
    score them.
    """
    protected = stg.protected_names
    return [t for t in stg.transitions
            if t.source not in protected and t.target not in protected]


def stg_isomorphic_modulo_encoding(a: Stg, b: Stg) -> bool:
    """True iff the name-preserving mapping carries states and guarded edges
    of one graph onto the other, ignoring encodings and the default arm."""
    if set(a.state_names) != set(b.state_names):
        return False
    if a.reset_state != b.reset_state:
        return False

    def edge_key(t: Transition) -> tuple:
        return (t.source, t.target, t.guard.kind.value, t.guard.text)

    return sorted(map(edge_key, a.transitions)) == sorted(map(edge_key, b.transitions))


def rename_states(stg: Stg, mapping: dict[str, str]) -> Stg:
    """Rebuild the graph under a rename map covering states and guard
    signals; used to compare sanitized or generated designs against their
    originals."""
    import re as _re

    def m(name: str) -> str:
        return mapping.get(name, name)

    def m_guard(g: Guard) -> Guard:
        if not g.text and not g.inputs:
            return g
        text = _re.sub(r"[A-Za-z_][A-Za-z0-9_$]*",
                       lambda match: m(match.group(0)), g.text)
        return Guard(g.kind, text, tuple(m(i) for i in g.inputs))

    return Stg(
        states=tuple(replace(s, name=m(s.name)) for s in stg.states),
        transitions=tuple(
            replace(t, source=m(t.source), target=m(t.target), guard=m_guard(t.guard))
            for t in stg.transitions
        ),
        reset_state=m(stg.reset_state),
        width=stg.width,
        default_arm_target=m(stg.default_arm_target) if stg.default_arm_target else None,
    )


def dump_stg(stg: Stg) -> str:
    """Plain-text edge list for debugging; stable source order."""
    lines = [f"{t.source} -> {t.target} [{t.guard.display()}]" for t in stg.transitions]
    return "\n".join(lines) + "\n"
