"""Security rule checks over the STG, including the fault-injection
feasibility (FIF) metric, aggregated into a CheckReport.

FIF for one transition against one protected state is the bitwise product

    FIF = prod_i ((bx_i XOR by_i) OR (bx_i AND bp_i))        i = 0 .. n-1

where bx/by/bp are the present, next, and protected state encodings and
index 0 is the MSB.  FIF = 1 marks a transition from which a fault can
steer the machine toward the protected state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Optional

from .ast_nodes import FsmAst
from .lint import lint
from .parser import parse_source
from .source import Diagnostic, SourceText, Span, error
from .stg import (
    Encoding,
    Stg,
    StgError,
    Transition,
    extract_stg,
    hamming_distance,
    reachable_states,
    unprotected_transitions,
)

SCHEMA_VERSION = 1


class Rule(Enum):
    FIF_NONZERO = "FIF_NONZERO"
    HD_NOT_ONE = "HD_NOT_ONE"
    STATIC_DEADLOCK = "STATIC_DEADLOCK"
    TRAP_LOOP_CWE835 = "TRAP_LOOP_CWE835"
    UNREACHABLE_STATE = "UNREACHABLE_STATE"
    DUPLICATE_ENCODING = "DUPLICATE_ENCODING"
    MISSING_DEFAULT = "MISSING_DEFAULT"


_RULE_ORDER = {rule: i for i, rule in enumerate(Rule)}


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class RuleConfig:
    """Which rules run, and how edge cases are scored.

    The FIF rule is opt-in: in the default audit profile (default handling
    plus Hamming distance) FIF findings would double-report the same
    encoding weaknesses.  ``include_self_edges`` widens HD/FIF scoring to
    unprotected self transitions (HD = 0 trivially violates HD = 1), which
    stays off by default and is surfaced in every report.
    """

    fif: bool = False
    hd: bool = True
    static_deadlock: bool = True
    trap_loop: bool = True
    unreachable: bool = True
    duplicate_encoding: bool = True
    missing_default: bool = True
    include_self_edges: bool = False

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BitTriple:
    """Present / next / protected state bits at one position."""

    bx: int
    by: int
    bp: int
    index: int


@dataclass(frozen=True)
class FifResult:
    per_bit: tuple[tuple[BitTriple, int], ...]
    overall: int
    source: str = ""
    target: str = ""
    protected_ref: str = ""

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "protected": self.protected_ref,
            "per_bit": [
                {"i": t.index, "bx": t.bx, "by": t.by, "bp": t.bp, "fif": v}
                for t, v in self.per_bit
            ],
            "overall": self.overall,
        }


def fif_metric(bx: Encoding, by: Encoding, bp: Encoding) -> FifResult:
    """Evaluate the FIF product for one (present, next, protected) triple."""
    if not (bx.width == by.width == bp.width):
        raise RuleError(f"width mismatch: {bx}, {by}, {bp}")
    per_bit = []
    overall = 1
    for i in range(bx.width):
        triple = BitTriple(bx.bit(i), by.bit(i), bp.bit(i), i)
        fif_i = (triple.bx ^ triple.by) | (triple.bx & triple.bp)
        per_bit.append((triple, fif_i))
        overall &= fif_i
    return FifResult(per_bit=tuple(per_bit), overall=overall)


@dataclass(frozen=True)
class RuleViolation:
    rule: Rule
    states: tuple[str, ...]
    transition: Optional[tuple[str, str]] = None
    span: Optional[Span] = None
    evidence: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "rule": self.rule.value,
            "states": list(self.states),
            "transition": list(self.transition) if self.transition else None,
            "span": self.span.to_json() if self.span else None,
            "evidence": self.evidence,
        }


@dataclass
class CheckReport:
    design_id: str
    protected: tuple[str, ...]
    violations: list[RuleViolation]
    lint: list[Diagnostic]
    config: RuleConfig
    skipped_rules: list[tuple[str, str]] = field(default_factory=list)
    parse_ok: bool = True

    @property
    def violated_rules(self) -> set[Rule]:
        return {v.rule for v in self.violations}

    def violations_of(self, rule: Rule) -> list[RuleViolation]:
        return [v for v in self.violations if v.rule == rule]

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.lint if d.is_error]

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "design_id": self.design_id,
            "parse_ok": self.parse_ok,
            "protected": sorted(self.protected),
            "config": self.config.to_json(),
            "violations": [v.to_json() for v in self.violations],
            "lint": [d.to_json() for d in self.lint],
            "skipped_rules": [list(s) for s in self.skipped_rules],
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n"


# -- per-rule checks --------------------------------------------------------

def _scored_edges(stg: Stg, include_self: bool) -> list[Transition]:
    edges = unprotected_transitions(stg)
    if not include_self:
        edges = [t for t in edges if not t.is_self]
    return edges


def fif_results(stg: Stg, include_self_edges: bool = False) -> list[FifResult]:
    """FIF for every (unprotected transition, protected state) pair."""
    protected = sorted(stg.protected_names)
    if not protected:
        raise RuleError("FIF rule requires a protected state")
    results = []
    for t in _scored_edges(stg, include_self_edges):
        for p in protected:
            base = fif_metric(stg.encoding_of(t.source), stg.encoding_of(t.target),
                              stg.encoding_of(p))
            results.append(FifResult(base.per_bit, base.overall, t.source, t.target, p))
    return results


def check_fif_rule(stg: Stg, include_self_edges: bool = False) -> list[RuleViolation]:
    violations = []
    for res in fif_results(stg, include_self_edges):
        if res.overall == 1:
            violations.append(RuleViolation(
                rule=Rule.FIF_NONZERO,
                states=(res.source, res.target, res.protected_ref),
                transition=(res.source, res.target),
                evidence={"fif": res.to_json()},
            ))
    return violations


def check_hd_rule(stg: Stg, include_self_edges: bool = False) -> list[RuleViolation]:
    violations = []
    for t in _scored_edges(stg, include_self_edges):
        hd = hamming_distance(stg.encoding_of(t.source), stg.encoding_of(t.target))
        if hd != 1:
            violations.append(RuleViolation(
                rule=Rule.HD_NOT_ONE,
                states=(t.source, t.target),
                transition=(t.source, t.target),
                span=t.span,
                evidence={"hamming_distance": hd,
                          "encodings": [str(stg.encoding_of(t.source)),
                                        str(stg.encoding_of(t.target))]},
            ))
    return violations


def detect_static_deadlock(stg: Stg) -> list[RuleViolation]:
    """A reachable state every outgoing edge of which is a self loop, entered
    from some distinct reachable state."""
    reach = reachable_states(stg)
    violations = []
    for s in stg.states:
        if s.name not in reach:
            continue
        out = stg.out_edges(s.name)
        if any(t.target != s.name for t in out):
            continue
        feeders = [t.source for t in stg.in_edges(s.name)
                   if t.source != s.name and t.source in reach]
        if feeders:
            violations.append(RuleViolation(
                rule=Rule.STATIC_DEADLOCK,
                states=(s.name,),
                span=s.span,
                evidence={"entered_from": sorted(set(feeders))},
            ))
    return violations


def _tarjan_sccs(nodes: list[str], succ: dict[str, list[str]]) -> list[list[str]]:
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    out: list[list[str]] = []

    def strongconnect(v: str) -> None:
        # iterative Tarjan: explicit stack of (node, successor iterator)
        work = [(v, iter(succ.get(v, ())))]
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                out.append(comp)

    for v in nodes:
        if v not in index:
            strongconnect(v)
    return out


def detect_trap_loops(stg: Stg) -> list[RuleViolation]:
    """Strongly connected sets of reachable states with no exit edge, forming
    a proper subset of the reachable set.  Single-state traps are reported as
    static deadlocks, never twice."""
    reach = reachable_states(stg)
    succ: dict[str, list[str]] = {}
    for t in stg.transitions:
        if t.guard.is_constant_false:
            continue
        if t.source in reach and t.target in reach:
            succ.setdefault(t.source, []).append(t.target)
    sccs = _tarjan_sccs([n for n in stg.state_names if n in reach], succ)
    deadlocks = {v.states[0] for v in detect_static_deadlock(stg)}
    violations = []
    for comp in sccs:
        comp_set = set(comp)
        if comp_set == reach:
            continue
        has_self = any(n in succ.get(n, []) for n in comp)
        if len(comp) == 1 and not has_self:
            continue
        leaves = any(target not in comp_set
                     for n in comp for target in succ.get(n, ()))
        if leaves:
            continue
        if len(comp) == 1 and comp[0] in deadlocks:
            continue  # subsumed by STATIC_DEADLOCK
        members = tuple(n for n in stg.state_names if n in comp_set)
        violations.append(RuleViolation(
            rule=Rule.TRAP_LOOP_CWE835,
            states=members,
            span=stg.state(members[0]).span,
            evidence={"members": list(members)},
        ))
    return violations


def detect_unreachable_states(stg: Stg) -> list[RuleViolation]:
    reach = reachable_states(stg)
    violations = []
    for s in stg.states:
        if s.name in reach or s.name == stg.reset_state:
            continue
        out = [t for t in stg.out_edges(s.name) if t.target != s.name]
        violations.append(RuleViolation(
            rule=Rule.UNREACHABLE_STATE,
            states=(s.name,),
            span=s.span,
            evidence={"variant": "with-outgoing" if out else "isolated",
                      "exits_to": sorted({t.target for t in out})},
        ))
    return violations


def detect_duplicate_encodings(stg: Stg) -> list[RuleViolation]:
    violations = []
    for i, a in enumerate(stg.states):
        for b in stg.states[i + 1:]:
            if a.encoding == b.encoding:
                violations.append(RuleViolation(
                    rule=Rule.DUPLICATE_ENCODING,
                    states=(a.name, b.name),
                    span=b.span,
                    evidence={"encoding": str(a.encoding)},
                ))
    return violations


def check_default_handling(ast: FsmAst, stg: Stg) -> list[RuleViolation]:
    """Unused encodings must be handled: by a default arm, or by a leading
    next-state default that every unmatched encoding falls through to."""
    unused = ast.unused_encodings()
    if not unused:
        return []
    if ast.comb.default_arm is not None:
        return []
    if ast.comb.leading_target_for(ast.state_next) is not None:
        return []
    return [RuleViolation(
        rule=Rule.MISSING_DEFAULT,
        states=(),
        span=ast.comb.span,
        evidence={"unused_encodings": unused},
    )]


# -- aggregation ------------------------------------------------------------

def _sort_violations(violations: list[RuleViolation]) -> list[RuleViolation]:
    def key(v: RuleViolation) -> tuple:
        line = v.span.start if v.span else 0
        return (_RULE_ORDER[v.rule], line, v.states)
    return sorted(violations, key=key)


def run_checks_on_ast(ast: FsmAst, protected: frozenset[str] | set[str],
                      config: RuleConfig = RuleConfig(),
                      design_id: str = "<ast>") -> CheckReport:
    merged = frozenset(protected) | ast.protected_annotations
    stg = extract_stg(ast, merged)
    violations: list[RuleViolation] = []
    skipped: list[tuple[str, str]] = []

    if config.fif:
        if merged:
            violations += check_fif_rule(stg, config.include_self_edges)
        else:
            skipped.append((Rule.FIF_NONZERO.value, "rule not evaluated: empty protected set"))
    if config.hd:
        if merged:
            violations += check_hd_rule(stg, config.include_self_edges)
        else:
            skipped.append((Rule.HD_NOT_ONE.value, "rule not evaluated: empty protected set"))
    if config.static_deadlock:
        violations += detect_static_deadlock(stg)
    if config.trap_loop:
        violations += detect_trap_loops(stg)
    if config.unreachable:
        violations += detect_unreachable_states(stg)
    if config.duplicate_encoding:
        violations += detect_duplicate_encodings(stg)
    if config.missing_default:
        violations += check_default_handling(ast, stg)

    return CheckReport(
        design_id=design_id,
        protected=tuple(sorted(merged)),
        violations=_sort_violations(violations),
        lint=lint(ast),
        config=config,
        skipped_rules=skipped,
    )


def run_all_checks(src: SourceText, protected: frozenset[str] | set[str] = frozenset(),
                   config: RuleConfig = RuleConfig()) -> CheckReport:
    """Parse, lint, extract the STG, and run every rule enabled in config.

    A parse failure yields a report holding only the error diagnostics.
    """
    result = parse_source(src)
    if result.ast is None:
        return CheckReport(
            design_id=src.origin,
            protected=tuple(sorted(protected)),
            violations=[],
            lint=list(result.diagnostics),
            config=config,
            parse_ok=False,
        )
    try:
        report = run_checks_on_ast(result.ast, protected, config, design_id=src.origin)
    except StgError as exc:
        return CheckReport(
            design_id=src.origin,
            protected=tuple(sorted(protected)),
            violations=[],
            lint=list(result.diagnostics) + [error("E_STG", str(exc), Span(1, 1))],
            config=config,
            parse_ok=False,
        )
    report.lint = list(result.diagnostics) + report.lint
    return report
