"""Deterministic, seeded application of the five vulnerability classes.

Every injector enumerates candidate edits, keeps only those whose result the
rule checker flags for the intended class and nothing new (on a clean base:
exactly the intended class, so corpus labels are trustworthy by
construction), then draws uniformly with the caller's seed.  The sequential
block is never touched and the module interface is preserved.
"""
from __future__ import annotations

import copy
import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .ast_nodes import Assign, Branch, CaseArm, FsmAst, IfChain, ParamDecl
from .emitter import emit_with_markers
from .rules import Rule, RuleConfig, run_checks_on_ast
from .source import Span
from .stg import extract_stg, reachable_states


class VulnClass(Enum):
    CWE835_TRAP = "CWE835_TRAP"
    MISSING_DEFAULT = "MISSING_DEFAULT"
    DUPLICATE_ENCODING = "DUPLICATE_ENCODING"
    UNREACHABLE_STATE = "UNREACHABLE_STATE"
    STATIC_DEADLOCK = "STATIC_DEADLOCK"


RULE_FOR_CLASS = {
    VulnClass.CWE835_TRAP: Rule.TRAP_LOOP_CWE835,
    VulnClass.MISSING_DEFAULT: Rule.MISSING_DEFAULT,
    VulnClass.DUPLICATE_ENCODING: Rule.DUPLICATE_ENCODING,
    VulnClass.UNREACHABLE_STATE: Rule.UNREACHABLE_STATE,
    VulnClass.STATIC_DEADLOCK: Rule.STATIC_DEADLOCK,
}


class InjectError(ValueError):
    pass


@dataclass(frozen=True)
class InjectionPlan:
    """Ground-truth record of one seeded transformation."""

    vuln: VulnClass
    seed: int
    target_state: Optional[str]
    added_states: tuple[str, ...]
    modified_spans: tuple[Span, ...]
    notes: str = ""

    def to_json(self) -> dict:
        return {
            "vuln": self.vuln.value,
            "seed": self.seed,
            "target_state": self.target_state,
            "added_states": list(self.added_states),
            "modified_spans": [s.to_json() for s in self.modified_spans],
            "notes": self.notes,
        }


# -- shared helpers ----------------------------------------------------------

def _fresh_name(base: str, taken: set[str]) -> str:
    name = base
    k = 1
    while name in taken:
        name = f"{base}_{k}"
        k += 1
    return name


def _taken_names(ast: FsmAst) -> set[str]:
    return (set(ast.param_names) | {p.name for p in ast.ports}
            | {ast.state_cur, ast.state_next, ast.module_name})


def _lowest_unused_encodings(ast: FsmAst, count: int) -> list[str]:
    unused = ast.unused_encodings()
    if len(unused) < count:
        raise InjectError(
            f"need {count} unused encoding(s), only {len(unused)} available")
    return sorted(unused)[:count]


@dataclass(frozen=True)
class _EdgeRef:
    """Addressable next-state outcome inside one case arm."""

    arm_label: str
    kind: str            # "branch" | "base" | "fallthrough"
    chain_index: int = -1
    branch_index: int = -1


def _top_level_chains(arm: CaseArm) -> list[tuple[int, IfChain]]:
    return [(i, s) for i, s in enumerate(arm.body) if isinstance(s, IfChain)]


def _branch_assigns_next(branch: Branch, next_reg: str) -> bool:
    return any(isinstance(s, Assign) and s.lhs == next_reg for s in branch.body)


def _enumerate_refs(ast: FsmAst, arm: CaseArm) -> list[_EdgeRef]:
    label = arm.label
    assert label is not None
    refs: list[_EdgeRef] = []
    has_uncond = any(isinstance(s, Assign) and s.lhs == ast.state_next for s in arm.body)
    chains = _top_level_chains(arm)
    covered_by_chain = False
    for ci, chain in chains:
        branch_cover = all(_branch_assigns_next(br, ast.state_next) for br in chain.branches)
        if chain.has_else and branch_cover:
            covered_by_chain = True
        for bi, br in enumerate(chain.branches):
            if _branch_assigns_next(br, ast.state_next):
                refs.append(_EdgeRef(label, "branch", ci, bi))
    if has_uncond:
        refs.append(_EdgeRef(label, "base"))
    elif not covered_by_chain:
        refs.append(_EdgeRef(label, "fallthrough"))
    return refs


def _apply_redirect(ast: FsmAst, ref: _EdgeRef, new_target: str) -> None:
    """Rewrite one next-state outcome of an arm to new_target, in place."""
    arm = ast.arm_for(ref.arm_label)
    if arm is None:
        raise InjectError(f"arm {ref.arm_label} not found")
    next_reg = ast.state_next
    if ref.kind == "branch":
        chain = arm.body[ref.chain_index]
        assert isinstance(chain, IfChain)
        branch = chain.branches[ref.branch_index]
        for stmt in reversed(branch.body):
            if isinstance(stmt, Assign) and stmt.lhs == next_reg:
                stmt.rhs = new_target
                return
        raise InjectError("branch holds no next-state assignment")
    if ref.kind == "base":
        # Drop the unconditional assignment; route its path through an else
        # branch when a guard chain exists.
        keep = [s for s in arm.body
                if not (isinstance(s, Assign) and s.lhs == next_reg)]
        chains = [s for s in keep if isinstance(s, IfChain)]
        assigning = [c for c in chains
                     if any(_branch_assigns_next(br, next_reg) for br in c.branches)]
        if assigning:
            arm.body = keep
            chain = assigning[-1]
            if chain.has_else:
                raise InjectError("base path is unreachable under a full if/else")
            chain.branches.append(Branch(None, [Assign(next_reg, new_target)]))
        else:
            arm.body = keep + [Assign(next_reg, new_target)]
        return
    if ref.kind == "fallthrough":
        chains = [s for s in arm.body if isinstance(s, IfChain)
                  and any(_branch_assigns_next(br, next_reg) for br in s.branches)]
        if chains:
            chain = chains[-1]
            if chain.has_else:
                raise InjectError("fallthrough path already covered")
            chain.branches.append(Branch(None, [Assign(next_reg, new_target)]))
        else:
            arm.body = arm.body + [Assign(next_reg, new_target)]
        return
    raise InjectError(f"unknown edge ref kind {ref.kind}")


_GATE_CONFIG = RuleConfig()


def _base_rules(ast: FsmAst, protected: frozenset[str]) -> frozenset[Rule]:
    report = run_checks_on_ast(ast, protected, _GATE_CONFIG)
    return frozenset(report.violated_rules)


def _flags_exactly(ast: FsmAst, protected: frozenset[str], rule: Rule,
                   states: Optional[set[str]] = None,
                   pre_existing: frozenset[Rule] = frozenset()) -> bool:
    """Gate: the intended rule fires, and nothing fires that the base design
    did not already trip (clean bases therefore flag exactly the intent)."""
    try:
        report = run_checks_on_ast(ast, protected, _GATE_CONFIG)
    except Exception:
        return False
    violated = report.violated_rules
    if rule not in violated:
        return False
    if violated - pre_existing - {rule}:
        return False
    if states is not None:
        flagged = set()
        for v in report.violations_of(rule):
            flagged.update(v.states)
        if not states <= flagged:
            return False
    return True


def _plan_spans(ast: FsmAst, keys: list[str]) -> tuple[Span, ...]:
    _, markers = emit_with_markers(ast)
    return tuple(markers[k] for k in keys if k in markers)


# -- class-specific injections ----------------------------------------------

def inject_static_deadlock(ast: FsmAst, seed: int,
                           protected: frozenset[str] = frozenset()
                           ) -> tuple[FsmAst, InjectionPlan]:
    """Redirect one branch of a seeded eligible state into a fresh
    self-looping state."""
    protected = protected | ast.protected_annotations
    base_report = run_checks_on_ast(ast, protected, _GATE_CONFIG)
    if Rule.STATIC_DEADLOCK in base_report.violated_rules:
        raise InjectError("design already contains a static deadlock")
    pre_existing = frozenset(base_report.violated_rules)
    encoding = _lowest_unused_encodings(ast, 1)[0]
    new_name = _fresh_name("deadlock_state", _taken_names(ast))
    reach = reachable_states(extract_stg(ast, protected))

    candidates: dict[str, list[tuple[_EdgeRef, FsmAst]]] = {}
    for arm in ast.comb.arms:
        label = arm.label
        if label is None or label in protected or label not in reach:
            continue
        for ref in _enumerate_refs(ast, arm):
            trial = copy.deepcopy(ast)
            try:
                _extend_states(trial, [(new_name, encoding)], self_loop=new_name)
                _apply_redirect(trial, ref, new_name)
            except InjectError:
                continue
            if _flags_exactly(trial, protected, Rule.STATIC_DEADLOCK, {new_name},
                              pre_existing):
                candidates.setdefault(label, []).append((ref, trial))
    if not candidates:
        raise InjectError("no eligible state/branch yields a clean static deadlock")

    rng = random.Random(seed)
    state = rng.choice([l for l in (a.label for a in ast.comb.arms) if l in candidates])
    ref, injected = rng.choice(candidates[state])
    plan = InjectionPlan(
        vuln=VulnClass.STATIC_DEADLOCK,
        seed=seed,
        target_state=state,
        added_states=(new_name,),
        modified_spans=_plan_spans(injected, [f"param:{new_name}", f"arm:{state}",
                                              f"arm:{new_name}"]),
        notes=f"redirected a {ref.kind} path of {state} into self-looping {new_name}",
    )
    return injected, plan


def _extend_states(ast: FsmAst, new_states: list[tuple[str, str]],
                   self_loop: Optional[str] = None,
                   arms: Optional[dict[str, list]] = None) -> None:
    """Append new state parameters, plus arms (self-loop or provided)."""
    for name, bits in new_states:
        ast.parameters.append(ParamDecl(name, ast.state_width, bits))
    for name, _ in new_states:
        if arms is not None and name in arms:
            ast.comb.arms.append(CaseArm(name, arms[name]))
        elif self_loop == name:
            ast.comb.arms.append(CaseArm(name, [Assign(ast.state_next, name)]))


def inject_duplicate_encoding(ast: FsmAst, seed: int,
                              protected: frozenset[str] = frozenset()
                              ) -> tuple[FsmAst, InjectionPlan]:
    """Overwrite a seeded second state's encoding with a first state's."""
    protected = protected | ast.protected_annotations
    if len(ast.parameters) < 2:
        raise InjectError("need at least two states to duplicate an encoding")
    pre_existing = _base_rules(ast, protected)
    pairs = []
    names = ast.param_names
    for first in names:
        for second in names:
            if first == second:
                continue
            trial = copy.deepcopy(ast)
            trial.param(second).bits = trial.param(first).bits
            if _flags_exactly(trial, protected, Rule.DUPLICATE_ENCODING,
                              {first, second}, pre_existing):
                pairs.append(((first, second), trial))
    if not pairs:
        raise InjectError("no state pair yields a clean duplicate encoding")
    rng = random.Random(seed)
    (first, second), injected = rng.choice(pairs)
    plan = InjectionPlan(
        vuln=VulnClass.DUPLICATE_ENCODING,
        seed=seed,
        target_state=second,
        added_states=(),
        modified_spans=_plan_spans(injected, [f"param:{second}"]),
        notes=f"{second} now shares {first}'s encoding",
    )
    return injected, plan


def inject_unreachable_state(ast: FsmAst, seed: int,
                             protected: frozenset[str] = frozenset()
                             ) -> tuple[FsmAst, InjectionPlan]:
    """Add a state with outgoing transitions and no incoming edge anywhere."""
    protected = protected | ast.protected_annotations
    encoding = _lowest_unused_encodings(ast, 1)[0]
    new_name = _fresh_name("unreachable_state", _taken_names(ast))
    pre_existing = _base_rules(ast, protected)
    inputs = ast.data_inputs
    candidates = []
    for target in ast.param_names:
        if inputs:
            for sig in inputs:
                body = [IfChain([
                    Branch(sig, [Assign(ast.state_next, target)], (sig,)),
                    Branch(None, [Assign(ast.state_next, new_name)]),
                ])]
                candidates.append((target, sig, body))
        else:
            candidates.append((target, None, [Assign(ast.state_next, target)]))
    good = []
    for target, sig, body in candidates:
        trial = copy.deepcopy(ast)
        _extend_states(trial, [(new_name, encoding)], arms={new_name: copy.deepcopy(body)})
        if _flags_exactly(trial, protected, Rule.UNREACHABLE_STATE, {new_name},
                          pre_existing):
            good.append(((target, sig), trial))
    if not good:
        raise InjectError("no exit target yields a clean unreachable state")
    rng = random.Random(seed)
    (target, sig), injected = rng.choice(good)
    guard_note = f"guarded by {sig}" if sig else "unconditional"
    plan = InjectionPlan(
        vuln=VulnClass.UNREACHABLE_STATE,
        seed=seed,
        target_state=target,
        added_states=(new_name,),
        modified_spans=_plan_spans(injected, [f"param:{new_name}", f"arm:{new_name}"]),
        notes=f"{new_name} exits to {target} ({guard_note}) and is never entered",
    )
    return injected, plan


def remove_default_arm(ast: FsmAst) -> tuple[FsmAst, InjectionPlan]:
    """Delete the default arm, leaving unused encodings unhandled."""
    if ast.comb.default_arm is None:
        raise InjectError("design has no default arm to remove")
    unused = ast.unused_encodings()
    if not unused:
        raise InjectError("all encodings are used; removal creates no weakness")
    if ast.comb.leading_target_for(ast.state_next) is not None:
        raise InjectError("a leading next-state default still handles unused encodings")
    injected = copy.deepcopy(ast)
    injected.comb.default_arm = None
    _, markers = emit_with_markers(injected)
    plan = InjectionPlan(
        vuln=VulnClass.MISSING_DEFAULT,
        seed=0,
        target_state=None,
        added_states=(),
        modified_spans=(markers["endcase"],),
        notes="default arm removed; unhandled encodings: " + ", ".join(unused),
    )
    return injected, plan


def inject_trap_loop(ast: FsmAst, seed: int,
                     protected: frozenset[str] = frozenset()
                     ) -> tuple[FsmAst, InjectionPlan]:
    """Add a two-state cycle with no exit, entered from a seeded branch."""
    protected = protected | ast.protected_annotations
    enc_a, enc_b = _lowest_unused_encodings(ast, 2)
    pre_existing = _base_rules(ast, protected)
    taken = _taken_names(ast)
    name_a = _fresh_name("trap_state_1", taken)
    name_b = _fresh_name("trap_state_2", taken | {name_a})
    reach = reachable_states(extract_stg(ast, protected))

    candidates: dict[str, list[tuple[_EdgeRef, FsmAst]]] = {}
    for arm in ast.comb.arms:
        label = arm.label
        if label is None or label in protected or label not in reach:
            continue
        for ref in _enumerate_refs(ast, arm):
            trial = copy.deepcopy(ast)
            try:
                _extend_states(trial, [(name_a, enc_a), (name_b, enc_b)], arms={
                    name_a: [Assign(trial.state_next, name_b)],
                    name_b: [Assign(trial.state_next, name_a)],
                })
                _apply_redirect(trial, ref, name_a)
            except InjectError:
                continue
            if _flags_exactly(trial, protected, Rule.TRAP_LOOP_CWE835,
                              {name_a, name_b}, pre_existing):
                candidates.setdefault(label, []).append((ref, trial))
    if not candidates:
        raise InjectError("no eligible state/branch yields a clean trap loop")
    rng = random.Random(seed)
    state = rng.choice([l for l in (a.label for a in ast.comb.arms) if l in candidates])
    ref, injected = rng.choice(candidates[state])
    plan = InjectionPlan(
        vuln=VulnClass.CWE835_TRAP,
        seed=seed,
        target_state=state,
        added_states=(name_a, name_b),
        modified_spans=_plan_spans(injected, [f"param:{name_a}", f"param:{name_b}",
                                              f"arm:{state}", f"arm:{name_a}",
                                              f"arm:{name_b}"]),
        notes=f"redirected a {ref.kind} path of {state} into the {name_a}/{name_b} cycle",
    )
    return injected, plan


def plan_injection(vuln: VulnClass, ast: FsmAst, seed: int,
                   protected: frozenset[str] = frozenset()
                   ) -> tuple[FsmAst, InjectionPlan]:
    """Dispatch to the class-specific injection."""
    if vuln is VulnClass.STATIC_DEADLOCK:
        return inject_static_deadlock(ast, seed, protected)
    if vuln is VulnClass.DUPLICATE_ENCODING:
        return inject_duplicate_encoding(ast, seed, protected)
    if vuln is VulnClass.UNREACHABLE_STATE:
        return inject_unreachable_state(ast, seed, protected)
    if vuln is VulnClass.MISSING_DEFAULT:
        injected, plan = remove_default_arm(ast)
        return injected, replace(plan, seed=seed)
    if vuln is VulnClass.CWE835_TRAP:
        return inject_trap_loop(ast, seed, protected)
    raise InjectError(f"unknown vulnerability class {vuln!r}")
