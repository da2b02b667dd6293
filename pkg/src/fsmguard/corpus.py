"""Labeled corpus generation and oracle-based fidelity checking.

Corpus files are JSONL: one record per line, design text embedded as an
escaped string, every object schema-versioned.  Record seeds derive from the
master seed and record index, so generation order (and worker count) never
changes the output.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .ast_nodes import FsmAst
from .emitter import emit_verilog
from .inject import RULE_FOR_CLASS, InjectError, InjectionPlan, VulnClass, plan_injection
from .parser import parse_source
from .rules import Rule, RuleConfig, RuleViolation, run_all_checks
from .source import SourceText

SCHEMA_VERSION = 1


class CorpusError(ValueError):
    pass


def derive_seed(master_seed: int, index: int, tag: str = "") -> int:
    digest = hashlib.sha256(f"{master_seed}:{tag}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    base_id: str
    source: str
    vuln: Optional[VulnClass]
    plan: Optional[InjectionPlan]
    protected: tuple[str, ...]
    seed: int
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        clean = self.vuln is None
        if clean != (self.plan is None) or clean != (not self.labels):
            raise CorpusError("vuln, plan, and labels must be all set or all empty")

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "base_id": self.base_id,
            "source": self.source,
            "vuln": self.vuln.value if self.vuln else None,
            "plan": self.plan.to_json() if self.plan else None,
            "protected": sorted(self.protected),
            "seed": self.seed,
            "labels": list(self.labels),
        }

    @classmethod
    def from_json(cls, data: dict) -> "CorpusRecord":
        from .inject import InjectionPlan as IP
        from .source import Span
        plan = None
        if data.get("plan"):
            p = data["plan"]
            plan = IP(
                vuln=VulnClass(p["vuln"]),
                seed=p["seed"],
                target_state=p["target_state"],
                added_states=tuple(p["added_states"]),
                modified_spans=tuple(Span(a, b) for a, b in p["modified_spans"]),
                notes=p.get("notes", ""),
            )
        return cls(
            id=data["id"],
            base_id=data["base_id"],
            source=data["source"],
            vuln=VulnClass(data["vuln"]) if data.get("vuln") else None,
            plan=plan,
            protected=tuple(data.get("protected", ())),
            seed=data["seed"],
            labels=tuple(data.get("labels", ())),
        )


@dataclass(frozen=True)
class FidelityVerdict:
    """Oracle judgment of one produced design against its intent."""

    syntax_ok: bool
    intended_present: bool
    unintended: tuple[RuleViolation, ...]
    interface_ok: bool
    stg_ok: Optional[bool] = None
    notes: str = ""

    @property
    def overall(self) -> bool:
        return (self.syntax_ok and self.intended_present
                and not self.unintended and self.interface_ok)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "syntax_ok": self.syntax_ok,
            "intended_present": self.intended_present,
            "unintended": [v.to_json() for v in self.unintended],
            "interface_ok": self.interface_ok,
            "stg_ok": self.stg_ok,
            "overall": self.overall,
            "notes": self.notes,
        }


def _interface_matches(a: FsmAst, b: FsmAst) -> bool:
    return a.interface_key() == b.interface_key()


def verify_insertion(original: SourceText, modified: SourceText,
                     intended: VulnClass,
                     protected: frozenset[str] = frozenset(),
                     config: RuleConfig = RuleConfig()) -> FidelityVerdict:
    """Does the modified design contain exactly the intended defect?

    syntax via the frontend; the intended class via its matching rule;
    unintended findings are violations of other rules absent from the
    original; the interface must be byte-compatible (ports, module name,
    clock and reset).
    """
    orig_result = parse_source(original)
    orig_ast = orig_result.expect_ast()
    mod_result = parse_source(modified)
    if mod_result.ast is None:
        return FidelityVerdict(False, False, (), False,
                               notes="modified design does not parse")
    target_rule = RULE_FOR_CLASS[intended]
    orig_report = run_all_checks(original, protected, config)
    mod_report = run_all_checks(modified, protected, config)
    intended_present = target_rule in mod_report.violated_rules
    pre_existing = orig_report.violated_rules
    unintended = tuple(v for v in mod_report.violations
                       if v.rule != target_rule and v.rule not in pre_existing)
    return FidelityVerdict(
        syntax_ok=True,
        intended_present=intended_present,
        unintended=unintended,
        interface_ok=_interface_matches(orig_ast, mod_result.ast),
    )


def verify_mitigation(original: SourceText, mitigated: SourceText,
                      target_rules: Iterable[Rule],
                      protected: frozenset[str] = frozenset(),
                      config: RuleConfig = RuleConfig()) -> FidelityVerdict:
    """Did mitigation clear every target rule without collateral damage?

    stg_ok reports whether the transition structure survived (it is
    meaningful for encoding-only fixes; default arms are outside the
    comparison).
    """
    from .stg import extract_stg, stg_isomorphic_modulo_encoding

    orig_result = parse_source(original)
    orig_ast = orig_result.expect_ast()
    targets = set(target_rules)
    orig_report = run_all_checks(original, protected, config)
    missing = targets - orig_report.violated_rules
    if missing:
        raise CorpusError(
            "target rules not violated by the original: "
            + ", ".join(r.value for r in sorted(missing, key=lambda r: r.value)))
    mit_result = parse_source(mitigated)
    if mit_result.ast is None:
        return FidelityVerdict(False, False, (), False,
                               notes="mitigated design does not parse")
    mit_report = run_all_checks(mitigated, protected, config)
    cleared = not (targets & mit_report.violated_rules)
    new_rules = mit_report.violated_rules - orig_report.violated_rules
    unintended = tuple(v for v in mit_report.violations if v.rule in new_rules)
    stg_ok = None
    try:
        stg_ok = stg_isomorphic_modulo_encoding(
            extract_stg(orig_ast, protected), extract_stg(mit_result.ast, protected))
    except Exception:
        stg_ok = False
    return FidelityVerdict(
        syntax_ok=True,
        intended_present=cleared,
        unintended=unintended,
        interface_ok=_interface_matches(orig_ast, mit_result.ast),
        stg_ok=stg_ok,
    )


# -- generation ----------------------------------------------------------------

@dataclass
class CorpusSpec:
    bases: Sequence[SourceText]
    mix: dict[VulnClass, int]
    master_seed: int
    protected: frozenset[str] = frozenset()
    clean_ratio: float = 1.0
    config: RuleConfig = field(default_factory=RuleConfig)


def _make_record(spec: CorpusSpec, vuln: VulnClass, index: int,
                 bases: Sequence[tuple[SourceText, FsmAst]]) -> CorpusRecord:
    seed = derive_seed(spec.master_seed, index, vuln.value)
    errors = []
    for offset in range(len(bases)):
        base_src, base_ast = bases[(index + offset) % len(bases)]
        try:
            injected_ast, plan = plan_injection(vuln, base_ast, seed, spec.protected)
        except InjectError as exc:
            errors.append(f"{base_src.origin}: {exc}")
            continue
        text = emit_verilog(injected_ast)
        verdict = verify_insertion(base_src, text, vuln, spec.protected, spec.config)
        if not verdict.overall:
            errors.append(f"{base_src.origin}: fidelity gate failed")
            continue
        labels = tuple(sorted({v.rule.value for v in
                               run_all_checks(text, spec.protected, spec.config).violations}))
        return CorpusRecord(
            id=f"{vuln.value.lower()}-{index:05d}",
            base_id=base_src.origin,
            source=text.content,
            vuln=vuln,
            plan=plan,
            protected=tuple(sorted(spec.protected)),
            seed=seed,
            labels=labels,
        )
    raise CorpusError(
        f"mix unsatisfiable for class {vuln.value}: " + "; ".join(errors))


def generate_corpus(bases: Sequence[SourceText], mix: dict[VulnClass, int],
                    master_seed: int, protected: frozenset[str] = frozenset(),
                    clean_ratio: float = 1.0,
                    config: RuleConfig = RuleConfig(),
                    workers: int = 1) -> list[CorpusRecord]:
    """Deterministic labeled corpus: seeded injections gated by the fidelity
    oracle, interleaved with clean records at the configured ratio."""
    if not bases:
        raise CorpusError("no base designs")
    spec = CorpusSpec(bases=bases, mix=dict(mix), master_seed=master_seed,
                      protected=protected, clean_ratio=clean_ratio, config=config)
    parsed: list[tuple[SourceText, FsmAst]] = []
    for src in bases:
        ast = parse_source(src).expect_ast()
        base_report = run_all_checks(src, protected, config)
        if base_report.violations:
            raise CorpusError(
                f"base design {src.origin} is not clean: "
                + ", ".join(v.rule.value for v in base_report.violations))
        parsed.append((src, ast))

    jobs = [(vuln, i) for vuln in sorted(spec.mix, key=lambda v: v.value)
            for i in range(spec.mix[vuln])]

    def work(job: tuple[VulnClass, int]) -> CorpusRecord:
        vuln, i = job
        return _make_record(spec, vuln, i, parsed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            buggy = list(pool.map(work, jobs))
    else:
        buggy = [work(j) for j in jobs]

    records: list[CorpusRecord] = []
    clean_due = 0.0
    clean_index = 0
    for record in buggy:
        records.append(record)
        clean_due += spec.clean_ratio
        while clean_due >= 1.0:
            base_src, _ = parsed[clean_index % len(parsed)]
            records.append(CorpusRecord(
                id=f"clean-{clean_index:05d}",
                base_id=base_src.origin,
                source=base_src.content,
                vuln=None,
                plan=None,
                protected=tuple(sorted(protected)),
                seed=derive_seed(master_seed, clean_index, "clean"),
                labels=(),
            ))
            clean_index += 1
            clean_due -= 1.0
    return records


def write_corpus(records: Iterable[CorpusRecord], path: str | Path) -> None:
    """Atomic JSONL write (temp file, then rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), sort_keys=False) + "\n")
    tmp.replace(path)


def read_corpus(path: str | Path) -> list[CorpusRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(CorpusRecord.from_json(json.loads(line)))
    return records
