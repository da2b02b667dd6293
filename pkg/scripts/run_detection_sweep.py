#!/usr/bin/env python3
"""Temperature-sweep detection experiment against a scripted provider.

Generates a deadlock corpus (buggy and clean interleaved 1:1), runs the
policy-check pipeline at every temperature grid point with a mock provider
that always answers "violated", scores predictions against the corpus
labels, and prints the per-temperature accuracy series.  Swap the mock for a
real provider config to run the same flow live.
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fsmguard import Rule, SourceText, VulnClass, generate_corpus
from fsmguard.llm import MockProvider
from fsmguard.llm.pipeline import policy_check_pipeline, sweep_params
from fsmguard.llm.params import temperature_grid
from fsmguard.report import OutcomeRecord, Provenance, compute_metrics

DESIGNS = Path(__file__).resolve().parent.parent / "designs"
BASES = ("vending", "aes_ctrl_default", "rsa_ctrl")
ALWAYS_VIOLATED = "Policy 1: Violated, explanation: deadlock suspected, line no: 1"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=10, help="buggy records")
    ap.add_argument("--seed", type=int, default=99)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    bases = [SourceText.from_file(DESIGNS / f"{name}.v") for name in BASES]
    records = generate_corpus(bases, {VulnClass.STATIC_DEADLOCK: args.count},
                              args.seed, clean_ratio=1.0)
    designs = [SourceText(r.source, origin=r.id) for r in records]
    labels = {r.id: Rule.STATIC_DEADLOCK.value in r.labels for r in records}

    spec = policy_check_pipeline(["A state with a static deadlock scenario "
                                  "must not exist."])
    grid = temperature_grid()
    results = sweep_params(spec, designs, grid,
                           lambda: MockProvider([ALWAYS_VIOLATED]))

    outcomes = []
    for (design_id, gi), transcript in results.items():
        if transcript.failed or transcript.final is None:
            continue
        predicted = any(v["violated"] for v in transcript.final["verdicts"])
        outcomes.append(OutcomeRecord(
            task="detection",
            label="static_deadlock",
            success=predicted == labels[design_id],
            temperature=grid[gi].temperature,
        ))

    report = compute_metrics(outcomes, Provenance(seeds=(args.seed,),
                                                  provider="mock"))
    print(f"{'temperature':>11s} {'inputs':>7s} {'accurate':>9s} {'accuracy %':>11s}")
    for point in report.sweep:
        print(f"{point.temperature:11.1f} {point.inputs:7d} "
              f"{point.successes:9d} {point.rate:11.2f}")
    if args.out:
        Path(args.out).write_text(report.to_json_text(), encoding="utf-8")
        print(f"report written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
