"""Multi-step prompt pipelines: declarative specs, execution, transcripts,
and parameter sweeps."""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

from ..source import SourceText
from .params import GenerationParams, temperature_grid
from .parsing import (
    ResponseParseError,
    parse_delimited_code,
    parse_fif_results,
    parse_policy_verdicts,
)
from .providers import ChatProvider, CompletionResult, ProviderError, RetryPolicy, chat_complete
from .templates import (
    CaptureRule,
    DEADLOCK_EXAMPLE,
    PromptTemplate,
    SELF_REVIEW,
    TEMPLATES,
    TemplateError,
    render_prompt,
)


class PipelineError(ValueError):
    pass


class PayloadTooLarge(PipelineError):
    """Raised before sending when a rendered prompt exceeds the character
    budget; callers should provide a module-level region instead."""


@dataclass(frozen=True)
class PipelineStep:
    name: str
    template: PromptTemplate
    bindings: dict[str, str] = field(default_factory=dict)
    captures: tuple[CaptureRule, ...] = ()
    params: GenerationParams = GenerationParams()
    code_delimiters: tuple[str, str] = ("[code:", "]")
    policy_count: int = 0


@dataclass(frozen=True)
class PipelineSpec:
    name: str
    steps: tuple[PipelineStep, ...]
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    self_scrutiny: bool = False
    char_budget: int = 24000

    def __post_init__(self) -> None:
        known: set[str] = set()
        for step in self.steps:
            for ph in step.template.placeholders():
                if ph.startswith("capture:"):
                    ref = ph.split(":", 1)[1]
                    if ref not in known:
                        raise PipelineError(
                            f"step {step.name} references unknown capture {ref}")
            known.update(f"{step.name}.{c.name}" for c in step.captures)


@dataclass
class StepRecord:
    name: str
    rendered_prompt: str
    raw_response: str
    captures: dict[str, str]
    attempts: int
    elapsed: float

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "rendered_prompt": self.rendered_prompt,
            "raw_response": self.raw_response,
            "captures": self.captures,
            "attempts": self.attempts,
            "elapsed": self.elapsed,
        }


@dataclass
class Transcript:
    pipeline: str
    design_id: str
    provider_id: str
    steps: list[StepRecord] = field(default_factory=list)
    final: Optional[dict] = None
    failed: bool = False
    failed_step: Optional[str] = None
    failure_reason: str = ""

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "pipeline": self.pipeline,
            "design_id": self.design_id,
            "provider_id": self.provider_id,
            "steps": [s.to_json() for s in self.steps],
            "final": self.final,
            "failed": self.failed,
            "failed_step": self.failed_step,
            "failure_reason": self.failure_reason,
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json(), sort_keys=False)


def _final_artifact(step: PipelineStep, response: str) -> dict:
    kind = step.template.expected_output
    if kind == "code":
        open_d, close_d = step.code_delimiters
        code = parse_delimited_code(response, open_d, close_d)
        inner = code.content
        if inner.startswith("<") and inner.endswith(">"):
            inner = inner[1:-1].strip()
        return {"kind": "code", "text": inner}
    if kind == "policy_verdicts":
        verdicts = parse_policy_verdicts(response, step.policy_count)
        return {"kind": "verdicts", "verdicts": [v.to_json() for v in verdicts]}
    if kind == "table":
        results = parse_fif_results(response)
        return {"kind": "fif",
                "results": [{"source": r.source, "target": r.target,
                             "overall": r.overall} for r in results]}
    return {"kind": "text", "text": response}


def run_pipeline(spec: PipelineSpec, design: SourceText,
                 provider: ChatProvider) -> Transcript:
    """Execute steps in order; each step's captures become bindings for the
    later ones.  Malformed captures retry the step up to the policy limit,
    then fail the transcript at that step."""
    transcript = Transcript(pipeline=spec.name, design_id=design.origin,
                            provider_id=getattr(provider, "provider_id", "unknown"))
    captured: dict[str, str] = {}
    steps = list(spec.steps)
    if spec.self_scrutiny:
        last = steps[-1]
        steps.append(PipelineStep(
            name="self_review",
            template=SELF_REVIEW,
            params=last.params,
            code_delimiters=last.code_delimiters,
        ))

    for step in steps:
        bindings = dict(step.bindings)
        bindings["design"] = design.content
        for key, value in captured.items():
            bindings[f"capture:{key}"] = value
        template_bindings = {}
        for ph in step.template.placeholders():
            if ph == "design":
                template_bindings["design"] = bindings["design"]
            elif ph.startswith("capture:"):
                ref = ph.split(":", 1)[1]
                if f"capture:{ref}" not in bindings:
                    transcript.failed = True
                    transcript.failed_step = step.name
                    transcript.failure_reason = f"unbound capture {ref}"
                    return transcript
                template_bindings[ph] = bindings[f"capture:{ref}"]
            elif ph.startswith("literal:"):
                key = ph.split(":", 1)[1]
                if key not in step.bindings:
                    transcript.failed = True
                    transcript.failed_step = step.name
                    transcript.failure_reason = f"unbound literal {key}"
                    return transcript
                template_bindings[ph] = step.bindings[key]

        try:
            prompt = render_prompt(step.template, template_bindings)
        except TemplateError as exc:
            transcript.failed = True
            transcript.failed_step = step.name
            transcript.failure_reason = str(exc)
            return transcript
        if len(prompt) > spec.char_budget:
            raise PayloadTooLarge(
                f"rendered prompt for step {step.name} is {len(prompt)} chars, "
                f"over the {spec.char_budget} budget; provide a module-level "
                "region of interest instead of the whole design")

        record = _run_step(spec, step, prompt, provider)
        transcript.steps.append(record)
        if record.attempts < 0:
            transcript.failed = True
            transcript.failed_step = step.name
            transcript.failure_reason = record.raw_response or "provider failure"
            record.attempts = spec.retry.max_attempts
            return transcript
        for name, value in record.captures.items():
            captured[f"{step.name}.{name}"] = value

    last_step = steps[-1]
    try:
        transcript.final = _final_artifact(last_step, transcript.steps[-1].raw_response)
    except ResponseParseError as exc:
        transcript.failed = True
        transcript.failed_step = last_step.name
        transcript.failure_reason = f"final artifact: {exc}"
    return transcript


def _run_step(spec: PipelineSpec, step: PipelineStep, prompt: str,
              provider: ChatProvider) -> StepRecord:
    start = time.monotonic()
    messages = [{"role": "user", "content": prompt}]
    attempts_total = 0
    last_reason = ""
    for _ in range(spec.retry.max_attempts):
        try:
            result: CompletionResult = chat_complete(
                provider, messages, step.params,
                RetryPolicy(max_attempts=spec.retry.max_attempts,
                            base_delay=spec.retry.base_delay,
                            multiplier=spec.retry.multiplier,
                            max_delay=spec.retry.max_delay,
                            jitter=spec.retry.jitter,
                            sleep_fn=spec.retry.sleep_fn,
                            rng=spec.retry.rng))
        except ProviderError as exc:
            return StepRecord(step.name, prompt, str(exc), {}, -1,
                              time.monotonic() - start)
        attempts_total += result.attempts
        try:
            captures = {rule.name: rule.apply(result.text) for rule in step.captures}
            return StepRecord(step.name, prompt, result.text, captures,
                              attempts_total, time.monotonic() - start)
        except (TemplateError, ResponseParseError) as exc:
            last_reason = str(exc)
            continue
    record = StepRecord(step.name, prompt, f"malformed capture: {last_reason}",
                        {}, -1, time.monotonic() - start)
    return record


ProviderFactory = Union[ChatProvider, Callable[[], ChatProvider]]


def _provider_for(factory: ProviderFactory) -> ChatProvider:
    return factory() if callable(factory) else factory


def run_batch(spec: PipelineSpec, designs: Sequence[SourceText],
              provider: ProviderFactory, in_flight: int = 4) -> dict[str, Transcript]:
    """Run one pipeline across many designs, bounded-concurrently; results
    keyed by design origin."""
    def task(design: SourceText) -> tuple[str, Transcript]:
        return design.origin, run_pipeline(spec, design, _provider_for(provider))

    results: dict[str, Transcript] = {}
    with ThreadPoolExecutor(max_workers=max(1, in_flight)) as pool:
        for origin, transcript in pool.map(task, designs):
            results[origin] = transcript
    return dict(sorted(results.items()))


def sweep_params(spec: PipelineSpec, designs: Sequence[SourceText],
                 grid: Sequence[GenerationParams], provider: ProviderFactory,
                 in_flight: int = 4) -> dict[tuple[str, int], Transcript]:
    """Run the pipeline at every grid point for every design; results keyed
    by (design origin, grid index)."""
    if not grid:
        raise PipelineError("sweep needs a non-empty parameter grid")

    jobs = [(design, gi) for design in designs for gi in range(len(grid))]

    def task(job: tuple[SourceText, int]) -> tuple[tuple[str, int], Transcript]:
        design, gi = job
        point = grid[gi]
        pointed = replace(spec, steps=tuple(
            replace(step, params=replace(step.params,
                                         temperature=point.temperature,
                                         top_p=point.top_p,
                                         presence_penalty=point.presence_penalty,
                                         frequency_penalty=point.frequency_penalty,
                                         max_tokens=point.max_tokens))
            for step in spec.steps))
        transcript = run_pipeline(pointed, design, _provider_for(provider))
        return (design.origin, gi), transcript

    results: dict[tuple[str, int], Transcript] = {}
    with ThreadPoolExecutor(max_workers=max(1, in_flight)) as pool:
        for key, transcript in pool.map(task, jobs):
            results[key] = transcript
    return dict(sorted(results.items()))


# -- built-in pipelines ---------------------------------------------------------

def fif_pipeline(protected: str, params: GenerationParams = GenerationParams()) -> PipelineSpec:
    """Three chained steps: list unprotected transitions, tabulate their
    bits, compute per-transition FIF."""
    return PipelineSpec(
        name="fif",
        steps=(
            PipelineStep(
                name="transitions",
                template=TEMPLATES["fif_transitions"],
                bindings={"protected": protected},
                captures=(
                    CaptureRule("list", "pattern",
                                pattern=r"^.*state transition \d+:.*$", all_matches=True),
                    CaptureRule("protected", "pattern",
                                pattern=r"^.*protected_state.*$"),
                ),
                params=params,
            ),
            PipelineStep(
                name="bit_table",
                template=TEMPLATES["fif_bit_table"],
                captures=(CaptureRule("table", "pattern", pattern=r"^.*$",
                                      all_matches=True),),
                params=params,
            ),
            PipelineStep(
                name="compute",
                template=TEMPLATES["fif_compute"],
                captures=(CaptureRule("fif_table", "pattern", pattern=r"^.*$",
                                      all_matches=True),),
                params=params,
            ),
        ),
    )


def deadlock_insertion_pipeline(params: GenerationParams = GenerationParams(),
                                self_scrutiny: bool = False) -> PipelineSpec:
    return PipelineSpec(
        name="insert_deadlock",
        steps=(PipelineStep(
            name="insert",
            template=TEMPLATES["insert_deadlock"],
            bindings={"example": DEADLOCK_EXAMPLE},
            params=params,
        ),),
        self_scrutiny=self_scrutiny,
    )


def policy_check_pipeline(policies: Sequence[str],
                          params: GenerationParams = GenerationParams()) -> PipelineSpec:
    text = "\n".join(f"Policy {i + 1}. {p}" for i, p in enumerate(policies))
    return PipelineSpec(
        name="policy_check",
        steps=(PipelineStep(
            name="check",
            template=TEMPLATES["policy_check"],
            bindings={"policies": text},
            params=params,
            policy_count=len(policies),
        ),),
    )


def blind_review_pipeline(params: GenerationParams = GenerationParams()) -> PipelineSpec:
    return PipelineSpec(
        name="blind_review",
        steps=(PipelineStep(name="review", template=TEMPLATES["blind_review"],
                            params=params),),
    )


def mitigation_pipeline(protected: str, assessment: str,
                        params: GenerationParams = GenerationParams(),
                        self_scrutiny: bool = False) -> PipelineSpec:
    return PipelineSpec(
        name="mitigate_rules",
        steps=(PipelineStep(
            name="mitigate",
            template=TEMPLATES["mitigate_rules"],
            bindings={"protected": protected, "assessment": assessment},
            params=params,
        ),),
        self_scrutiny=self_scrutiny,
    )


PIPELINES: dict[str, Callable[..., PipelineSpec]] = {
    "fif": fif_pipeline,
    "insert-deadlock": deadlock_insertion_pipeline,
    "policy-check": policy_check_pipeline,
    "blind-review": blind_review_pipeline,
    "mitigate-rules": mitigation_pipeline,
}
