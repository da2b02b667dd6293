"""Structured extraction from raw LLM responses."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..source import SourceText


class ResponseParseError(ValueError):
    pass


_BRACKET_PAIRS = {"(": ")", "[": "]", "{": "}", "<": ">"}


def _find_matching(text: str, start: int, open_m: str, close_m: str) -> int:
    """Index of the close marker matching the open marker at start
    (nesting-aware when the markers differ).

    When the open marker begins with a bracket character whose pair is the
    close marker (e.g. "[code:" / "]"), nesting counts bare brackets, so
    bracketed payload content like bit ranges cannot end the block early.
    """
    if open_m == close_m:
        idx = text.find(close_m, start + len(open_m))
        if idx == -1:
            raise ResponseParseError(f"unbalanced markers {open_m!r}...{close_m!r}")
        return idx
    nest_open = open_m
    if len(close_m) == 1 and open_m and _BRACKET_PAIRS.get(open_m[0]) == close_m:
        nest_open = open_m[0]
    depth = 1
    pos = start + len(open_m)
    while depth:
        next_open = text.find(nest_open, pos)
        next_close = text.find(close_m, pos)
        if next_close == -1:
            raise ResponseParseError(f"unbalanced markers {open_m!r}...{close_m!r}")
        if next_open != -1 and next_open < next_close:
            depth += 1
            pos = next_open + len(nest_open)
        else:
            depth -= 1
            pos = next_close + len(close_m)
    return pos - len(close_m)


def parse_delimited_code(response: str, open_marker: str, close_marker: str) -> SourceText:
    """Innermost content between the first open marker and its matching
    close marker, whitespace-trimmed.  Nested marker pairs resolve
    innermost-first."""
    start = response.find(open_marker)
    if start == -1:
        raise ResponseParseError(f"marker {open_marker!r} absent from response")
    end = _find_matching(response, start, open_marker, close_marker)
    content = response[start + len(open_marker):end]
    inner_start = content.find(open_marker)
    if inner_start != -1 and close_marker in content[inner_start:]:
        return parse_delimited_code(content, open_marker, close_marker)
    stripped = content.strip()
    if not stripped:
        raise ResponseParseError("empty payload between markers")
    return SourceText(stripped, origin="<llm-response>")


@dataclass(frozen=True)
class PolicyVerdict:
    policy: int
    violated: bool
    explanation: str
    line: Optional[int] = None

    def to_json(self) -> dict:
        return {"policy": self.policy, "violated": self.violated,
                "explanation": self.explanation, "line": self.line}


_POLICY_RE = re.compile(
    r"^Policy\s+(\d+)\s*:\s*(not\s+violated|violated)\b[,.]?\s*(.*)$",
    re.IGNORECASE | re.MULTILINE,
)
_LINE_NO_RE = re.compile(r"line\s*no[.:]?\s*:?\s*(\d+)", re.IGNORECASE)


def parse_policy_verdicts(response: str, policy_count: int) -> list[PolicyVerdict]:
    """One verdict per policy in the mandated 'Policy #: violated or not'
    format; the first number of a 'line no' range is kept."""
    verdicts = []
    for m in _POLICY_RE.finditer(response):
        policy = int(m.group(1))
        violated = m.group(2).lower() == "violated"
        rest = m.group(3).strip()
        explanation = rest
        exp_match = re.search(r"explanation\s*:\s*(.*)", rest, re.IGNORECASE | re.DOTALL)
        if exp_match:
            explanation = exp_match.group(1).strip()
        line_match = _LINE_NO_RE.search(response[m.start():m.start() + len(m.group(0)) + 400])
        line = int(line_match.group(1)) if (violated and line_match) else None
        verdicts.append(PolicyVerdict(policy, violated, explanation, line))
    if len(verdicts) != policy_count:
        raise ResponseParseError(
            f"expected {policy_count} policy verdict(s), parsed {len(verdicts)}")
    return verdicts


_TRANSITION_RE = re.compile(
    r"state transition\s+(\d+)\s*:\s*(\w+)\s*\((\w+)\)\s*(?:->|→)\s*(\w+)\s*\((\w+)\)",
    re.IGNORECASE,
)
_PROTECTED_LINE_RE = re.compile(
    r"protected_state\s*:?\s*\(?\s*(\w+)\s*\(?\s*(\w*)\)?", re.IGNORECASE)


@dataclass(frozen=True)
class TransitionCapture:
    index: int
    source: str
    source_encoding: str
    target: str
    target_encoding: str


def parse_transition_list(text: str) -> list[TransitionCapture]:
    out = [TransitionCapture(int(m.group(1)), m.group(2), m.group(3),
                             m.group(4), m.group(5))
           for m in _TRANSITION_RE.finditer(text)]
    if not out:
        raise ResponseParseError("no state transitions found in response")
    return out


_OVERALL_RE = re.compile(r"Overall\s+FIF\s*=.*?=\s*([01])\s*$",
                         re.IGNORECASE | re.MULTILINE)
_FIF_HEADER_RE = re.compile(
    r"State transition\s+(\d+)\s*:\s*(\w+)\s*\((\w+)\)\s*(?:->|→)\s*(\w+)\s*\((\w+)\)",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class FifCapture:
    source: str
    target: str
    overall: int


def parse_fif_results(text: str) -> list[FifCapture]:
    """Per-transition overall FIF values from a tabular metric response."""
    headers = list(_FIF_HEADER_RE.finditer(text))
    if not headers:
        raise ResponseParseError("no per-transition FIF blocks found")
    results = []
    for i, head in enumerate(headers):
        block_end = headers[i + 1].start() if i + 1 < len(headers) else len(text)
        block = text[head.start():block_end]
        overall = _OVERALL_RE.search(block)
        if not overall:
            raise ResponseParseError(
                f"transition {head.group(2)} -> {head.group(4)}: no overall FIF value")
        results.append(FifCapture(head.group(2), head.group(4), int(overall.group(1))))
    return results
