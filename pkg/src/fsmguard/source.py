"""Source text, line spans, and diagnostics shared by every analysis stage."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path


@dataclass(frozen=True)
class SourceText:
    """A design payload plus a label saying where it came from."""

    content: str
    origin: str = "<memory>"

    def __post_init__(self) -> None:
        if not self.content:
            raise ValueError("empty source text")

    @classmethod
    def from_file(cls, path: str | Path) -> "SourceText":
        p = Path(path)
        return cls(content=p.read_text(encoding="utf-8"), origin=str(p))

    @property
    def lines(self) -> list[str]:
        return self.content.splitlines()

    @property
    def line_count(self) -> int:
        return max(1, len(self.lines))


@dataclass(frozen=True, order=True)
class Span:
    """Inclusive 1-based line range."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 1 or self.end < self.start:
            raise ValueError(f"bad span {self.start}..{self.end}")

    @classmethod
    def point(cls, line: int) -> "Span":
        return cls(line, line)

    def contains_line(self, line: int) -> bool:
        return self.start <= line <= self.end

    def to_json(self) -> list[int]:
        return [self.start, self.end]


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    span: Span

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def to_json(self) -> dict:
        return {
            "severity": self.severity.value,
            "code": self.code,
            "message": self.message,
            "span": self.span.to_json(),
        }

    def __str__(self) -> str:
        return f"{self.severity.value}[{self.code}] line {self.span.start}: {self.message}"


def error(code: str, message: str, span: Span) -> Diagnostic:
    return Diagnostic(Severity.ERROR, code, message, span)


def warning(code: str, message: str, span: Span) -> Diagnostic:
    return Diagnostic(Severity.WARNING, code, message, span)
