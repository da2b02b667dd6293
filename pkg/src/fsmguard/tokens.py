"""Tokenizer for the restricted synthesizable Verilog FSM subset."""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum, auto

from .source import Diagnostic, SourceText, Span, error


class TokKind(Enum):
    KW = auto()
    IDENT = auto()
    NUMBER = auto()       # bare decimal: 0, 1, 193
    SIZED = auto()        # sized literal: 3'b000, 4'b1010
    OP = auto()
    COMMENT = auto()      # trivia, kept out of the main stream
    EOF = auto()


KEYWORDS = frozenset({
    "module", "endmodule", "input", "output", "inout", "wire", "reg",
    "parameter", "localparam", "always", "begin", "end", "if", "else",
    "case", "endcase", "default", "posedge", "negedge", "or", "assign",
})

# SystemVerilog (and out-of-subset Verilog) constructs are rejected at parse
# time rather than silently accepted.
UNSUPPORTED_KEYWORDS = frozenset({
    "always_ff", "always_comb", "always_latch", "logic", "bit", "typedef",
    "enum", "struct", "union", "interface", "endinterface", "unique",
    "priority", "casex", "casez", "function", "endfunction", "task",
    "endtask", "generate", "endgenerate", "initial", "forever", "while",
    "for", "repeat",
})

_TWO_CHAR_OPS = ("<=", ">=", "==", "!=", "&&", "||", "<<", ">>")
_ONE_CHAR_OPS = set("@()[]{},;:=*!~&|^<>+-?/#.%$")

_SIZED_RE = re.compile(r"(\d+)\s*'\s*([bBdDhHoO])([0-9a-fA-FxzXZ_]+)")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*")
_NUM_RE = re.compile(r"\d+")


@dataclass(frozen=True)
class Token:
    kind: TokKind
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span.point(self.line)

    def is_kw(self, *words: str) -> bool:
        return self.kind is TokKind.KW and self.text in words

    def is_op(self, text: str) -> bool:
        return self.kind is TokKind.OP and self.text == text


@dataclass
class Lexed:
    tokens: list[Token]
    trivia: list[Token]
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return not any(d.is_error for d in self.diagnostics)


def tokenize(src: SourceText) -> Lexed:
    """Split source into tokens; comments are preserved as trivia."""
    tokens: list[Token] = []
    trivia: list[Token] = []
    diagnostics: list[Diagnostic] = []
    text = src.content
    pos, line, col = 0, 1, 1
    n = len(text)

    def advance(count: int) -> None:
        nonlocal pos, line, col
        for _ in range(count):
            if text[pos] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            pos += 1

    while pos < n:
        ch = text[pos]
        if ch in " \t\r\n":
            advance(1)
            continue
        if text.startswith("//", pos):
            end = text.find("\n", pos)
            end = n if end == -1 else end
            trivia.append(Token(TokKind.COMMENT, text[pos:end], line, col))
            advance(end - pos)
            continue
        if text.startswith("/*", pos):
            end = text.find("*/", pos)
            if end == -1:
                diagnostics.append(error("E_COMMENT", "unterminated block comment", Span.point(line)))
                break
            trivia.append(Token(TokKind.COMMENT, text[pos:end + 2], line, col))
            advance(end + 2 - pos)
            continue
        m = _SIZED_RE.match(text, pos)
        if m:
            tokens.append(Token(TokKind.SIZED, m.group(0), line, col))
            advance(m.end() - pos)
            continue
        m = _IDENT_RE.match(text, pos)
        if m:
            word = m.group(0)
            kind = TokKind.KW if (word in KEYWORDS or word in UNSUPPORTED_KEYWORDS) else TokKind.IDENT
            tokens.append(Token(kind, word, line, col))
            advance(len(word))
            continue
        m = _NUM_RE.match(text, pos)
        if m:
            tokens.append(Token(TokKind.NUMBER, m.group(0), line, col))
            advance(m.end() - pos)
            continue
        two = text[pos:pos + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token(TokKind.OP, two, line, col))
            advance(2)
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token(TokKind.OP, ch, line, col))
            advance(1)
            continue
        diagnostics.append(error("E_CHAR", f"illegal character {ch!r}", Span.point(line)))
        advance(1)

    tokens.append(Token(TokKind.EOF, "", line, col))
    return Lexed(tokens=tokens, trivia=trivia, diagnostics=diagnostics)


def parse_sized_literal(text: str) -> tuple[int, str, str]:
    """Break a sized literal into (width, base, digits)."""
    m = _SIZED_RE.fullmatch(text)
    if not m:
        raise ValueError(f"not a sized literal: {text!r}")
    return int(m.group(1)), m.group(2).lower(), m.group(3).replace("_", "")
