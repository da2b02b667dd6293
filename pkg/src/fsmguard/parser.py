"""Recursive-descent parser for the FSM Verilog subset.

The accepted grammar is deliberately narrow: one module, scalar or vectored
ports, `parameter` state encodings as sized binary literals, one clocked
always block updating the state register, and one combinational always block
holding a single case statement over the current state.  `localparam` is
accepted and normalized to `parameter`.  SystemVerilog constructs are parse
errors, never silently accepted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .ast_nodes import (
    Assign,
    Branch,
    CaseArm,
    CombBlock,
    FsmAst,
    IfChain,
    ParamDecl,
    Port,
    SeqBlock,
    Stmt,
)
from .source import Diagnostic, SourceText, Span, error
from .tokens import (
    Lexed,
    TokKind,
    Token,
    UNSUPPORTED_KEYWORDS,
    parse_sized_literal,
    tokenize,
)

_PROTECTED_RE = re.compile(r"@protected\s+([A-Za-z_][A-Za-z0-9_$]*)")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*")

_NO_SPACE_BEFORE = {")", "]", ";", ",", ":"}
_NO_SPACE_AFTER = {"(", "[", "!", "~"}


def render_expr(tokens: list[Token]) -> str:
    """Join expression tokens into a normalized, re-parseable text form."""
    out: list[str] = []
    for tok in tokens:
        if out and tok.text not in _NO_SPACE_BEFORE and out[-1] not in _NO_SPACE_AFTER:
            out.append(" ")
        out.append(tok.text)
    return "".join(out)


def expr_identifiers(text: str) -> list[str]:
    return _IDENT_RE.findall(text)


@dataclass
class ParseResult:
    ast: FsmAst | None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.ast is not None and not self.errors

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.is_error]

    def expect_ast(self) -> FsmAst:
        if self.ast is None:
            msgs = "; ".join(str(d) for d in self.errors) or "parse failed"
            raise ParseFailure(msgs, self.diagnostics)
        return self.ast


class ParseFailure(Exception):
    def __init__(self, message: str, diagnostics: list[Diagnostic]):
        super().__init__(message)
        self.diagnostics = diagnostics


class _Abort(Exception):
    """Internal signal: parsing cannot continue meaningfully."""


class _Parser:
    def __init__(self, lexed: Lexed):
        self.toks = lexed.tokens
        self.trivia = lexed.trivia
        self.pos = 0
        self.diags: list[Diagnostic] = list(lexed.diagnostics)
        self.stray_semis: list[Span] = []
        self.localparam_spans: list[Span] = []
        self.ports: list[Port] = []
        self.port_order: list[str] = []          # names from a non-ANSI header
        self.params: list[ParamDecl] = []
        self.regs: dict[str, int] = {}           # name -> width
        self.seq_blocks: list[SeqBlock] = []
        self.comb_blocks: list[CombBlock] = []
        self.module_name = ""
        self.module_line = 1
        self._state_cur = ""
        self._state_next = ""

    # -- token plumbing --------------------------------------------------
    def peek(self, ahead: int = 0) -> Token:
        i = min(self.pos + ahead, len(self.toks) - 1)
        return self.toks[i]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind is not TokKind.EOF:
            self.pos += 1
        return tok

    def at_eof(self) -> bool:
        return self.peek().kind is TokKind.EOF

    def err(self, code: str, message: str, span: Span | None = None) -> None:
        self.diags.append(error(code, message, span or self.peek().span))

    def expect_op(self, text: str) -> Token:
        tok = self.peek()
        if tok.is_op(text):
            return self.next()
        self.err("E_SYNTAX", f"expected {text!r}, found {tok.text!r}")
        raise _Abort()

    def expect_kw(self, word: str) -> Token:
        tok = self.peek()
        if tok.is_kw(word):
            return self.next()
        self.err("E_SYNTAX", f"expected {word!r}, found {tok.text!r}")
        raise _Abort()

    def expect_ident(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind is TokKind.IDENT:
            return self.next()
        self.err("E_SYNTAX", f"expected {what}, found {tok.text!r}")
        raise _Abort()

    def skip_past_semi(self) -> None:
        while not self.at_eof():
            tok = self.next()
            if tok.is_op(";"):
                return

    def eat_stray_semis(self) -> None:
        while self.peek().is_op(";"):
            tok = self.next()
            self.stray_semis.append(tok.span)

    # -- module structure --------------------------------------------------
    def parse(self) -> FsmAst | None:
        try:
            self._reject_unsupported_keywords()
            self._parse_header()
            while not self.at_eof() and not self.peek().is_kw("endmodule"):
                self._parse_item()
            if self.peek().is_kw("endmodule"):
                self.next()
        except _Abort:
            pass
        return self._finalize()

    def _reject_unsupported_keywords(self) -> None:
        seen: set[str] = set()
        for tok in self.toks:
            if tok.kind is TokKind.KW and tok.text in UNSUPPORTED_KEYWORDS and tok.text not in seen:
                seen.add(tok.text)
                self.err("E_SV", f"construct {tok.text!r} is outside the supported subset", tok.span)
        if seen:
            raise _Abort()

    def _parse_header(self) -> None:
        self.expect_kw("module")
        name_tok = self.expect_ident("module name")
        self.module_name = name_tok.text
        self.module_line = name_tok.line
        if self.peek().is_op("("):
            self.next()
            if not self.peek().is_op(")"):
                if self.peek().is_kw("input", "output", "inout"):
                    self._parse_ansi_ports()
                else:
                    self._parse_port_name_list()
            self.expect_op(")")
        self.expect_op(";")

    def _parse_kinds(self) -> tuple[str, list[Token]]:
        kinds: list[Token] = []
        while self.peek().is_kw("wire", "reg"):
            kinds.append(self.next())
        kind = kinds[0].text if kinds else "wire"
        return kind, kinds

    def _parse_range(self) -> int:
        if not self.peek().is_op("["):
            return 1
        self.next()
        hi_tok = self.next()
        self.expect_op(":")
        lo_tok = self.next()
        self.expect_op("]")
        try:
            return abs(int(hi_tok.text) - int(lo_tok.text)) + 1
        except ValueError:
            self.err("E_SYNTAX", "non-numeric port range", hi_tok.span)
            return 1

    def _parse_ansi_ports(self) -> None:
        direction = None
        kind = "wire"
        width = 1
        while True:
            tok = self.peek()
            if tok.is_kw("input", "output", "inout"):
                direction = self.next().text
                kind, kind_toks = self._parse_kinds()
                if len({t.text for t in kind_toks}) > 1:
                    self.err("E_PORT_KIND",
                             f"conflicting net kinds for {self.peek().text}",
                             kind_toks[0].span)
                width = self._parse_range()
            if direction is None:
                self.err("E_SYNTAX", "port without a direction")
                raise _Abort()
            name = self.expect_ident("port name")
            self.ports.append(Port(name.text, direction, kind, width, name.span))
            if self.peek().is_op(","):
                self.next()
                continue
            return

    def _parse_port_name_list(self) -> None:
        while True:
            name = self.expect_ident("port name")
            self.port_order.append(name.text)
            if self.peek().is_op(","):
                self.next()
                continue
            return

    def _parse_item(self) -> None:
        tok = self.peek()
        if tok.is_kw("input", "output", "inout"):
            self._parse_port_decl()
        elif tok.is_kw("parameter", "localparam"):
            self._parse_param_decl()
        elif tok.is_kw("reg"):
            self._parse_reg_decl()
        elif tok.is_kw("wire"):
            self.err("E_SYNTAX", "wire declarations are not part of the FSM subset", tok.span)
            self.skip_past_semi()
        elif tok.is_kw("always"):
            self._parse_always()
        elif tok.is_op(";"):
            self.eat_stray_semis()
        else:
            self.err("E_SYNTAX", f"unexpected {tok.text!r} at module level", tok.span)
            self.next()

    def _parse_port_decl(self) -> None:
        direction = self.next().text
        kind, kind_toks = self._parse_kinds()
        width = self._parse_range()
        names: list[Token] = [self.expect_ident("port name")]
        if len({t.text for t in kind_toks}) > 1:
            self.err("E_PORT_KIND", f"conflicting net kinds for {names[0].text}",
                     kind_toks[0].span)
        while self.peek().is_op(","):
            self.next()
            names.append(self.expect_ident("port name"))
        self.expect_op(";")
        for name in names:
            existing = next((p for p in self.ports if p.name == name.text), None)
            if existing is not None:
                existing.direction = direction
                existing.kind = kind
                existing.width = width
            else:
                self.ports.append(Port(name.text, direction, kind, width, name.span))

    def _parse_param_decl(self) -> None:
        head = self.next()
        if head.text == "localparam":
            self.localparam_spans.append(head.span)
        while True:
            name = self.expect_ident("parameter name")
            self.expect_op("=")
            value = self.next()
            if value.kind is TokKind.SIZED:
                width, base, digits = parse_sized_literal(value.text)
                if base != "b" or any(c not in "01" for c in digits):
                    self.err("E_ENCODING",
                             f"state encoding for {name.text} must be a sized binary literal",
                             value.span)
                    digits = digits.zfill(width)[:width]
                bits = digits.zfill(width)[-width:]
                self.params.append(ParamDecl(name.text, width, bits, name.span,
                                             was_localparam=head.text == "localparam"))
            else:
                self.err("E_ENCODING", f"unsized state literal for {name.text}", value.span)
            if self.peek().is_op(","):
                self.next()
                continue
            break
        self.expect_op(";")

    def _parse_reg_decl(self) -> None:
        self.next()
        width = self._parse_range()
        names = [self.expect_ident("register name")]
        while self.peek().is_op(","):
            self.next()
            names.append(self.expect_ident("register name"))
        self.expect_op(";")
        for name in names:
            port = next((p for p in self.ports if p.name == name.text), None)
            if port is not None:
                port.kind = "reg"
            else:
                self.regs[name.text] = width

    # -- always blocks ---------------------------------------------------
    def _parse_always(self) -> None:
        start = self.next()
        self.expect_op("@")
        star, edges, names = self._parse_sensitivity()
        if edges:
            self._parse_seq_body(start, edges)
        else:
            self._parse_comb_body(start, star, names)

    def _parse_sensitivity(self) -> tuple[bool, list[tuple[str, str]], list[str]]:
        """Returns (is_star, [(edge, signal)], [plain signals])."""
        if self.peek().is_op("*"):
            self.next()
            return True, [], []
        self.expect_op("(")
        if self.peek().is_op("*"):
            self.next()
            self.expect_op(")")
            return True, [], []
        edges: list[tuple[str, str]] = []
        names: list[str] = []
        while True:
            tok = self.peek()
            if tok.is_kw("posedge", "negedge"):
                edge = self.next().text
                sig = self.expect_ident("edge signal")
                edges.append((edge, sig.text))
            else:
                sig = self.expect_ident("sensitivity signal")
                names.append(sig.text)
            if self.peek().is_op(",") or self.peek().is_kw("or"):
                self.next()
                continue
            break
        self.expect_op(")")
        return False, edges, names

    def _parse_seq_body(self, start: Token, edges: list[tuple[str, str]]) -> None:
        body = self._parse_stmt_block(context="seq")
        end_line = self.toks[self.pos - 1].line
        block = self._shape_seq(start, edges, body)
        if block is not None:
            block.span = Span(start.line, max(start.line, end_line))
            self.seq_blocks.append(block)

    def _shape_seq(self, start: Token, edges, body: list[Stmt]) -> SeqBlock | None:
        span = start.span
        if len(body) != 1 or not isinstance(body[0], IfChain):
            self.err("E_SEQ_SHAPE", "sequential block must be a single if/else on reset", span)
            return None
        chain = body[0]
        if len(chain.branches) != 2 or chain.branches[-1].guard is not None:
            self.err("E_SEQ_SHAPE", "sequential block needs a reset branch and an else branch", span)
            return None
        reset_cond = chain.branches[0].guard or ""
        reset_assigns = [s for s in chain.branches[0].body if isinstance(s, Assign)]
        hold_assigns = [s for s in chain.branches[1].body if isinstance(s, Assign)]
        if len(reset_assigns) != 1 or len(hold_assigns) != 1:
            self.err("E_SEQ_SHAPE", "sequential branches must each hold one state assignment", span)
            return None
        cur = reset_assigns[0].lhs
        if hold_assigns[0].lhs != cur:
            self.err("E_SEQ_SHAPE", "reset and hold branches update different registers", span)
            return None
        if any(edge != "posedge" for edge, _ in edges):
            self.err("E_SEQ_SHAPE", "only posedge clocking is in the supported subset", span)
            return None
        cond_idents = set(expr_identifiers(reset_cond))
        if len(edges) > 1:
            reset_sigs = [sig for _, sig in edges if sig in cond_idents]
            clock_sigs = [sig for _, sig in edges if sig not in cond_idents]
            if len(edges) != 2 or not reset_sigs or not clock_sigs:
                self.err("E_SEQ_SHAPE", "cannot tell clock from reset in the sensitivity list", span)
                return None
            clock, reset, is_async = clock_sigs[0], reset_sigs[0], True
        else:
            clock = edges[0][1]
            idents = sorted(cond_idents)
            if not idents:
                self.err("E_SEQ_SHAPE", "reset condition references no signal", span)
                return None
            reset, is_async = idents[0], False
        self._state_cur = cur
        self._state_next = hold_assigns[0].rhs
        return SeqBlock(clock, reset, is_async, reset_cond, reset_assigns[0].rhs)

    def _parse_comb_body(self, start: Token, star: bool, names: list[str]) -> None:
        body, case = self._parse_comb_stmts()
        end_line = self.toks[self.pos - 1].line
        if case is None:
            self.err("E_NO_CASE", "missing case statement in combinational block", start.span)
            return
        subject, arms, default_arm = case
        leading: list[Assign] = []
        for stmt in body:
            if isinstance(stmt, Assign):
                leading.append(stmt)
            else:
                self.err("E_COMB_SHAPE", "only plain default assignments may precede the case",
                         stmt.span)
        self.comb_blocks.append(CombBlock(
            sens_star=star,
            sens_list=tuple(names),
            leading=leading,
            subject=subject,
            arms=arms,
            default_arm=default_arm,
            span=Span(start.line, max(start.line, end_line)),
        ))

    def _parse_comb_stmts(self):
        """Parse the comb always body: leading statements and one case."""
        case = None
        stmts: list[Stmt] = []
        has_begin = self.peek().is_kw("begin")
        if has_begin:
            self.next()
        while True:
            tok = self.peek()
            if tok.kind is TokKind.EOF:
                break
            if has_begin and tok.is_kw("end"):
                self.next()
                self.eat_stray_semis()
                break
            if tok.is_kw("case"):
                if case is not None:
                    self.err("E_COMB_SHAPE", "more than one case statement", tok.span)
                    raise _Abort()
                case = self._parse_case()
                if not has_begin:
                    break
                continue
            if case is not None:
                self.err("E_COMB_SHAPE", "statements after the case statement are not supported",
                         tok.span)
                raise _Abort()
            stmts.append(self._parse_stmt("comb"))
            if not has_begin:
                break
        return stmts, case

    def _parse_case(self):
        self.expect_kw("case")
        self.expect_op("(")
        subject = self.expect_ident("case subject").text
        self.expect_op(")")
        arms: list[CaseArm] = []
        default_arm: CaseArm | None = None
        while not self.peek().is_kw("endcase"):
            if self.at_eof():
                self.err("E_SYNTAX", "unterminated case statement")
                raise _Abort()
            label_tok = self.peek()
            if label_tok.is_kw("default"):
                self.next()
                label = None
            else:
                label = self.expect_ident("case label").text
            self.expect_op(":")
            start_line = label_tok.line
            body = self._parse_stmt_block(context="comb")
            end_line = self.toks[self.pos - 1].line
            arm = CaseArm(label, body, Span(start_line, max(start_line, end_line)))
            if label is None:
                if default_arm is not None:
                    self.err("E_DUP_DEFAULT", "more than one default arm", label_tok.span)
                default_arm = arm
            else:
                arms.append(arm)
        self.expect_kw("endcase")
        self.eat_stray_semis()
        return subject, arms, default_arm

    def _parse_stmt_block(self, context: str) -> list[Stmt]:
        if self.peek().is_kw("begin"):
            self.next()
            stmts: list[Stmt] = []
            while not self.peek().is_kw("end"):
                if self.at_eof():
                    self.err("E_SYNTAX", "unterminated begin/end block")
                    raise _Abort()
                stmts.append(self._parse_stmt(context))
            self.next()
            self.eat_stray_semis()
            return stmts
        return [self._parse_stmt(context)]

    def _parse_stmt(self, context: str) -> Stmt:
        tok = self.peek()
        if tok.is_kw("if"):
            return self._parse_if(context)
        return self._parse_assign(context)

    def _parse_if(self, context: str) -> IfChain:
        start = self.peek()
        branches: list[Branch] = []
        while True:
            if_tok = self.expect_kw("if")
            self.expect_op("(")
            guard_toks: list[Token] = []
            depth = 1
            while depth > 0:
                tok = self.next()
                if tok.kind is TokKind.EOF:
                    self.err("E_SYNTAX", "unterminated guard expression", if_tok.span)
                    raise _Abort()
                if tok.is_op("("):
                    depth += 1
                elif tok.is_op(")"):
                    depth -= 1
                    if depth == 0:
                        break
                guard_toks.append(tok)
            guard = render_expr(guard_toks)
            body = self._parse_stmt_block(context)
            branches.append(Branch(guard, body, span=if_tok.span))
            if not self.peek().is_kw("else"):
                break
            self.next()
            if self.peek().is_kw("if"):
                continue
            else_body = self._parse_stmt_block(context)
            branches.append(Branch(None, else_body, span=if_tok.span))
            break
        end_line = self.toks[self.pos - 1].line
        return IfChain(branches, Span(start.line, max(start.line, end_line)))

    def _parse_assign(self, context: str) -> Assign:
        lhs = self.expect_ident("assignment target")
        op_tok = self.peek()
        if op_tok.is_op("=") or op_tok.is_op("<="):
            self.next()
        else:
            self.err("E_SYNTAX", f"expected assignment after {lhs.text!r}", op_tok.span)
            raise _Abort()
        rhs_toks: list[Token] = []
        while not self.peek().is_op(";"):
            if self.at_eof() or self.peek().is_kw("end", "endcase", "endmodule", "begin", "if", "else"):
                self.err("E_SYNTAX", "missing semicolon after assignment", lhs.span)
                raise _Abort()
            rhs_toks.append(self.next())
        self.next()  # consume ';'
        if not rhs_toks:
            self.err("E_SYNTAX", "empty assignment right-hand side", lhs.span)
            raise _Abort()
        return Assign(lhs.text, render_expr(rhs_toks), Span(lhs.line, self.toks[self.pos - 1].line))

    # -- finalize ----------------------------------------------------------
    def _finalize(self) -> FsmAst | None:
        annotations = set()
        comments = tuple(t.text for t in self.trivia)
        for text in comments:
            for m in _PROTECTED_RE.finditer(text):
                annotations.add(m.group(1))

        if self.port_order:
            declared = {p.name: p for p in self.ports}
            missing = [n for n in self.port_order if n not in declared]
            for name in missing:
                self.err("E_PORT_DECL", f"port {name} has no direction declaration",
                         Span.point(self.module_line))
            self.ports = [declared[n] for n in self.port_order if n in declared]

        if not self.params and not self.seq_blocks and not self.comb_blocks:
            self.err("E_NO_FSM", "no state machine found", Span.point(self.module_line))
            return None
        if len(self.seq_blocks) > 1:
            self.err("E_MULTI_SEQ", "two sequential blocks describe the state register",
                     self.seq_blocks[1].span)
        if not self.seq_blocks:
            self.err("E_NO_SEQ", "no sequential state-update block found",
                     Span.point(self.module_line))
        if len(self.comb_blocks) > 1:
            self.err("E_MULTI_COMB", "more than one combinational block",
                     self.comb_blocks[1].span)
        if not self.comb_blocks:
            self.err("E_NO_CASE", "missing case statement", Span.point(self.module_line))
        if not self.params:
            self.err("E_NO_PARAMS", "no state parameters declared", Span.point(self.module_line))

        widths = {p.width for p in self.params}
        if len(widths) > 1:
            self.err("E_WIDTH_MIX", "state encodings use mixed widths", self.params[0].span)
        seen: set[str] = set()
        for p in self.params:
            if p.name in seen:
                self.err("E_DUP_PARAM", f"state {p.name} declared twice", p.span)
            seen.add(p.name)

        if any(d.is_error for d in self.diags):
            return None

        seq = self.seq_blocks[0]
        comb = self.comb_blocks[0]
        param_names = {p.name for p in self.params}
        width = self.params[0].width

        cur = comb.subject
        # _shape_seq recorded the register pair: reset-branch lhs is the
        # current-state register, the else-branch rhs is the next-state one.
        seq_cur, seq_next = self._state_cur, self._state_next
        if cur != seq_cur:
            self.err("E_SUBJECT", f"case subject {cur} is not the state register {seq_cur}",
                     comb.span)
        if seq.reset_target not in param_names:
            self.err("E_RESET_TARGET", f"reset target {seq.reset_target} is not a declared state",
                     seq.span)
        for name in (seq_cur, seq_next):
            if name in self.regs and self.regs[name] != width:
                self.err("E_REG_WIDTH",
                         f"register {name} width {self.regs[name]} does not match encoding width {width}",
                         seq.span)

        arm_labels: set[str] = set()
        for arm in comb.arms:
            if arm.label in arm_labels:
                self.err("E_DUP_ARM", f"duplicate case arm for {arm.label}", arm.span)
            arm_labels.add(arm.label)
            if arm.label not in param_names:
                self.err("E_ARM_LABEL", f"case arm on undeclared label {arm.label}", arm.span)
        all_arms = comb.arms + ([comb.default_arm] if comb.default_arm else [])
        assignable = {seq_next} | {p.name for p in self.ports if p.direction == "output"}
        for arm in all_arms:
            self._check_stmts(arm.body, seq_next, param_names, assignable)
        for a in comb.leading:
            if a.lhs == seq_next and a.rhs not in param_names:
                self.err("E_NEXT_TARGET", f"next-state assigned to undeclared state {a.rhs}", a.span)
            if a.lhs not in assignable:
                self.err("E_LHS", f"assignment to {a.lhs}, which is not next-state or an output", a.span)

        for name in annotations:
            if name not in param_names:
                self.err("E_PROTECTED", f"@protected names undeclared state {name}",
                         Span.point(self.module_line))

        self._fill_guard_inputs(all_arms, param_names)

        if any(d.is_error for d in self.diags):
            return None

        last_line = max(t.line for t in self.toks)
        return FsmAst(
            module_name=self.module_name,
            ports=self.ports,
            parameters=self.params,
            state_cur=seq_cur,
            state_next=seq_next,
            state_width=width,
            seq=seq,
            comb=comb,
            protected_annotations=frozenset(annotations),
            stray_semis=tuple(self.stray_semis),
            localparam_spans=tuple(self.localparam_spans),
            comments=comments,
            span=Span(1, last_line),
        )

    def _check_stmts(self, stmts: list[Stmt], next_reg: str, params: set[str],
                     assignable: set[str]) -> None:
        for stmt in stmts:
            if isinstance(stmt, Assign):
                if stmt.lhs == next_reg:
                    if stmt.rhs not in params:
                        self.err("E_NEXT_TARGET",
                                 f"next-state assigned to undeclared state {stmt.rhs}", stmt.span)
                elif stmt.lhs not in assignable:
                    self.err("E_LHS",
                             f"assignment to {stmt.lhs}, which is not next-state or an output",
                             stmt.span)
            else:
                for br in stmt.branches:
                    self._check_stmts(br.body, next_reg, params, assignable)

    def _fill_guard_inputs(self, arms: list[CaseArm], params: set[str]) -> None:
        def visit(stmts: list[Stmt]) -> None:
            for stmt in stmts:
                if isinstance(stmt, IfChain):
                    for br in stmt.branches:
                        if br.guard:
                            idents = [i for i in expr_identifiers(br.guard) if i not in params]
                            br.guard_inputs = tuple(dict.fromkeys(idents))
                        visit(br.body)
        for arm in arms:
            visit(arm.body)


def parse_module(lexed: Lexed) -> ParseResult:
    parser = _Parser(lexed)
    ast = parser.parse()
    return ParseResult(ast=ast, diagnostics=parser.diags)


def parse_source(src: SourceText) -> ParseResult:
    lexed = tokenize(src)
    if not lexed.ok:
        return ParseResult(ast=None, diagnostics=lexed.diagnostics)
    return parse_module(lexed)
