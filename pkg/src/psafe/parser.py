"""Recursive-descent parser from tokens to a Program.

Braces delimit clauses; indentation and line breaks are insignificant. On a
parse error the enclosing group is abandoned and parsing resynchronizes at
the next `exists` / `hist` / `lasers` keyword so several errors can be
reported in one run.
"""

from __future__ import annotations

from . import ast
from .diagnostics import CompileError, Diagnostic, SourceSpan, error
from .lexer import Token, TokenKind, tokenize
from .units import SUFFIX_UNITS, UnitType

_BINDER_KEYWORDS = ("exists", "hist", "lasers")
_AGG_FNS = {fn.value: fn for fn in ast.AggFn}
_CMP_OPS = {op.value: op for op in ast.CmpOp}
_ARITH_OPS = {op.value: op for op in ast.ArithOp}

_HIST_BINS_DEFAULT = 10
_HIST_NORMALIZED_DEFAULT = False


class _ParseAbort(Exception):
    """Internal signal: the current group cannot be parsed further."""

    def __init__(self, diagnostic: Diagnostic):
        self.diagnostic = diagnostic
        super().__init__(diagnostic.message)


class _Parser:
    def __init__(self, tokens: list[Token], source_name: str):
        self.tokens = tokens
        self.pos = 0
        self.source_name = source_name
        self.diagnostics: list[Diagnostic] = []

    # --- token stream helpers ---

    def peek(self, offset: int = 0) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind is not TokenKind.EOF:
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind is not TokenKind.EOF and tok.text == text

    def expect(self, text: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind is not TokenKind.EOF and tok.text == text:
            return self.advance()
        expected = what or f"'{text}'"
        raise _ParseAbort(self._err(f"expected {expected}, found {self._describe(tok)}", tok.span))

    def expect_ident(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind is TokenKind.IDENT:
            return self.advance()
        raise _ParseAbort(self._err(f"expected {what}, found {self._describe(tok)}", tok.span))

    @staticmethod
    def _describe(tok: Token) -> str:
        if tok.kind is TokenKind.EOF:
            return "end of input"
        return f"'{tok.text}'"

    @staticmethod
    def _err(message: str, span: SourceSpan) -> Diagnostic:
        return error("E-PARSE", message, span)

    # --- grammar ---

    def program(self) -> ast.Program:
        groups: list[ast.RuleGroup] = []
        while self.peek().kind is not TokenKind.EOF:
            tok = self.peek()
            if tok.text not in _BINDER_KEYWORDS:
                self.diagnostics.append(
                    self._err(
                        f"expected 'exists', 'hist', or 'lasers', found {self._describe(tok)}",
                        tok.span,
                    )
                )
                self._resynchronize()
                continue
            try:
                groups.append(self.group())
            except _ParseAbort as abort:
                self.diagnostics.append(abort.diagnostic)
                self._resynchronize()
        if self.diagnostics:
            raise CompileError(self.diagnostics)
        return ast.Program(tuple(groups), self.source_name)

    def _resynchronize(self) -> None:
        self.advance()
        while self.peek().kind is not TokenKind.EOF and self.peek().text not in _BINDER_KEYWORDS:
            self.advance()

    def group(self) -> ast.RuleGroup:
        binder = self.binder()
        clauses: list[ast.Clause] = []
        while self._starts_expression():
            clauses.append(self.clause())
        if not clauses:
            tok = self.peek()
            raise _ParseAbort(self._err("expected clause", tok.span))
        return ast.RuleGroup(binder, tuple(clauses), binder.loc)

    def _starts_expression(self) -> bool:
        tok = self.peek()
        if tok.kind in (TokenKind.IDENT, TokenKind.NUMBER):
            return True
        return tok.kind is TokenKind.PUNCT and tok.text == "("

    def binder(self) -> ast.Binder:
        tok = self.advance()
        if tok.text == "exists":
            var = self.expect_ident("binder variable")
            self.expect("in")
            sensor = self.expect_ident("sensor name")
            self.expect(".")
            selector = self.expect_ident("'all'")
            if selector.text != "all":
                raise _ParseAbort(
                    self._err(f"expected 'all', found '{selector.text}'", selector.span)
                )
            self.expect("(")
            label = self.expect_ident("class label")
            self.expect(")")
            self.expect(":")
            return ast.ExistsBinder(var.text, sensor.text, label.text, tok.span)
        if tok.text == "hist":
            var = self.expect_ident("binder variable")
            self.expect("=")
            self.expect("histogram", "'histogram'")
            self.expect("(")
            base = self.expect_ident("image source")
            self.expect(".")
            fieldname = self.expect_ident("image source field")
            bins, normalized = self._hist_args()
            self.expect(")")
            self.expect(":")
            return ast.HistBinder(
                var.text, f"{base.text}.{fieldname.text}", bins, normalized, tok.span
            )
        if tok.text == "lasers":
            var = self.expect_ident("binder variable")
            self.expect("in")
            self.expect("lasers", "'lasers'")
            self.expect("(")
            selector = self.expect_ident("laser selector")
            self.expect(")")
            self.expect(":")
            return ast.LasersBinder(var.text, selector.text, tok.span)
        raise _ParseAbort(self._err(f"expected binder, found '{tok.text}'", tok.span))

    def _hist_args(self) -> tuple[int, bool]:
        bins = _HIST_BINS_DEFAULT
        normalized = _HIST_NORMALIZED_DEFAULT
        seen: set[str] = set()
        while self.at(","):
            self.advance()
            name = self.expect_ident("histogram argument name")
            self.expect("=")
            if name.text in seen:
                raise _ParseAbort(
                    self._err(f"duplicate histogram argument '{name.text}'", name.span)
                )
            seen.add(name.text)
            if name.text == "bins":
                tok = self.peek()
                if (
                    tok.kind is not TokenKind.NUMBER
                    or tok.unit is not None
                    or tok.value is None
                    or tok.value.denominator != 1
                    or tok.value < 1
                ):
                    raise _ParseAbort(
                        self._err("bins must be a positive integer", tok.span)
                    )
                self.advance()
                bins = int(tok.value)
            elif name.text == "normalized":
                tok = self.peek()
                if tok.kind is TokenKind.KEYWORD and tok.text in ("true", "false"):
                    self.advance()
                    normalized = tok.text == "true"
                else:
                    raise _ParseAbort(
                        self._err("normalized must be 'true' or 'false'", tok.span)
                    )
            else:
                raise _ParseAbort(
                    self._err(f"unknown histogram argument '{name.text}'", name.span)
                )
        return bins, normalized

    def clause(self) -> ast.Clause:
        guard = self.expression()
        open_brace = self.expect("{")
        actions = [self.action()]
        while self.at(";"):
            self.advance()
            if self.at("}"):
                break
            actions.append(self.action())
        self.expect("}")
        for i, act in enumerate(actions):
            if act in actions[:i]:
                raise _ParseAbort(
                    self._err(
                        f"duplicate action '{ast.action_to_str(act)}' in clause",
                        open_brace.span,
                    )
                )
        return ast.Clause(guard, tuple(actions), guard.loc)

    def action(self) -> ast.Action:
        tok = self.peek()
        if tok.text == "stop":
            self.advance()
            return ast.Stop()
        if tok.text == "cap_speed":
            self.advance()
            return ast.CapSpeed()
        if tok.text == "sound":
            self.advance()
            label = self.expect_ident("sound label")
            return ast.Sound(label.text)
        raise _ParseAbort(
            self._err(f"expected action, found {self._describe(tok)}", tok.span)
        )

    # Precedence: comparison (lowest, non-chaining) < additive < multiplicative.
    def expression(self) -> ast.Expr:
        lhs = self.additive()
        tok = self.peek()
        if tok.kind is TokenKind.COMPARE:
            op = _CMP_OPS[self.advance().text]
            rhs = self.additive()
            if self.peek().kind is TokenKind.COMPARE:
                raise _ParseAbort(
                    self._err("chained comparisons are not supported", self.peek().span)
                )
            return ast.Compare(op, lhs, rhs, tok.span)
        return lhs

    def additive(self) -> ast.Expr:
        lhs = self.multiplicative()
        while self.peek().kind is TokenKind.ARITH and self.peek().text in "+-":
            tok = self.advance()
            rhs = self.multiplicative()
            lhs = ast.Arith(_ARITH_OPS[tok.text], lhs, rhs, tok.span)
        return lhs

    def multiplicative(self) -> ast.Expr:
        lhs = self.primary()
        while self.peek().kind is TokenKind.ARITH and self.peek().text in "*/":
            tok = self.advance()
            rhs = self.primary()
            lhs = ast.Arith(_ARITH_OPS[tok.text], lhs, rhs, tok.span)
        return lhs

    def primary(self) -> ast.Expr:
        tok = self.peek()
        if tok.kind is TokenKind.NUMBER:
            self.advance()
            unit = SUFFIX_UNITS[tok.unit] if tok.unit else UnitType.POLYMORPHIC
            assert tok.value is not None
            return ast.Literal(tok.value, unit, tok.span)
        if tok.kind is TokenKind.PUNCT and tok.text == "(":
            self.advance()
            inner = self.expression()
            self.expect(")")
            return inner
        if tok.kind is TokenKind.IDENT:
            self.advance()
            if tok.text == "distance" and self.at("("):
                self.advance()
                var = self.expect_ident("detection variable")
                self.expect(")")
                return ast.Distance(var.text, tok.span)
            if tok.text in _AGG_FNS and self.at("("):
                self.advance()
                arg = self.set_expression()
                self.expect(")")
                return ast.Aggregate(_AGG_FNS[tok.text], arg, tok.span)
            if self.at("("):
                raise _ParseAbort(self._err(f"unknown function '{tok.text}'", tok.span))
            if self.at("."):
                self.advance()
                fieldname = self.expect_ident("field name")
                return ast.FieldAccess(
                    ast.VarRef(tok.text, tok.span), fieldname.text, fieldname.span
                )
            return ast.VarRef(tok.text, tok.span)
        raise _ParseAbort(
            self._err(f"expected expression, found {self._describe(tok)}", tok.span)
        )

    def set_expression(self) -> ast.SetExpr:
        tok = self.peek()
        if tok.kind is TokenKind.IDENT and self.peek(1).text == "in":
            self.advance()
            self.advance()
            domain = self.expression()
            filt = None
            if self.at(":"):
                self.advance()
                filt = self.expression()
            return ast.Comprehension(tok.text, domain, filt, tok.span)
        return ast.Plain(self.expression())


def parse(tokens: list[Token], source_name: str = "<memory>") -> ast.Program:
    """Parse a token list (from `tokenize`) into a Program.

    Raises CompileError carrying one E-PARSE diagnostic per failed group.
    """
    return _Parser(tokens, source_name).program()


def parse_source(source: str, source_name: str = "<memory>") -> ast.Program:
    """Tokenize and parse in one step."""
    return parse(tokenize(source), source_name)
