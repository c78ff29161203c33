"""Recursive-descent parser for the ``.lag`` model language.

    model NAME {
        field E rank 1 parity -;
        constant g;
        density = 1/8*pi^-1*(B[i]*dt(E[i])/c - ...);
        auxiliary d[i](E[i]);
    }

``#`` starts a comment.  The same expression grammar is exposed through
:func:`parse_expr`, which also reads back the canonical text form.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..symcore import D, Dt, Expr, Kind
from ..symcore.atoms import Atom, dirac, eps, kron
from ..symcore.coefficient import BUILTIN_SYMBOLS
from ..symcore.names import (
    CONSTRAINT_PREFIXES,
    EXTRA_MULTIPLIER_PREFIX,
    FDERIV_PREFIX,
    MOMENTUM_PREFIX,
    MULTIPLIER_PREFIX,
)


class DSLSyntaxError(SyntaxError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.msg_text = message
        self.line = line
        self.column = column


class ValidationError(ValueError):
    pass


_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<num>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[{}\[\](),;=+\-*/^@])"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    out = []
    line, start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if not m:
            raise DSLSyntaxError(f"unexpected character {source[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, m.start() - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


@dataclass(frozen=True)
class Scope:
    """What identifiers mean while parsing.  ``fields`` maps name to rank;
    with ``fields=None`` every unknown identifier is taken as a field."""

    fields: dict = None
    constants: frozenset = frozenset()

    def symbol(self, name: str) -> bool:
        return name in BUILTIN_SYMBOLS or name in self.constants

    def resolve(self, name: str) -> Kind:
        if name.startswith(MOMENTUM_PREFIX):
            return Kind.MOMENTUM
        if name.startswith(FDERIV_PREFIX):
            return Kind.FDERIV
        if name.startswith(MULTIPLIER_PREFIX) or name.startswith(EXTRA_MULTIPLIER_PREFIX):
            return Kind.MULTIPLIER
        if name.startswith(CONSTRAINT_PREFIXES):
            return Kind.CONSTRAINT
        return Kind.FIELD


class Parser:
    def __init__(self, source: str, scope: Scope = None):
        self.tokens = tokenize(source)
        self.pos = 0
        self.scope = scope or Scope()

    # -- token helpers -----------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message: str, tok: Token = None):
        tok = tok or self.tok
        raise DSLSyntaxError(message, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.tok
        if not self.accept(text):
            self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return tok

    def ident(self) -> str:
        tok = self.tok
        if tok.kind != "ident":
            self.error(f"expected identifier, found {tok.text or 'end of input'!r}")
        self.pos += 1
        return tok.text

    def integer(self) -> int:
        tok = self.tok
        if tok.kind != "num":
            self.error(f"expected integer, found {tok.text or 'end of input'!r}")
        self.pos += 1
        return int(tok.text)

    def index(self):
        if self.tok.kind == "num":
            tok = self.tok
            v = self.integer()
            if not 1 <= v <= 3:
                self.error("concrete index must be 1, 2 or 3", tok)
            return v
        return self.ident()

    def index_list(self) -> list:
        self.expect("[")
        out = [self.index()]
        while self.accept(","):
            out.append(self.index())
        self.expect("]")
        return out

    # -- expressions -------------------------------------------------------
    def expr(self) -> Expr:
        sign = 1
        if self.accept("-"):
            sign = -1
        else:
            self.accept("+")
        total = self.term() * sign
        while True:
            if self.accept("+"):
                total = total + self.term()
            elif self.accept("-"):
                total = total - self.term()
            else:
                return total

    def term(self) -> Expr:
        value = self.power()
        while True:
            if self.accept("*"):
                value = value * self.power()
            elif self.tok.text == "/" and self.tok.kind == "op":
                tok = self.tok
                self.pos += 1
                divisor = self.power()
                if divisor.constant_value() is None or divisor.is_zero():
                    self.error("division only by nonzero constants", tok)
                value = value / divisor
            else:
                return value

    def power(self) -> Expr:
        base = self.unary()
        if self.accept("^"):
            tok = self.tok
            neg = self.accept("-")
            n = self.integer()
            if neg:
                n = -n
            if n < 0:
                cv = base.constant_value()
                if cv is None or cv[0] == 0:
                    self.error("negative powers only of nonzero constants", tok)
                return Expr.number(1) / base.__pow__(-n)
            return base ** n
        return base

    def unary(self) -> Expr:
        if self.accept("-"):
            return -self.unary()
        return self.postfix()

    def postfix(self) -> Expr:
        value = self.primary()
        if self.accept("@"):
            point = self.ident()
            value = value.at(point)
        return value

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return Expr.number(int(tok.text))
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind != "ident":
            self.error(f"unexpected {tok.text or 'end of input'!r}")
        name = tok.text
        nxt = self.tokens[self.pos + 1].text
        if name == "dt" and nxt == "(":
            self.pos += 1
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return Dt(inner)
        if name == "d" and nxt == "[":
            self.pos += 1
            idx = self.index_list()
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            point = _derivative_point(inner)
            for ix in reversed(idx):
                inner = D(inner, ix, point)
            return inner
        if name == "eps" and nxt == "[":
            self.pos += 1
            idx = self.index_list()
            if len(idx) != 3:
                self.error("eps takes three indices", tok)
            return Expr.atom(eps(*idx))
        if name == "delta" and nxt == "[":
            self.pos += 1
            idx = self.index_list()
            if len(idx) != 2:
                self.error("delta takes two indices", tok)
            return Expr.atom(kron(*idx))
        if name == "ddelta" and nxt == "(":
            self.pos += 1
            self.expect("(")
            p = self.ident()
            self.expect(",")
            q = self.ident()
            self.expect(")")
            return Expr.atom(dirac(p, q))
        self.pos += 1
        if self.scope.symbol(name):
            if self.tok.text == "[":
                self.error(f"constant {name!r} takes no indices")
            return Expr.symbol(name)
        indices = self.index_list() if self.tok.text == "[" else []
        kind = self.scope.resolve(name)
        if self.scope.fields is not None and kind in (Kind.FIELD,):
            if name not in self.scope.fields:
                raise ValidationError(f"unknown field {name!r} at line {tok.line}, column {tok.col}")
            rank = self.scope.fields[name]
            if rank != len(indices):
                raise ValidationError(
                    f"field {name!r} has rank {rank} but is used with {len(indices)} indices "
                    f"at line {tok.line}, column {tok.col}"
                )
        if kind == Kind.FIELD and len(indices) == 2 and indices[0] == indices[1]:
            raise ValidationError(f"rank-2 field {name!r} used with a repeated index at line {tok.line}")
        return Expr.atom(Atom(kind, name, tuple(indices)))


def _derivative_point(e: Expr) -> str:
    pts = set()
    firsts = set()
    for _, _, atoms in e.terms:
        for a in atoms:
            if a.kind == Kind.DELTA:
                firsts.add(a.points[0])
            elif a.points:
                pts.add(a.point)
    if len(pts) == 1:
        return pts.pop()
    if not pts and len(firsts) == 1:
        return firsts.pop()
    if not pts and not firsts:
        return "x"
    raise ValidationError("derivative of an expression living at several points")


def parse_expr(text: str, fields: dict = None, constants=()) -> Expr:
    """Parse one expression (DSL syntax or canonical text form)."""
    p = Parser(text, Scope(fields, frozenset(constants)))
    e = p.expr()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    return e
