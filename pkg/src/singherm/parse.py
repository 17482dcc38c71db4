"""Parser and canonical printer for sesquilinear polynomial expressions.

Grammar::

    expr    := term (('+'|'-') term)*
    term    := factor ('*' factor)*
    factor  := ('-'|'+')? atom ('^' uint)?
    atom    := number | number 'i' | 'i' | coord | 'conj(' expr ')' | '(' expr ')'
    coord   := 'z' uint | 'z' | 'w'          (z = z1, w = z2)

Whitespace is ignored. A leading sign on a factor is accepted so that
printed polynomials with negative coefficients parse back.
"""

from __future__ import annotations

import re

from .sesqui import SesquiPolynomial

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<conj>conj\s*\()
  | (?P<coord>z\d+|z|w)
  | (?P<imag>i)
  | (?P<op>[-+*^()])
""", re.VERBOSE)


class ParseError(ValueError):
    """Syntax error; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def parse(self) -> SesquiPolynomial:
        p = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos)
        return p

    def expr(self) -> SesquiPolynomial:
        acc = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term(self) -> SesquiPolynomial:
        acc = self.factor()
        while self.peek()[1] == "*":
            self.take()
            acc = acc * self.factor()
        return acc

    def factor(self) -> SesquiPolynomial:
        sign = None
        if self.peek()[1] in ("+", "-"):
            sign = self.take()[1]
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise ParseError("exponent must be an unsigned integer", pos)
            base = base ** int(val)
        return -base if sign == "-" else base

    def atom(self) -> SesquiPolynomial:
        kind, val, pos = self.take()
        n = self.n
        if kind == "num":
            value = float(val)
            if self.peek()[0] == "imag":
                self.take()
                return SesquiPolynomial.constant(n, complex(0.0, value))
            return SesquiPolynomial.constant(n, value)
        if kind == "imag":
            return SesquiPolynomial.constant(n, 1j)
        if kind == "coord":
            k = {"z": 1, "w": 2}.get(val) or int(val[1:])
            if not 1 <= k <= n:
                raise ParseError(
                    f"coordinate {val!r} refers to index {k} but chart dimension is {n}", pos)
            return SesquiPolynomial.coordinate(n, k)
        if kind == "conj":
            inner = self.expr()
            self.expect(")")
            return inner.conj()
        if val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ParseError(f"unexpected {val or 'end of input'!r}", pos)


def parse(text: str, n: int) -> SesquiPolynomial:
    """Parse ``text`` into a canonical polynomial on a chart of dimension ``n``."""
    if n < 1:
        raise ValueError("chart dimension must be >= 1")
    return _Parser(text, n).parse()


def _fmt(x: float) -> str:
    return format(x, ".17g")


def to_string(p: SesquiPolynomial) -> str:
    """Canonical text form; ``parse(to_string(p), p.n) == p`` exactly."""
    if p.is_zero:
        return "0"
    parts = []
    for mono, c in p.terms:
        sign = "-" if c.imag < 0 else "+"
        factors = [f"({_fmt(c.real)}{sign}{_fmt(abs(c.imag))}i)"]
        for k, a in enumerate(mono.alpha, start=1):
            if a:
                factors.append(f"z{k}" if a == 1 else f"z{k}^{a}")
        for k, b in enumerate(mono.beta, start=1):
            if b:
                factors.append(f"conj(z{k})" if b == 1 else f"conj(z{k})^{b}")
        parts.append("*".join(factors))
    return " + ".join(parts)
