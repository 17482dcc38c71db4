"""Sesquilinear polynomials: finite sums ``c * z^alpha * conj(z)^beta``.

Coefficients are double-precision complex. Every polynomial is kept in
canonical form (no zero coefficients, terms sorted graded-lexicographically
on ``(alpha, beta)``), so equality of polynomials is equality of term lists.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from typing import Union

import numpy as np

Exponents = tuple[int, ...]
Number = Union[int, float, complex]


class Monomial(tuple):
    """Pair ``(alpha, beta)`` of holomorphic and anti-holomorphic exponents."""

    __slots__ = ()

    def __new__(cls, alpha: Iterable[int], beta: Iterable[int]):
        alpha = tuple(int(a) for a in alpha)
        beta = tuple(int(b) for b in beta)
        if len(alpha) != len(beta):
            raise ValueError("exponent vectors must have equal length")
        if any(e < 0 for e in alpha + beta):
            raise ValueError("exponents must be nonnegative")
        return super().__new__(cls, (alpha, beta))

    @property
    def alpha(self) -> Exponents:
        return self[0]

    @property
    def beta(self) -> Exponents:
        return self[1]

    @property
    def degree(self) -> int:
        return sum(self[0]) + sum(self[1])

    def sort_key(self):
        return (self.degree, self[0], self[1])


def _clean(c: complex) -> complex:
    # adding 0.0 turns -0.0 into +0.0 so printing is canonical
    return complex(c.real + 0.0, c.imag + 0.0)


def _ipow(base, k: int):
    out = 1
    for _ in range(k):
        out = out * base
    return out


class SesquiPolynomial:
    """Immutable polynomial in ``z_1..z_n`` and their conjugates."""

    __slots__ = ("_n", "_terms", "_hash")

    def __init__(self, n: int, terms: Mapping | None = None):
        if n < 1:
            raise ValueError("chart dimension must be >= 1")
        acc: dict[Monomial, complex] = {}
        for mono, coeff in (terms or {}).items():
            if not isinstance(mono, Monomial):
                mono = Monomial(*mono)
            if len(mono.alpha) != n:
                raise ValueError(
                    f"monomial {mono} does not match chart dimension {n}")
            acc[mono] = acc.get(mono, 0j) + complex(coeff)
        items = sorted(((m, _clean(c)) for m, c in acc.items() if c != 0),
                       key=lambda mc: mc[0].sort_key())
        self._n = n
        self._terms: tuple[tuple[Monomial, complex], ...] = tuple(items)
        self._hash = None

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> SesquiPolynomial:
        return cls(n)

    @classmethod
    def constant(cls, n: int, c: Number) -> SesquiPolynomial:
        return cls(n, {Monomial((0,) * n, (0,) * n): c})

    @classmethod
    def coordinate(cls, n: int, k: int, conjugate: bool = False) -> SesquiPolynomial:
        """``z_k`` (1-based) or its conjugate."""
        if not 1 <= k <= n:
            raise IndexError(f"coordinate index {k} outside 1..{n}")
        e = tuple(1 if i == k - 1 else 0 for i in range(n))
        zero = (0,) * n
        mono = Monomial(zero, e) if conjugate else Monomial(e, zero)
        return cls(n, {mono: 1.0})

    # -- basic protocol -----------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    @property
    def terms(self) -> tuple[tuple[Monomial, complex], ...]:
        return self._terms

    def as_dict(self) -> dict[Monomial, complex]:
        return dict(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        return max((m.degree for m, _ in self._terms), default=0)

    @property
    def is_holomorphic(self) -> bool:
        return all(not any(m.beta) for m, _ in self._terms)

    @property
    def is_constant(self) -> bool:
        return all(m.degree == 0 for m, _ in self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, SesquiPolynomial):
            return self._n == other._n and self._terms == other._terms
        if isinstance(other, (int, float, complex)):
            return self == SesquiPolynomial.constant(self._n, other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._n, self._terms))
        return self._hash

    def __repr__(self) -> str:
        from .parse import to_string
        return f"SesquiPolynomial(n={self._n}, {to_string(self)!r})"

    def __str__(self) -> str:
        from .parse import to_string
        return to_string(self)

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> SesquiPolynomial:
        if isinstance(other, SesquiPolynomial):
            if other._n != self._n:
                raise ValueError(f"dimension mismatch: {self._n} vs {other._n}")
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return SesquiPolynomial.constant(self._n, complex(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc = self.as_dict()
        for m, c in other._terms:
            acc[m] = acc.get(m, 0j) + c
        return SesquiPolynomial(self._n, acc)

    __radd__ = __add__

    def __neg__(self):
        return SesquiPolynomial(self._n, {m: -c for m, c in self._terms})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc: dict[Monomial, complex] = {}
        for m1, c1 in self._terms:
            for m2, c2 in other._terms:
                m = Monomial(tuple(a + b for a, b in zip(m1.alpha, m2.alpha)),
                             tuple(a + b for a, b in zip(m1.beta, m2.beta)))
                acc[m] = acc.get(m, 0j) + c1 * c2
        return SesquiPolynomial(self._n, acc)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("only nonnegative integer powers are supported")
        out = SesquiPolynomial.constant(self._n, 1.0)
        base = self
        k = int(k)
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def scale(self, c: Number) -> SesquiPolynomial:
        c = complex(c)
        return SesquiPolynomial(self._n, {m: c * v for m, v in self._terms})

    def conj(self) -> SesquiPolynomial:
        """Swap ``alpha <-> beta`` and conjugate coefficients."""
        return SesquiPolynomial(
            self._n,
            {Monomial(m.beta, m.alpha): c.conjugate() for m, c in self._terms})

    # -- calculus -----------------------------------------------------
    def d(self, k: int) -> SesquiPolynomial:
        """Wirtinger derivative d/dz_k (1-based)."""
        return self._diff(k, holomorphic=True)

    def dbar(self, k: int) -> SesquiPolynomial:
        """Wirtinger derivative d/dconj(z_k) (1-based)."""
        return self._diff(k, holomorphic=False)

    def _diff(self, k: int, holomorphic: bool) -> SesquiPolynomial:
        if not 1 <= k <= self._n:
            raise IndexError(f"coordinate index {k} outside 1..{self._n}")
        i = k - 1
        acc = {}
        for m, c in self._terms:
            exps = m.alpha if holomorphic else m.beta
            e = exps[i]
            if e == 0:
                continue
            lowered = exps[:i] + (e - 1,) + exps[i + 1:]
            new = Monomial(lowered, m.beta) if holomorphic else Monomial(m.alpha, lowered)
            acc[new] = acc.get(new, 0j) + e * c
        return SesquiPolynomial(self._n, acc)

    # -- evaluation ---------------------------------------------------
    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        """Evaluate at a point (shape ``(n,)``) or a batch (shape ``(..., n)``).

        Terms are summed one at a time in canonical order; each term is
        ``c * z_1^a1 * ... * z_n^an * conj(z_1)^b1 * ... * conj(z_n)^bn``
        with integer powers by repeated multiplication.
        """
        arr = np.asarray(x, dtype=complex)
        if arr.shape[-1:] != (self._n,):
            raise ValueError(
                f"dimension mismatch: point has shape {arr.shape}, chart dimension {self._n}")
        if arr.ndim == 1:
            coords = [complex(v) for v in arr]
            conjs = [v.conjugate() for v in coords]
            total = 0j
            for m, c in self._terms:
                t = c
                for zk, a in zip(coords, m.alpha):
                    t = t * _ipow(zk, a)
                for zk, b in zip(conjs, m.beta):
                    t = t * _ipow(zk, b)
                total = total + t
            return total
        coords = [arr[..., k] for k in range(self._n)]
        conjs = [np.conj(c) for c in coords]
        total = np.zeros(arr.shape[:-1], dtype=complex)
        for m, c in self._terms:
            t = np.full(arr.shape[:-1], c, dtype=complex)
            for zk, a in zip(coords, m.alpha):
                if a:
                    t = t * _ipow(zk, a)
            for zk, b in zip(conjs, m.beta):
                if b:
                    t = t * _ipow(zk, b)
            total = total + t
        return total


class HoloPolynomial(SesquiPolynomial):
    """A sesquilinear polynomial with no conjugated variables."""

    __slots__ = ()

    def __init__(self, n: int, terms: Mapping | None = None):
        super().__init__(n, terms)
        if not self.is_holomorphic:
            raise ValueError("holomorphic polynomial may not contain conj(z)")

    @classmethod
    def from_poly(cls, p: SesquiPolynomial) -> HoloPolynomial:
        if isinstance(p, HoloPolynomial):
            return p
        return cls(p.n, p.as_dict())


# -- matrices of polynomials -----------------------------------------------

PolyMatrix = Sequence[Sequence[SesquiPolynomial]]


def matrix_transpose(mat: PolyMatrix) -> list[list[SesquiPolynomial]]:
    return [list(col) for col in zip(*mat)]


def matrix_conj(mat: PolyMatrix) -> list[list[SesquiPolynomial]]:
    return [[p.conj() for p in row] for row in mat]


def matrix_evaluate(mat: PolyMatrix, x) -> np.ndarray:
    """Evaluate entrywise; batch points give shape ``(..., rows, cols)``."""
    vals = [[p.evaluate(x) for p in row] for row in mat]
    arr = np.asarray(vals, dtype=complex)
    if arr.ndim > 2:
        arr = np.moveaxis(np.moveaxis(arr, 0, -1), 0, -1)
    return arr


def determinant(mat: PolyMatrix) -> SesquiPolynomial:
    """Exact determinant by cofactor expansion along the first row."""
    size = len(mat)
    if any(len(row) != size for row in mat):
        raise ValueError("determinant of a non-square matrix")
    if size == 1:
        return mat[0][0]
    if size == 2:
        return mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    total = None
    for j in range(size):
        minor = [row[:j] + row[j + 1:] for row in (list(r) for r in mat[1:])]
        term = mat[0][j] * determinant(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total


def is_hermitian(mat: PolyMatrix) -> bool:
    """Exact symbolic check ``mat[k][j] == conj(mat[j][k])``."""
    size = len(mat)
    return all(mat[k][j] == mat[j][k].conj()
               for j in range(size) for k in range(size))
