"""Hermitian metrics on a trivialized rank-r bundle over a coordinate chart.

Matrix convention: ``<s, t>_h = s^T h conj(t)``, so ``|s|_h^2 = s^T h conj(s)``.
The dual metric has matrix ``h* = (h^{-1})^T``.

Three backends share the :class:`MetricField` interface:

* :class:`SectionInducedMetric` - quotient of a constant metric ``h0`` on
  ``C^N`` under ``(a_1..a_N) -> sum a_i s_i``;
* :class:`ClosedFormDualMetric` - the dual matrix is given as exact
  sesquilinear polynomials, ``h = scale * (D^{-1})^T``;
* :class:`PointwiseMetric` - an opaque evaluator.

Metric values on the locus where ``D`` is singular are flagged
``degenerate`` instead of being assigned a limit.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .parse import parse
from .sesqui import (HoloPolynomial, SesquiPolynomial, determinant, is_hermitian,
                     matrix_evaluate)

EPS_DET = 1e-12

OK = "ok"
DEGENERATE = "degenerate"
UNDEFINED = "undefined"


def as_point(x, n: int | None = None) -> np.ndarray:
    """Validate a chart point: 1-d, finite, of length ``n`` when given."""
    arr = np.asarray(x, dtype=complex)
    if arr.ndim != 1:
        raise ValueError(f"a point must be a 1-d vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"dimension mismatch: point has {arr.shape[0]} coordinates, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


@dataclass(frozen=True)
class Chart:
    """Polydisc chart ``{x : |x_k - center_k| < radius_k}``."""

    n: int
    center: np.ndarray
    radius: np.ndarray
    label: str = ""

    def __post_init__(self):
        center = as_point(self.center, self.n)
        radius = np.broadcast_to(np.asarray(self.radius, dtype=float), (self.n,)).copy()
        if np.any(radius <= 0):
            raise ValueError("chart radii must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=complex)
        return bool(np.all(np.abs(x - self.center) <= self.radius - margin))

    def sample(self, rng: np.random.Generator, count: int, margin: float = 0.0) -> np.ndarray:
        """Uniform points in the polydisc shrunk by ``margin``; shape ``(count, n)``."""
        rad = self.radius - margin
        if np.any(rad <= 0):
            raise ValueError("margin exceeds chart radius")
        r = rad * np.sqrt(rng.random((count, self.n)))
        theta = 2 * np.pi * rng.random((count, self.n))
        return self.center + r * np.exp(1j * theta)

    def grid(self, per_axis: int, margin: float = 0.0) -> np.ndarray:
        """Deterministic probe grid: ``per_axis`` points on each coordinate disc.

        Points on each axis lie on a spiral so that both moduli and phases
        vary; the product over axes gives ``per_axis**n`` points.
        """
        axes = []
        for k in range(self.n):
            rad = self.radius[k] - margin
            if rad <= 0:
                raise ValueError("margin exceeds chart radius")
            j = np.arange(per_axis)
            mod = rad * 0.9 * j / max(per_axis - 1, 1)
            phase = np.pi * (2 * j + 1) / (per_axis + 2) + 0.3 * k
            axes.append(self.center[k] + mod * np.exp(1j * phase))
        return np.array(list(itertools.product(*axes)), dtype=complex)


@dataclass(frozen=True)
class HolomorphicSection:
    """Section ``s = sum_j f_j e_j`` with holomorphic polynomial components."""

    components: tuple[HoloPolynomial, ...]

    def __post_init__(self):
        comps = tuple(HoloPolynomial.from_poly(p) for p in self.components)
        if not comps:
            raise ValueError("a section needs at least one component")
        if len({p.n for p in comps}) != 1:
            raise ValueError("all components must share the chart dimension")
        object.__setattr__(self, "components", comps)

    @classmethod
    def parse(cls, exprs: Sequence[str | int | float], n: int) -> HolomorphicSection:
        return cls(tuple(parse(str(e), n) for e in exprs))

    @property
    def rank(self) -> int:
        return len(self.components)

    @property
    def n(self) -> int:
        return self.components[0].n

    def evaluate(self, x) -> np.ndarray:
        """Component vector at ``x``; batch points give shape ``(..., r)``."""
        return np.stack([np.asarray(p.evaluate(x), dtype=complex)
                         for p in self.components], axis=-1)


@dataclass(frozen=True)
class HermitianMatrixValue:
    entries: np.ndarray
    status: str = OK

    @property
    def ok(self) -> bool:
        return self.status == OK


def _scale_value(scale, X):
    if scale is None:
        return None
    num, den = scale
    return np.real(num.evaluate(X)) / np.real(den.evaluate(X))


def _hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _transpose_inverse(D: np.ndarray, ok: np.ndarray) -> np.ndarray:
    safe = np.where(ok[..., None, None], D, np.eye(D.shape[-1]))
    return np.swapaxes(np.linalg.inv(safe), -1, -2)


def _degenerate_mask(D: np.ndarray) -> np.ndarray:
    r = D.shape[-1]
    scale = np.max(np.abs(D), axis=(-1, -2)) ** r
    det = np.abs(np.linalg.det(D))
    finite = np.all(np.isfinite(D), axis=(-1, -2))
    return ~finite | (det <= EPS_DET * scale) | (scale == 0)


class MetricField:
    """Common interface; subclasses implement :meth:`evaluate_batch`."""

    rank: int
    n: int

    def evaluate_batch(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(H, ok)`` with ``H`` of shape ``(..., r, r)``."""
        raise NotImplementedError

    def dual_batch(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Matrix of the dual metric ``(h^{-1})^T`` and its validity mask."""
        H, ok = self.evaluate_batch(X)
        ok = ok & ~_degenerate_mask(H)
        return _hermitize(_transpose_inverse(H, ok)), ok

    def evaluate(self, x) -> HermitianMatrixValue:
        x = as_point(x, self.n)
        H, ok = self.evaluate_batch(x[None, :])
        if ok[0]:
            return HermitianMatrixValue(H[0], OK)
        status = DEGENERATE if np.all(np.isfinite(H[0])) else UNDEFINED
        return HermitianMatrixValue(np.full_like(H[0], np.nan), status)

    def dual_field(self) -> PointwiseMetric:
        """The dual metric ``h*`` as a pointwise field (transpose-inverse)."""
        return PointwiseMetric(self.dual_batch, self.n, self.rank,
                               label=f"dual({getattr(self, 'label', '')})")

    def scaled(self, c: float) -> MetricField:
        """The metric ``c * h``."""
        if c <= 0:
            raise ValueError("scale factor must be positive")
        base = self

        def func(X):
            H, ok = base.evaluate_batch(X)
            return c * H, ok
        return PointwiseMetric(func, self.n, self.rank, label=f"{c}*metric")


class ClosedFormDualMetric(MetricField):
    """Metric ``h = (num/den) * (D^{-1})^T`` with ``D`` exact and Hermitian."""

    def __init__(self, entries: Sequence[Sequence[SesquiPolynomial]],
                 scale: tuple[SesquiPolynomial, SesquiPolynomial] | None = None,
                 label: str = ""):
        entries = [list(row) for row in entries]
        r = len(entries)
        if r == 0 or any(len(row) != r for row in entries):
            raise ValueError("dual matrix must be square and nonempty")
        ns = {p.n for row in entries for p in row}
        if len(ns) != 1:
            raise ValueError("all entries must share the chart dimension")
        if not is_hermitian(entries):
            raise ValueError("dual matrix is not symbolically Hermitian")
        self.entries = entries
        self.rank = r
        self.n = ns.pop()
        if scale is not None:
            num, den = scale
            if num.n != self.n or den.n != self.n:
                raise ValueError("scale polynomials must share the chart dimension")
            if num.conj() != num or den.conj() != den:
                raise ValueError("scale polynomials must be real-valued")
        self.scale = scale
        self.label = label

    @classmethod
    def parse(cls, exprs: Sequence[Sequence[str]], n: int, label: str = "") -> ClosedFormDualMetric:
        return cls([[parse(str(e), n) for e in row] for row in exprs], label=label)

    @property
    def dual_polys(self) -> list[list[SesquiPolynomial]]:
        return self.entries

    def dual_batch(self, X):
        X = np.asarray(X, dtype=complex)
        D = matrix_evaluate(self.entries, X)
        ok = ~_degenerate_mask(D)
        phi = _scale_value(self.scale, X)
        if phi is not None:
            good = np.isfinite(phi) & (phi > 0)
            ok = ok & good
            D = D / np.where(good, phi, 1.0)[..., None, None]
        return D, ok

    def evaluate_batch(self, X):
        D, ok = self.dual_batch(X)
        return _hermitize(_transpose_inverse(D, ok)), ok

    def scaled(self, c: float) -> ClosedFormDualMetric:
        if c <= 0:
            raise ValueError("scale factor must be positive")
        one = SesquiPolynomial.constant(self.n, 1.0)
        num, den = self.scale if self.scale is not None else (one, one)
        return ClosedFormDualMetric(self.entries, scale=(num * c, den),
                                    label=f"{c}*{self.label}")

    def dual(self) -> ClosedFormDualMetric:
        """The dual metric (matrix ``D / scale``) in closed form.

        Uses the cofactor matrix: the metric ``det(D) * (cof(D)^{-1})^T``
        equals ``D``.
        """
        E = self.entries
        r = self.rank
        cof = [[None] * r for _ in range(r)]
        for j in range(r):
            for k in range(j, r):
                if r == 1:
                    c = SesquiPolynomial.constant(self.n, 1.0)
                else:
                    minor = [[E[a][b] for b in range(r) if b != k] for a in range(r) if a != j]
                    c = determinant(minor)
                    if (j + k) % 2:
                        c = -c
                cof[j][k] = c
                cof[k][j] = c.conj()
        det = determinant(E)
        det = 0.5 * (det + det.conj())
        if self.scale is None:
            scale = (det, SesquiPolynomial.constant(self.n, 1.0))
        else:
            num, den = self.scale
            scale = (det * den, num)
        return ClosedFormDualMetric(cof, scale=scale, label=f"dual({self.label})")


class SectionInducedMetric(MetricField):
    """Quotient metric induced by sections ``s_1..s_N`` from ``h0`` on ``C^N``."""

    def __init__(self, sections: Sequence[HolomorphicSection], base=None, label: str = "",
                 check_generation: bool = True):
        sections = tuple(sections)
        if not sections:
            raise ValueError("need at least one section")
        ranks = {s.rank for s in sections}
        dims = {s.n for s in sections}
        if len(ranks) != 1 or len(dims) != 1:
            raise ValueError("sections must share rank and chart dimension")
        self.sections = sections
        self.rank = ranks.pop()
        self.n = dims.pop()
        N = len(sections)
        if N < self.rank:
            raise ValueError(f"{N} sections cannot generate a rank-{self.rank} bundle")
        if base is None:
            base = np.eye(N)
        base = np.asarray(base, dtype=complex)
        if base.shape != (N, N):
            raise ValueError(f"base metric must be {N}x{N}")
        if not np.allclose(base, base.conj().T, atol=1e-12):
            raise ValueError("base metric must be Hermitian")
        if np.linalg.eigvalsh(base).min() <= 0:
            raise ValueError("base metric must be positive definite")
        self.base = base
        self.label = label
        self._dual = None
        if check_generation and not self._generically_generates():
            raise ValueError("sections do not generate the fiber at any probe point")

    def scaled(self, c: float) -> SectionInducedMetric:
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return SectionInducedMetric(self.sections, self.base * c, label=f"{c}*{self.label}")

    @property
    def is_euclidean(self) -> bool:
        return bool(np.array_equal(self.base, np.eye(len(self.sections))))

    def section_matrix(self, X) -> np.ndarray:
        """``F[..., i, j] = f_{i,j}(x)``; shape ``(..., N, r)``."""
        return np.stack([s.evaluate(X) for s in self.sections], axis=-2)

    def _generically_generates(self) -> bool:
        rng = np.random.default_rng(12345)
        probes = np.concatenate([np.zeros((1, self.n)),
                                 rng.normal(size=(8, self.n)) + 1j * rng.normal(size=(8, self.n))])
        F = self.section_matrix(probes)
        return bool(np.any(np.linalg.matrix_rank(F) == self.rank))

    def dual_metric(self) -> ClosedFormDualMetric:
        if self._dual is None:
            self._dual = dual_matrix(self)
        return self._dual

    @property
    def dual_polys(self):
        return self.dual_metric().entries

    @property
    def scale(self):
        return None

    def dual_batch(self, X):
        return self.dual_metric().dual_batch(X)

    def evaluate_batch(self, X):
        return self.dual_metric().evaluate_batch(X)


class PointwiseMetric(MetricField):
    """Opaque evaluator backend.

    ``func`` maps a batch of points ``(..., n)`` to either a matrix array
    ``(..., r, r)`` or a pair ``(matrices, ok_mask)``. With
    ``vectorized=False`` it is called once per point and may also return a
    :class:`HermitianMatrixValue`.
    """

    def __init__(self, func: Callable, n: int, rank: int, label: str = "",
                 vectorized: bool = True):
        self.func = func
        self.n = n
        self.rank = rank
        self.label = label
        self.vectorized = vectorized

    def evaluate_batch(self, X):
        X = np.asarray(X, dtype=complex)
        if self.vectorized:
            out = self.func(X)
        else:
            flat = X.reshape(-1, self.n)
            mats, oks = [], []
            for x in flat:
                v = self.func(x)
                if isinstance(v, HermitianMatrixValue):
                    mats.append(v.entries)
                    oks.append(v.ok)
                else:
                    mats.append(np.asarray(v, dtype=complex))
                    oks.append(True)
            r = self.rank
            out = (np.asarray(mats, dtype=complex).reshape(X.shape[:-1] + (r, r)),
                   np.asarray(oks).reshape(X.shape[:-1]))
        if isinstance(out, tuple):
            H, ok = out
        else:
            H, ok = out, np.ones(X.shape[:-1], dtype=bool)
        H = np.asarray(H, dtype=complex)
        ok = np.asarray(ok, dtype=bool) & np.all(np.isfinite(H), axis=(-1, -2))
        return H, ok


# -- operations -------------------------------------------------------------

def dual_matrix(m: SectionInducedMetric) -> ClosedFormDualMetric:
    """Exact dual matrix ``D_jk = sum_{i,l} f_{i,j} G_{il} conj(f_{l,k})``.

    ``G = (h0^{-1})^T`` is the matrix of the dual base metric; for the
    Euclidean base this is ``D_jk = sum_i f_{i,j} conj(f_{i,k})``.
    """
    if not isinstance(m, SectionInducedMetric):
        raise TypeError("dual_matrix requires a section-induced metric")
    r, n = m.rank, m.n
    f = [s.components for s in m.sections]
    N = len(f)
    euclid = m.is_euclidean
    G = np.linalg.inv(m.base).T
    D = [[None] * r for _ in range(r)]
    for j in range(r):
        for k in range(j, r):
            acc = SesquiPolynomial.zero(n)
            if euclid:
                for i in range(N):
                    acc = acc + f[i][j] * f[i][k].conj()
            else:
                for i in range(N):
                    for l in range(N):
                        if G[i, l] != 0:
                            acc = acc + (f[i][j] * f[l][k].conj()).scale(G[i, l])
            if j == k:
                acc = 0.5 * (acc + acc.conj())
            D[j][k] = acc
            D[k][j] = acc.conj()
    return ClosedFormDualMetric(D, label=f"dual({m.label})")


def evaluate_metric(m: MetricField, x) -> HermitianMatrixValue:
    return m.evaluate(x)


def norm_sq_direct(m: MetricField, s, x) -> float:
    """``s^T h(x) conj(s)``; NaN where the metric is not valued."""
    val = m.evaluate(x)
    s = np.asarray(s, dtype=complex)
    if s.shape != (m.rank,):
        raise ValueError(f"vector of length {m.rank} expected")
    if not val.ok:
        return math.nan
    q = s @ val.entries @ np.conj(s)
    return float(q.real)


def norm_sq_direct_batch(m: MetricField, S: np.ndarray, X: np.ndarray) -> np.ndarray:
    H, ok = m.evaluate_batch(X)
    q = np.einsum("...i,...ij,...j->...", S, H, np.conj(S)).real
    return np.where(ok, q, np.nan)


def _subset_dets(F: np.ndarray, r: int) -> np.ndarray:
    """``|det|^2`` of every r-subset of rows of ``F`` (shape ``(..., N, r)``)."""
    N = F.shape[-2]
    dets = [np.abs(np.linalg.det(F[..., list(idx), :])) ** 2
            for idx in itertools.combinations(range(N), r)]
    return np.sum(dets, axis=0)


def det_formula_parts(F: np.ndarray, S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator of the determinant-ratio norm.

    ``F`` has shape ``(..., N, r)`` (rows are the sections), ``S`` shape
    ``(..., r)``.
    """
    N, r = F.shape[-2], F.shape[-1]
    den = _subset_dets(F, r)
    num = np.zeros(F.shape[:-2])
    for idx in itertools.combinations(range(N), r - 1):
        rows = np.concatenate([S[..., None, :], F[..., list(idx), :]], axis=-2)
        num = num + np.abs(np.linalg.det(rows)) ** 2
    return num, den


def _ratio(num, den, F, S):
    r = F.shape[-1]
    size = np.sum(np.abs(F) ** 2, axis=(-1, -2))
    ssize = np.sum(np.abs(S) ** 2, axis=-1)
    bad = den <= EPS_DET * size ** r
    zero_num = num <= EPS_DET * size ** (r - 1) * ssize
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(bad, np.where(zero_num, np.nan, np.inf), num / np.where(bad, 1.0, den))
    return out


def norm_sq_detformula(sections: Sequence[HolomorphicSection], s, x) -> float:
    """Determinant-ratio form of the quotient norm (Euclidean base).

    ``|s|^2 = sum_{(r-1)-subsets} |det(s, s_I)|^2 / sum_{r-subsets} |det(s_J)|^2``.
    Returns ``inf`` where the denominator vanishes and ``nan`` when the
    numerator vanishes there too.
    """
    sections = list(sections)
    x = as_point(x, sections[0].n)
    if isinstance(s, HolomorphicSection):
        s = s.evaluate(x)
    s = np.asarray(s, dtype=complex)
    F = np.stack([sec.evaluate(x) for sec in sections])
    if s.shape != (F.shape[1],):
        raise ValueError(f"vector of length {F.shape[1]} expected")
    num, den = det_formula_parts(F, s)
    return float(_ratio(num, den, F, s))


def norm_sq_detformula_batch(sections, S: np.ndarray, X: np.ndarray) -> np.ndarray:
    F = np.stack([sec.evaluate(X) for sec in sections], axis=-2)
    num, den = det_formula_parts(F, S)
    return _ratio(num, den, F, S)


def pullback_metric(m: MetricField, phi: Sequence[Sequence[SesquiPolynomial]]) -> PointwiseMetric:
    """Pull back ``m`` (on F) along the map whose row i is the image of ``e_i``.

    ``phi`` is an ``r_E x r_F`` matrix of holomorphic polynomials, the map
    acts by ``s -> phi^T s`` and the pulled-back matrix is ``P h P^dagger``.
    """
    rows = [[HoloPolynomial.from_poly(p) for p in row] for row in phi]
    if any(len(row) != m.rank for row in rows):
        raise ValueError(f"each row of phi must have {m.rank} entries")
    rE = len(rows)

    def func(X):
        P = matrix_evaluate(rows, X)
        H, ok = m.evaluate_batch(X)
        out = P @ H @ np.conj(np.swapaxes(P, -1, -2))
        return _hermitize(out), ok

    return PointwiseMetric(func, m.n, rE, label=f"pullback({getattr(m, 'label', '')})")


# -- the worked example ------------------------------------------------------

EXAMPLE_SECTIONS = (("1", "0"), ("z", "w"))


def example_sections() -> list[HolomorphicSection]:
    return [HolomorphicSection.parse(s, 2) for s in EXAMPLE_SECTIONS]


def example_dual_exprs(eps: float = 0.0, both: bool = False) -> list[list[str]]:
    """Dual matrix of the rank-2 example, optionally regularized by ``eps``.

    ``both=False`` adds ``eps`` to the (2,2) entry only; ``both=True`` adds
    ``eps`` to the whole diagonal.
    """
    e11 = f" + {eps!r}" if (both and eps) else ""
    e22 = f" + {eps!r}" if eps else ""
    return [[f"z*conj(z) + 1{e11}", "z*conj(w)"],
            ["w*conj(z)", f"w*conj(w){e22}"]]


def example_closed_forms(eps: float) -> dict[str, ClosedFormDualMetric]:
    """Closed-form metrics of the rank-2 example.

    Keys: ``h`` (quotient metric), ``h_dual`` (the metric whose matrix is the
    dual of ``h``), ``h_eps`` and ``h_prime_eps`` (duals of
    ``h_dual + eps*diag(0,1)`` and ``h_dual + eps*I``), and their duals
    ``h_dual_eps`` and ``h_prime_dual_eps``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    h = ClosedFormDualMetric.parse(example_dual_exprs(), 2, label="h")
    h_eps = ClosedFormDualMetric.parse(example_dual_exprs(eps), 2, label=f"h_eps[{eps}]")
    h_prime = ClosedFormDualMetric.parse(example_dual_exprs(eps, both=True), 2,
                                         label=f"h_prime_eps[{eps}]")
    return {
        "h": h,
        "h_dual": h.dual(),
        "h_eps": h_eps,
        "h_prime_eps": h_prime,
        "h_dual_eps": h_eps.dual(),
        "h_prime_dual_eps": h_prime.dual(),
    }


def example_family(family: str, eps: float) -> ClosedFormDualMetric:
    """``family`` is ``"h_eps"`` or ``"h_prime_eps"``."""
    if family not in ("h_eps", "h_prime_eps"):
        raise ValueError(f"unknown family {family!r}")
    if not eps > 0:
        raise ValueError("eps must be positive")
    return ClosedFormDualMetric.parse(
        example_dual_exprs(eps, both=(family == "h_prime_eps")), 2, label=f"{family}[{eps}]")
