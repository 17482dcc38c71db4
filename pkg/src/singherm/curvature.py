"""Chern curvature, the Nakano form matrix and its omega-shifted variant.

With ``H = conj(h)`` the curvature components are

    Theta_ij = CURVATURE_SIGN * dbar_j (H^{-1} d_i H)

so that ``Theta = sum Theta_ij dz_i ^ dconj(z_j)``. The sign is pinned by the
rank-2 example: with ``-1`` the assembled Nakano matrix of ``h_eps`` agrees
entrywise with its closed form (see ``example42.closed_form_nakano``).

Two independent routes are provided: :func:`curvature_exact` works on the
exact dual matrix ``D`` (``H = phi * D^{-1}``) with symbolic Wirtinger
derivatives, :func:`curvature_fd` differentiates pointwise metric values.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _fd
from .metric import ClosedFormDualMetric, MetricField, SectionInducedMetric, as_point
from .sesqui import SesquiPolynomial, matrix_evaluate

CURVATURE_SIGN = -1

HERMITIAN_DEFECT_LIMIT = 1e-4


class DegeneratePointError(ValueError):
    """Curvature requested where the metric is not a smooth positive form."""


@dataclass(frozen=True)
class CurvatureAtPoint:
    blocks: np.ndarray  # (n, n, r, r); blocks[i, j] = Theta_ij
    point: np.ndarray

    @property
    def n(self) -> int:
        return self.blocks.shape[0]

    @property
    def rank(self) -> int:
        return self.blocks.shape[2]


@dataclass(frozen=True)
class NakanoMatrix:
    matrix: np.ndarray
    hermitian_defect: float

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


@dataclass(frozen=True)
class BaseForm:
    """Constant Hermitian form ``omega = sum omega_ij i dz_i ^ dconj(z_j)``."""

    omega: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=complex)
        if om.ndim != 2 or om.shape[0] != om.shape[1]:
            raise ValueError("omega must be a square matrix")
        if not np.allclose(om, om.conj().T) or np.linalg.eigvalsh(om)[0] <= 0:
            raise ValueError("omega must be Hermitian positive definite")
        object.__setattr__(self, "omega", om)

    @classmethod
    def identity(cls, n: int) -> BaseForm:
        return cls(np.eye(n))


# -- exact route ------------------------------------------------------------

def _dual_of(m: MetricField) -> ClosedFormDualMetric:
    if isinstance(m, SectionInducedMetric):
        return m.dual_metric()
    if isinstance(m, ClosedFormDualMetric):
        return m
    raise TypeError("exact curvature needs a closed-form dual or section-induced metric")


@lru_cache(maxsize=128)
def _tables(m: ClosedFormDualMetric):
    E = m.entries
    n = m.n
    dE = [[[p.d(i) for p in row] for row in E] for i in range(1, n + 1)]
    dbE = [[[p.dbar(j) for p in row] for row in E] for j in range(1, n + 1)]
    ddE = [[[[p.d(i).dbar(j) for p in row] for row in E] for j in range(1, n + 1)]
           for i in range(1, n + 1)]
    logs = []
    if m.scale is not None:
        for p, sign in zip(m.scale, (1.0, -1.0)):
            if p.is_constant:
                continue
            logs.append((sign, p, [p.d(i) for i in range(1, n + 1)],
                         [p.dbar(j) for j in range(1, n + 1)],
                         [[p.d(i).dbar(j) for j in range(1, n + 1)] for i in range(1, n + 1)]))
    return dE, dbE, ddE, logs


def _log_levi(logs, x, n):
    """``d_i dbar_j log(num/den)`` at ``x``."""
    out = np.zeros((n, n), dtype=complex)
    for sign, p, dp, dbp, ddp in logs:
        v = p.evaluate(x)
        for i in range(n):
            for j in range(n):
                out[i, j] += sign * (ddp[i][j].evaluate(x) / v
                                     - dp[i].evaluate(x) * dbp[j].evaluate(x) / v ** 2)
    return out


def curvature_exact(m: MetricField, x) -> CurvatureAtPoint:
    """Curvature blocks from exact derivatives of the dual matrix.

    ``Theta_ij = sign * [ L_ij I - (d_i dbar_j D) D^{-1} + (d_i D) D^{-1} (dbar_j D) D^{-1} ]``
    with ``L_ij = d_i dbar_j log(scale)``.
    """
    cf = _dual_of(m)
    x = as_point(x, cf.n)
    _, ok = cf.dual_batch(x[None, :])
    if not ok[0]:
        raise DegeneratePointError(f"metric is degenerate at {x}")
    dE, dbE, ddE, logs = _tables(cf)
    n, r = cf.n, cf.rank
    D = matrix_evaluate(cf.entries, x)
    Dinv = np.linalg.inv(D)
    dD = [matrix_evaluate(t, x) for t in dE]
    dbD = [matrix_evaluate(t, x) for t in dbE]
    L = _log_levi(logs, x, n)
    blocks = np.empty((n, n, r, r), dtype=complex)
    eye = np.eye(r)
    for i in range(n):
        for j in range(n):
            dd = matrix_evaluate(ddE[i][j], x)
            inner = L[i, j] * eye - dd @ Dinv + dD[i] @ Dinv @ dbD[j] @ Dinv
            blocks[i, j] = CURVATURE_SIGN * inner
    return CurvatureAtPoint(blocks, x)


# -- finite-difference route ------------------------------------------------

def curvature_fd(m: MetricField, x, step=None, richardson: bool = True) -> CurvatureAtPoint:
    """Curvature from central differences of ``conj(h)`` in real coordinates.

    ``step`` defaults to ``1e-3 * (1 + |x_k|)`` per coordinate.
    """
    x = as_point(x, m.n)

    def hbar(X):
        H, ok = m.evaluate_batch(X)
        return np.conj(H), ok

    try:
        H, dH, dbH, ddH = _fd.wirtinger_derivatives(hbar, x, step, richardson)
    except _fd.StencilError as exc:
        raise DegeneratePointError(str(exc)) from exc
    n, r = m.n, m.rank
    Hinv = np.linalg.inv(H)
    blocks = np.empty((n, n, r, r), dtype=complex)
    for i in range(n):
        for j in range(n):
            inner = -Hinv @ dbH[j] @ Hinv @ dH[i] + Hinv @ ddH[i, j]
            blocks[i, j] = CURVATURE_SIGN * inner
    return CurvatureAtPoint(blocks, x)


# -- Nakano matrix ----------------------------------------------------------

def _metric_at(m: MetricField, x) -> np.ndarray:
    val = m.evaluate(x)
    if not val.ok:
        raise DegeneratePointError(f"metric is {val.status} at {x}")
    return val.entries


def nakano_matrix(c: CurvatureAtPoint, m: MetricField) -> NakanoMatrix:
    """Matrix of the curvature form on ``E (x) T_X`` in the frame ``e_i (x) d/dz_j``.

    Derivative indices are outer, bundle indices inner: block ``(j, j')`` is
    ``Theta_{j j'}^T h``. The result is symmetrized and the pre-symmetrization
    defect recorded.
    """
    h = _metric_at(m, c.point)
    n, r = c.n, c.rank
    A = np.empty((n * r, n * r), dtype=complex)
    for j in range(n):
        for jp in range(n):
            A[j * r:(j + 1) * r, jp * r:(jp + 1) * r] = c.blocks[j, jp].T @ h
    defect = float(np.max(np.abs(A - A.conj().T)))
    size = float(np.max(np.abs(A))) if A.size else 0.0
    if defect > HERMITIAN_DEFECT_LIMIT * (1 + size):
        raise ArithmeticError(
            f"Nakano matrix far from Hermitian (defect {defect:.3g}); curvature convention broken")
    return NakanoMatrix(0.5 * (A + A.conj().T), defect)


def nakano_lower_bound_matrix(nm: NakanoMatrix, m: MetricField, x, C: float,
                              omega: BaseForm | None = None) -> NakanoMatrix:
    """``Theta_Nak + C * (omega_jj' h)``, the test matrix for curvature >= -C omega."""
    if C < 0:
        raise ValueError("C must be nonnegative")
    x = as_point(x, m.n)
    omega = BaseForm.identity(m.n) if omega is None else omega
    if omega.omega.shape != (m.n, m.n):
        raise ValueError("omega has the wrong dimension")
    h = _metric_at(m, x)
    shift = C * np.kron(omega.omega, h)
    shift = 0.5 * (shift + shift.conj().T)
    return NakanoMatrix(nm.matrix + shift, nm.hermitian_defect)


def griffiths_form(c: CurvatureAtPoint, m: MetricField, s, xi, nm: NakanoMatrix | None = None) -> float:
    """Curvature form on the rank-one tensor ``xi (x) s`` (``v[j*r + i] = xi_j s_i``)."""
    nm = nakano_matrix(c, m) if nm is None else nm
    s = np.asarray(s, dtype=complex)
    xi = np.asarray(xi, dtype=complex)
    if s.shape != (c.rank,) or xi.shape != (c.n,):
        raise ValueError("s must have length r and xi length n")
    v = np.kron(xi, s)
    return float(np.real(v @ nm.matrix @ np.conj(v)))


def scalar_levi(p: SesquiPolynomial, x) -> np.ndarray:
    """``d_i dbar_j p`` at ``x`` (helper for scalar-weight checks)."""
    n = p.n
    return np.array([[p.d(i).dbar(j).evaluate(x) for j in range(1, n + 1)]
                     for i in range(1, n + 1)])


def rel_err(a, b) -> float:
    """Normwise relative error ``max|a-b| / max|b|`` (absolute when ``b`` is 0)."""
    a = np.asarray(a)
    b = np.asarray(b)
    scale = float(np.max(np.abs(b))) if b.size else 0.0
    diff = float(np.max(np.abs(a - b))) if b.size else 0.0
    return diff / scale if scale > 0 else diff
