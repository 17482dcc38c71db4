"""Nakano and Griffiths semipositivity checks, and the eps -> 0 blowup scan."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .curvature import (BaseForm, CurvatureAtPoint, DegeneratePointError, NakanoMatrix,
                        curvature_exact, curvature_fd, nakano_lower_bound_matrix, nakano_matrix)
from .metric import MetricField, example_family

PSD_RTOL = 1e-8

GRIFFITHS_RESTARTS = 8
GRIFFITHS_ITERS = 50
GRIFFITHS_TOL = 1e-10


def psd_tolerance(matrix: np.ndarray) -> float:
    return PSD_RTOL * (1 + float(np.max(np.abs(matrix))))


def nakano_min_eigenvalue(nm: NakanoMatrix | np.ndarray) -> float:
    mat = nm.matrix if isinstance(nm, NakanoMatrix) else np.asarray(nm, dtype=complex)
    if not np.all(np.isfinite(mat)):
        raise ValueError("matrix has non-finite entries")
    return float(np.linalg.eigvalsh(mat)[0])


def _blocks(mat: np.ndarray, n: int, r: int) -> np.ndarray:
    """``B[j, j', i, i']`` with ``mat[j*r+i, j'*r+i'] = B[j, j', i, i']``."""
    return mat.reshape(n, r, n, r).transpose(0, 2, 1, 3)


def _form(B, s, xi) -> float:
    v = np.kron(xi, s)
    n, r = B.shape[0], B.shape[2]
    mat = B.transpose(0, 2, 1, 3).reshape(n * r, n * r)
    return float(np.real(v @ mat @ np.conj(v)))


def _min_eigvec(K: np.ndarray):
    K = 0.5 * (K + K.conj().T)
    vals, vecs = np.linalg.eigh(K)
    return vals[0], vecs[:, 0]


def griffiths_min_matrix(mat: np.ndarray, n: int, r: int, restarts: int = GRIFFITHS_RESTARTS,
                         iters: int = GRIFFITHS_ITERS, seed: int = 0,
                         tol: float = GRIFFITHS_TOL):
    """Minimum of ``v^T M conj(v)`` over unit rank-one ``v = xi (x) s``.

    Alternating minimization: with ``xi`` fixed the form in ``u = conj(s)`` is
    ``u^dagger K u`` with ``K = sum xi_j conj(xi_j') B[j, j']``, minimized by
    the lowest eigenvector; then symmetrically in ``xi``. The first start
    is the dominant rank-one part of the lowest Nakano eigenvector, the rest
    are seeded random. Returns ``(value, s, xi)``; the result is a local
    minimum in general.
    """
    mat = np.asarray(mat, dtype=complex)
    B = _blocks(mat, n, r)
    rng = np.random.default_rng(seed)
    starts = []
    _, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    U, _, _ = np.linalg.svd(np.conj(vecs[:, 0]).reshape(n, r))
    starts.append(U[:, 0])
    for _ in range(max(restarts - 1, 0)):
        xi = rng.normal(size=n) + 1j * rng.normal(size=n)
        starts.append(xi / np.linalg.norm(xi))

    best = (np.inf, None, None)
    for xi in starts:
        value = np.inf
        s = None
        for _ in range(iters):
            K = np.einsum("j,k,jkab->ab", xi, np.conj(xi), B)
            _, u = _min_eigvec(K)
            s = np.conj(u)
            L = np.einsum("a,b,jkab->jk", s, np.conj(s), B)
            new, v = _min_eigvec(L)
            xi = np.conj(v)
            if abs(value - new) <= tol * (1 + abs(new)):
                value = new
                break
            value = new
        value = _form(B, s, xi)
        if value < best[0]:
            best = (value, s, xi)
    return best


def griffiths_min(c: CurvatureAtPoint, m: MetricField, restarts: int = GRIFFITHS_RESTARTS,
                  iters: int = GRIFFITHS_ITERS, seed: int = 0):
    """Minimum of the curvature form over unit ``xi (x) s``; returns ``(value, s, xi)``."""
    nm = nakano_matrix(c, m)
    return griffiths_min_matrix(nm.matrix, c.n, c.rank, restarts, iters, seed)


@dataclass
class PointVerdict:
    point: np.ndarray
    nakano_min_eig: float
    griffiths_min: float
    passed: bool
    status: str = "ok"


@dataclass
class PositivityReport:
    points: list[PointVerdict]
    C: float
    mode: str
    parameters: dict = field(default_factory=dict)

    @property
    def evaluated(self) -> list[PointVerdict]:
        return [p for p in self.points if p.status == "ok"]

    @property
    def min_eig(self) -> float:
        vals = [p.nakano_min_eig for p in self.evaluated]
        return min(vals) if vals else float("nan")

    @property
    def argmin(self):
        ev = self.evaluated
        if not ev:
            return None
        return min(ev, key=lambda p: p.nakano_min_eig).point

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.evaluated)


def positivity_at(m: MetricField, x, C: float = 0.0, omega: BaseForm | None = None,
                  mode: str = "exact", seed: int = 0) -> PointVerdict:
    """Nakano and Griffiths minima of ``Theta_Nak + C (omega (x) h)`` at ``x``."""
    x = np.asarray(x, dtype=complex)
    try:
        curv = curvature_exact(m, x) if mode == "exact" else curvature_fd(m, x)
    except DegeneratePointError:
        return PointVerdict(x, float("nan"), float("nan"), False, status="degenerate")
    nm = nakano_lower_bound_matrix(nakano_matrix(curv, m), m, x, C, omega)
    lam = nakano_min_eigenvalue(nm)
    g, _, _ = griffiths_min_matrix(nm.matrix, curv.n, curv.rank, seed=seed)
    return PointVerdict(x, lam, g, lam >= -psd_tolerance(nm.matrix))


def positivity_report(m: MetricField, points: Sequence, C: float = 0.0,
                      omega: BaseForm | None = None, mode: str = "exact",
                      seed: int = 0) -> PositivityReport:
    verdicts = [positivity_at(m, x, C, omega, mode, seed) for x in points]
    return PositivityReport(verdicts, C, mode, {"seed": seed, "points": len(verdicts)})


@dataclass
class BlowupRow:
    family: str
    eps: float
    C: float
    min_eig: float


@dataclass
class BlowupScan:
    rows: list[BlowupRow]
    decreasing: bool
    point: np.ndarray


def blowup_scan(family: str, C: float, eps_list: Sequence[float], x=(0, 0),
                omega: BaseForm | None = None) -> BlowupScan:
    """Lowest eigenvalue of ``Theta_Nak + C (omega (x) h)`` along an eps-family.

    ``family`` is ``"h_eps"`` or ``"h_prime_eps"``. ``decreasing`` reports
    whether the values strictly decrease as eps shrinks along the list.
    """
    if any(not e > 0 for e in eps_list):
        raise ValueError("all eps must be positive")
    x = np.asarray(x, dtype=complex)
    rows = []
    for eps in eps_list:
        m = example_family(family, eps)
        nm = nakano_matrix(curvature_exact(m, x), m)
        lb = nakano_lower_bound_matrix(nm, m, x, C, omega)
        rows.append(BlowupRow(family, float(eps), float(C), nakano_min_eigenvalue(lb)))
    ordered = sorted(rows, key=lambda r: -r.eps)
    decreasing = all(b.min_eig < a.min_eig for a, b in zip(ordered, ordered[1:]))
    return BlowupScan(rows, decreasing, x)
