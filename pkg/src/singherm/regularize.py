"""Convolution smoothing by a radial polynomial bump.

The kernel is ``chi(p) = c * (1 - |p|^2/rho^2)^power`` on the ball of radius
``rho`` in ``C^d``. Integrals over the ball use a polar product rule:
Gauss-Legendre in the radius, a Gauss-Jacobi rule on the simplex of squared
moduli ``|u_k|^2`` and equispaced phases per coordinate. It is exact for
sesquilinear polynomial integrands of moderate degree, so the identities
``chi * |z|^2 = |z|^2 + eps_chi`` and ``chi * (z conj(w)) = z conj(w)`` hold to
rounding error.

Metrics are smoothed through their dual: the dual entries are convolved and
the result transpose-inverted. Convolving a metric directly is refused when
its entries blow up inside the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre, roots_sh_jacobi

from .metric import (DEGENERATE, OK, Chart, ClosedFormDualMetric, HermitianMatrixValue,
                     MetricField, PointwiseMetric, SectionInducedMetric, _degenerate_mask,
                     _hermitize, _transpose_inverse, as_point)
from .sesqui import SesquiPolynomial, matrix_evaluate

RADIAL_NODES = 24
SIMPLEX_NODES = 8
PHASE_NODES = 16
MASS_TOL = 1e-8
NEAR_SINGULAR_RATIO = 1e-6
CHUNK_NODES = 1_000_000  # evaluation points per block in convolve_scalar


class QuadratureError(ArithmeticError):
    pass


class SingularIntegrandError(ValueError):
    """The integrand is not finite on the kernel support; smooth the dual instead."""


class MarginError(ValueError):
    pass


def _simplex_rule(d: int, m: int):
    """Nodes ``(K, d)`` and weights summing to 1 for the uniform measure on the simplex."""
    if d == 1:
        return np.ones((1, 1)), np.ones(1)
    # stick breaking: v_k ~ Beta(1, d - k), density proportional to (1 - v)^(d-k-1)
    factors = []
    for k in range(1, d):
        x, w = roots_sh_jacobi(m, d - k, 1)
        factors.append((x, w / w.sum()))
    grids = np.meshgrid(*[f[0] for f in factors], indexing="ij")
    wgrids = np.meshgrid(*[f[1] for f in factors], indexing="ij")
    V = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    sig = np.empty((V.shape[0], d))
    rest = np.ones(V.shape[0])
    for k in range(d - 1):
        sig[:, k] = rest * V[:, k]
        rest = rest * (1 - V[:, k])
    sig[:, d - 1] = rest
    return sig, W


def sphere_area(d: int) -> float:
    """Area of the unit sphere ``S^{2d-1}`` in ``C^d``."""
    return 2 * math.pi ** d / math.factorial(d - 1)


def ball_rule(d: int, rho: float, radial: int = RADIAL_NODES, simplex: int = SIMPLEX_NODES,
              phases: int = PHASE_NODES):
    """Points ``(K, d)``, radii ``(K,)`` and Lebesgue weights for the ball of radius ``rho``."""
    t, wt = roots_legendre(radial)
    t = 0.5 * rho * (t + 1)
    wt = 0.5 * rho * wt * t ** (2 * d - 1) * sphere_area(d)
    sig, ws = _simplex_rule(d, simplex)
    th = 2 * np.pi * np.arange(phases) / phases
    ang = np.stack([g.ravel() for g in np.meshgrid(*([th] * d), indexing="ij")], axis=-1)
    wa = np.full(ang.shape[0], 1.0 / ang.shape[0])
    # directions: u_k = sqrt(sig_k) e^{i theta_k}
    U = np.sqrt(sig)[:, None, :] * np.exp(1j * ang)[None, :, :]
    U = U.reshape(-1, d)
    wu = (ws[:, None] * wa[None, :]).ravel()
    P = (t[:, None, None] * U[None, :, :]).reshape(-1, d)
    T = np.repeat(t, U.shape[0])
    W = (wt[:, None] * wu[None, :]).ravel()
    return P, T, W


@dataclass(frozen=True)
class Kernel:
    rho: float
    power: int
    dim_real: int
    c: float
    eps_chi: float
    nodes: np.ndarray = field(repr=False)  # (K, d)
    weights: np.ndarray = field(repr=False)  # chi * Lebesgue weight; sums to 1

    @property
    def d(self) -> int:
        return self.dim_real // 2

    def profile(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(t < self.rho, self.c * np.clip(1 - t ** 2 / self.rho ** 2, 0, None) ** self.power, 0.0)

    def __call__(self, P) -> np.ndarray:
        return self.profile(np.linalg.norm(np.asarray(P), axis=-1))


def make_kernel(rho: float, power: int = 3, dim_real: int = 4, radial: int = RADIAL_NODES,
                simplex: int = SIMPLEX_NODES, phases: int = PHASE_NODES) -> Kernel:
    """Normalized bump on the ball of radius ``rho`` in ``R^dim_real``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    if int(power) != power or power < 3:
        raise ValueError("power must be an integer >= 3")
    if dim_real < 2 or dim_real % 2:
        raise ValueError("dim_real must be a positive even number")
    d = dim_real // 2

    def radial_mass(m):
        t, w = roots_legendre(m)
        t = 0.5 * rho * (t + 1)
        return float(np.sum(0.5 * rho * w * t ** (2 * d - 1) * (1 - t ** 2 / rho ** 2) ** power)
                     * sphere_area(d))

    mass = radial_mass(radial)
    if abs(mass - radial_mass(2 * radial)) > MASS_TOL * mass:
        raise QuadratureError("radial quadrature did not converge; raise the node count")
    c = 1.0 / mass
    P, T, W = ball_rule(d, rho, radial, simplex, phases)
    wchi = W * c * (1 - T ** 2 / rho ** 2) ** power
    if abs(wchi.sum() - 1) > MASS_TOL:
        raise QuadratureError(f"kernel mass {wchi.sum()!r} differs from 1")
    eps_chi = float(np.sum(wchi * np.abs(P[:, 0]) ** 2))
    return Kernel(float(rho), int(power), int(dim_real), c, eps_chi, P, wchi)


def _check_margin(k: Kernel, X: np.ndarray, chart: Chart | None):
    if chart is None:
        return
    pts = X.reshape(-1, k.d)
    if not all(chart.contains(x, margin=k.rho) for x in pts):
        raise MarginError(f"evaluation points must keep a margin of {k.rho} inside the chart")


def _evaluate(u, pts):
    if isinstance(u, SesquiPolynomial):
        return u.evaluate(pts)
    return u(pts)


def convolve_scalar(u, k: Kernel, x, chart: Chart | None = None):
    """``(chi * u)(x) = sum_q w_q u(x - p_q)``.

    ``u`` is a :class:`~singherm.psh.ScalarField`, a callable on point
    batches, or a :class:`~singherm.sesqui.SesquiPolynomial`; ``x`` may be a
    single point or a batch ``(..., d)``. Complex-valued ``u`` is allowed.
    """
    X = np.asarray(x, dtype=complex)
    if X.shape[-1] != k.d:
        raise ValueError(f"points must have {k.d} coordinates")
    _check_margin(k, X, chart)
    flat = X.reshape(-1, k.d)
    step = max(1, CHUNK_NODES // k.nodes.shape[0])
    parts = []
    for i in range(0, flat.shape[0], step):
        vals = np.asarray(_evaluate(u, flat[i:i + step, None, :] - k.nodes))
        if not np.all(np.isfinite(vals)):
            raise SingularIntegrandError(
                "integrand is not finite on the kernel support; convolve the dual metric instead")
        parts.append(vals @ k.weights)
    out = np.concatenate(parts).reshape(X.shape[:-1])
    return out[()] if out.ndim == 0 else out


def _dual_values(m: MetricField, pts: np.ndarray) -> np.ndarray:
    if isinstance(m, SectionInducedMetric):
        m = m.dual_metric()
    if isinstance(m, ClosedFormDualMetric):
        D = matrix_evaluate(m.entries, pts)
        if m.scale is not None:
            num, den = m.scale
            D = D * (np.real(den.evaluate(pts)) / np.real(num.evaluate(pts)))[..., None, None]
        return D
    D, ok = m.dual_batch(pts)
    if not np.all(ok):
        raise SingularIntegrandError("dual metric is not valued on the whole kernel support")
    return D


def convolve_dual(m: MetricField, k: Kernel, x, chart: Chart | None = None) -> np.ndarray:
    """Entrywise convolution of the dual matrix; Hermitian by construction."""
    X = np.asarray(x, dtype=complex)
    if X.shape[-1] != m.n or m.n != k.d:
        raise ValueError("kernel, metric and point dimensions disagree")
    _check_margin(k, X, chart)
    D = _dual_values(m, X[..., None, :] - k.nodes)  # (..., K, r, r)
    if not np.all(np.isfinite(D)):
        raise SingularIntegrandError("dual entries are not finite on the kernel support")
    r = m.rank
    out = np.empty(X.shape[:-1] + (r, r), dtype=complex)
    for a in range(r):
        out[..., a, a] = np.einsum("...k,k->...", D[..., a, a].real, k.weights)
        for b in range(a + 1, r):
            v = np.einsum("...k,k->...", D[..., a, b], k.weights)
            out[..., a, b] = v
            out[..., b, a] = np.conj(v)
    return out


def convolve_metric(m: MetricField, k: Kernel, x, chart: Chart | None = None,
                    path: str = "dual") -> HermitianMatrixValue:
    """Smoothed metric at one point.

    ``path="dual"`` convolves the dual entries and transpose-inverts.
    ``path="direct"`` convolves the metric entries and is refused when the
    dual degenerates anywhere near the support.
    """
    x = as_point(x, m.n)
    if path == "dual":
        D = convolve_dual(m, k, x, chart)
        ok = ~_degenerate_mask(D[None])[0]
        if not ok:
            return HermitianMatrixValue(np.full_like(D, np.nan), DEGENERATE)
        return HermitianMatrixValue(_hermitize(_transpose_inverse(D[None], np.array([True])))[0], OK)
    if path != "direct":
        raise ValueError(f"unknown path {path!r}")
    _check_margin(k, x, chart)
    pts = x - k.nodes
    D = _dual_values(m, pts)
    dets = np.abs(np.linalg.det(D))
    H, ok = m.evaluate_batch(pts)
    if (not np.all(ok) or not np.all(np.isfinite(H))
            or dets.min() <= NEAR_SINGULAR_RATIO * dets.max()):
        raise SingularIntegrandError(
            "metric entries are singular near the kernel support; use path='dual'")
    out = _hermitize(np.einsum("kab,k->ab", H, k.weights))
    return HermitianMatrixValue(out, OK)


def smoothed_metric(m: MetricField, k: Kernel) -> PointwiseMetric:
    """The field ``x -> convolve_metric(m, k, x)`` as a metric backend."""

    def func(X):
        D = convolve_dual(m, k, X)
        ok = ~_degenerate_mask(D)
        return _hermitize(_transpose_inverse(D, ok)), ok

    return PointwiseMetric(func, m.n, m.rank, label=f"smoothed({getattr(m, 'label', '')})")
