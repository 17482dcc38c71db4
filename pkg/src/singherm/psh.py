"""Sampling tests for plurisubharmonicity, and curvature-sign verdicts for
singular metrics built on them.

A metric is negatively curved when ``|s|_h^2`` is psh for every holomorphic
section ``s``, and positively curved when its dual is negatively curved.
Sampling can only falsify or corroborate; reports record how many sections,
points, directions and radii were tried.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass

import numpy as np

from . import _fd
from .metric import Chart, HolomorphicSection, MetricField, norm_sq_direct_batch
from .sesqui import HoloPolynomial, Monomial

DEFAULT_POINTS = 200
DEFAULT_DIRECTIONS = 8
DEFAULT_RADII = (0.05, 0.1, 0.2)  # fractions of the smallest chart radius
DEFAULT_CIRCLE = 64
DEFAULT_TOL = 1e-7
REFINE_STEPS = 6  # circle rule doubled up to 64x on flagged samples


@dataclass(frozen=True)
class ScalarField:
    """Real-valued field; ``func`` takes points ``(..., n)`` and may return +-inf."""

    func: Callable
    n: int
    label: str = ""
    vectorized: bool = True

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        if self.vectorized:
            return np.asarray(self.func(X), dtype=float)
        flat = X.reshape(-1, self.n)
        vals = np.array([float(self.func(x)) for x in flat])
        return vals.reshape(X.shape[:-1])


@dataclass
class PshReport:
    label: str
    tested_points: int
    directions: int
    radii: int
    circle_samples: int
    worst_violation: float
    worst_tolerance: float
    worst_point: list | None
    worst_direction: list | None
    worst_radius: float | None
    passed: bool
    sections_tested: int = 1
    skipped_centers: int = 0
    infinite_centers: int = 0
    unresolved_samples: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _cplx(v) -> list | None:
    if v is None:
        return None
    return [[float(c.real), float(c.imag)] for c in np.asarray(v)]


def _unit_directions(rng, count, n):
    d = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def submean_test(u: ScalarField, chart: Chart, points: int = DEFAULT_POINTS,
                 directions: int = DEFAULT_DIRECTIONS, radii: Sequence[float] | None = None,
                 circle_samples: int = DEFAULT_CIRCLE, tol: float = DEFAULT_TOL,
                 seed: int = 0) -> PshReport:
    """Check ``u(a) <= mean_k u(a + rho e^{2 pi i k/m} xi) + tol (1 + |u(a)|)``.

    ``radii`` are absolute; by default ``(0.05, 0.1, 0.2)`` times the smallest
    chart radius. Centres are drawn so every circle stays inside the chart.
    +inf on a circle and -inf at a centre satisfy the inequality; +inf
    centres are counted but not failures; NaN samples are skipped. Flagged
    samples are re-run with the circle rule doubled up to ``REFINE_STEPS``
    times; violations that keep moving are counted as unresolved, not failed.
    """
    rng = np.random.default_rng(seed)
    if radii is None:
        radii = [f * float(np.min(chart.radius)) for f in DEFAULT_RADII]
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.max(radii) >= np.min(chart.radius):
        raise ValueError("radii must be positive and smaller than the chart radius")
    centers = chart.sample(rng, points, margin=float(np.max(radii)))
    dirs = _unit_directions(rng, points * directions, chart.n).reshape(points, directions, chart.n)
    ua = u(centers)
    means = _circle_means(u, centers[:, None, None, :], dirs[:, :, None, :],
                          radii[None, None, :], circle_samples)  # (P, D, R)
    tol_a = tol * (1 + np.abs(np.where(np.isfinite(ua), ua, 0.0)))
    excess, viol = _excess(ua[:, None, None], means, tol_a[:, None, None])

    # A flagged sample is confirmed only if the violation survives refinement
    # of the circle rule; otherwise it is quadrature error near a singularity.
    unresolved = 0
    for p, d, r in zip(*np.nonzero(excess > 0)):
        prev = None
        m = circle_samples
        for _ in range(REFINE_STEPS):
            m *= 2
            mean = _circle_means(u, centers[p], dirs[p, d], radii[r], m)
            ex, v = _excess(ua[p], mean, tol_a[p])
            settled = prev is not None and abs(v - prev) <= 0.1 * abs(v)
            prev = v
            if ex <= 0 or settled:
                break
        if ex > 0 and not settled:
            unresolved += 1
            ex, v = -np.inf, -np.inf
        excess[p, d, r], viol[p, d, r] = ex, v

    p, d, r = np.unravel_index(int(np.argmax(excess)), excess.shape)
    has_worst = excess[p, d, r] > -np.inf
    return PshReport(
        label=u.label,
        tested_points=points,
        directions=directions,
        radii=len(radii),
        circle_samples=circle_samples,
        worst_violation=float(viol[p, d, r]) if has_worst else float("-inf"),
        worst_tolerance=float(tol_a[p]),
        worst_point=_cplx(centers[p]) if has_worst else None,
        worst_direction=_cplx(dirs[p, d]) if has_worst else None,
        worst_radius=float(radii[r]) if has_worst else None,
        passed=bool(excess[p, d, r] <= 0),
        skipped_centers=int(np.sum(np.isnan(ua))),
        infinite_centers=int(np.sum(np.isposinf(ua))),
        unresolved_samples=unresolved,
    )


def _circle_means(u, centers, dirs, radii, m):
    """Mean of ``u`` over ``m`` equispaced points of each circle; NaN values ignored."""
    radii = np.asarray(radii)
    phases = np.exp(2j * np.pi * np.arange(m) / m)
    pts = centers[..., None, :] + (radii[..., None, None] * phases[:, None]) * dirs[..., None, :]
    vals = u(pts)
    nan = np.isnan(vals)
    with np.errstate(invalid="ignore"):
        total = np.sum(np.where(nan, 0.0, vals), axis=-1)
        count = np.sum(~nan, axis=-1)
        return np.where(count > 0, total / np.maximum(count, 1), np.nan)


def _excess(ua, means, tol_a):
    """``(violation - tol, violation)`` with the +-inf conventions applied."""
    ua, means = np.broadcast_arrays(np.asarray(ua, float), np.asarray(means, float))
    with np.errstate(invalid="ignore"):
        viol = ua - means
    viol = np.where(np.isneginf(ua) | np.isposinf(means), -np.inf, viol)
    skip = np.isnan(ua) | np.isposinf(ua) | np.isnan(viol)
    excess = np.where(skip, -np.inf, viol - tol_a)
    return excess, np.where(skip, -np.inf, viol)


def levi_test(u: ScalarField, chart: Chart, points: int = 50, step: float = 1e-3,
              tol: float = 1e-6, seed: int = 0) -> PshReport:
    """Smallest eigenvalue of the complex Hessian ``d_i dbar_j u`` at sampled points.

    Points whose stencil meets a non-finite value are skipped.
    """
    rng = np.random.default_rng(seed)
    centers = chart.sample(rng, points, margin=2 * step * (1 + float(np.max(np.abs(chart.center)))
                                                           + float(np.max(chart.radius))))

    def f(X):
        v = u(X)
        return v.astype(complex), np.isfinite(v)

    worst = -np.inf
    worst_point = worst_dir = None
    skipped = 0
    for a in centers:
        steps = step * (1 + np.abs(a))
        try:
            _, _, _, dd = _fd.wirtinger_derivatives(f, a, steps)
        except _fd.StencilError:
            skipped += 1
            continue
        L = 0.5 * (dd + dd.conj().T)
        vals, vecs = np.linalg.eigh(L)
        if -vals[0] > worst:
            worst = float(-vals[0])
            worst_point, worst_dir = a, vecs[:, 0]
    return PshReport(
        label=u.label, tested_points=points, directions=0, radii=0, circle_samples=0,
        worst_violation=worst, worst_tolerance=tol,
        worst_point=_cplx(worst_point), worst_direction=_cplx(worst_dir), worst_radius=None,
        passed=bool(worst <= tol), skipped_centers=skipped)


# -- metric verdicts --------------------------------------------------------

def random_section(rng: np.random.Generator, n: int, r: int, degree: int) -> HolomorphicSection:
    """Components with all monomials of degree <= ``degree``, coefficients uniform on the unit disc."""
    exps = [e for e in itertools.product(range(degree + 1), repeat=n) if sum(e) <= degree]
    zero = (0,) * n
    comps = []
    for _ in range(r):
        rad = np.sqrt(rng.random(len(exps)))
        ang = 2 * np.pi * rng.random(len(exps))
        coeffs = rad * np.exp(1j * ang)
        comps.append(HoloPolynomial(n, {Monomial(e, zero): c for e, c in zip(exps, coeffs)}))
    return HolomorphicSection(tuple(comps))


def basis_sections(n: int, r: int) -> list[HolomorphicSection]:
    zero = (0,) * n
    out = []
    for k in range(r):
        comps = [HoloPolynomial(n, {Monomial(zero, zero): 1.0} if j == k else {}) for j in range(r)]
        out.append(HolomorphicSection(tuple(comps)))
    return out


def norm_field(m: MetricField, s: HolomorphicSection, log: bool = False) -> ScalarField:
    """``|s|_h^2`` (or its log) as a scalar field; +inf where the metric is not valued."""

    def func(X):
        q = norm_sq_direct_batch(m, s.evaluate(X), X)
        q = np.where(np.isnan(q), np.inf, q)
        if log:
            with np.errstate(divide="ignore"):
                return np.log(np.maximum(q, 0.0))
        return q

    return ScalarField(func, m.n, label=f"{'log' if log else ''}|s|^2")


def _aggregate(label: str, reports: list[PshReport]) -> PshReport:
    worst = max(reports, key=lambda r: (not r.passed, r.worst_violation - r.worst_tolerance))
    out = PshReport(**{**worst.to_dict(), "label": label})
    out.passed = all(r.passed for r in reports)
    out.sections_tested = len(reports)
    out.skipped_centers = sum(r.skipped_centers for r in reports)
    out.infinite_centers = sum(r.infinite_centers for r in reports)
    out.unresolved_samples = sum(r.unresolved_samples for r in reports)
    return out


def negativity_verdict(m: MetricField, chart: Chart, degree: int = 2, trials: int = 50,
                       seed: int = 0, tol: float = DEFAULT_TOL, log: bool = False,
                       **submean_kwargs) -> PshReport:
    """Sub-mean-value test of ``|s|_h^2`` for the basis sections and ``trials`` random ones."""
    rng = np.random.default_rng(seed)
    sections = basis_sections(m.n, m.rank)
    sections += [random_section(rng, m.n, m.rank, degree) for _ in range(trials)]
    seeds = np.random.SeedSequence(seed).generate_state(len(sections))
    reports = [submean_test(norm_field(m, s, log), chart, tol=tol, seed=int(sd), **submean_kwargs)
               for s, sd in zip(sections, seeds)]
    return _aggregate(f"negativity({getattr(m, 'label', '')})", reports)


class DualUndefinedError(ValueError):
    """The dual metric is undefined on too much of the probe grid."""


def positivity_verdict(m: MetricField, chart: Chart, degree: int = 2, trials: int = 50,
                       seed: int = 0, tol: float = DEFAULT_TOL, probe_per_axis: int = 5,
                       **submean_kwargs) -> PshReport:
    """Negativity verdict for the dual field, after checking it is defined a.e."""
    _, ok = m.dual_batch(chart.grid(probe_per_axis))
    if np.mean(ok) < 0.5:
        raise DualUndefinedError(
            f"dual metric undefined at {int(np.sum(~ok))} of {ok.size} probe points")
    rep = negativity_verdict(m.dual_field(), chart, degree, trials, seed, tol, **submean_kwargs)
    rep.label = f"positivity({getattr(m, 'label', '')})"
    return rep
