"""Local integrability probes for ``|s|_h^2`` and the determinant reduction.

Integrals near a centre are split into dyadic Euclidean shells
``2^{-k-1} <= |x - c| <= 2^{-k}`` and estimated by Monte Carlo. If the shell
integrals decay geometrically in ``k`` the germ is integrable; if they stay
flat or grow it is not. A shell whose samples look heavy-tailed with an
infinite mean (Hill tail index below ``TAIL_INDEX_INFINITE``) is itself
declared infinite: this catches singularities along a hypersurface through
the centre, where every shell diverges but a finite sample cannot show it.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .metric import (HolomorphicSection, MetricField, SectionInducedMetric, as_point,
                     norm_sq_detformula_batch, norm_sq_direct_batch)
from .sesqui import SesquiPolynomial, determinant

K_MIN = 3
K_MAX = 14
SAMPLES_PER_SHELL = 20_000
DELTA = 0.1  # decision band for the decay rate, in powers of 2 per shell
NOISE_SIGMAS = 3.0
NONFINITE_LIMIT = 1e-3
TAIL_FRACTION = 0.05
TAIL_INDEX_INFINITE = 1.25
MIN_SHELLS = 5

CONVERGENT = "convergent"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"


class IntegrationError(ArithmeticError):
    pass


@dataclass
class Shell:
    k: int
    value: float
    stderr: float
    infinite: bool = False
    nonfinite_fraction: float = 0.0
    tail_index: float = math.inf


@dataclass
class IntegrabilityVerdict:
    classification: str
    fitted_exponent: float  # decay rate r with I_k ~ 2^{-r k}
    margin: float
    shells_used: int
    rate_stderr: float = 0.0
    reason: str = ""
    shells: list[Shell] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def hill_tail_index(values: np.ndarray, fraction: float = TAIL_FRACTION) -> float:
    """Hill estimator of the tail index from the top ``fraction`` of positive samples."""
    v = np.sort(values[values > 0])[::-1]
    k = max(int(fraction * v.size), 10)
    if v.size <= k:
        return math.inf
    logs = np.log(v[:k] / v[k])
    mean = float(np.mean(logs))
    return math.inf if mean <= 0 else 1.0 / mean


def _shell(g, center, k, samples, seed_seq):
    rng = np.random.default_rng(seed_seq)
    n = center.shape[0]
    dim = 2 * n
    a, b = 2.0 ** (-k - 1), 2.0 ** (-k)
    # radius stratified in the radial measure t^{dim-1} dt
    u = (np.arange(samples) + rng.random(samples)) / samples
    t = (a ** dim + u * (b ** dim - a ** dim)) ** (1.0 / dim)
    d = rng.normal(size=(samples, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    X = center + t[:, None] * (d[:, 0::2] + 1j * d[:, 1::2])
    vals = np.asarray(g(X), dtype=float)
    finite = np.isfinite(vals)
    frac = 1.0 - float(np.mean(finite))
    if not np.any(finite):
        raise IntegrationError(f"no finite samples on shell k={k}")
    vol = 2 * math.pi ** n / math.factorial(n - 1) * (b ** dim - a ** dim) / dim
    good = vals[finite]
    tail = hill_tail_index(good)
    infinite = frac > NONFINITE_LIMIT or tail < TAIL_INDEX_INFINITE
    value = vol * float(np.mean(good))
    stderr = vol * float(np.std(good)) / math.sqrt(good.size)
    return Shell(k, math.inf if infinite else value, stderr, infinite, frac, tail)


def shell_integrate(g, center, k_min: int = K_MIN, k_max: int = K_MAX,
                    samples_per_shell: int = SAMPLES_PER_SHELL, seed: int = 0,
                    threads: int = 1) -> list[Shell]:
    """Monte-Carlo integrals of ``g`` over the dyadic shells around ``center``.

    Each shell draws from its own seed derived from ``(seed, k)``, so the
    result does not depend on ``threads``.
    """
    center = as_point(center)
    if k_max < k_min:
        raise ValueError("k_max must be >= k_min")
    ks = list(range(k_min, k_max + 1))
    seeds = {k: np.random.SeedSequence([seed, k]) for k in ks}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futs = {k: ex.submit(_shell, g, center, k, samples_per_shell, seeds[k]) for k in ks}
            return [futs[k].result() for k in ks]
    return [_shell(g, center, k, samples_per_shell, seeds[k]) for k in ks]


def classify(shells: Sequence[Shell], delta: float = DELTA) -> IntegrabilityVerdict:
    """Decide convergence from the decay of the shell integrals.

    Fits ``log2 I_k = a - rate * k`` by weighted least squares. Any infinite
    shell means divergent. ``rate > delta`` is convergent and ``rate < -delta``
    divergent. Inside the band, shells consistent with non-decrease
    (``rate <= 3 sigma``) are divergent and the rest inconclusive.
    """
    shells = list(shells)
    if len(shells) < MIN_SHELLS:
        raise ValueError(f"need at least {MIN_SHELLS} shells")
    if any(s.infinite for s in shells):
        return IntegrabilityVerdict(DIVERGENT, -math.inf, math.inf, len(shells),
                                    reason="infinite shell integral", shells=shells)
    pos = [s for s in shells if s.value > 0]
    if not pos:
        return IntegrabilityVerdict(CONVERGENT, math.inf, math.inf, len(shells),
                                    reason="integrand vanishes", shells=shells)
    if len(pos) < MIN_SHELLS:
        return IntegrabilityVerdict(INCONCLUSIVE, math.nan, -math.inf, len(pos),
                                    reason="too few nonzero shells", shells=shells)
    k = np.array([s.k for s in pos], dtype=float)
    y = np.log2([s.value for s in pos])
    sy = np.maximum([s.stderr / (s.value * math.log(2)) for s in pos], 1e-6)
    A = np.stack([np.ones_like(k), -k], axis=1)
    w = 1.0 / sy ** 2
    cov = np.linalg.inv(A.T @ (A * w[:, None]))
    coef = cov @ (A.T @ (w * y))
    rate = float(coef[1])
    sigma = float(math.sqrt(cov[1, 1]))
    if rate > delta:
        cls, margin, why = CONVERGENT, rate - delta, "geometric decay"
    elif rate < -delta:
        cls, margin, why = DIVERGENT, -delta - rate, "growing shells"
    elif rate <= NOISE_SIGMAS * sigma:
        cls, margin, why = DIVERGENT, NOISE_SIGMAS * sigma - rate, "flat shells"
    else:
        cls, margin, why = INCONCLUSIVE, abs(rate) - delta, "decay rate inside the decision band"
    return IntegrabilityVerdict(cls, rate, margin, len(pos), sigma, why, shells)


def _norm_integrand(m: MetricField, s: HolomorphicSection):
    if isinstance(m, SectionInducedMetric) and m.is_euclidean:
        sections = m.sections

        def g(X):
            return norm_sq_detformula_batch(sections, s.evaluate(X), X)
        return g

    def g(X):
        q = norm_sq_direct_batch(m, s.evaluate(X), X)
        return np.where(np.isnan(q), np.inf, q)
    return g


def eh_membership(m: MetricField, s: HolomorphicSection, center, seed: int = 0,
                  threads: int = 1, **shell_kwargs) -> IntegrabilityVerdict:
    """Is ``|s|_h^2`` integrable near ``center``?

    Euclidean section-induced metrics use the determinant-ratio formula,
    which stays meaningful on the degenerate locus; other metrics are
    evaluated directly with unvalued points counted as +inf.
    """
    if s.rank != m.rank or s.n != m.n:
        raise ValueError("section does not match the metric's rank and dimension")
    shells = shell_integrate(_norm_integrand(m, s), center, seed=seed, threads=threads,
                             **shell_kwargs)
    return classify(shells)


@dataclass
class ReducedMembership:
    numerators: list[SesquiPolynomial]
    weight_terms: list[SesquiPolynomial]
    term_verdicts: list[IntegrabilityVerdict]
    classification: str

    def to_dict(self) -> dict:
        return {
            "numerators": [str(p) for p in self.numerators],
            "weight_terms": [str(p) for p in self.weight_terms],
            "term_verdicts": [v.to_dict() for v in self.term_verdicts],
            "classification": self.classification,
        }


def reduction_terms(sections: Sequence[HolomorphicSection], s: HolomorphicSection):
    """Exact determinants ``det(s, s_I)`` over (r-1)-subsets and ``det(s_J)`` over r-subsets."""
    sections = list(sections)
    r = s.rank
    if any(sec.rank != r for sec in sections):
        raise ValueError("all sections must have the same rank")
    cols = [list(sec.components) for sec in sections]
    nums = [determinant([list(row) for row in zip(s.components, *[cols[i] for i in idx])])
            for idx in itertools.combinations(range(len(sections)), r - 1)]
    weights = [determinant([list(row) for row in zip(*[cols[j] for j in idx])])
               for idx in itertools.combinations(range(len(sections)), r)]
    return nums, weights


def reduce_membership(sections: Sequence[HolomorphicSection], s: HolomorphicSection, center,
                      seed: int = 0, threads: int = 1, **shell_kwargs) -> ReducedMembership:
    """Membership via ``|det(s, s_I)|^2 / sum_J |det(s_J)|^2`` for every (r-1)-subset ``I``.

    Requires the Euclidean base. Symbolically zero numerators are
    convergent without sampling; the overall verdict is convergent only if
    every term is, divergent if any term is, and inconclusive otherwise.
    """
    nums, weights = reduction_terms(sections, s)
    n = s.n
    den = SesquiPolynomial.zero(n)
    for wt in weights:
        den = den + wt * wt.conj()
    if den == SesquiPolynomial.zero(n):
        raise ValueError("the sections do not generate the bundle generically")
    verdicts = []
    for i, num in enumerate(nums):
        if num == SesquiPolynomial.zero(n):
            verdicts.append(IntegrabilityVerdict(CONVERGENT, math.inf, math.inf, 0,
                                                 reason="numerator vanishes identically"))
            continue
        sq = num * num.conj()

        def g(X, sq=sq):
            a = np.real(sq.evaluate(X))
            b = np.real(den.evaluate(X))
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(b > 0, a / np.where(b > 0, b, 1.0), np.where(a > 0, np.inf, np.nan))

        shells = shell_integrate(g, center, seed=seed + i, threads=threads, **shell_kwargs)
        verdicts.append(classify(shells))
    labels = {v.classification for v in verdicts}
    overall = (DIVERGENT if DIVERGENT in labels else
               CONVERGENT if labels == {CONVERGENT} else INCONCLUSIVE)
    return ReducedMembership(nums, weights, verdicts, overall)


# -- test corpus -------------------------------------------------------------

def membership_corpus() -> list[dict]:
    """Twelve germs: five rank-2 example sections at two centres on ``{w = 0}``,
    and two line-bundle powers ``s_1 = z^a``, ``s = z^b``."""
    from .metric import example_sections

    cases = []
    for sec in (["0", "1"], ["0", "w"], ["1", "0"], ["z", "w"], ["0", "z"]):
        for center in ((0, 0), (0.5, 0)):
            cases.append({"sections": example_sections(),
                          "s": HolomorphicSection.parse(sec, 2),
                          "center": center,
                          "label": f"s=({','.join(sec)}) at {center}"})
    for a, b in ((1, 0), (1, 1)):
        cases.append({"sections": [HolomorphicSection.parse([f"z^{a}"], 1)],
                      "s": HolomorphicSection.parse([f"z^{b}"], 1),
                      "center": (0,),
                      "label": f"line bundle a={a} b={b}"})
    return cases
