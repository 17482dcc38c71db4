"""Reproduction checks for the rank-2 example.

Each function runs one group of comparisons against closed forms or
independent computations and returns :class:`~singherm.scenarios.Check`
records naming the operation and tolerance used.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import example42, integrability, positivity, psh, regularize
from .curvature import (BaseForm, curvature_exact, curvature_fd, nakano_lower_bound_matrix,
                        nakano_matrix, rel_err)
from .metric import (Chart, ClosedFormDualMetric, HolomorphicSection, SectionInducedMetric,
                     dual_matrix, example_dual_exprs, example_family, example_sections,
                     norm_sq_detformula, norm_sq_direct)
from .parse import parse
from .scenarios import Check
from .sesqui import HoloPolynomial, Monomial, SesquiPolynomial

EPS_CURVATURE = (0.5, 0.1, 0.01)
EPS_BLOWUP = (0.5, 0.1, 0.01, 0.001)
C_BLOWUP = (0.5, 1.0, 2.0)
KERNELS = ((0.3, 3), (0.15, 4))


# -- random corpora -----------------------------------------------------------

def _random_holo(rng, n, degree):
    exps = [e for e in itertools.product(range(degree + 1), repeat=n) if sum(e) <= degree]
    zero = (0,) * n
    coeffs = rng.normal(size=len(exps)) + 1j * rng.normal(size=len(exps))
    return HoloPolynomial(n, {Monomial(e, zero): c for e, c in zip(exps, coeffs)})


def random_section_family(rng, n, r, N, degree=2):
    return [HolomorphicSection(tuple(_random_holo(rng, n, degree) for _ in range(r)))
            for _ in range(N)]


def random_dual_metric(rng, n, r, terms=2) -> ClosedFormDualMetric:
    """``D = A + sum_k f_k f_k^dagger`` with ``A`` constant positive definite and ``f_k`` linear."""
    B = rng.normal(size=(r, r)) + 1j * rng.normal(size=(r, r))
    A = B @ B.conj().T + r * np.eye(r)
    fs = [[_random_holo(rng, n, 1) for _ in range(r)] for _ in range(terms)]
    D = [[None] * r for _ in range(r)]
    for j in range(r):
        for k in range(j, r):
            acc = SesquiPolynomial.constant(n, A[j, k].real if j == k else A[j, k])
            for f in fs:
                acc = acc + f[j] * f[k].conj()
            if j == k:
                acc = 0.5 * (acc + acc.conj())
            D[j][k] = acc
            D[k][j] = acc.conj()
    return ClosedFormDualMetric(D, label="random")


# -- checks -------------------------------------------------------------------

def check_dual_matrix() -> list[Check]:
    m = SectionInducedMetric(example_sections())
    D = dual_matrix(m).entries
    expected = [[parse(e, 2) for e in row] for row in example_dual_exprs()]
    ok = all(D[i][j] == expected[i][j] for i in range(2) for j in range(2))
    return [Check("dual_matrix", "metric_model.dual_matrix", "exact", ok,
                  details={"entries": [[str(p) for p in row] for row in D]})]


def check_norm_formula(seed: int = 0, count: int = 100, tol: float = 1e-9) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst_norm = worst_det = 0.0
    done = tried = 0
    while done < count:
        tried += 1
        if tried > 50 * count:
            raise ArithmeticError("could not draw enough nondegenerate instances")
        r = int(rng.integers(1, 4))
        N = int(rng.integers(r, 7))
        n = int(rng.integers(1, 3))
        sections = random_section_family(rng, n, r, N)
        x = 0.8 * (rng.random(n) * np.exp(2j * np.pi * rng.random(n)))
        F = np.stack([s.evaluate(x) for s in sections])
        D = F.T @ F.conj()
        if abs(np.linalg.det(D)) <= 1e-8:
            continue
        s = rng.normal(size=r) + 1j * rng.normal(size=r)
        m = SectionInducedMetric(sections)
        direct = norm_sq_direct(m, s, x)
        formula = norm_sq_detformula(sections, s, x)
        worst_norm = max(worst_norm, abs(formula - direct) / abs(direct))
        dets = sum(abs(np.linalg.det(F[list(idx)])) ** 2
                   for idx in itertools.combinations(range(N), r))
        worst_det = max(worst_det, abs(np.linalg.det(D).real - dets) / dets)
        done += 1
    return [
        Check("norm_formula", "metric_model.norm_sq_detformula", tol, worst_norm <= tol,
              worst_norm, {"instances": count}),
        Check("det_identity", "metric_model.det_formula_parts", tol, worst_det <= tol,
              worst_det, {"instances": count}),
    ]


def check_curvature_closed_forms(eps_list=EPS_CURVATURE, per_axis: int = 5,
                                 tol: float = 1e-8) -> list[Check]:
    chart = Chart(2, [0, 0], 1.0)
    pts = chart.grid(per_axis, margin=0.1)
    out = []
    for family, label in (("h_eps", "M"), ("h_prime_eps", "M_prime")):
        worst = 0.0
        for eps in eps_list:
            m = example_family(family, eps)
            for x in pts:
                got = nakano_matrix(curvature_exact(m, x), m).matrix
                ref = example42.closed_form_nakano(family, eps, x[0], x[1])
                worst = max(worst, rel_err(got, ref))
        out.append(Check(f"curvature_{label}", "curvature_engine.curvature_exact", tol,
                         worst <= tol, worst, {"eps": list(eps_list), "points": len(pts)}))
    return out


def check_curvature_paths(seed: int = 0, count: int = 50, tol: float = 1e-5) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(count):
        n = 1 + i % 2
        r = 1 + (i // 2) % 3
        m = random_dual_metric(rng, n, r)
        x = 0.5 * (rng.random(n) * np.exp(2j * np.pi * rng.random(n)))
        a = nakano_matrix(curvature_exact(m, x), m).matrix
        b = nakano_matrix(curvature_fd(m, x), m).matrix
        worst = max(worst, rel_err(b, a))
    return [Check("curvature_exact_vs_fd", "curvature_engine.curvature_fd", tol,
                  worst <= tol, worst, {"metrics": count})]


def check_blowup(eps_list=EPS_BLOWUP, C_list=C_BLOWUP, tol: float = 1e-8) -> list[Check]:
    out = []
    table = []
    worst = 0.0
    for family in ("h_eps", "h_prime_eps"):
        for C in C_list:
            scan = positivity.blowup_scan(family, C, eps_list)
            for row in scan.rows:
                ref = example42.closed_form_min_eigenvalue(family, row.eps, C)
                err = abs(row.min_eig - ref) / abs(ref)
                worst = max(worst, err)
                table.append({"family": family, "C": C, "eps": row.eps,
                              "min_eig": row.min_eig, "closed_form": ref})
    out.append(Check("blowup_formulas", "positivity_tests.blowup_scan", tol, worst <= tol,
                     worst, {"table": table}))
    deep = positivity.blowup_scan("h_eps", 1.0, [0.001]).rows[0].min_eig
    out.append(Check("blowup_divergence", "positivity_tests.blowup_scan", "<= -600",
                     deep <= -600, deep, {"family": "h_eps", "C": 1.0, "eps": 0.001}))
    return out


def check_convolution(kernels=KERNELS, per_axis: int = 7, tol: float = 1e-6) -> list[Check]:
    h = SectionInducedMetric(example_sections())
    chart = Chart(2, [0, 0], 1.0)
    zz, zw = parse("z*conj(z)", 2), parse("z*conj(w)", 2)
    out = []
    for rho, p in kernels:
        k = regularize.make_kernel(rho, p)
        X = chart.grid(per_axis, margin=rho)
        r1 = float(np.max(np.abs(regularize.convolve_scalar(zz, k, X, chart)
                                 - np.abs(X[:, 0]) ** 2 - k.eps_chi)))
        r2 = float(np.max(np.abs(regularize.convolve_scalar(zw, k, X, chart)
                                 - X[:, 0] * np.conj(X[:, 1]))))
        D = regularize.convolve_dual(h, k, X, chart)
        ref = h.dual_batch(X)[0] + k.eps_chi * np.eye(2)
        r3 = float(np.max(np.abs(D - ref)))
        worst = max(r1, r2, r3)
        out.append(Check(f"convolution_rho{rho}_p{p}", "regularize.convolve_metric", tol,
                         worst <= tol, worst,
                         {"eps_chi": k.eps_chi, "abs_z_sq": r1, "z_conj_w": r2, "dual": r3}))
    return out


CALIBRATION = {
    "|z|^2": (lambda X: np.abs(X[..., 0]) ** 2, True),
    "-|z|^2": (lambda X: -np.abs(X[..., 0]) ** 2, False),
    "Re z^3": (lambda X: np.real(X[..., 0] ** 3), True),
    "log(|z|^2+1)": (lambda X: np.log(np.abs(X[..., 0]) ** 2 + 1), True),
    "log|w|": (lambda X: np.log(np.abs(X[..., 1])), True),
}


def check_psh(seed: int = 0, trials: int = 50) -> list[Check]:
    chart = Chart(2, [0, 0], 1.0)
    out = []
    results = {}
    for label, (f, expected) in CALIBRATION.items():
        rep = psh.submean_test(psh.ScalarField(f, 2, label), chart, seed=seed)
        results[label] = {"passed": rep.passed, "expected": expected,
                          "worst_violation": rep.worst_violation}
    ok = all(v["passed"] == v["expected"] for v in results.values())
    out.append(Check("psh_calibration", "psh_check.submean_test", psh.DEFAULT_TOL, ok,
                     details=results))
    h = SectionInducedMetric(example_sections(), label="h")
    rep = psh.positivity_verdict(h, chart, trials=trials, seed=seed)
    out.append(Check("positivity_verdict_h", "psh_check.positivity_verdict", psh.DEFAULT_TOL,
                     rep.passed, rep.worst_violation, rep.to_dict()))
    return out


def check_griffiths_nakano(seed: int = 0, count: int = 20, tol: float = 1e-8) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(count):
        n, r = ((1, 1 + i % 3) if i % 2 == 0 else (1 + i % 3, 1))
        m = random_dual_metric(rng, n, r)
        x = 0.5 * (rng.random(n) * np.exp(2j * np.pi * rng.random(n)))
        nm = nakano_matrix(curvature_exact(m, x), m)
        lb = nakano_lower_bound_matrix(nm, m, x, 0.5, BaseForm.identity(n))
        lam = positivity.nakano_min_eigenvalue(lb)
        g, _, _ = positivity.griffiths_min_matrix(lb.matrix, n, r, seed=seed + i)
        worst = max(worst, abs(g - lam) / (1 + float(np.max(np.abs(lb.matrix)))))
    return [Check("griffiths_equals_nakano", "positivity_tests.griffiths_min", tol,
                  worst <= tol, worst, {"metrics": count})]


def check_integrability(seed: int = 0, threads: int = 1) -> list[Check]:
    out = []
    battery = {}
    for a, expected in ((0.5, "convergent"), (0.9, "convergent"),
                        (1.0, "divergent"), (1.5, "divergent")):
        v = integrability.classify(integrability.shell_integrate(
            lambda X, a=a: np.abs(X[..., 0]) ** (-2 * a), [0], seed=seed, threads=threads))
        battery[str(a)] = {"classification": v.classification, "expected": expected,
                           "rate": v.fitted_exponent}
    out.append(Check("integrability_battery", "integrability.classify", integrability.DELTA,
                     all(b["classification"] == b["expected"] for b in battery.values()),
                     details=battery))
    h = SectionInducedMetric(example_sections())
    ex = {}
    for sec, expected in ((["0", "1"], "divergent"), (["0", "w"], "convergent"),
                          (["1", "0"], "convergent")):
        v = integrability.eh_membership(h, HolomorphicSection.parse(sec, 2), (0.5, 0),
                                        seed=seed, threads=threads)
        ex[",".join(sec)] = {"classification": v.classification, "expected": expected}
    out.append(Check("eh_membership_example", "integrability.eh_membership",
                     integrability.DELTA,
                     all(e["classification"] == e["expected"] for e in ex.values()), details=ex))
    corpus = {}
    for case in integrability.membership_corpus():
        m = SectionInducedMetric(case["sections"])
        a = integrability.eh_membership(m, case["s"], case["center"], seed=seed, threads=threads)
        b = integrability.reduce_membership(case["sections"], case["s"], case["center"],
                                            seed=seed, threads=threads)
        corpus[case["label"]] = {"eh": a.classification, "reduced": b.classification}
    out.append(Check("membership_equivalence", "integrability.reduce_membership", "equal",
                     all(c["eh"] == c["reduced"] and c["eh"] != "inconclusive"
                         for c in corpus.values()), details=corpus))
    return out


def reproduce_checks(seed: int = 0, threads: int = 1) -> list[Check]:
    """All groups, in a fixed order; groups run concurrently when ``threads > 1``."""
    groups = [
        ("dual_matrix", lambda: check_dual_matrix()),
        ("norm_formula", lambda: check_norm_formula(seed)),
        ("curvature", lambda: check_curvature_closed_forms() + check_curvature_paths(seed)),
        ("blowup", lambda: check_blowup()),
        ("convolution", lambda: check_convolution()),
        ("psh", lambda: check_psh(seed) + check_griffiths_nakano(seed)),
        ("integrability", lambda: check_integrability(seed)),
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futs = {name: ex.submit(fn) for name, fn in groups}
            results = {name: futs[name].result() for name, _ in groups}
    else:
        results = {name: fn() for name, fn in groups}
    return [c for name, _ in groups for c in results[name]]

