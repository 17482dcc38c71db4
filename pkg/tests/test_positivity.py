import numpy as np
import pytest
from scipy.optimize import minimize

from singherm import example42
from singherm.checks import random_dual_metric
from singherm.curvature import curvature_exact, nakano_lower_bound_matrix, nakano_matrix
from singherm.metric import ClosedFormDualMetric
from singherm.positivity import (blowup_scan, griffiths_min_matrix, nakano_min_eigenvalue,
                                 positivity_at, positivity_report)


@pytest.mark.parametrize("family", ["h_eps", "h_prime_eps"])
@pytest.mark.parametrize("C", [0.5, 1.0, 2.0])
def test_origin_eigenvalue_formulas(family, C):
    scan = blowup_scan(family, C, [0.5, 0.1, 0.01, 0.001])
    for row in scan.rows:
        ref = example42.closed_form_min_eigenvalue(family, row.eps, C)
        assert abs(row.min_eig - ref) <= 1e-8 * abs(ref)
    assert scan.decreasing


def test_closed_form_eigenvalue_by_hand():
    # h_eps, eps=0.1, C=1: (1.1 - sqrt(0.81 + 4)) / 0.2
    assert example42.closed_form_min_eigenvalue("h_eps", 0.1, 1.0) == pytest.approx(
        (1.1 - np.sqrt(0.81 + 4)) / 0.2)


def test_blowup_reaches_minus_six_hundred():
    row = blowup_scan("h_eps", 1.0, [0.001]).rows[0]
    assert row.min_eig <= -600
    assert row.min_eig == pytest.approx(-617.3104714, rel=1e-8)


def test_blowup_table_row_eps_001():
    # closed form: (1.01 - sqrt(0.9801 + 4)) / 0.02 = -61.0807
    val = blowup_scan("h_eps", 1.0, [0.01]).rows[0].min_eig
    assert val == pytest.approx((1.01 - np.sqrt(0.9801 + 4)) / 0.02, rel=1e-10)
    assert val == pytest.approx(-61.07, abs=0.02)


def test_blowup_rejects_nonpositive_eps():
    with pytest.raises(ValueError):
        blowup_scan("h_eps", 1.0, [0.1, 0.0])


def _brute_griffiths(mat, n, r, rng, samples=100_000):
    """Random sampling then local polishing of the rank-one form."""
    def form(s, xi):
        v = np.einsum("...j,...i->...ji", xi, s).reshape(*s.shape[:-1], n * r)
        return np.real(np.einsum("...a,ab,...b->...", v, mat, v.conj()))

    s = rng.normal(size=(samples, r)) + 1j * rng.normal(size=(samples, r))
    xi = rng.normal(size=(samples, n)) + 1j * rng.normal(size=(samples, n))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    vals = form(s, xi)
    sample_best = float(vals.min())

    def obj(p):
        a = p[:r] + 1j * p[r:2 * r]
        b = p[2 * r:2 * r + n] + 1j * p[2 * r + n:]
        return form(a / np.linalg.norm(a), b / np.linalg.norm(b))

    best = sample_best
    for i in np.argsort(vals)[:5]:
        p0 = np.concatenate([s[i].real, s[i].imag, xi[i].real, xi[i].imag])
        best = min(best, float(minimize(obj, p0, method="BFGS").fun))
    return best, sample_best


@pytest.mark.parametrize("seed", range(4))
def test_griffiths_min_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    mat = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    mat = 0.5 * (mat + mat.conj().T)
    g, s, xi = griffiths_min_matrix(mat, 2, 2, seed=seed)
    oracle, sample_best = _brute_griffiths(mat, 2, 2, rng)
    assert abs(g - oracle) <= 1e-3
    assert g <= sample_best + 1e-12
    assert np.linalg.norm(s) == pytest.approx(1) and np.linalg.norm(xi) == pytest.approx(1)


def test_griffiths_witness_on_diagonal_matrix():
    g, s, xi = griffiths_min_matrix(np.diag([1.0, 1.0, 1.0, -1.0]), 2, 2)
    assert g == pytest.approx(-1.0)
    assert abs(s[1]) == pytest.approx(1) and abs(xi[1]) == pytest.approx(1)


@pytest.mark.parametrize("n,r", [(1, 1), (1, 2), (1, 3), (2, 1), (3, 1)])
def test_griffiths_equals_nakano_when_n_or_r_is_one(n, r, rng):
    m = random_dual_metric(rng, n, r)
    x = 0.3 * np.ones(n) * (1 + 0.5j)
    lb = nakano_lower_bound_matrix(nakano_matrix(curvature_exact(m, x), m), m, x, 0.5)
    lam = nakano_min_eigenvalue(lb)
    g, _, _ = griffiths_min_matrix(lb.matrix, n, r)
    assert abs(g - lam) <= 1e-8 * (1 + np.max(np.abs(lb.matrix)))


def test_griffiths_never_below_nakano(rng):
    for _ in range(20):
        mat = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        mat = mat + mat.conj().T
        g, _, _ = griffiths_min_matrix(mat, 2, 3)
        assert g >= nakano_min_eigenvalue(mat) - 1e-10


def test_euclidean_metric_is_flat_and_passes():
    m = ClosedFormDualMetric.parse([["1", "0"], ["0", "1"]], 2)
    rep = positivity_report(m, [[0, 0], [0.3, 0.1j]], C=0.0)
    assert rep.passed and rep.min_eig == pytest.approx(0, abs=1e-12)


def test_degenerate_points_are_reported_not_evaluated(example_h):
    v = positivity_at(example_h, [0.2, 0])
    assert v.status == "degenerate" and not v.passed
    rep = positivity_report(example_h, [[0.2, 0], [0.2, 0.3]], C=10.0)
    assert len(rep.evaluated) == 1


def test_fd_mode_matches_exact(example_h):
    a = positivity_at(example_h, [0.2, 0.4], C=1.0, mode="exact")
    b = positivity_at(example_h, [0.2, 0.4], C=1.0, mode="fd")
    assert b.nakano_min_eig == pytest.approx(a.nakano_min_eig, rel=1e-5)
