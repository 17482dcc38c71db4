import numpy as np
import pytest

from singherm.metric import (Chart, ClosedFormDualMetric, PointwiseMetric, example_closed_forms,
                             pullback_metric)
from singherm.psh import (DualUndefinedError, ScalarField, levi_test, negativity_verdict,
                          norm_field, positivity_verdict, random_section, submean_test)
from singherm.sesqui import HoloPolynomial, Monomial

CHART2 = Chart(2, [0, 0], 1.0)
CHART1 = Chart(1, [0], 1.0)
FAST = {"points": 60, "directions": 4}

SMOOTH = {
    "|z|^2": (lambda X: np.abs(X[..., 0]) ** 2, True),
    "-|z|^2": (lambda X: -np.abs(X[..., 0]) ** 2, False),
    "Re z^3": (lambda X: np.real(X[..., 0] ** 3), True),
    "log(|z|^2+1)": (lambda X: np.log(np.abs(X[..., 0]) ** 2 + 1), True),
    "|z|^2-2|w|^2": (lambda X: np.abs(X[..., 0]) ** 2 - 2 * np.abs(X[..., 1]) ** 2, False),
    "|z|^2+|w|^2": (lambda X: np.abs(X[..., 0]) ** 2 + np.abs(X[..., 1]) ** 2, True),
}


@pytest.mark.parametrize("label", SMOOTH)
def test_submean_and_levi_agree_on_smooth_corpus(label):
    f, expected = SMOOTH[label]
    u = ScalarField(f, 2, label)
    assert submean_test(u, CHART2).passed is expected
    assert levi_test(u, CHART2).passed is expected


def test_log_modulus_is_psh_despite_singular_locus():
    u = ScalarField(lambda X: np.log(np.abs(X[..., 1])), 2, "log|w|")
    for seed in range(5):
        rep = submean_test(u, CHART2, seed=seed)
        assert rep.passed and rep.unresolved_samples == 0
    assert levi_test(u, CHART2).passed


def test_negative_square_violation_is_radius_squared():
    rep = submean_test(ScalarField(lambda X: -np.abs(X[..., 0]) ** 2, 1), CHART1)
    rho = rep.worst_radius
    assert rho == pytest.approx(0.2)
    assert rep.worst_violation == pytest.approx(rho ** 2, rel=1e-9)


@pytest.mark.parametrize("k", [1, 3, 7])
def test_circle_rule_is_exact_below_sample_count(k):
    u = ScalarField(lambda X: np.real(X[..., 0] ** k), 1)
    rep = submean_test(u, CHART1, circle_samples=8, tol=0.0)
    assert abs(rep.worst_violation) <= 1e-12


def test_infinite_values_follow_usc_conventions():
    plus = submean_test(ScalarField(lambda X: np.full(X.shape[:-1], np.inf), 1), CHART1, **FAST)
    assert plus.passed and plus.infinite_centers == 60
    minus = submean_test(ScalarField(lambda X: np.full(X.shape[:-1], -np.inf), 1), CHART1, **FAST)
    assert minus.passed


def test_report_invariant_passed_iff_within_tolerance():
    for f, _ in SMOOTH.values():
        rep = submean_test(ScalarField(f, 2), CHART2, **FAST)
        assert rep.passed == (rep.worst_violation <= rep.worst_tolerance)


def test_radii_must_fit_in_chart():
    with pytest.raises(ValueError):
        submean_test(ScalarField(lambda X: X[..., 0].real, 1), CHART1, radii=[1.5])


def test_levi_values():
    small = Chart(1, [0], 0.01)
    rep = levi_test(ScalarField(lambda X: np.log(np.abs(X[..., 0]) ** 2 + 1), 1), small)
    assert -rep.worst_violation == pytest.approx(1.0, abs=1e-3)
    rep = levi_test(ScalarField(lambda X: np.abs(X[..., 0]) ** 2 + np.abs(X[..., 1]) ** 2, 2), CHART2)
    assert -rep.worst_violation == pytest.approx(1.0, abs=1e-6)
    rep = levi_test(ScalarField(SMOOTH["|z|^2-2|w|^2"][0], 2), CHART2)
    assert rep.worst_violation == pytest.approx(2.0, abs=1e-6) and not rep.passed


def test_euclidean_metric_is_negatively_and_positively_curved():
    m = ClosedFormDualMetric.parse([["1", "0"], ["0", "1"]], 2)
    assert negativity_verdict(m, CHART2, trials=5, **FAST).passed
    assert positivity_verdict(m, CHART2, trials=5, **FAST).passed


def test_example_dual_is_negatively_curved():
    hd = example_closed_forms(0.1)["h_dual"]
    rep = negativity_verdict(hd, CHART2, trials=10, **FAST)
    assert rep.passed and rep.sections_tested == 12


def test_example_quotient_metric_is_positively_curved(example_h):
    rep = positivity_verdict(example_h, CHART2, trials=50)
    assert rep.passed and rep.sections_tested == 52


def test_concave_weight_fails_negativity():
    m = PointwiseMetric(lambda X: (1 - np.abs(X[..., 0]) ** 2 / 2)[..., None, None] + 0j, 1, 1)
    rep = negativity_verdict(m, CHART1, trials=3, **FAST)
    assert not rep.passed and rep.worst_point is not None


def test_positivity_mirrors_negativity_of_dual():
    # dual weight 1 - |z|^2/2 is not psh, so the metric is not positively curved
    m = PointwiseMetric(lambda X: (1 / (1 - np.abs(X[..., 0]) ** 2 / 2))[..., None, None] + 0j, 1, 1)
    assert not positivity_verdict(m, CHART1, trials=3, **FAST).passed


def test_undefined_dual_is_an_error():
    m = PointwiseMetric(lambda X: np.zeros(X.shape[:-1] + (1, 1), dtype=complex), 1, 1)
    with pytest.raises(DualUndefinedError):
        positivity_verdict(m, CHART1)


def _random_phi(rng, rE, rF):
    zero = (0, 0)
    return [[HoloPolynomial(2, {Monomial(e, zero): complex(*rng.normal(size=2))
                                for e in [(0, 0), (1, 0), (0, 1)]}) for _ in range(rF)]
            for _ in range(rE)]


@pytest.mark.parametrize("pair", range(10))
def test_pullback_preserves_negativity(pair):
    rng = np.random.default_rng(pair)
    base = [ClosedFormDualMetric.parse([["1", "0"], ["0", "1"]], 2),
            example_closed_forms(0.1)["h_dual_eps"]][pair % 2]
    pb = pullback_metric(base, _random_phi(rng, 1 + pair % 3, 2))
    assert negativity_verdict(pb, CHART2, trials=3, seed=pair, **FAST).passed


@pytest.mark.parametrize("which", ["euclidean", "h_dual_eps", "exp_weight"])
def test_log_norms_pass_when_norms_pass(which, rng):
    if which == "euclidean":
        m, chart = ClosedFormDualMetric.parse([["1", "0"], ["0", "1"]], 2), CHART2
    elif which == "h_dual_eps":
        m, chart = example_closed_forms(0.1)["h_dual_eps"], CHART2
    else:
        m = PointwiseMetric(lambda X: np.exp(np.abs(X[..., 0]) ** 2)[..., None, None] + 0j, 1, 1)
        chart = CHART1
    assert negativity_verdict(m, chart, trials=4, **FAST).passed
    assert negativity_verdict(m, chart, trials=4, log=True, **FAST).passed


def test_random_sections_are_seeded():
    a = random_section(np.random.default_rng(3), 2, 2, 2)
    b = random_section(np.random.default_rng(3), 2, 2, 2)
    assert a == b
    assert all(abs(c) <= 1 for p in a.components for _, c in p.terms)


def test_norm_field_marks_unvalued_points_infinite(example_h):
    from singherm.metric import HolomorphicSection
    u = norm_field(example_h, HolomorphicSection.parse(["0", "1"], 2))
    assert u(np.array([[0.3, 0.0]]))[0] == np.inf
