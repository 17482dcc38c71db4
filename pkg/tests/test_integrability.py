import math

import numpy as np
import pytest

from singherm import integrability as I
from singherm.metric import HolomorphicSection, SectionInducedMetric, example_sections
from singherm.sesqui import SesquiPolynomial
from singherm.parse import parse

FAST = dict(samples_per_shell=4000)


def test_constant_integrand_recovers_annulus_area():
    shells = I.shell_integrate(lambda X: np.ones(X.shape[0]), [0j], **FAST)
    for s in shells:
        assert s.value == pytest.approx(0.75 * math.pi * 4.0 ** (-s.k), rel=0.02)


def test_constant_integrand_recovers_shell_volume_in_c2():
    shells = I.shell_integrate(lambda X: np.ones(X.shape[0]), [0, 0], **FAST)
    for s in shells:
        assert s.value == pytest.approx(math.pi ** 2 / 2 * 16.0 ** (-s.k) * 15 / 16, rel=0.02)


@pytest.mark.parametrize("power,oracle", [
    (2, lambda k: 2 * math.pi * math.log(2)),
    (1, lambda k: math.pi * 2.0 ** (-k)),
])
def test_radial_power_shells_match_closed_form(power, oracle):
    shells = I.shell_integrate(lambda X: np.abs(X[:, 0]) ** (-power), [0], **FAST)
    for s in shells:
        assert s.value == pytest.approx(oracle(s.k), rel=0.02)


@pytest.mark.parametrize("a,expected", [(0.5, "convergent"), (0.9, "convergent"),
                                        (1.0, "divergent"), (1.5, "divergent")])
def test_one_variable_battery(a, expected):
    v = I.classify(I.shell_integrate(lambda X: np.abs(X[:, 0]) ** (-2 * a), [0]))
    assert v.classification == expected


@pytest.mark.parametrize("a", [1.0, 1.5, 2.0, 2.5])
def test_two_variable_radial_battery(a):
    v = I.classify(I.shell_integrate(lambda X: np.linalg.norm(X, axis=1) ** (-2 * a), [0, 0]))
    assert v.classification == ("convergent" if a < 2 else "divergent")


def test_hypersurface_singularity_is_divergent():
    v = I.classify(I.shell_integrate(lambda X: np.abs(X[:, 1]) ** -2.0, [0, 0]))
    assert v.classification == "divergent"


def test_zero_integrand_is_convergent():
    v = I.classify(I.shell_integrate(lambda X: np.zeros(X.shape[0]), [0]))
    assert v.classification == "convergent"


def test_hill_estimator_on_pareto_samples(rng):
    x = rng.pareto(2.0, 200_000) + 1
    assert I.hill_tail_index(x) == pytest.approx(2.0, rel=0.1)
    assert I.hill_tail_index(np.ones(5)) == math.inf


def _shells(values, err=1e-3):
    return [I.Shell(k, v, err * v) for k, v in zip(range(3, 3 + len(values)), values)]


def test_classify_synthetic_shells():
    assert I.classify(_shells([2.0 ** -k for k in range(8)])).classification == "convergent"
    assert I.classify(_shells([2.0 ** k for k in range(8)])).classification == "divergent"
    assert I.classify(_shells([1.0] * 8)).classification == "divergent"
    assert I.classify(_shells([2.0 ** (-0.05 * k) for k in range(8)], 1e-6)).classification \
        == "inconclusive"
    inf = _shells([1.0] * 8)
    inf[2] = I.Shell(5, math.inf, 0.0, infinite=True)
    assert I.classify(inf).classification == "divergent"
    with pytest.raises(ValueError):
        I.classify(_shells([1.0] * 4))


@pytest.mark.parametrize("sec,expected", [(["0", "1"], "divergent"), (["0", "w"], "convergent"),
                                          (["1", "0"], "convergent")])
def test_example_membership(sec, expected, example_h):
    v = I.eh_membership(example_h, HolomorphicSection.parse(sec, 2), (0.5, 0))
    assert v.classification == expected


def test_reduction_numerators_match_hand_computation():
    nums, weights = I.reduction_terms(example_sections(), HolomorphicSection.parse(["0", "1"], 2))
    assert nums == [parse("-1", 2), parse("-z", 2)]
    assert weights == [parse("w", 2)]
    nums, _ = I.reduction_terms(example_sections(), example_sections()[0])
    assert nums == [SesquiPolynomial.zero(2), parse("w", 2)]


@pytest.mark.parametrize("case", I.membership_corpus(), ids=lambda c: c["label"])
def test_reduction_agrees_with_direct_membership(case):
    a = I.eh_membership(SectionInducedMetric(case["sections"]), case["s"], case["center"])
    b = I.reduce_membership(case["sections"], case["s"], case["center"])
    assert a.classification == b.classification != "inconclusive"


def test_verdict_is_invariant_under_constant_rescaling(example_h):
    s = HolomorphicSection.parse(["0", "1"], 2)
    base = I.eh_membership(example_h, s, (0.5, 0), **FAST).classification
    for c in (1e-3, 1e3):
        scaled = SectionInducedMetric(example_sections(), base=np.eye(2) * c)
        assert not scaled.is_euclidean
        assert I.eh_membership(scaled, s, (0.5, 0), **FAST).classification == base


def test_deterministic_and_thread_independent(example_h):
    s = HolomorphicSection.parse(["0", "w"], 2)
    runs = [I.eh_membership(example_h, s, (0, 0), seed=7, threads=t, **FAST).to_dict()
            for t in (1, 1, 4)]
    assert runs[0] == runs[1] == runs[2]
    other = I.eh_membership(example_h, s, (0, 0), seed=8, **FAST).to_dict()
    assert other["shells"][0]["value"] != runs[0]["shells"][0]["value"]


def test_mismatched_section_is_rejected(example_h):
    with pytest.raises(ValueError):
        I.eh_membership(example_h, HolomorphicSection.parse(["1"], 2), (0, 0))
    with pytest.raises(ValueError):
        I.shell_integrate(lambda X: np.ones(len(X)), [0], k_min=5, k_max=4)
