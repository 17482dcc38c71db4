import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singherm import _fd
from singherm.parse import ParseError, parse, to_string
from singherm.sesqui import (HoloPolynomial, Monomial, SesquiPolynomial, determinant,
                             is_hermitian, matrix_evaluate)

N = 2

coeffs = st.complex_numbers(min_magnitude=0, max_magnitude=5, allow_nan=False,
                            allow_infinity=False, allow_subnormal=False)
exps = st.tuples(st.integers(0, 2), st.integers(0, 2))
monos = st.builds(Monomial, exps, exps)
polys = st.dictionaries(monos, coeffs, max_size=4).map(lambda d: SesquiPolynomial(N, d))
points = st.tuples(coeffs, coeffs).map(lambda t: np.array(t, dtype=complex) / 5)


def naive(p, x):
    """Term-by-term sum with Python powers, independent of the library evaluator."""
    total = 0j
    for m, c in p.terms:
        v = complex(c)
        for k in range(p.n):
            v *= complex(x[k]) ** m.alpha[k] * complex(x[k]).conjugate() ** m.beta[k]
        total += v
    return total


def close(a, b, scale=1.0):
    return abs(a - b) <= 1e-9 * (1 + scale)


def test_parse_modulus_plus_one_is_canonical():
    p = parse("z*conj(z) + 1", 2)
    assert p.as_dict() == {Monomial((1, 0), (1, 0)): 1, Monomial((0, 0), (0, 0)): 1}


def test_aliases_and_literals():
    assert parse("w", 2) == parse("z2", 2)
    assert parse("z", 2) == parse("z1", 2)
    assert parse("2.5i", 1) == SesquiPolynomial.constant(1, 2.5j)
    assert parse("(1+2i)*z^2", 1).as_dict() == {Monomial((2,), (0,)): 1 + 2j}
    assert parse("conj(z + i)", 1) == parse("conj(z) - i", 1)


def test_parse_errors_report_position():
    with pytest.raises(ParseError) as err:
        parse("z**", 1)
    assert err.value.position == 2
    with pytest.raises(ParseError):
        parse("z3", 2)
    with pytest.raises(ParseError):
        parse("(z", 1)


def test_zero_prints_as_zero_and_cancels():
    p = parse("z*w - w*z", 2)
    assert p.is_zero and to_string(p) == "0"


@settings(max_examples=60, deadline=None)
@given(polys)
def test_print_parse_roundtrip(p):
    assert parse(to_string(p), N) == p


@settings(max_examples=60, deadline=None)
@given(polys, polys, points)
def test_evaluation_is_a_ring_homomorphism(p, q, x):
    s = abs(naive(p, x)) * abs(naive(q, x)) + abs(naive(p, x)) + abs(naive(q, x))
    assert close((p + q).evaluate(x), naive(p, x) + naive(q, x), s)
    assert close((p * q).evaluate(x), naive(p, x) * naive(q, x), s)
    assert close(p.conj().evaluate(x), np.conj(naive(p, x)), s)


@settings(max_examples=40, deadline=None)
@given(polys, polys, polys)
def test_ring_axioms_are_exact_on_integer_coefficients(p, q, r):
    # round coefficients to small integers so float arithmetic is exact
    def integral(a):
        return SesquiPolynomial(N, {m: complex(round(c.real), round(c.imag)) for m, c in a.terms})
    p, q, r = integral(p), integral(q), integral(r)
    assert p * q == q * p
    assert p * (q + r) == p * q + p * r
    assert (p * q).conj() == p.conj() * q.conj()
    assert p - p == SesquiPolynomial.zero(N)


def test_batch_evaluation_matches_pointwise(rng):
    p = parse("3*z^2*conj(w) - (1-2i)*w + conj(z)*conj(w)^2", 2)
    X = rng.normal(size=(7, 2)) + 1j * rng.normal(size=(7, 2))
    batch = p.evaluate(X)
    for x, v in zip(X, batch):
        assert close(v, naive(p, x), abs(v))


@settings(max_examples=30, deadline=None)
@given(polys, points)
def test_wirtinger_derivatives_match_finite_differences(p, x):
    def f(X):
        return p.evaluate(X), np.ones(len(X), dtype=bool)

    _, d, db, dd = _fd.wirtinger_derivatives(f, x)
    scale = 1 + sum(abs(c) for _, c in p.terms)
    for k in range(N):
        assert abs(p.d(k + 1).evaluate(x) - d[k]) <= 1e-7 * scale
        assert abs(p.dbar(k + 1).evaluate(x) - db[k]) <= 1e-7 * scale
        for j in range(N):
            assert abs(p.d(k + 1).dbar(j + 1).evaluate(x) - dd[k, j]) <= 1e-6 * scale


def test_derivative_rules():
    z = SesquiPolynomial.coordinate(2, 1)
    zb = SesquiPolynomial.coordinate(2, 1, conjugate=True)
    assert (z ** 3 * zb).d(1) == (z ** 2 * zb).scale(3)
    assert (z ** 3 * zb).dbar(1) == z ** 3
    assert (z ** 3).dbar(1).is_zero
    assert (z * zb).d(2).is_zero


def test_holopolynomial_rejects_conjugates():
    with pytest.raises(ValueError):
        HoloPolynomial.from_poly(parse("conj(z)", 1))
    assert HoloPolynomial.from_poly(parse("z^2 + 1", 1)).is_holomorphic


def test_determinant_matches_numpy(rng):
    for r in (1, 2, 3):
        mat = [[parse(f"{rng.integers(-3, 4)}*z + {rng.integers(-3, 4)}*conj(w) + {rng.integers(1, 4)}", 2)
                for _ in range(r)] for _ in range(r)]
        det = determinant(mat)
        x = rng.normal(size=2) + 1j * rng.normal(size=2)
        assert close(det.evaluate(x), np.linalg.det(matrix_evaluate(mat, x)), 10)


def test_is_hermitian_is_symbolic():
    good = [[parse("z*conj(z)+1", 2), parse("z*conj(w)", 2)],
            [parse("w*conj(z)", 2), parse("w*conj(w)", 2)]]
    bad = [[parse("z*conj(z)+1", 2), parse("z*conj(w)", 2)],
           [parse("z*conj(w)", 2), parse("w*conj(w)", 2)]]
    assert is_hermitian(good)
    assert not is_hermitian(bad)


def test_scalar_and_batch_paths_agree_exactly_for_canonical_order():
    p = parse("z^2*conj(z) + 2*w", 2)
    x = np.array([0.3 + 0.1j, -0.2j])
    assert close(p.evaluate(x), p.evaluate(x[None, :])[0])


@pytest.mark.parametrize("text", ["", "z +", "conj z", "z^-1", "1..2"])
def test_malformed_inputs(text):
    with pytest.raises(ParseError):
        parse(text, 2)


def test_terms_are_sorted_by_degree_then_exponents():
    p = parse("z*conj(w) + 5 + w + z", 2)
    degrees = [m.degree for m, _ in p.terms]
    assert degrees == sorted(degrees) and degrees[0] == 0
