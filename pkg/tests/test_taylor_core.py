import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singular_series.errors import ConfigurationError
from singular_series.taylor_core import (
    V0, V1, U, JetSeries, MultiIndex, TruncatedPoly, canon, from_divided, multinomial_split_weight,
    poly_diff, poly_embed, poly_eval, poly_mul, to_divided,
)


def P(level, coeffs, cap=6):
    return TruncatedPoly(level, coeffs, cap)


# keys are (n0, n1, l0, l1, ..)
U0 = P(0, {(0, 0, 1): 1})


def poly_strategy(level=1, max_terms=5, max_exp=2, cap=6):
    nvar = level + 3
    key = st.tuples(*[st.integers(0, max_exp)] * nvar)
    coeff = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)
    return st.dictionaries(key, coeff, max_size=max_terms).map(lambda d: P(level, d, cap))


def test_canonical_keys_trim_trailing_zeros():
    assert canon((1, 0, 2, 0, 0)) == (1, 0, 2)
    assert canon(()) == (0, 0)
    assert MultiIndex(1, 2, (0, 3, 0)).l == (0, 3)


def test_mul_example():
    p = P(0, {(1, 0): 1, (0, 0, 1): 1}, cap=2)
    q = P(0, {(0, 0, 1): 1}, cap=2)
    assert poly_mul(p, q).coeffs == {(1, 0, 1): 1, (0, 0, 2): 1}


def test_mul_identity_and_truncation():
    p = P(1, {(1, 0, 0, 2): 2 + 1j, (0, 0, 1): -1}, cap=3)
    one = TruncatedPoly.constant(1, 0, 3)
    assert poly_mul(p, one).coeffs == p.coeffs
    assert poly_mul(p, p).degree() <= 3


def test_mul_cap_mismatch():
    with pytest.raises(ConfigurationError):
        poly_mul(P(0, {(1, 0): 1}, 2), P(0, {(1, 0): 1}, 3))


def test_mul_matches_bruteforce():
    rng = np.random.default_rng(3)
    keys = [k for k in itertools.product(range(3), repeat=3) if sum(k) <= 2]
    for _ in range(20):
        a = {k: complex(*rng.normal(size=2)) for k in keys if rng.random() < 0.5}
        b = {k: complex(*rng.normal(size=2)) for k in keys if rng.random() < 0.5}
        ref = {}
        for ka, ca in a.items():
            for kb, cb in b.items():
                key = canon(tuple(x + y for x, y in zip(ka, kb)))
                ref[key] = ref.get(key, 0) + ca * cb
        got = poly_mul(P(0, a, 4), P(0, b, 4)).coeffs
        assert set(got) == {k for k, v in ref.items() if v != 0}
        for k, v in got.items():
            assert v == pytest.approx(ref[k], rel=1e-12)


def test_diff_examples():
    assert poly_diff(P(0, {(0, 0, 2): 1}), U(0)).coeffs == {(0, 0, 1): 2}
    assert poly_diff(P(0, {(1, 0): 1}), V1).is_zero()
    p = P(1, {(1, 0, 0, 3): 1})
    assert poly_diff(p, U(1)).coeffs == {(1, 0, 0, 2): 3}
    with pytest.raises(IndexError):
        poly_diff(P(0, {(1, 0): 1}), U(1))


def test_diff_against_finite_difference():
    p = P(1, {(1, 0, 0, 3): 1})
    dp = poly_diff(p, U(1))
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(5):
        x = rng.normal(size=4) + 1j * rng.normal(size=4)
        xp = x.copy()
        xp[3] += h
        xm = x.copy()
        xm[3] -= h
        fd = (poly_eval(p, xp) - poly_eval(p, xm)) / (2 * h)
        assert fd == pytest.approx(poly_eval(dp, x), rel=1e-6)


def test_embed():
    e = poly_embed(U0, 3)
    assert e.level == 3 and e.coeffs == {(0, 0, 1): 1}
    assert poly_eval(e, [1, 2, 5, 7, 8, 9]) == poly_eval(U0, [1, 2, 5])
    with pytest.raises(IndexError):
        poly_embed(e, 1)


def test_embed_keeps_divided_table():
    p = P(1, {(2, 1, 0, 1): 0.5, (0, 0, 3): 2j})
    assert to_divided(poly_embed(p, 4)) == to_divided(p)


def test_eval_examples():
    assert poly_eval(P(0, {(1, 0, 1): 1}), (2, 5, 3)) == 6
    assert poly_eval(TruncatedPoly.constant(7, 2), [9] * 5) == 7
    with pytest.raises(IndexError):
        poly_eval(U0, (1, 2))


def test_eval_many_matches_naive():
    rng = np.random.default_rng(5)
    p = P(2, {(1, 2, 0, 1): 1 + 2j, (0, 0, 2, 0, 1): -0.5, (0, 0): 3})
    pts = rng.normal(size=(7, 5)) + 1j * rng.normal(size=(7, 5))
    naive = [sum(c * np.prod([x ** e for x, e in zip(pt, k)]) for k, c in p.coeffs.items())
             for pt in pts]
    np.testing.assert_allclose(p.eval_many(pts), naive, rtol=1e-12)


def test_multinomial_split_weight():
    assert multinomial_split_weight((2, 0), [(1, 0), (1, 0)]) == 2
    m = (2, 1, 2)
    assert multinomial_split_weight(m, [m, (0, 0)]) == 1
    assert multinomial_split_weight(m, [(1, 0, 1), (1, 1, 1)]) == 4
    assert multinomial_split_weight((3, 0), [(1, 0), (1, 0), (1, 0)]) == 6
    with pytest.raises(ValueError):
        multinomial_split_weight((2, 0), [(1, 0), (0, 0)])


def test_divided_roundtrip():
    table = {(1, 0, 2): 4.0, (0, 3): -6.0, (0, 0): 1.5}
    p = from_divided(table, 0, 6)
    assert p.coeffs == {(1, 0, 2): 2.0, (0, 3): -1.0, (0, 0): 1.5}
    assert to_divided(p) == table


def test_jetseries_arithmetic():
    s = JetSeries([U0, P(1, {(0, 0, 0, 1): 2})])
    assert s.A == 1 and (s - s).is_zero()
    assert (s + s).allclose(s.scale(2))
    with pytest.raises(ValueError):
        JetSeries([U0, P(1, {(0, 0, 0, 1): 2}, cap=3)])


@settings(max_examples=40, deadline=None)
@given(poly_strategy(), poly_strategy(), poly_strategy())
def test_mul_associative_distributive(p, q, r):
    assert poly_mul(poly_mul(p, q), r).allclose(poly_mul(p, poly_mul(q, r)), rtol=1e-12, atol=1e-12)
    assert poly_mul(p, q + r).allclose(poly_mul(p, q) + poly_mul(p, r), rtol=1e-12, atol=1e-12)
    assert poly_mul(p, q).allclose(poly_mul(q, p), rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(poly_strategy(level=2))
def test_mixed_partials_commute(p):
    for i, j in [(U(0), U(2)), (V0, U(1)), (V1, V0)]:
        assert poly_diff(poly_diff(p, i), j).allclose(poly_diff(poly_diff(p, j), i))


@settings(max_examples=40, deadline=None)
@given(poly_strategy(max_exp=1, cap=12), poly_strategy(max_exp=1, cap=12),
       st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
                min_size=4, max_size=4))
def test_eval_is_multiplicative_below_cap(p, q, x):
    lhs = poly_eval(poly_mul(p, q), x)
    rhs = poly_eval(p, x) * poly_eval(q, x)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3)),
                       st.floats(-5, 5).filter(lambda v: v != 0), max_size=6))
def test_divided_involution(table):
    table = {canon(k): v for k, v in table.items() if sum(k) <= 6}
    p = from_divided(table, 0, 6)
    back = to_divided(p)
    assert set(back) == set(table)
    for k in table:
        assert back[k] == pytest.approx(table[k], rel=1e-12)
