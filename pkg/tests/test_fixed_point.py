import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singular_series.banach_norms import NormConfig, g_norm, random_poly
from singular_series.fixed_point import (
    OperatorBundle, apply_DA, apply_DB, apply_M, build_bundle, contraction_factor,
    fixed_point_residual, integrate_W, picard_solve, psi_tables, random_series,
)
from singular_series.majorant import Caps, compute_psi, scalar_instance
from singular_series.problem import Structure
from singular_series.taylor_core import JetSeries, TruncatedPoly

CAP = 8


def P(level, coeffs):
    return TruncatedPoly(level, coeffs, CAP)


def zero_series(A):
    return JetSeries.zero(A, CAP)


def series(A, entries):
    terms = [P(a, {}) for a in range(A + 1)]
    for a, coeffs in entries.items():
        terms[a] = P(a, coeffs)
    return JetSeries(terms)


def bundle(S=3, ks=(0,), A=6, B=None, A_lift=None, B_lift=None, forcing=None):
    return OperatorBundle(S, ks, A, CAP, B or {}, A_lift or {}, B_lift or {},
                          forcing or zero_series(A))


def random_jet(rng, A):
    return JetSeries([random_poly(rng, a, 2, 3, degree_cap=CAP) for a in range(A + 1)])


def test_DA_examples():
    bd = bundle(A_lift={0: P(1, {(0, 0, 0, 1): 1.0})}, A=2)
    assert apply_DA(bd, series(2, {0: {(0, 0): 5.0}})).is_zero()
    out = apply_DA(bd, series(2, {0: {(0, 0, 1): 1.0}}))
    assert out[0].level == 1 and out[0].coeffs == {(0, 0, 0, 1): 1.0}


def test_DB_example():
    nu = 1.5
    bd = bundle(B_lift={0: P(1, {(0, 0, 0, 1): nu})}, A=2)
    out = apply_DB(bd, series(2, {0: {(0, 0, 2): 1.0}}))
    assert out[0].coeffs == {(0, 0, 1, 1): pytest.approx(2 * nu)}


def test_lifts_linear():
    rng = np.random.default_rng(0)
    lifts = {j: random_poly(rng, j + 1, 2, 3, degree_cap=CAP) for j in range(4)}
    bd = bundle(A_lift=lifts, B_lift=lifts, A=3)
    s, t = random_jet(rng, 3), random_jet(rng, 3)
    for op in (apply_DA, apply_DB):
        assert op(bd, s + t.scale(2j)).allclose(op(bd, s) + op(bd, t).scale(2j))


def test_integrate_W():
    s = series(4, {1: {(1, 0): 1.0}})
    once = integrate_W(s, 1)
    assert once[2].coeffs == {(1, 0): 1.0} and once[1].is_zero()
    rng = np.random.default_rng(1)
    r = random_jet(rng, 5)
    assert integrate_W(r, 2).allclose(integrate_W(integrate_W(r, 1), 1))
    assert all(integrate_W(r, 3)[a].is_zero() for a in range(3))
    with pytest.raises(ValueError):
        integrate_W(r, 0)


def test_M_zero_and_order_raising():
    st_ = Structure(3, (0,), 2.0, 2)
    b3 = [P(0, {(0, 0): 2.0})]
    bd = bundle(B={(3, 0): b3})
    assert apply_M(st_, bd, zero_series(6)).is_zero()
    s = series(6, {4: {(0, 0): 1.0}})
    assert apply_M(st_, bd, s).is_zero()
    s = series(6, {0: {(1, 0, 1): 1.0}})
    out = apply_M(st_, bd, s)
    assert out[3].coeffs == {(1, 0, 1): 2.0}
    assert all(out[a].is_zero() for a in range(3))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_M_raises_order(seed):
    rng = np.random.default_rng(seed)
    st_ = Structure(2, (0, 1), 2.0, 2)
    B = {(m, k): [random_poly(rng, 0, 1, 2, degree_cap=CAP) for _ in range(2)]
         for m in (1, 2, 3) for k in (0, 1)}
    lifts = {j: random_poly(rng, j + 1, 1, 2, degree_cap=CAP) for j in range(6)}
    bd = bundle(S=2, ks=(0, 1), A=5, B=B, A_lift=lifts, B_lift=lifts)
    out = apply_M(st_, bd, random_jet(rng, 5))
    assert out[0].is_zero()


def test_picard_trivial_cases():
    st_ = Structure(3, (0,), 2.0, 2)
    bd = bundle(B={(3, 0): [P(0, {(0, 0): 1.0})]})
    assert picard_solve(st_, bd).psi.is_zero()
    forcing = series(6, {0: {(0, 0): 1.0}, 2: {(1, 0): 3.0}})
    res = picard_solve(st_, bundle(forcing=forcing))
    assert res.psi.allclose(forcing)


def test_picard_matches_scalar_psi():
    A = 12
    structure, sups = scalar_instance(A)
    psi = compute_psi(structure, sups, A, caps=Caps(0, 0, 0), depth=False)
    res = picard_solve(structure, build_bundle(structure, sups, A, 4))
    tabs = psi_tables(res.psi)
    for a in range(A + 1):
        assert tabs[a][(0, 0)] == pytest.approx(psi.entry(a, (0, 0)), rel=1e-12)
    assert res.iterations <= A + 2


def test_picard_matches_psi_example(example1, sups12, bundle12):
    res = picard_solve(example1, bundle12)
    tabs = psi_tables(res.psi)
    psi = compute_psi(example1, sups12, 12)
    worst = 0.0
    for a in range(13):
        for key, v in psi.levels[a].items():
            if Caps().admits(key):
                worst = max(worst, abs(tabs[a].get(key, 0.0) - v) / v)
    assert worst <= 1e-12
    assert fixed_point_residual(example1, bundle12, res.psi) < 1e-12
    assert bundle12.is_nonnegative()


def test_contraction_zero_and_linear(example1, bundle12):
    cfg = example1.norm.with_(W_bar=0.5)
    empty = OperatorBundle(bundle12.S, bundle12.ks, bundle12.A, bundle12.degree_cap, {},
                           bundle12.A_lift, bundle12.B_lift, bundle12.forcing)
    assert contraction_factor(example1, empty, cfg, trials=3, sweep=False).factor == 0.0
    f1 = contraction_factor(example1, bundle12, cfg, trials=5, sweep=False).factor
    f3 = contraction_factor(example1, bundle12.scaled(3.0), cfg, trials=5, sweep=False).factor
    assert f3 == pytest.approx(3 * f1, rel=1e-10)


def test_contraction_example(example1, bundle12, wsearch):
    cfg = example1.norm.with_(W_bar=wsearch.W_bar)
    rep = contraction_factor(example1, bundle12, cfg, trials=50)
    assert rep.factor <= 0.5 and rep.sweep <= 0.5
    assert rep.factor <= rep.sweep * (1 + 1e-12)
    psi = picard_solve(example1, bundle12).psi
    assert g_norm(psi, cfg) <= 2 * g_norm(bundle12.forcing, cfg)


def test_random_series_unit_norm(bundle12):
    cfg = NormConfig()
    s = random_series(bundle12, cfg, np.random.default_rng(2))
    assert g_norm(s, cfg) == pytest.approx(1.0)


def test_low_order_bundle_needs_no_missing_lifts(example1, region1):
    from singular_series.majorant import build_sup_sequences
    A = 6
    sups = build_sup_sequences(example1, A, region1.nu, 2.0)
    bd = build_bundle(example1, sups, A, 12)
    cfg = example1.norm.with_(W_bar=0.5)
    rep = contraction_factor(example1, bd, cfg, trials=3)
    assert rep.factor >= 0.0
    assert picard_solve(example1, bd).psi.allclose(bd.forcing + apply_M(example1, bd, bd.forcing))
