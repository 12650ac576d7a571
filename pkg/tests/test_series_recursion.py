import math
from types import SimpleNamespace

import pytest

from singular_series.characteristic_flow import XSpec, bivariate
from singular_series.errors import ConfigurationError
from singular_series.series_recursion import (
    build_Aj, build_Bj, compositions, compute_phi, omega_hat,
)
from singular_series.taylor_core import U, poly_diff, poly_embed

from conftest import make_problem

SHIFT = XSpec("shift", f=(0.0, 1.0))


def unit_problem():
    """S=10, k=0, b3 = 1, omega_0 = 1."""
    return make_problem({"pde": {"b_series": {"0": {"b3": ["1"]}}}, "data": {"omega": ["1"]}},
                        drop=("pde.b_series", "data.omega"))


def test_A0_example_data():
    A0 = build_Aj(0, 1, SHIFT, 1.0, 6)
    assert A0.coeffs == {(0, 0, 0, 1): 1, (0, 0, 2): 1}


def test_Aj_vanishes_for_zero_coefficients():
    zero = bivariate({})
    spec = SimpleNamespace(a=zero, a_p=(zero, zero, zero))
    assert build_Aj(2, 3, spec, 1.0, 6).is_zero()


def test_Aj_level_and_nu_scaling():
    with pytest.raises(IndexError):
        build_Aj(2, 2, SHIFT, 1.0, 6)
    A1 = build_Aj(1, 2, SHIFT, 2.0, 6)
    # 2 nu U2 + 2 U0 U1 for the shift family
    assert A1.coeffs == {(0, 0, 0, 0, 1): 4.0, (0, 0, 1, 1): 2.0}


def test_composition_count():
    assert len(compositions(2, 3)) == 6
    assert len(compositions(4, 3)) == math.comb(6, 2)
    assert all(sum(c) == 4 for c in compositions(4, 3))


def test_Bj():
    assert build_Bj(0, 1, 2.0).coeffs == {(0, 0, 0, 1): 2.0}
    assert build_Bj(3, 4, 1.0).coeffs == {(0, 0, 0, 0, 0, 0, 1): 4.0}
    b = build_Bj(2, 5, 1.5)
    assert poly_diff(b, U(3)).coeffs == {(0, 0): 4.5}
    with pytest.raises(IndexError):
        build_Bj(1, 1, 1.0)


def test_omega_hat_examples():
    p = make_problem({"pde": {"b_series": {"0": {"b3": ["1"]}}}, "data": {"omega": ["t"]}},
                     drop=("pde.b_series", "data.omega"))
    assert omega_hat(0, p.coeffs, p.omega).coeffs == {(1, 0): 1}
    z = make_problem(drop=("data.omega",))
    assert all(omega_hat(a, z.coeffs, z.omega).is_zero() for a in range(5))


def test_omega_hat_vanishes_past_data(example1):
    wdeg = example1.coeffs.w_degree()
    top = example1.S + max(example1.ks) + wdeg
    assert omega_hat(top, example1.coeffs, example1.omega).is_zero()
    assert not omega_hat(0, example1.coeffs, example1.omega).is_zero()


def test_unit_problem_unrolls():
    fam = compute_phi(unit_problem(), 20)
    phi = fam.phi
    for a in range(21):
        if a in (0, 10, 20):
            assert phi[a].coeffs == {(0, 0): pytest.approx(1.0)}
        else:
            assert phi[a].is_zero()
    assert fam.provenance[10] == [(0, 10)]


def test_zero_b_gives_forcing():
    p = make_problem(drop=("pde.b_series",))
    fam = compute_phi(p, 8)
    for a in range(9):
        assert fam[a].allclose(poly_embed(fam.forcing[a], a), rtol=1e-14)


def test_low_orders_equal_forcing(example1, phi12):
    gap = min(example1.S - k for k in example1.ks)
    for a in range(gap):
        assert phi12[a].allclose(poly_embed(phi12.forcing[a], a), rtol=1e-14)
    assert phi12[0].coeffs == phi12.forcing[0].coeffs


def test_levels_and_padding(example1, region1):
    plain = compute_phi(example1, 12, nu=region1.nu)
    padded = compute_phi(example1, 12, nu=region1.nu, pad=True)
    for a in range(13):
        assert plain[a].level == a
        assert plain[a].allclose(padded[a], rtol=1e-13)


def test_degree_cap_is_not_binding(example1, region1):
    base = compute_phi(example1, 12, nu=region1.nu)
    assert not base.truncated
    wider = compute_phi(example1.with_cap(14), 12, nu=region1.nu)
    for a in range(13):
        assert base[a].allclose(wider[a].with_cap(base.degree_cap), rtol=1e-12)


def test_missing_x_coefficients():
    with pytest.raises(ConfigurationError):
        build_Aj(0, 1, SHIFT, 0.0, 6)
