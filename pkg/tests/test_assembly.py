import dataclasses
import math
import warnings

import numpy as np
import pytest

from singular_series.assembly import (
    assemble_U, assemble_Y, data_term, growth_profile, nested_compacts, phi_sup_chain,
    residual_id_u, residual_pde, sample_grid, u_sup, validate_constraints, w_samples,
    y_coefficients,
)
from singular_series.banach_norms import g_norm, zeta
from singular_series.characteristic_flow import calibrate
from singular_series.errors import ConfigurationError, ConstraintError
from singular_series.problem import Structure
from singular_series.series_recursion import compute_phi
from singular_series.taylor_core import poly_eval

from conftest import A_MAIN, make_problem


def truncate(phi, A):
    return dataclasses.replace(phi, A=A, phi_hat=phi.phi_hat[:A + 1], forcing=phi.forcing[:A + 1])


@pytest.fixture(scope="module")
def no_b_problem():
    return make_problem(drop=("pde.b_series",))


def test_minimal_S_is_ten():
    rep = validate_constraints(Structure(10, (0,), 2.0, 2))
    assert rep.ok and rep.min_S[0] == 10
    assert rep.bounds[0][0] == 10 and rep.binding[0].startswith("S ≥ k+1+max(")


def test_fourth_constraint_dominates():
    rep = validate_constraints(Structure(10, (0,), 2.0, 2, {(3, 0): 100}), raise_on_failure=False)
    assert not rep.ok and rep.min_S[0] == 200
    assert rep.binding[0] == "S ≥ k+b·d_{3,k}"


def test_S9_rejected_with_first_inequality():
    with pytest.raises(ConstraintError) as exc:
        validate_constraints(Structure(9, (0,), 2.0, 2))
    assert "S ≥ k+1+max(" in str(exc.value) and "10" in str(exc.value)


def test_every_violation_listed():
    dmk = {(1, 0): 1, (2, 0): 1, (3, 0): 1}
    rep = validate_constraints(Structure(1, (0,), 2.0, 2, dmk), raise_on_failure=False)
    assert [i for _, i, _, _ in rep.violations] == [0, 1, 2, 3]
    assert rep.bounds[0] == [12, 9, 3, 2]


def test_U_at_zero_w(example1, phi12, region1):
    t, z = 0.05, -0.02
    u0 = assemble_U(phi12, region1, t, z, 0, spec=example1.x)
    Y = y_coefficients(example1.x, phi12, example1.omega, example1.S, t, z, derivatives=False)[0]
    assert u0 == pytest.approx(Y[example1.S], rel=1e-14)


def test_Y_at_zero_w_is_omega0(example1, phi12, region1):
    t, z = 0.1, 0.07
    y0 = assemble_Y(phi12, region1, example1.omega, example1.S, t, z, 0, spec=example1.x)
    assert y0 == pytest.approx(poly_eval(example1.omega[0], [t, z, 0]), rel=1e-14)


def test_zero_phi_gives_data_polynomial(no_b_problem):
    phi = compute_phi(no_b_problem, 6)
    assert all(p.is_zero() for p in phi.phi_hat)
    t, z, w = 0.1, -0.1, 0.3
    assert assemble_U(phi, None, t, z, w, spec=no_b_problem.x) == 0
    y = assemble_Y(phi, None, no_b_problem.omega, no_b_problem.S, t, z, w, spec=no_b_problem.x)
    ref = sum(poly_eval(o, [t, z, 0]) * w ** j / math.factorial(j)
              for j, o in enumerate(no_b_problem.omega))
    assert y == pytest.approx(ref, rel=1e-14)


def test_missing_spec_and_radius_warning(example1, phi12, region1):
    with pytest.raises(ConfigurationError):
        assemble_U(phi12, region1, 0, 0, 0)
    with pytest.warns(UserWarning):
        assemble_U(phi12, region1, 0, 0, 0.6, spec=example1.x, W_bar=1.0)


def test_truncation_tail_decreases(example1, phi12, region1, wsearch):
    w = wsearch.W_bar / 2
    t, z = 0.1, 0.1
    vals = {A: assemble_U(truncate(phi12, A), region1, t, z, w, spec=example1.x)
            for A in range(4, A_MAIN + 1, 2)}
    tails = [abs(vals[A] - vals[A - 2]) for A in range(6, A_MAIN + 1, 2)]
    assert all(b < a for a, b in zip(tails, tails[1:]))


def test_initial_data_recovered_by_cauchy_integral(example1, phi12, region1):
    t, z = -0.05, 0.12
    n, r = 64, 0.3
    ws = r * np.exp(2j * np.pi * np.arange(n) / n)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        vals = np.array([assemble_Y(phi12, region1, example1.omega, example1.S, t, z, w,
                                    spec=example1.x) for w in ws])
    coeffs = np.fft.fft(vals) / n / r ** np.arange(n)
    for j in range(example1.S):
        ref = poly_eval(example1.omega[j], [t, z, 0]) if j < len(example1.omega) else 0
        got = coeffs[j] * math.factorial(j)
        assert abs(got - ref) <= 1e-6 * max(1.0, abs(ref))


def test_residual_zero_problem(zero_problem):
    phi = compute_phi(zero_problem, 6)
    rep = residual_pde(zero_problem, phi, sample_grid(zero_problem), w_samples(0.5))
    assert rep.max_residual == 0.0


def test_residual_without_b(no_b_problem):
    phi = compute_phi(no_b_problem, 6)
    rep = residual_pde(no_b_problem, phi, sample_grid(no_b_problem), w_samples(0.5))
    assert rep.max_residual == 0.0


def test_residual_example(example1, phi12, wsearch):
    pts, ws = sample_grid(example1), w_samples(wsearch.W_bar)
    assert len(pts) * len(ws) == 125
    r12 = residual_pde(example1, phi12, pts, ws)
    r8 = residual_pde(example1, truncate(phi12, 8), pts, ws)
    assert r12.max_residual < 1e-6 * r12.scale
    assert r8.max_residual >= 10 * r12.max_residual


def test_integral_equation_for_U(example1, phi12):
    assert residual_id_u(example1, phi12, sample_grid(example1, n=3)) < 1e-12


def test_nested_compacts_grow(example1):
    comps = nested_compacts(example1)
    assert len(comps) == 5
    for a, b in zip(comps, comps[1:]):
        assert len(b) == len(a) + 1 and np.array_equal(b[:len(a)], a)


@pytest.fixture(scope="module")
def profile(example1):
    return growth_profile(example1, A_MAIN)


def test_growth_profile_example(profile):
    assert len(profile.rows) >= 4 and not profile.skipped
    rhos = [r.rho for r in profile.rows]
    assert all(b > a for a, b in zip(rhos, rhos[1:]))
    assert profile.all_rows_pass and profile.slope_ok
    assert profile.slope_cap == pytest.approx(1.1 * math.pi ** 2 / 6)
    assert profile.C12 == pytest.approx(4 * (profile.W_bar / 2) ** 10 * profile.C11)


def test_growth_profile_without_b(no_b_problem):
    prof = growth_profile(no_b_problem, 6, W_bar=0.5)
    assert prof.slope == 0.0
    for row in prof.rows:
        assert row.excess == 0.0 and row.sup_abs_Y <= row.data_term * (1 + 1e-12)


def test_zeta_cap():
    assert zeta(2.0) == pytest.approx(1.6449340668, rel=1e-9)


def test_phi_sup_chain_and_U_bound(example1, phi12, bundle12, wsearch, region1):
    cfg = example1.norm.with_(rho=2.0, W_bar=wsearch.W_bar)
    c11 = g_norm(bundle12.forcing, cfg)
    for a, lhs, rhs in phi_sup_chain(example1, phi12, cfg, c11, 2.0, samples=16):
        assert lhs <= rhs
    bound = 4 * c11 * math.exp(cfg.sigma * zeta(cfg.b) * 2.0)
    assert u_sup(example1, phi12, region1.grid, wsearch.W_bar) <= bound


def test_data_term_matches_omega(example1):
    grid = [(0j, 0j)]
    ref = sum(abs(poly_eval(o, [0, 0, 0])) * 0.25 ** j / math.factorial(j)
              for j, o in enumerate(example1.omega))
    assert data_term(example1, grid, 0.5) == pytest.approx(ref)
