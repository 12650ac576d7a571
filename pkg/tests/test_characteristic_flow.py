import numpy as np
import pytest

from singular_series.characteristic_flow import (
    XSpec, bivariate, calibrate, dt_dz_X_via_pde, eval_X, x_bijet, x_jets,
)
from singular_series.errors import CalibrationError, ConfigurationError, SingularPointError

SHIFT = XSpec("shift", f=(0.0, 1.0))
EXPO = XSpec("exponential", f=(0.0, 1.0))


def random_points(n, seed=0, scale=0.3):
    rng = np.random.default_rng(seed)
    return [(complex(*rng.normal(size=2) * scale), complex(*rng.normal(size=2) * scale))
            for _ in range(n)]


def test_eval_examples():
    assert eval_X(SHIFT, 0, 0.5) == pytest.approx(0.5)
    assert eval_X(SHIFT, 0.5, 0.5) == pytest.approx(2.0)
    assert eval_X(EXPO, 0, 0.3 + 0.1j) == pytest.approx(0.3 + 0.1j)


def test_singular_point_detected():
    with pytest.raises(SingularPointError) as info:
        eval_X(SHIFT, 1.0, 0.0)
    assert info.value.distance < 1e-12
    with pytest.raises(SingularPointError):
        x_jets(SHIFT, 1.0, 0.0, 3, 1.0)


def test_x_jets_base_and_first_order():
    for t, z in random_points(5):
        assert x_jets(SHIFT, t, z, 4, 1.0)[0] == pytest.approx(eval_X(SHIFT, t, z))
    assert x_jets(SHIFT, 0, 0.5, 2, 1.0)[1] == pytest.approx(1.0)


def test_x_jets_against_sympy():
    import sympy
    t, z = sympy.symbols("t z")
    X = (t + z) / (1 - t * (t + z))
    t0, z0 = 0.2, -0.1
    jets = x_jets(SHIFT, t0, z0, 4, 2.0)
    for h in range(5):
        ref = complex(sympy.diff(X, z, h).subs({t: t0, z: z0})) / (sympy.factorial(h) * 2.0 ** h)
        assert jets[h] == pytest.approx(complex(ref), rel=1e-12)


@pytest.mark.parametrize("spec", [SHIFT, EXPO])
def test_pde_consistency(spec):
    for t, z in random_points(20, seed=1):
        c = x_bijet(spec, t, z, 2, 2)
        dt, dz, X = c[1, 0], c[0, 1], c[0, 0]
        a = spec.a.eval_many(np.array([[t, z, 0]]))[0]
        rhs = a * dz + sum(p.eval_many(np.array([[t, z, 0]]))[0] * X ** i
                           for i, p in enumerate(spec.a_p))
        assert dt == pytest.approx(rhs, rel=1e-8)
    c = x_bijet(SHIFT, 0, 0.5, 2, 2)
    assert c[1, 0] == pytest.approx(1.25)


def test_mixed_partials_two_ways():
    for t, z in random_points(6, seed=2):
        direct = x_bijet(SHIFT, t, z, 2, 8)[1, :7]
        via_pde = dt_dz_X_via_pde(SHIFT, t, z, 6)
        np.testing.assert_allclose(via_pde, direct, rtol=1e-8)


def test_jet_predicts_nearby_values():
    t, z = 0.1, 0.05
    H = 4
    jets = x_jets(SHIFT, t, z, H, 1.0)
    for dz in (0.02, 0.04):
        pred = sum(jets[h] * dz ** h for h in range(H + 1))
        assert abs(pred - eval_X(SHIFT, t, z + dz)) < 50 * dz ** (H + 1) + 1e-14


def test_calibrate_zero_datum():
    spec = XSpec("shift", f=(0.0,))
    reg = calibrate(spec, [(0.1, 0.1), (0.0, 0.0)], 2.0, 5)
    assert np.all(reg.margins == 0)


def test_calibrate_example_grid():
    grid = [(t, z) for t in np.linspace(-0.2, 0.2, 3) for z in np.linspace(-0.2, 0.2, 3)]
    reg = calibrate(SHIFT, grid, 2.0, 8)
    assert np.isfinite(reg.nu) and np.all(reg.margins <= 1)
    with pytest.raises(ConfigurationError):
        calibrate(SHIFT, grid, 1.0, 8)
    with pytest.raises(CalibrationError):
        calibrate(SHIFT, [(0.5, 0.5)], 2.0, 4)


def test_margins_do_not_grow_with_nu():
    grid = [(0.1, 0.0), (-0.1, 0.2)]
    reg = calibrate(SHIFT, grid, 3.0, 6)
    raw = np.array([np.abs(x_jets(SHIFT, t, z, 6, 1.0)) for t, z in grid]).max(axis=0)
    h = np.arange(7)
    m1 = raw / reg.nu ** h
    m2 = raw / (2 * reg.nu) ** h
    assert np.all(m2 <= m1)


def test_xspec_validation():
    with pytest.raises(ConfigurationError):
        XSpec("shift", d=1)
    with pytest.raises(ConfigurationError):
        XSpec("cubic")
    with pytest.raises(ConfigurationError):
        XSpec("shift", a=bivariate({(0, 0): 2.0}))
    user = XSpec("user", expression="f(t + z) / (1 - t * f(t + z))", denominator="1 - t * f(t + z)",
                 a=bivariate({(0, 0): 1.0}), a_p=SHIFT.a_p)
    assert eval_X(user, 0.3, 0.1) == pytest.approx(eval_X(SHIFT, 0.3, 0.1))
