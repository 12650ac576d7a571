"""The singular function X(t, z), its scaled z-jets, and compact calibration.

X solves ``dX/dt = a dX/dz + sum_p a_p X**p`` with ``X(0, z) = f(z)``.  Two
closed-form families are built in:

* ``shift``:       a = 1, a_2 = 1,  X = f(t+z) / (1 - t f(t+z))
* ``exponential``: a = z, a_2 = 1,  X = f(e^t z) / (1 - t f(e^t z))

A ``user`` family accepts a closed-form expression in ``t``, ``z`` (with
``f`` and ``exp`` available) plus its own ``a`` and ``a_p``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, ConfigurationError, SingularPointError
from .jets import Jet2, exp, horner
from .taylor_core import TruncatedPoly

SINGULAR_TOL = 1e-12
_BIVARIATE_CAP = 64


def bivariate(coeffs: dict) -> TruncatedPoly:
    """Polynomial in (v0, v1) from ``{(n0, n1): c}``."""
    return TruncatedPoly(0, coeffs, _BIVARIATE_CAP)


def _const(c) -> TruncatedPoly:
    return bivariate({(0, 0): c} if c else {})


@dataclass(frozen=True)
class XSpec:
    family: str
    f: tuple = (0.0, 1.0)
    a: TruncatedPoly | None = None
    a_p: tuple | None = None
    d: int = 2
    R_prime: float = 2.0
    expression: str | None = None
    denominator: str | None = None

    def __post_init__(self):
        fam = self.family
        if fam not in ("shift", "exponential", "user"):
            raise ConfigurationError(f"x.family: unknown family {fam!r}")
        object.__setattr__(self, "f", tuple(complex(c) for c in self.f))
        if self.d < 2:
            raise ConfigurationError("x.d: need d >= 2")
        if fam == "user":
            if self.expression is None:
                raise ConfigurationError("x.expression: required for the user family")
            if self.a is None or self.a_p is None:
                raise ConfigurationError("x.a / x.a_p: required for the user family")
        else:
            ref_a = _const(1.0) if fam == "shift" else bivariate({(0, 1): 1.0})
            ref_ap = tuple(_const(1.0 if p == 2 else 0.0) for p in range(self.d + 1))
            if self.d != 2:
                raise ConfigurationError(f"x.d: the {fam} family has d = 2")
            if self.a is None:
                object.__setattr__(self, "a", ref_a)
            elif not self.a.allclose(ref_a, atol=1e-14):
                raise ConfigurationError(f"x.a: does not match the {fam} family")
            if self.a_p is None:
                object.__setattr__(self, "a_p", ref_ap)
            else:
                given = tuple(self.a_p)
                if len(given) != 3 or not all(g.allclose(r, atol=1e-14)
                                               for g, r in zip(given, ref_ap)):
                    raise ConfigurationError(f"x.a_p: does not match the {fam} family")
        a_p = tuple(self.a_p)
        if len(a_p) != self.d + 1:
            raise ConfigurationError(f"x.a_p: expected {self.d + 1} entries (p = 0..d)")
        if a_p[self.d].is_zero():
            raise ConfigurationError("x.a_p: a_d must not vanish identically")
        object.__setattr__(self, "a_p", a_p)

    def inner_argument(self, t, z):
        if self.family == "shift":
            return t + z
        return exp(t) * z

    def denominator_value(self, t: complex, z: complex) -> complex:
        """1 - t f(.) for the built-in families; the Theta proxy distance."""
        if self.family == "user":
            if self.denominator is None:
                return 1.0 + 0j
            return complex(_user_eval(self.denominator, self, t, z))
        return complex(1.0 - t * horner(self.f, self.inner_argument(t, z)))

    def closed_form(self, t, z):
        if self.family == "user":
            return _user_eval(self.expression, self, t, z)
        g = horner(self.f, self.inner_argument(t, z))
        return g / (1.0 - t * g)


def _user_eval(expr: str, spec: XSpec, t, z):
    env = {"t": t, "z": z, "exp": exp, "f": lambda x: horner(spec.f, x)}
    return eval(compile(expr, "<x.expression>", "eval"), {"__builtins__": {}}, env)


def _check_regular(spec: XSpec, t: complex, z: complex):
    den = spec.denominator_value(t, z)
    if abs(den) < SINGULAR_TOL:
        raise SingularPointError(
            f"(t, z) = ({t}, {z}) lies on the singular set (|1 - t f| = {abs(den):.3g})",
            distance=abs(den))


def eval_X(spec: XSpec, t: complex, z: complex) -> complex:
    _check_regular(spec, t, z)
    try:
        val = complex(spec.closed_form(complex(t), complex(z)))
    except ZeroDivisionError as exc:
        raise SingularPointError(f"(t, z) = ({t}, {z}) is singular", distance=0.0) from exc
    if not np.isfinite(val):
        raise SingularPointError(f"X is not finite at ({t}, {z})", distance=0.0)
    return val


def x_bijet(spec: XSpec, t: complex, z: complex, nt: int, nz: int) -> np.ndarray:
    """c[i, j] = d_t^i d_z^j X(t, z) / (i! j!) for i < nt, j < nz."""
    _check_regular(spec, t, z)
    T = Jet2.var_t(complex(t), nt, nz)
    Z = Jet2.var_z(complex(z), nt, nz)
    out = spec.closed_form(T, Z)
    if not isinstance(out, Jet2):
        out = Jet2.const(out, nt, nz)
    return out.c


def x_jets(spec: XSpec, t: complex, z: complex, H: int, nu: float) -> np.ndarray:
    """x_h = d_z^h X(t, z) / (h! nu^h) for h = 0..H, by jet propagation."""
    if nu <= 0:
        raise ConfigurationError("nu must be positive")
    c = x_bijet(spec, t, z, 1, H + 1)[0]
    return c / float(nu) ** np.arange(H + 1)


def bivariate_jet(poly: TruncatedPoly, T, Z):
    """Evaluate a (v0, v1) polynomial on jets or numbers."""
    total = 0
    for key, c in poly.coeffs.items():
        term = c
        if key[0]:
            term = term * T ** key[0]
        if key[1]:
            term = term * Z ** key[1]
        total = total + term
    return total


def dt_dz_X_via_pde(spec: XSpec, t: complex, z: complex, J: int) -> np.ndarray:
    """d_t d_z^j X / j! for j <= J, from the z-jet of the PDE right-hand side."""
    nz = J + 2
    T = Jet2.const(complex(t), 1, nz)
    Z = Jet2.var_z(complex(z), 1, nz)
    X = Jet2(x_bijet(spec, t, z, 1, nz))
    rhs = bivariate_jet(spec.a, T, Z) * X.dz()
    for p, ap in enumerate(spec.a_p):
        if not ap.is_zero():
            rhs = rhs + bivariate_jet(ap, T, Z) * X ** p
    if not isinstance(rhs, Jet2):
        rhs = Jet2.const(rhs, 1, nz)
    return rhs.c[0, :J + 1]


@dataclass
class CompactRegion:
    grid: np.ndarray
    R: float
    rho: float
    nu: float
    H: int
    margins: np.ndarray = field(repr=False)
    rho_half_margin: float = 0.0
    theta_distance: float = np.inf

    @property
    def points(self):
        return [(complex(t), complex(z)) for t, z in self.grid]


def calibrate(spec: XSpec, K_grid, rho: float, H: int, R: float | None = None,
              nu0: float = 2.0 ** -6, max_doublings: int = 80) -> CompactRegion:
    """Smallest nu in {nu0 * 2^k} with |d_z^h X| / (h! nu^h) <= rho/2 on the grid."""
    if rho <= 1:
        raise ConfigurationError("rho must exceed 1")
    grid = np.asarray(K_grid, dtype=complex).reshape(-1, 2)
    if R is None:
        R = float(np.abs(grid).max()) if len(grid) else 0.0
    if len(grid) and np.abs(grid).max() > R:
        raise ConfigurationError("compact grid leaves the bidisc of radius R")
    raw = np.array([np.abs(x_jets(spec, t, z, H, 1.0)) for t, z in grid]).reshape(len(grid), H + 1)
    sup = raw.max(axis=0) if len(grid) else np.zeros(H + 1)
    half = rho / 2.0
    if sup[0] > half:
        raise CalibrationError(
            f"sup |X| = {sup[0]:.6g} exceeds rho/2 = {half:.6g}; rho too small for this compact")
    h = np.arange(H + 1)
    nu = nu0
    for _ in range(max_doublings):
        margins = sup / nu ** h / half
        if np.all(margins <= 1.0):
            break
        nu *= 2.0
    else:
        raise CalibrationError("no admissible nu found in the geometric search grid")
    dist = min((abs(spec.denominator_value(t, z)) for t, z in grid), default=np.inf)
    return CompactRegion(grid=grid, R=float(R), rho=float(rho), nu=float(nu), H=H,
                         margins=margins, rho_half_margin=float(sup[0] / half),
                         theta_distance=float(dist))


def sup_abs_X(spec: XSpec, K_grid) -> float:
    return max(abs(eval_X(spec, t, z)) for t, z in np.asarray(K_grid).reshape(-1, 2))


def coefficient_sup(poly: TruncatedPoly, radius: float, nu: float, samples: int = 64) -> float:
    """max over l of sup_{|v0|,|v1| <= radius} |d_v1^l poly| / (l! nu^l), sampled."""
    if poly.is_zero():
        return 0.0
    th = np.exp(2j * np.pi * np.arange(samples) / samples) * radius
    V0, V1 = np.meshgrid(th, th, indexing="ij")
    pts = np.stack([V0.ravel(), V1.ravel(), np.zeros(V0.size)], axis=1)
    best = 0.0
    cur = poly
    l = 0
    fact = 1.0
    while not cur.is_zero():
        best = max(best, float(np.abs(cur.eval_many(pts)).max()) / (fact * nu ** l))
        cur = _dv1(cur)
        l += 1
        fact *= l
    return best


def _dv1(p: TruncatedPoly) -> TruncatedPoly:
    from .taylor_core import V1, poly_diff
    return poly_diff(p, V1)

