"""Assembly of U and Y, PDE residuals, and the growth profile near the singular set."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .banach_norms import g_norm, zeta
from .characteristic_flow import CompactRegion, calibrate, eval_X, sup_abs_X, x_bijet
from .errors import CalibrationError, ConfigurationError, SingularPointError
from .problem import ProblemSpec, validate_constraints  # noqa: F401  (re-exported)
from .series_recursion import PhiFamily, compute_phi, omega_hat
from .taylor_core import U, V0, V1, TruncatedPoly, poly_diff, poly_eval

__all__ = [
    "validate_constraints", "PointJets", "point_jets", "assemble_U", "assemble_Y",
    "y_coefficients", "residual_pde", "residual_id_u", "GrowthProfile", "growth_profile",
    "nested_compacts", "ResidualReport", "sample_grid", "w_samples", "phi_sup_chain", "u_sup",
    "data_term", "ProfileRow",
]


@dataclass
class PointJets:
    """Scaled z-jets x_h of X at (t, z) and their first t-derivatives."""

    t: complex
    z: complex
    nu: float
    x: np.ndarray        # x_h, h = 0..H+1
    xt: np.ndarray       # d_t x_h, h = 0..H

    def point(self, level: int) -> list:
        return [self.t, self.z] + list(self.x[:level + 1])


def point_jets(spec, t: complex, z: complex, H: int, nu: float) -> PointJets:
    c = x_bijet(spec, complex(t), complex(z), 2, H + 2)
    scale = float(nu) ** np.arange(H + 2)
    return PointJets(complex(t), complex(z), float(nu), c[0] / scale, c[1, :H + 1] / scale[:H + 1])


def _phi_value(poly: TruncatedPoly, pj: PointJets) -> complex:
    return poly_eval(poly, pj.point(poly.level))


def _phi_derivatives(poly: TruncatedPoly, pj: PointJets) -> tuple:
    """(d_t, d_z) of phi(t, z, x_0(t, z), ..) by the chain rule."""
    pt = pj.point(poly.level)
    dt = poly_eval(poly_diff(poly, V0), pt)
    dz = poly_eval(poly_diff(poly, V1), pt)
    for h in range(poly.level + 1):
        du = poly_diff(poly, U(h))
        if du.is_zero():
            continue
        val = poly_eval(du, pt)
        dt += val * pj.xt[h]
        dz += val * (h + 1) * pj.nu * pj.x[h + 1]
    return dt, dz


def _check_w(w: complex, W_bar: float | None):
    if W_bar is not None and abs(w) > W_bar / 2:
        warnings.warn(f"|w| = {abs(w):.3g} exceeds W_bar/2 = {W_bar / 2:.3g}", stacklevel=3)


def assemble_U(phi: PhiFamily, region: CompactRegion | None, t: complex, z: complex, w: complex,
               spec=None, W_bar: float | None = None) -> complex:
    """sum_{alpha <= A} phi_alpha(t, z, x_0..x_alpha) w^alpha / alpha!."""
    if spec is None:
        raise ConfigurationError("assemble_U needs the X specification")
    _check_w(w, W_bar)
    pj = point_jets(spec, t, z, phi.A, phi.nu)
    total = 0j
    for alpha in range(phi.A + 1):
        p = phi[alpha]
        if not p.is_zero():
            total += _phi_value(p, pj) * w ** alpha / math.factorial(alpha)
    return total


def assemble_Y(phi: PhiFamily, region: CompactRegion | None, omega: Sequence[TruncatedPoly], S: int,
               t: complex, z: complex, w: complex, spec=None, W_bar: float | None = None) -> complex:
    """S-fold W-integral of U plus sum_{j<S} omega_j(t, z) w^j / j!."""
    if spec is None:
        raise ConfigurationError("assemble_Y needs the X specification")
    _check_w(w, W_bar)
    coeffs = y_coefficients(spec, phi, omega, S, t, z, derivatives=False)[0]
    return complex(sum(c * w ** n / math.factorial(n) for n, c in enumerate(coeffs)))


def y_coefficients(spec, phi: PhiFamily, omega: Sequence[TruncatedPoly], S: int,
                   t: complex, z: complex, derivatives: bool = True) -> tuple:
    """W-Taylor coefficients Y_n (n = 0..S+A) of Y at (t, z), and their d_t, d_z."""
    n_tot = S + phi.A + 1
    Y = np.zeros(n_tot, dtype=complex)
    Yt = np.zeros(n_tot, dtype=complex)
    Yz = np.zeros(n_tot, dtype=complex)
    pt0 = [complex(t), complex(z), 0j]
    for j in range(S):
        if j < len(omega) and not omega[j].is_zero():
            Y[j] = poly_eval(omega[j], pt0)
            if derivatives:
                Yt[j] = poly_eval(poly_diff(omega[j], V0), pt0)
                Yz[j] = poly_eval(poly_diff(omega[j], V1), pt0)
    if any(not p.is_zero() for p in phi.phi_hat):
        pj = point_jets(spec, t, z, phi.A, phi.nu)
        for alpha in range(phi.A + 1):
            p = phi[alpha]
            if p.is_zero():
                continue
            Y[S + alpha] = _phi_value(p, pj)
            if derivatives:
                Yt[S + alpha], Yz[S + alpha] = _phi_derivatives(p, pj)
    return Y, Yt, Yz


def _b_values(problem: ProblemSpec, t: complex, z: complex, X: complex) -> dict:
    """(m, k) -> array of b_{m,k,alpha}(t, z, X)."""
    out = {}
    for (m, k), seq in problem.coeffs.series.items():
        out[(m, k)] = np.array([poly_eval(p, [t, z, X]) for p in seq], dtype=complex)
    return out


def _eval_wpoly(coeffs: np.ndarray, w: complex) -> complex:
    n = np.arange(len(coeffs))
    fact = np.array([math.factorial(int(i)) for i in n], dtype=float)
    return complex(np.sum(coeffs * w ** n / fact))


def _residual_coefficients(problem: ProblemSpec, Y, Yt, Yz, bvals: dict, A: int) -> np.ndarray:
    """Divided-power W-coefficients of d_w^S Y - sum_k (b1 d_t + b2 d_z + b3) d_w^k Y."""
    S = problem.S
    n_y = len(Y)
    wdeg = max((len(v) - 1 for v in bvals.values()), default=0)
    N = n_y - min(problem.ks) + wdeg
    R = np.zeros(N + 1, dtype=complex)
    for n in range(N + 1):
        lhs = Y[n + S] if n + S < n_y else 0j
        rhs = 0j
        for k in problem.ks:
            for m, src in ((1, Yt), (2, Yz), (3, Y)):
                b = bvals.get((m, k))
                if b is None:
                    continue
                for a in range(min(n, len(b) - 1) + 1):
                    idx = n - a + k
                    if idx < n_y and b[a] != 0:
                        rhs += math.comb(n, a) * b[a] * src[idx]
        R[n] = lhs - rhs
    return R


@dataclass
class ResidualReport:
    max_residual: float
    scale: float                  # max(1, sup |Y|) over the same samples
    points: int
    A: int
    per_point: list = field(default_factory=list)

    @property
    def relative(self) -> float:
        return self.max_residual / self.scale


def sample_grid(problem: ProblemSpec, n: int = 5, shrink: float = 0.98) -> list:
    """n x n points inside the bounding box of the compact grid."""
    grid = problem.K_grid
    if grid is None or len(grid) == 0:
        return [(0j, 0j)]
    ts = grid[:, 0]
    zs = grid[:, 1]

    def axis(vals):
        c = vals.mean()
        lo = c + shrink * (vals.real.min() - c.real)
        hi = c + shrink * (vals.real.max() - c.real)
        return np.linspace(lo, hi, n) + 1j * vals.imag.mean()

    return [(complex(t), complex(z)) for t in axis(ts) for z in axis(zs)]


def w_samples(W_bar: float, n: int = 5, radius_fraction: float = 0.25) -> list:
    r = W_bar * radius_fraction
    return [r * (j + 1) / n * np.exp(2j * np.pi * j / n) for j in range(n)]


def residual_pde(problem: ProblemSpec, phi: PhiFamily, points: Sequence, ws: Sequence) -> ResidualReport:
    """Max |PDE residual| of the truncated Y over (t, z) points times w samples."""
    worst = 0.0
    sup_y = 0.0
    rows = []
    for t, z in points:
        Y, Yt, Yz = y_coefficients(problem.x, phi, problem.omega, problem.S, t, z)
        X = eval_X(problem.x, t, z)
        R = _residual_coefficients(problem, Y, Yt, Yz, _b_values(problem, t, z, X), phi.A)
        for w in ws:
            r = abs(_eval_wpoly(R, w))
            y = abs(_eval_wpoly(Y, w))
            worst = max(worst, r)
            sup_y = max(sup_y, y)
            rows.append((t, z, w, r, y))
    return ResidualReport(worst, max(1.0, sup_y), len(rows), phi.A, rows)


def residual_id_u(problem: ProblemSpec, phi: PhiFamily, points: Sequence) -> float:
    """Max relative violation of the integral equation for U, through order A.

    Coefficient n: U_n - sum_k sum_a C(n, a) [b1_a d_t U_{n-a-(S-k)} + b2_a d_z .. + b3_a ..] - omega~_n.
    """
    S = problem.S
    worst = 0.0
    cap = problem.degree_cap
    forcing = [omega_hat(a, problem.coeffs, problem.omega, cap) for a in range(phi.A + 1)]
    for t, z in points:
        pj = point_jets(problem.x, t, z, phi.A, phi.nu)
        X = pj.x[0]
        Uv = np.zeros(phi.A + 1, dtype=complex)
        Ut = np.zeros(phi.A + 1, dtype=complex)
        Uz = np.zeros(phi.A + 1, dtype=complex)
        for a in range(phi.A + 1):
            p = phi[a]
            if not p.is_zero():
                Uv[a] = _phi_value(p, pj)
                Ut[a], Uz[a] = _phi_derivatives(p, pj)
        bvals = _b_values(problem, t, z, X)
        scale = max(1.0, float(np.abs(Uv).max()))
        for n in range(phi.A + 1):
            rhs = poly_eval(forcing[n], [t, z, X])
            for k in problem.ks:
                for m, src in ((1, Ut), (2, Uz), (3, Uv)):
                    b = bvals.get((m, k))
                    if b is None:
                        continue
                    for a in range(min(n, len(b) - 1) + 1):
                        idx = n - a - (S - k)
                        if idx >= 0:
                            rhs += math.comb(n, a) * b[a] * src[idx]
            worst = max(worst, abs(Uv[n] - rhs) / scale)
    return worst


# growth profile ---------------------------------------------------------------------

def nested_compacts(problem: ProblemSpec, levels: int | None = None) -> list:
    """K_i = K plus path points theta + (start - theta) 2^-i, i = 0..; increasing in i."""
    prof = problem.profile
    if "theta_point" not in prof or "approach_from" not in prof:
        raise ConfigurationError("profile.theta_point / profile.approach_from: required for the profile")
    theta = np.array(prof["theta_point"], dtype=complex)
    start = np.array(prof["approach_from"], dtype=complex)
    levels = int(prof.get("levels", 5)) if levels is None else levels
    base = problem.K_grid if problem.K_grid is not None else np.zeros((0, 2), dtype=complex)
    out = []
    path = []
    for i in range(levels):
        path.append(theta + (start - theta) * 2.0 ** (-i))
        out.append(np.vstack([base, np.array(path)]))
    return out


@dataclass
class ProfileRow:
    label: str
    rho: float
    nu: float
    sup_abs_Y: float
    excess: float
    data_term: float
    bound: float
    theta_distance: float
    passed: bool
    reason: str = ""


@dataclass
class GrowthProfile:
    rows: list
    W_bar: float
    C11: float
    C12: float
    sigma: float
    zeta_b: float
    slope: float
    intercept: float
    skipped: list = field(default_factory=list)

    @property
    def slope_cap(self) -> float:
        return 1.1 * self.sigma * self.zeta_b

    @property
    def all_rows_pass(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def slope_ok(self) -> bool:
        return self.slope <= self.slope_cap

    @property
    def ok(self) -> bool:
        return self.all_rows_pass and self.slope_ok and len(self.rows) >= 2


def _sup_on_compact(problem: ProblemSpec, phi: PhiFamily, grid, W_bar: float, n_w: int) -> tuple:
    r = W_bar / 2
    ws = [r * np.exp(2j * np.pi * j / n_w) for j in range(n_w)]
    sup_y = 0.0
    excess = 0.0
    for t, z in grid:
        Y = y_coefficients(problem.x, phi, problem.omega, problem.S, t, z, derivatives=False)[0]
        U_part = Y.copy()
        U_part[:problem.S] = 0
        for w in ws:
            sup_y = max(sup_y, abs(_eval_wpoly(Y, w)))
            excess = max(excess, abs(_eval_wpoly(U_part, w)))
    return sup_y, excess


def data_term(problem: ProblemSpec, grid, W_bar: float) -> float:
    total = 0.0
    for j, w in enumerate(problem.omega):
        if w.is_zero():
            continue
        sup = max(abs(poly_eval(w, [t, z, 0j])) for t, z in grid)
        total += sup * (W_bar / 2) ** j / math.factorial(j)
    return total


def growth_profile(problem: ProblemSpec, A: int, W_bar: float | None = None,
                   compacts: Sequence | None = None, rho_floor: float = 2.0, n_w: int = 16,
                   seed: int = 0) -> GrowthProfile:
    """Rows (rho_i, sup |Y| on K_i x D(0, W_bar/2), bound) over nested compacts.

    rho_i = max(rho_floor, 2 sup_{K_i} |X|); nu_i is calibrated on K_i.  C12 is
    4 (W_bar/2)^S times the G-norm of the forcing measured on the first
    compact, and stays fixed for the later rows.
    """
    from .fixed_point import build_bundle, search_W_bar
    from .majorant import build_sup_sequences

    compacts = nested_compacts(problem) if compacts is None else list(compacts)
    cfg = problem.norm
    zb = zeta(cfg.b)
    rows, skipped = [], []
    C11 = C12 = None
    cap = problem.degree_cap
    for i, grid in enumerate(compacts):
        label = f"K{i + 1}"
        try:
            rho = max(rho_floor, 2.0 * sup_abs_X(problem.x, grid) * (1 + 1e-9))
            region = calibrate(problem.x, grid, rho, A + 1, R=problem.R)
        except (CalibrationError, SingularPointError, ConfigurationError) as exc:
            skipped.append((label, str(exc)))
            continue
        if C11 is None:
            sups = build_sup_sequences(problem, A, region.nu, rho, seed=seed)
            bundle = build_bundle(problem, sups, A, cap + 1)
            if W_bar is None:
                W_bar = search_W_bar(problem, bundle, cfg.with_(rho=rho)).W_bar
            C11 = g_norm(bundle.forcing, cfg.with_(rho=rho, W_bar=W_bar))
            C12 = 4.0 * (W_bar / 2) ** problem.S * C11
        phi = compute_phi(problem, A, nu=region.nu)
        sup_y, excess = _sup_on_compact(problem, phi, region.grid, W_bar, n_w)
        dterm = data_term(problem, region.grid, W_bar)
        bound = C12 * math.exp(cfg.sigma * zb * rho) + dterm
        rows.append(ProfileRow(label, rho, region.nu, sup_y, excess, dterm, bound,
                               region.theta_distance, sup_y <= bound))
    slope, intercept = _fit(rows)
    return GrowthProfile(rows, float(W_bar if W_bar is not None else float("nan")),
                         float(C11 or 0.0), float(C12 or 0.0), cfg.sigma, zb, slope, intercept,
                         skipped)


def _fit(rows: list) -> tuple:
    if len(rows) < 2:
        return 0.0, 0.0
    rho = np.array([r.rho for r in rows])
    ex = np.array([r.excess for r in rows])
    if np.all(ex <= 0):
        return 0.0, float("-inf")
    floor = ex[ex > 0].min() * 1e-300 if np.any(ex > 0) else 1e-300
    y = np.log(np.maximum(ex, max(floor, 1e-300)))
    if np.ptp(rho) == 0:
        return 0.0, float(y.mean())
    slope, intercept = np.polyfit(rho, y, 1)
    return float(slope), float(intercept)


def phi_sup_chain(problem: ProblemSpec, phi: PhiFamily, cfg, forcing_norm: float,
                  rho: float, samples: int = 64, seed: int = 0) -> list:
    """(alpha, sampled sup |phi_alpha| on the polydisc, 2 ||Omega|| e^{sigma zeta rho} alpha!/W_bar^alpha)."""
    from .majorant import sampled_sup
    zb = zeta(cfg.b)
    out = []
    for a in range(phi.A + 1):
        lhs = sampled_sup(phi[a], problem.R, rho, samples=samples, seed=seed)
        rhs = 2 * forcing_norm * math.exp(cfg.sigma * zb * rho) * math.factorial(a) / cfg.W_bar ** a
        out.append((a, lhs, rhs))
    return out


def u_sup(problem: ProblemSpec, phi: PhiFamily, grid, W_bar: float, n_w: int = 16) -> float:
    """Sampled sup of |U| on grid x {|w| = W_bar/2}."""
    r = W_bar / 2
    best = 0.0
    for t, z in grid:
        Y = y_coefficients(problem.x, phi, problem.omega, problem.S, t, z, derivatives=False)[0]
        Uc = Y[problem.S:]
        for j in range(n_w):
            best = max(best, abs(_eval_wpoly(Uc, r * np.exp(2j * np.pi * j / n_w))))
    return best
