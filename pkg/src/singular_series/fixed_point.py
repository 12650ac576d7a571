"""Operators on truncated W-series, Picard iteration, contraction and W_bar search.

Series are :class:`JetSeries` whose alpha-th polynomial multiplies
``W^alpha / alpha!`` and holds monomial coefficients; the majorant tables of
``majorant`` are the divided-power view of the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .banach_norms import NormConfig, abs_majorant, g_norm
from .errors import ConfigurationError, InvariantError
from .majorant import SupSequence, min_gap
from .taylor_core import (U, V0, V1, JetSeries, TruncatedPoly, canon, from_divided, poly_diff,
                          poly_embed, poly_mul)


@dataclass
class OperatorBundle:
    """Generating polynomials built from sup sequences (all coefficients >= 0)."""

    S: int
    ks: tuple
    A: int
    degree_cap: int
    B: dict                       # (m, k) -> list over alpha of level-0 polys
    A_lift: dict                  # j -> level j+1 poly
    B_lift: dict                  # j -> level j+1 poly
    forcing: JetSeries            # Omega tilde
    meta: dict = field(default_factory=dict)

    @property
    def min_gap(self) -> int:
        return min(self.S - k for k in self.ks)

    def is_nonnegative(self) -> bool:
        polys = [p for seq in self.B.values() for p in seq]
        polys += list(self.A_lift.values()) + list(self.B_lift.values()) + list(self.forcing)
        return all(c.imag == 0 and c.real >= 0 for p in polys for c in p.coeffs.values())

    def scaled(self, factor: float) -> "OperatorBundle":
        B = {key: [p.scale(factor) for p in seq] for key, seq in self.B.items()}
        return OperatorBundle(self.S, self.ks, self.A, self.degree_cap, B, self.A_lift,
                              self.B_lift, self.forcing, dict(self.meta))


def build_bundle(problem, sups: SupSequence, A: int, degree_cap: int) -> OperatorBundle:
    cap = degree_cap
    B = {}
    for (m, k, a), tab in sups.b.items():
        if a > A:
            continue
        seq = B.setdefault((m, k), [])
        while len(seq) <= a:
            seq.append(TruncatedPoly.zero(0, cap))
        seq[a] = from_divided(tab, 0, cap)
    A_lift = {j: from_divided(tab, j + 1, cap) for j, tab in sups.A.items()}
    B_lift = {j: from_divided(tab, j + 1, cap) for j, tab in sups.B.items()}
    forcing = JetSeries([from_divided(sups.omega[a], a, cap) for a in range(A + 1)])
    return OperatorBundle(problem.S, tuple(problem.ks), A, cap, B, A_lift, B_lift, forcing,
                          meta={"rho": sups.rho, "nu": sups.nu, "R": sups.R})


# elementary operators --------------------------------------------------------

def _zero_like(s: JetSeries, level_shift: int = 0) -> list:
    return [TruncatedPoly.zero(a + level_shift, s.degree_cap) for a in range(s.A + 1)]


def diff_V(s: JetSeries, var: int) -> JetSeries:
    if var not in (V0, V1):
        raise ValueError("var must be V0 or V1")
    return JetSeries([poly_diff(p, var) for p in s])


def _apply_lift(lifts: dict, s: JetSeries, name: str) -> JetSeries:
    out = []
    for alpha, p in enumerate(s):
        acc = TruncatedPoly.zero(alpha + 1, s.degree_cap)
        for j in range(min(alpha, p.level) + 1):
            du = poly_diff(p, U(j))
            if du.is_zero():
                continue
            if j not in lifts:
                raise ConfigurationError(f"{name}_{{{j},{alpha + 1}}} missing from the bundle")
            acc = acc + poly_mul(lifts[j], du)
        out.append(poly_embed(acc, max(acc.level, alpha + 1)))
    return JetSeries(out)


def apply_DA(bundle: OperatorBundle, s: JetSeries) -> JetSeries:
    """alpha-th coefficient: sum_j A_{j,alpha+1} d_{U_j} Psi_alpha, stored at level alpha+1."""
    return _apply_lift(bundle.A_lift, s, "A")


def apply_DB(bundle: OperatorBundle, s: JetSeries) -> JetSeries:
    return _apply_lift(bundle.B_lift, s, "B")


def integrate_W(s: JetSeries, m: int) -> JetSeries:
    """m-fold integration in W: coefficient alpha+m <- coefficient alpha; the top m levels drop."""
    if m < 1:
        raise ValueError("m must be >= 1")
    out = []
    for alpha in range(s.A + 1):
        if alpha < m:
            out.append(TruncatedPoly.zero(alpha, s.degree_cap))
        else:
            p = s[alpha - m]
            out.append(poly_embed(p, max(p.level, alpha)))
    return JetSeries(out)


def w_product(b_seq, s: JetSeries) -> JetSeries:
    """(b * s)_alpha = sum_{a1} C(alpha, a1) b_{a1} s_{alpha-a1}."""
    out = []
    for alpha in range(s.A + 1):
        acc = TruncatedPoly.zero(alpha, s.degree_cap)
        for a1 in range(min(alpha, len(b_seq) - 1) + 1):
            b = b_seq[a1]
            g = s[alpha - a1]
            if b.is_zero() or g.is_zero():
                continue
            acc = acc + poly_mul(b, g).scale(math.comb(alpha, a1))
        out.append(acc)
    return JetSeries(out)


def _low(s: JetSeries, m: int) -> JetSeries:
    # the top m coefficients are dropped by the m-fold W-integration anyway
    return JetSeries([p if a <= s.A - m else TruncatedPoly.zero(a, s.degree_cap)
                      for a, p in enumerate(s)])


def apply_M(problem, bundle: OperatorBundle, s: JetSeries) -> JetSeries:
    """sum_k [B1 I(d_V0 s + D_A s) + B2 I(d_V1 s + D_B s) + B3 I(s)], I = W-integration of order S-k."""
    if s.A != bundle.A:
        raise ValueError(f"series order {s.A} differs from bundle order {bundle.A}")
    total = JetSeries(_zero_like(s))
    for k in bundle.ks:
        m = bundle.S - k
        if m < 1:
            raise ConfigurationError(f"need S > k (k={k})")
        for mm in (1, 2, 3):
            seq = bundle.B.get((mm, k))
            if not seq or all(p.is_zero() for p in seq):
                continue
            if mm == 1:
                inner = diff_V(s, V0) + apply_DA(bundle, _low(s, m))
            elif mm == 2:
                inner = diff_V(s, V1) + apply_DB(bundle, _low(s, m))
            else:
                inner = s
            total = total + w_product(seq, integrate_W(inner, m))
    return JetSeries([poly_embed(p, max(p.level, a)) for a, p in enumerate(total)])


@dataclass
class PicardResult:
    psi: JetSeries
    iterations: int


def _same(a: JetSeries, b: JetSeries) -> bool:
    return all(dict(p.coeffs) == dict(q.coeffs) for p, q in zip(a, b))


def picard_solve(problem, bundle: OperatorBundle, forcing: JetSeries | None = None) -> PicardResult:
    """Iterate Psi <- M(Psi) + Omega from 0 until stationary (at most A+1 updates)."""
    forcing = bundle.forcing if forcing is None else forcing
    psi = JetSeries.zero(forcing.A, forcing.degree_cap)
    for it in range(1, forcing.A + 3):
        nxt = apply_M(problem, bundle, psi) + forcing
        if _same(nxt, psi):
            return PicardResult(psi, it - 1)
        psi = nxt
    raise InvariantError(f"Picard iteration not stationary after {forcing.A + 2} steps")


def fixed_point_residual(problem, bundle: OperatorBundle, psi: JetSeries) -> float:
    """max |coefficient| of Psi - M(Psi) - Omega, relative to the largest coefficient of Psi."""
    res = psi - apply_M(problem, bundle, psi) - bundle.forcing
    scale = max(max(p.max_abs_coeff() for p in psi), 1e-300)
    return max(p.max_abs_coeff() for p in res) / scale


def psi_tables(psi: JetSeries) -> list:
    """Divided-power view of a Picard solution."""
    from .taylor_core import to_divided
    return [{k: v.real for k, v in to_divided(p).items()} for p in psi]


# contraction ------------------------------------------------------------------

def _basis_keys(level: int, degree: int):
    nvar = level + 3
    for total in range(degree + 1):
        for comp in _compositions(total, nvar):
            yield canon(comp)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def operator_norm_sweep(problem, bundle: OperatorBundle, cfg: NormConfig,
                        degree: int = 3) -> float:
    """Exact norm of M on the truncated span of monomials of degree <= ``degree``.

    The G-norm is a weighted l1 norm, so the operator norm is the largest
    ratio over basis monomials.  Levels above A - min(S-k) map to zero.
    """
    best = 0.0
    for alpha in range(0, bundle.A - bundle.min_gap + 1):
        for key in _basis_keys(alpha, degree):
            e = _single(bundle, alpha, key)
            denom = g_norm(e, cfg)
            ratio = g_norm(apply_M(problem, bundle, e), cfg) / denom
            best = max(best, ratio)
    return best


def _single(bundle: OperatorBundle, alpha: int, key, coeff=1.0) -> JetSeries:
    terms = [TruncatedPoly.zero(a, bundle.degree_cap) for a in range(bundle.A + 1)]
    terms[alpha] = TruncatedPoly(alpha, {key: coeff}, bundle.degree_cap)
    return JetSeries(terms)


def random_series(bundle: OperatorBundle, cfg: NormConfig, rng: np.random.Generator,
                  degree: int = 3, terms: int = 8) -> JetSeries:
    """Random complex series on levels that M does not annihilate, scaled to unit G-norm."""
    top = max(bundle.A - bundle.min_gap, 0)
    levels = [dict() for _ in range(bundle.A + 1)]
    for _ in range(terms):
        alpha = int(rng.integers(0, top + 1))
        nvar = alpha + 3
        key = [0] * nvar
        for _ in range(int(rng.integers(0, degree + 1))):
            key[int(rng.integers(0, nvar))] += 1
        c = complex(rng.normal(), rng.normal())
        levels[alpha][canon(key)] = levels[alpha].get(canon(key), 0) + c
    s = JetSeries([TruncatedPoly(a, levels[a], bundle.degree_cap) for a in range(bundle.A + 1)])
    n = g_norm(s, cfg)
    if n == 0:
        return random_series(bundle, cfg, rng, degree, terms)
    return s.scale(1.0 / n)


@dataclass
class ContractionReport:
    factor: float                 # max over random trials
    sweep: float                  # exact truncated operator norm
    trials: int
    W_bar: float
    rho: float


def contraction_factor(problem, bundle: OperatorBundle, cfg: NormConfig, trials: int = 50,
                       seed: int = 0, degree: int = 3, sweep: bool = True) -> ContractionReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        s = random_series(bundle, cfg, rng, degree)
        worst = max(worst, g_norm(apply_M(problem, bundle, s), cfg) / g_norm(s, cfg))
    exact = operator_norm_sweep(problem, bundle, cfg, degree) if sweep else float("nan")
    return ContractionReport(worst, exact, trials, cfg.W_bar, cfg.rho)


def coefficient_growth(bundle: OperatorBundle, cfg: NormConfig) -> float:
    """max over (m, k) and alpha >= 1 of (|B_{m,k,alpha}|(radii) / alpha!)^(1/alpha)."""
    radii = cfg.radii(0)
    best = 0.0
    for seq in bundle.B.values():
        for a, p in enumerate(seq):
            if a == 0 or p.is_zero():
                continue
            best = max(best, (abs_majorant(p, radii) / math.factorial(a)) ** (1.0 / a))
    return best


@dataclass
class WbarSearch:
    W_bar: float
    start: float
    factor: float
    steps: int


def search_W_bar(problem, bundle: OperatorBundle, cfg: NormConfig, target: float = 0.5,
                 degree: int = 3, iters: int = 40, safety: float = 0.98) -> WbarSearch:
    """Largest W_bar <= 1/(2 max D) whose exact truncated contraction factor is <= target."""
    growth = coefficient_growth(bundle, cfg)
    start = 1.0 / (2.0 * growth) if growth > 0 else 1.0
    goal = target * safety

    def factor(w: float) -> float:
        return operator_norm_sweep(problem, bundle, cfg.with_(W_bar=w), degree)

    f_start = factor(start)
    if f_start <= goal:
        return WbarSearch(start, start, f_start, 0)
    lo, hi = 0.0, start
    steps = 0
    f_lo = 0.0
    for steps in range(1, iters + 1):
        mid = 0.5 * (lo + hi) if lo > 0 else hi / 2.0
        f_mid = factor(mid)
        if f_mid <= goal:
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if lo > 0 and (hi - lo) <= 1e-3 * hi:
            break
    if lo == 0.0:
        raise ConfigurationError("no admissible W_bar found by bisection")
    return WbarSearch(lo, start, f_lo, steps)


@dataclass
class RhoSweepRow:
    rho: float
    nu: float
    factor: float
    sweep: float


def rho_sweep(problem, make_bundle, cfg: NormConfig, rhos=(2.0, 4.0, 8.0, 16.0),
              trials: int = 50, seed: int = 0, degree: int = 3) -> list:
    """Contraction at a fixed W_bar across rho; ``make_bundle(rho)`` returns (bundle, nu)."""
    rows = []
    for rho in rhos:
        bundle, nu = make_bundle(rho)
        rep = contraction_factor(problem, bundle, cfg.with_(rho=rho), trials, seed, degree)
        rows.append(RhoSweepRow(rho, nu, rep.factor, rep.sweep))
    return rows
