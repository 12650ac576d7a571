"""Weighted norms on truncated series and the operator estimates they satisfy.

For a level-alpha polynomial with divided-power coefficients psi_m the E-norm is

    sum_m |psi_m| exp(-sigma r_b(alpha) rho) V0b^n0 V1b^n1 prod Ub_h^l_h / (|m| + alpha)!

and the G-norm of ``sum_alpha Psi_alpha W^alpha / alpha!`` is
``sum_alpha E(Psi_alpha) Wb^alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .taylor_core import JetSeries, TruncatedPoly, key_factorial


@dataclass(frozen=True)
class NormConfig:
    rho: float = 2.0
    sigma: float = 1.0
    b: float = 2.0
    delta_bar: float = 0.25
    V0_bar: float = 0.1
    V1_bar: float = 0.1
    W_bar: float = 1.0
    delta: float = 0.5

    def __post_init__(self):
        if not self.b > 1:
            raise ConfigurationError("norm.b: need b > 1")
        for name in ("rho", "sigma", "delta_bar", "V0_bar", "V1_bar", "W_bar"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"norm.{name}: must be positive")
        if not self.delta > self.delta_bar:
            raise ConfigurationError("norm.delta: need delta > delta_bar")
        if not max(self.V0_bar, self.V1_bar, self.delta_bar) < self.delta:
            raise ConfigurationError("norm: need V0_bar, V1_bar, U0_bar < delta")

    def with_(self, **changes) -> "NormConfig":
        return replace(self, **changes)

    def radii(self, level: int) -> list:
        """(V0_bar, V1_bar, U_bar_0, .., U_bar_level)."""
        return [self.V0_bar, self.V1_bar] + [u_bar(h, self.delta_bar, self.b)
                                            for h in range(level + 1)]


def r_b(alpha: int, b: float) -> float:
    return math.fsum(1.0 / (n + 1) ** b for n in range(alpha + 1))


def zeta(b: float) -> float:
    from scipy.special import zeta as _zeta
    return float(_zeta(b, 1))


def u_bar(h: int, delta_bar: float, b: float) -> float:
    return delta_bar / (h ** b + 1.0)


def e_norm(p: TruncatedPoly, cfg: NormConfig, level: int | None = None) -> float:
    """E-norm of ``p`` measured at ``level`` (default: its own level)."""
    alpha = p.level if level is None else level
    if alpha < p.level:
        raise IndexError("cannot measure a polynomial below its own level")
    if p.is_zero():
        return 0.0
    radii = cfg.radii(alpha)
    damp = math.exp(-cfg.sigma * r_b(alpha, cfg.b) * cfg.rho)
    total = []
    for key, c in p.coeffs.items():
        w = abs(c) * key_factorial(key)
        for r, e in zip(radii, key):
            if e:
                w *= r ** e
        total.append(w / math.factorial(sum(key) + alpha))
    return math.fsum(total) * damp


def g_norm(s: JetSeries | Sequence[TruncatedPoly], cfg: NormConfig) -> float:
    terms = s.terms if isinstance(s, JetSeries) else list(s)
    return math.fsum(e_norm(p, cfg, level=max(alpha, p.level)) * cfg.W_bar ** alpha
                     for alpha, p in enumerate(terms))


def abs_majorant(b, radii: Sequence[float], W_bar: float | None = None) -> float:
    """|b| evaluated at the radius tuple.

    ``b`` is a polynomial (coefficients in monomial form, so the divided-power
    weights cancel) or, when ``W_bar`` is given, a sequence of per-order
    polynomials of a W-series in divided-power convention.
    """
    if W_bar is not None:
        return math.fsum(abs_majorant(bk, radii) * W_bar ** a / math.factorial(a)
                         for a, bk in enumerate(b))
    total = []
    for key, c in b.coeffs.items():
        if len(key) > len(radii):
            raise IndexError("radius tuple too short for this polynomial")
        w = abs(c)
        for r, e in zip(radii, key):
            if e:
                w *= r ** e
        total.append(w)
    return math.fsum(total)


def kappa_lower_bound(cfg: NormConfig, alpha_max: int) -> float:
    """min over alpha <= alpha_max of prod_{h <= alpha} (1 - U_bar_h / delta)."""
    prod_ = 1.0
    best = math.inf
    for h in range(alpha_max + 1):
        factor = 1.0 - u_bar(h, cfg.delta_bar, cfg.b) / cfg.delta
        if factor <= 0:
            raise ConfigurationError(f"factor 1 - U_bar_{h}/delta = {factor:.3g} <= 0; delta too small")
        prod_ *= factor
        best = min(best, prod_)
    return best


def kappa_limit(cfg: NormConfig, terms: int = 100_000) -> float:
    """Estimate of the infinite product, with a tail correction."""
    h = np.arange(terms, dtype=float)
    factors = 1.0 - cfg.delta_bar / (h ** cfg.b + 1.0) / cfg.delta
    if np.any(factors <= 0):
        raise ConfigurationError("delta too small for the infinite product")
    log_p = np.sum(np.log(factors))
    # remaining factors: log(1 - x) ~ -x with x ~ delta_bar / (delta h^b)
    tail = cfg.delta_bar / cfg.delta * terms ** (1 - cfg.b) / (cfg.b - 1)
    return float(np.exp(log_p - tail))


def xexp_bound(delta: float, m1: float, m2: float) -> float:
    """Upper bound for sup_{x >= 0} (x + delta)^m1 exp(-m2 x)."""
    if m1 == 0:
        return math.exp(delta * m2)
    return (m1 / m2) ** m1 * math.exp(-m1) * math.exp(delta * m2)


def shift_factor(alpha: int, alpha_p: int, cfg: NormConfig, kind: str, j: int = 0) -> float:
    """Right-hand factors of the level-shift estimates.

    ``kind`` is ``"U"`` (d/dU_j), ``"V0"``, ``"V1"`` (d/dV_k) or ``"id"``
    (plain embedding).  Requires ``alpha > alpha_p + 1``.
    """
    if not alpha > alpha_p + 1:
        raise ValueError("need alpha > alpha_p + 1")
    ex = math.exp(-cfg.sigma * cfg.rho * (alpha - alpha_p) / (alpha + 1) ** cfg.b)
    if kind == "id":
        return ex / math.prod(alpha - l + 1 for l in range(1, alpha - alpha_p + 1))
    denom = math.prod(alpha - l + 1 for l in range(1, alpha - alpha_p))
    if kind == "U":
        return ex / (u_bar(j, cfg.delta_bar, cfg.b) * denom)
    if kind == "V0":
        return ex / (cfg.V0_bar * denom)
    if kind == "V1":
        return ex / (cfg.V1_bar * denom)
    raise ValueError(f"unknown kind {kind!r}")


def factorial_ratio(n: Sequence[int], n2: Sequence[int], alpha: int) -> Fraction:
    """Exact left-hand side of the factorial inequality used for products.

    ``n`` and ``n2`` are full index tuples (n0, n1, l_0, ..) with n2 <= n.
    """
    if len(n) != len(n2) or any(b > a or b < 0 for a, b in zip(n, n2)):
        raise ValueError("need 0 <= n2 <= n componentwise")
    num = 1
    den = 1
    for a, b in zip(n, n2):
        num *= math.factorial(a)
        den *= math.factorial(b)
    return (Fraction(num, den) * Fraction(math.factorial(sum(n2) + alpha),
                                          math.factorial(sum(n) + alpha)))


def _compositions(total_max: int, parts: int):
    """All tuples of ``parts`` nonnegative ints with sum <= total_max."""
    if parts == 0:
        yield ()
        return
    for first in range(total_max + 1):
        for rest in _compositions(total_max - first, parts - 1):
            yield (first,) + rest


def factorial_inequality_exhaustive(max_entry: int = 5, max_alpha: int = 5) -> tuple:
    """Check the factorial inequality exhaustively in exact integer arithmetic.

    Covers alpha <= max_alpha, n0, n1 <= max_entry, l of length alpha+1 with
    sum(l) <= max_entry, and every n2 <= n.  Returns (count, worst ratio).
    """
    fact = [math.factorial(i) for i in range(4 * max_entry + max_alpha + 2)]
    count = 0
    worst_num, worst_den = 0, 1
    for alpha in range(max_alpha + 1):
        for l in _compositions(max_entry, alpha + 1):
            for n0 in range(max_entry + 1):
                for n1 in range(max_entry + 1):
                    n = (n0, n1) + l
                    top = 1
                    for x in n:
                        top *= fact[x]
                    s = sum(n)
                    for n2 in product(*(range(x + 1) for x in n)):
                        bot = 1
                        for x in n2:
                            bot *= fact[x]
                        num = top * fact[sum(n2) + alpha]
                        den = bot * fact[s + alpha]
                        count += 1
                        if num * worst_den > worst_num * den:
                            worst_num, worst_den = num, den
    return count, Fraction(worst_num, worst_den)


# randomized operator estimates -------------------------------------------------

@dataclass
class PropertyReport:
    name: str
    trials: int
    max_ratio: float              # max of lhs / rhs
    failures: list
    tolerance: float = 1e-12

    @property
    def ok(self) -> bool:
        return not self.failures


def random_poly(rng: np.random.Generator, level: int, degree: int = 3, terms: int = 6,
                degree_cap: int = 12) -> TruncatedPoly:
    """Random complex polynomial in the level's variables, total degree <= ``degree``."""
    nvar = level + 3
    coeffs: dict = {}
    for _ in range(terms):
        key = [0] * nvar
        for _ in range(int(rng.integers(0, degree + 1))):
            key[int(rng.integers(0, nvar))] += 1
        coeffs[tuple(key)] = coeffs.get(tuple(key), 0) + complex(rng.normal(), rng.normal())
    return TruncatedPoly(level, coeffs, degree_cap)


def random_config(rng: np.random.Generator) -> NormConfig:
    delta_bar = float(rng.uniform(0.05, 0.5))
    delta = delta_bar * float(rng.uniform(1.1, 3.0))
    return NormConfig(rho=float(rng.uniform(1.1, 16.0)), sigma=float(rng.uniform(0.2, 2.0)),
                      b=float(rng.uniform(1.2, 3.0)), delta_bar=delta_bar,
                      V0_bar=float(rng.uniform(0.01, 0.99)) * delta,
                      V1_bar=float(rng.uniform(0.01, 0.99)) * delta,
                      W_bar=float(rng.uniform(0.1, 2.0)), delta=delta)


def _tally(name: str, pairs: list, tol: float) -> PropertyReport:
    worst = 0.0
    failures = []
    for i, (lhs, rhs) in enumerate(pairs):
        if rhs > 0:
            worst = max(worst, lhs / rhs)
        if lhs > rhs * (1 + tol):
            failures.append((i, lhs, rhs))
    return PropertyReport(name, len(pairs), worst, failures, tol)


def check_product_estimate(trials: int = 200, seed: int = 0, tol: float = 1e-12) -> PropertyReport:
    """E(b Psi) <= |b|(radii) E(Psi) for level-0 b and level-alpha Psi."""
    from .taylor_core import poly_embed, poly_mul
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(trials):
        cfg = random_config(rng)
        alpha = int(rng.integers(0, 6))
        b = random_poly(rng, 0, 3, 4, degree_cap=24)
        psi = random_poly(rng, alpha, 4, 8, degree_cap=24)
        prod_ = poly_mul(poly_embed(b, alpha), psi)
        pairs.append((e_norm(prod_, cfg), abs_majorant(b, cfg.radii(0)) * e_norm(psi, cfg)))
    return _tally("product", pairs, tol)


def check_shift_estimates(trials: int = 200, seed: int = 1, tol: float = 1e-12) -> PropertyReport:
    """Level-shift bounds for d/dU_j, d/dV_k and the plain embedding."""
    from .taylor_core import U as U_var, V0, V1, poly_diff
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(trials):
        cfg = random_config(rng)
        ap = int(rng.integers(0, 5))
        alpha = ap + 2 + int(rng.integers(0, 4))
        psi = random_poly(rng, ap, 4, 8, degree_cap=24)
        base = e_norm(psi, cfg)
        j = int(rng.integers(0, ap + 1))
        pairs.append((e_norm(poly_diff(psi, U_var(j)), cfg, level=alpha),
                      shift_factor(alpha, ap, cfg, "U", j) * base))
        pairs.append((e_norm(poly_diff(psi, V0), cfg, level=alpha),
                      shift_factor(alpha, ap, cfg, "V0") * base))
        pairs.append((e_norm(poly_diff(psi, V1), cfg, level=alpha),
                      shift_factor(alpha, ap, cfg, "V1") * base))
        pairs.append((e_norm(psi, cfg, level=alpha), shift_factor(alpha, ap, cfg, "id") * base))
    return _tally("shift", pairs, tol)


def check_series_product(trials: int = 200, seed: int = 2, tol: float = 1e-12) -> PropertyReport:
    """G(b Psi) <= |b|(V0b, V1b, U0b, Wb) G(Psi) for a W-polynomial b and a series Psi."""
    from .fixed_point import w_product
    rng = np.random.default_rng(seed)
    pairs = []
    cap = 24
    for _ in range(trials):
        cfg = random_config(rng)
        A = int(rng.integers(1, 6))
        b = [random_poly(rng, 0, 2, 3, degree_cap=cap) for _ in range(int(rng.integers(1, 4)))]
        psi = JetSeries([random_poly(rng, a, 3, 4, degree_cap=cap) for a in range(A + 1)])
        pairs.append((g_norm(w_product(b, psi), cfg),
                      abs_majorant(b, cfg.radii(0), cfg.W_bar) * g_norm(psi, cfg)))
    return _tally("series_product", pairs, tol)
