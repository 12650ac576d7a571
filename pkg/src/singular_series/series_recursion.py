"""Coefficient functions phi_alpha of the W-series, built level by level.

Internally the recursion runs on ``phi_hat_alpha = phi_alpha / alpha!`` so
factorials never grow out of range; :class:`PhiFamily` exposes both forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

from .characteristic_flow import XSpec
from .errors import ConfigurationError, InvariantError
from .taylor_core import (V0, V1, U, TruncatedPoly, poly_diff, poly_embed, poly_mul)


@lru_cache(maxsize=None)
def compositions(total: int, parts: int) -> tuple:
    """All tuples of ``parts`` nonnegative ints summing to ``total``."""
    if parts <= 0:
        return ((),) if total == 0 else ()
    if parts == 1:
        return ((total,),)
    return tuple((first,) + rest for first in range(total + 1)
                 for rest in compositions(total - first, parts - 1))


def _scaled_v1_derivative(poly: TruncatedPoly, order: int, nu: float) -> TruncatedPoly:
    """d_v1^order poly / (order! nu^order)."""
    out = poly
    for _ in range(order):
        out = poly_diff(out, V1)
        if out.is_zero():
            break
    return out.scale(1.0 / (math.factorial(order) * nu ** order))


def build_Aj(j: int, level: int, spec: XSpec, nu: float, cap: int) -> TruncatedPoly:
    """A_j = sum_{l1+l2=j} d^l1 a/(l1! nu^l1) (l2+1) nu u_{l2+1}
           + sum_p sum_{j0+..+jp=j} d^j0 a_p/(j0! nu^j0) prod u_{j_l}."""
    if j < 0:
        raise IndexError("j must be nonnegative")
    if level < j + 1:
        raise IndexError(f"A_{j} involves U_{j + 1}; level {level} is too low")
    if spec.a is None or spec.a_p is None:
        raise ConfigurationError("x.a / x.a_p: coefficient data missing")
    if nu <= 0:
        raise ConfigurationError("nu must be positive")
    total = TruncatedPoly.zero(level, cap)
    for l1 in range(j + 1):
        l2 = j - l1
        da = _scaled_v1_derivative(spec.a, l1, nu)
        if da.is_zero():
            continue
        u = TruncatedPoly.variable(U(l2 + 1), level, cap, coeff=(l2 + 1) * nu)
        total = total + poly_mul(poly_embed(da.with_cap(cap), level), u)
    for p, ap in enumerate(spec.a_p):
        if ap.is_zero():
            continue
        for comp in compositions(j, p + 1):
            dap = _scaled_v1_derivative(ap, comp[0], nu)
            if dap.is_zero():
                continue
            term = poly_embed(dap.with_cap(cap), level)
            for jl in comp[1:]:
                term = poly_mul(term, TruncatedPoly.variable(U(jl), level, cap))
            total = total + term
    return total


def build_Bj(j: int, level: int, nu: float, cap: int = 6) -> TruncatedPoly:
    """B_j = (j+1) nu U_{j+1}."""
    if j < 0 or j + 1 > level:
        raise IndexError(f"B_{j} involves U_{j + 1}; level {level} is too low")
    return TruncatedPoly.variable(U(j + 1), level, cap, coeff=(j + 1) * nu)


def omega_hat(alpha: int, coeffs, omega: Sequence[TruncatedPoly], cap: int | None = None) -> TruncatedPoly:
    """Forcing term at order alpha (level 0, variables v0, v1, u0).

    sum_k sum_{a1+a2=alpha} C(alpha, a1) [b1_{k,a1} d_v0 w_{a2+k}
        + b2_{k,a1} d_v1 w_{a2+k} + b3_{k,a1} w_{a2+k}],  with w_j = 0 for j >= S.
    """
    if alpha < 0:
        raise IndexError("alpha must be nonnegative")
    if cap is None:
        cap = omega[0].degree_cap if omega else 6
    ks = sorted({k for (_, k) in coeffs.series})
    total = TruncatedPoly.zero(0, cap)
    for k in ks:
        for a1 in range(alpha + 1):
            j = alpha - a1 + k
            if j >= len(omega) or omega[j].is_zero():
                continue
            w = omega[j].with_cap(cap)
            binom = math.comb(alpha, a1)
            for m, piece in ((1, poly_diff(w, V0)), (2, poly_diff(w, V1)), (3, w)):
                b = coeffs.get(m, k, a1)
                if b is None or piece.is_zero():
                    continue
                total = total + poly_mul(b.with_cap(cap), piece).scale(binom)
    return total


@dataclass
class PhiFamily:
    """phi_alpha for alpha = 0..A, with a trace of the contributing (k, alpha2)."""

    A: int
    phi_hat: list                      # phi_alpha / alpha!
    forcing: list                      # omega_tilde_alpha (level 0 polys)
    nu: float
    degree_cap: int
    truncated: bool = False
    provenance: dict = field(default_factory=dict)

    @property
    def phi(self) -> list:
        return [p.scale(math.factorial(a)) for a, p in enumerate(self.phi_hat)]

    def __getitem__(self, alpha: int) -> TruncatedPoly:
        return self.phi_hat[alpha].scale(math.factorial(alpha))


def _track(p: TruncatedPoly, q: TruncatedPoly) -> bool:
    """True if poly_mul(p, q) might have dropped terms."""
    return not p.is_zero() and not q.is_zero() and p.degree() + q.degree() > p.degree_cap


def compute_phi(problem, A: int, nu: float = 1.0, degree_cap: int | None = None,
                pad: bool = False) -> PhiFamily:
    """Run the phi recursion up to order A.

    With ``pad`` every operand is first embedded at the target level, which
    must give the same coefficient maps as the default mixed-level products.
    """
    if A < 0:
        raise ValueError("A must be nonnegative")
    cap = problem.degree_cap if degree_cap is None else degree_cap
    S = problem.S
    coeffs = problem.coeffs.with_cap(cap)
    omega = [w.with_cap(cap) for w in problem.omega]
    spec = problem.x
    truncated = False
    forcing = [omega_hat(a, coeffs, omega, cap) for a in range(A + 1)]
    A_cache: dict = {}

    def Aj(j: int) -> TruncatedPoly:
        if j not in A_cache:
            A_cache[j] = build_Aj(j, j + 1, spec, nu, cap)
        return A_cache[j]

    phi_hat: list = []
    provenance: dict = {}
    for alpha in range(A + 1):
        acc = poly_embed(forcing[alpha], alpha).scale(1.0 / math.factorial(alpha))
        trace = []
        for k in problem.ks:
            for a2 in range(S - k, alpha + 1):
                a1 = alpha - a2
                ap = a2 + k - S
                if ap < 0 or ap >= alpha:
                    raise InvariantError(f"recursion at alpha={alpha} refers to level {ap}")
                src = phi_hat[ap]
                if src.is_zero():
                    continue
                weight = math.factorial(ap) / (math.factorial(a1) * math.factorial(a2))
                used = False
                for m in (1, 2, 3):
                    b = coeffs.get(m, k, a1)
                    if b is None:
                        continue
                    if m == 3:
                        inner = src
                    else:
                        inner = poly_diff(src, V0 if m == 1 else V1)
                        for j in range(ap + 1):
                            du = poly_diff(src, U(j))
                            if du.is_zero():
                                continue
                            lift = Aj(j) if m == 1 else build_Bj(j, j + 1, nu, cap)
                            truncated |= _track(lift, du)
                            if pad:
                                prod = poly_mul(poly_embed(lift, alpha), poly_embed(du, alpha))
                            else:
                                prod = poly_mul(lift, du)
                            inner = poly_embed(inner, max(inner.level, prod.level)) + prod
                    if inner.is_zero():
                        continue
                    truncated |= _track(b, inner)
                    if pad:
                        term = poly_mul(poly_embed(b, alpha), poly_embed(inner, alpha))
                    else:
                        term = poly_mul(b, inner)
                    acc = acc + poly_embed(term.scale(weight), alpha)
                    used = True
                if used:
                    trace.append((k, a2))
        if acc.level != alpha:
            raise InvariantError(f"phi_{alpha} landed at level {acc.level}")
        phi_hat.append(acc)
        provenance[alpha] = trace
    return PhiFamily(A=A, phi_hat=phi_hat, forcing=forcing, nu=nu, degree_cap=cap,
                     truncated=truncated, provenance=provenance)
