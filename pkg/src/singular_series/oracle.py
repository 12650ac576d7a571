"""Independent Taylor solver: W-coefficients of Y as (t, z) jets at a base point.

Y_{alpha+S} = sum_k sum_{a1+a2=alpha} C(alpha, a1) [b1 d_t Y_{a2+k} + b2 d_z Y_{a2+k} + b3 Y_{a2+k}]
with every b evaluated at (t, z, X(t, z)) in jet arithmetic.  Nothing here goes
through the phi recursion; it only shares the polynomial containers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .characteristic_flow import x_bijet
from .errors import BudgetError
from .jets import Jet2

DEFAULT_MIN_VALID = 8


def _poly_on_jets(poly, T: Jet2, Z: Jet2, X: Jet2 | None) -> Jet2:
    """Level-0 polynomial in (t, z, u) evaluated on jets."""
    nt, nz = T.shape
    total = Jet2.const(0.0, nt, nz)
    for key, c in poly.coeffs.items():
        n0, n1 = key[0], key[1]
        l0 = key[2] if len(key) > 2 else 0
        term = Jet2.const(c, nt, nz)
        if n0:
            term = term * T ** n0
        if n1:
            term = term * Z ** n1
        if l0:
            if X is None:
                raise ValueError("polynomial depends on X but no X jet was given")
            term = term * X ** l0
        total = total + term
    return total


@dataclass
class DirectSeries:
    """Y_n as jets around ``base`` for n = 0..A+S, with the trusted order of each."""

    base: tuple
    A: int
    S: int
    D: int
    jets: list
    valid: list                   # entries c[i, j] with i, j < valid[n] are exact
    meta: dict = field(default_factory=dict)

    def value(self, n: int, t: complex, z: complex) -> complex:
        return self.jets[n].eval_offset(t - self.base[0], z - self.base[1])


def _generations(S: int, ks: Sequence[int], wdeg: int, n_max: int) -> list:
    """Derivative depth consumed by each Y_n (0 for the data orders)."""
    gen = [0] * (n_max + 1)
    for n in range(S, n_max + 1):
        alpha = n - S
        g = 0
        for k in ks:
            for a1 in range(min(alpha, wdeg) + 1):
                src = alpha - a1 + k
                g = max(g, gen[src] + 1)
        gen[n] = g
    return gen


def achievable_A(problem, D: int, min_valid: int = DEFAULT_MIN_VALID) -> int:
    wdeg = problem.coeffs.w_degree()
    A = -1
    while A < 10_000:
        gen = _generations(problem.S, problem.ks, wdeg, problem.S + A + 1)
        if D - gen[-1] < min_valid:
            return A
        A += 1
    return A


def direct_solve(problem, base: tuple, A: int, D_tz: int | None = None,
                 min_valid: int = DEFAULT_MIN_VALID) -> DirectSeries:
    """Taylor jets of Y_0..Y_{A+S} at ``base`` with D_tz terms per variable."""
    S = problem.S
    D = A + S + 4 if D_tz is None else int(D_tz)
    wdeg = problem.coeffs.w_degree()
    gen = _generations(S, problem.ks, wdeg, S + A)
    worst = D - max(gen)
    if worst < min_valid:
        raise BudgetError(
            f"D_tz={D} leaves only {worst} trusted jet orders at A={A} (need {min_valid}); "
            f"achievable A with this budget is {achievable_A(problem, D, min_valid)}")
    t0, z0 = complex(base[0]), complex(base[1])
    T = Jet2.var_t(t0, D, D)
    Z = Jet2.var_z(z0, D, D)
    X = Jet2(x_bijet(problem.x, t0, z0, D, D))
    b = {key: [_poly_on_jets(p, T, Z, X) if not p.is_zero() else None for p in seq]
         for key, seq in problem.coeffs.series.items()}
    Y: list = []
    for j in range(S):
        w = problem.omega[j] if j < len(problem.omega) else None
        Y.append(Jet2.const(0.0, D, D) if w is None or w.is_zero() else _poly_on_jets(w, T, Z, None))
    dY_cache: dict = {}

    def derived(n: int, m: int) -> Jet2:
        if (n, m) not in dY_cache:
            dY_cache[(n, m)] = Y[n].dt() if m == 1 else Y[n].dz()
        return dY_cache[(n, m)]

    for alpha in range(A + 1):
        acc = Jet2.const(0.0, D, D)
        for k in problem.ks:
            for a1 in range(alpha + 1):
                src = alpha - a1 + k
                binom = math.comb(alpha, a1)
                for m in (1, 2, 3):
                    seq = b.get((m, k))
                    if seq is None or a1 >= len(seq) or seq[a1] is None:
                        continue
                    piece = Y[src] if m == 3 else derived(src, m)
                    acc = acc + seq[a1] * piece * binom
        Y.append(acc)
    return DirectSeries(base=(t0, z0), A=A, S=S, D=D, jets=Y,
                        valid=[D - g for g in gen], meta={"min_valid": min_valid})


@dataclass
class OracleComparison:
    orders: list
    max_rel: dict                 # n -> max relative deviation over the points
    points: list
    tolerance: float

    @property
    def worst(self) -> float:
        return max(self.max_rel.values(), default=0.0)

    @property
    def ok(self) -> bool:
        return self.worst <= self.tolerance


def default_base(problem) -> tuple:
    """The compact-grid point farthest from the singular set (largest |denominator|)."""
    grid = problem.K_grid
    if grid is None or len(grid) == 0:
        return (0j, 0j)
    dist = [abs(problem.x.denominator_value(t, z)) for t, z in grid]
    t, z = grid[int(np.argmax(dist))]
    return (complex(t), complex(z))


def nearby_points(base: tuple, count: int = 10, radius: float = 0.05, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        dt, dz = radius * rng.uniform(0.2, 1.0, 2) * np.exp(2j * np.pi * rng.uniform(0, 1, 2))
        out.append((complex(base[0]) + dt, complex(base[1]) + dz))
    return out


def compare(direct: DirectSeries, evaluator: Callable, points: Sequence,
            orders: Sequence[int] | None = None, tolerance: float = 1e-6) -> OracleComparison:
    """``evaluator(t, z)`` returns the Y_n values (n = 0..A+S) from the other route."""
    orders = list(range(direct.A + direct.S + 1)) if orders is None else list(orders)
    got = {n: [] for n in orders}
    ref = {n: [] for n in orders}
    for t, z in points:
        vals = evaluator(t, z)
        for n in orders:
            got[n].append(complex(vals[n]))
            ref[n].append(direct.value(n, t, z))
    max_rel = {}
    for n in orders:
        a = np.array(got[n])
        r = np.array(ref[n])
        scale = max(np.abs(r).max(), np.abs(a).max())
        max_rel[n] = float(np.abs(a - r).max() / scale) if scale > 1e-300 else 0.0
    return OracleComparison(orders, max_rel, list(points), tolerance)
