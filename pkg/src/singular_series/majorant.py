"""Sup-norm sequences, the majorant recursion for psi, and the domination checks.

Sup tables are built from exact polynomial derivatives whose modulus is
maximised over sampled points of the distinguished boundary (the torus
|v0| = |v1| = R, |u_h| = rho), with the origin always included.  Including
the origin makes every entry an upper bound for the matching derivative at
0, which is what the domination check needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .characteristic_flow import coefficient_sup
from .errors import CapOverflowError, ConfigurationError
from .series_recursion import build_Aj, build_Bj, omega_hat
from .taylor_core import (U, V0, V1, TruncatedPoly, canon, derivative_at_origin, key_add,
                          key_shift, multinomial_split_weight)

DEFAULT_SAMPLES = 64
DEFAULT_RANDOM_POINTS = 4096


# sampling ------------------------------------------------------------------

def _torus_points(dims: int, radii: Sequence[float], samples: int, random_points: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Points on the product of circles, plus the origin (first row)."""
    radii = np.asarray(radii, dtype=float)
    if dims == 0:
        return np.zeros((1, 0), dtype=complex)
    if dims <= 2:
        th = 2 * np.pi * np.arange(samples) / samples
        grids = np.meshgrid(*([th] * dims), indexing="ij")
        phases = np.stack([g.ravel() for g in grids], axis=1)
    else:
        phases = rng.uniform(0.0, 2 * np.pi, size=(random_points, dims))
        # the all-zero phase corner, a cheap deterministic extra point
        phases = np.vstack([np.zeros((1, dims)), phases])
    pts = radii[None, :] * np.exp(1j * phases)
    return np.vstack([np.zeros((1, dims), dtype=complex), pts])


def sample_count(dims: int, samples: int = DEFAULT_SAMPLES,
                 random_points: int = DEFAULT_RANDOM_POINTS) -> int:
    if dims == 0:
        return 1
    if dims <= 2:
        return samples ** dims + 1
    return random_points + 2


def _radius_of(var: int, R: float, rho: float) -> float:
    return R if var in (V0, V1) else rho


def sampled_sup(poly: TruncatedPoly, R: float, rho: float, samples: int = DEFAULT_SAMPLES,
                random_points: int = DEFAULT_RANDOM_POINTS, seed: int = 0) -> float:
    """max |poly| over the sampled torus (radius R for v's, rho for u's) and the origin."""
    if poly.is_zero():
        return 0.0
    used = poly.variables()
    if not used:
        return abs(poly.coeffs[(0, 0)])
    rng = np.random.default_rng(seed)
    sub = _torus_points(len(used), [_radius_of(v, R, rho) for v in used], samples,
                        random_points, rng)
    pts = np.zeros((sub.shape[0], poly.level + 3), dtype=complex)
    pts[:, used] = sub
    return float(np.abs(poly.eval_many(pts)).max())


def derivative_poly(poly: TruncatedPoly, key) -> TruncatedPoly:
    """Exact partial derivative of multi-order ``key``."""
    key = canon(key)
    out = {}
    for m, c in poly.coeffs.items():
        width = max(len(m), len(key))
        mp = m + (0,) * (width - len(m))
        kp = key + (0,) * (width - len(key))
        if any(a < b for a, b in zip(mp, kp)):
            continue
        factor = 1
        for a, b in zip(mp, kp):
            factor *= math.perm(a, b)
        out[canon(a - b for a, b in zip(mp, kp))] = c * factor
    return TruncatedPoly(poly.level, out, poly.degree_cap)


def derivative_orders(poly: TruncatedPoly) -> set:
    """Every multi-order whose derivative is not identically zero (down-set of the support)."""
    orders = set()
    for m in poly.coeffs:
        ranges = [range(x + 1) for x in m]
        for idx in np.ndindex(*[len(r) for r in ranges]):
            orders.add(canon(idx))
    return orders


@dataclass(frozen=True)
class Caps:
    """Index caps: n0 <= n0, n1 <= n1, sum(l) <= l."""

    n0: int = 4
    n1: int = 4
    l: int = 4

    def admits(self, key) -> bool:
        return (key[0] <= self.n0 and key[1] <= self.n1 and sum(key[2:]) <= self.l)

    def grow(self, by: int) -> "Caps":
        return Caps(self.n0 + by, self.n1 + by, self.l + by)


def sup_table(poly: TruncatedPoly, R: float, rho: float, caps: Caps | None = None,
              samples: int = DEFAULT_SAMPLES, random_points: int = DEFAULT_RANDOM_POINTS,
              seed: int = 0) -> dict:
    """key -> sampled sup of the key-th derivative, over all nonvanishing orders."""
    table = {}
    for key in sorted(derivative_orders(poly)):
        if caps is not None and not caps.admits(key):
            continue
        val = sampled_sup(derivative_poly(poly, key), R, rho, samples, random_points, seed)
        if val > 0:
            table[key] = val
    return table


def cauchy_sup_estimate(fn, radii: Sequence[float], order, delta: float,
                        samples: int = DEFAULT_SAMPLES,
                        random_points: int = DEFAULT_RANDOM_POINTS, seed: int = 0) -> float:
    """Cauchy-formula bound for sup |d^order fn| over the polydisc of ``radii``.

    Returns order!/delta^|order| * max |fn| on the torus of radii + delta.
    ``fn`` is a TruncatedPoly (variables matched to ``radii`` positions) or a
    callable taking an (N, len(radii)) array.  When the derivative is known
    to vanish identically (a polynomial of too low degree, or a callable that
    is constant on the samples) the estimate is 0.
    """
    if delta <= 0:
        raise ConfigurationError("delta must be positive")
    order = tuple(int(x) for x in order)
    dims = len(radii)
    if len(order) > dims:
        raise IndexError("order has more entries than radii")
    order = order + (0,) * (dims - len(order))
    rng = np.random.default_rng(seed)
    pts = _torus_points(dims, [r + delta for r in radii], samples, random_points, rng)
    if isinstance(fn, TruncatedPoly):
        if dims != fn.level + 3:
            raise IndexError(f"need {fn.level + 3} radii for a level-{fn.level} polynomial")
        if any(order) and derivative_poly(fn, order).is_zero():
            return 0.0
        vals = fn.eval_many(pts)
    else:
        vals = np.asarray(fn(pts), dtype=complex)
        if any(order):
            spread = np.abs(vals - vals[0]).max()
            if spread <= 1e-14 * max(1.0, float(np.abs(vals).max())):
                return 0.0
    fact = math.prod(math.factorial(x) for x in order)
    return fact / delta ** sum(order) * float(np.abs(vals).max())


def pd_poly(j: int, d: int) -> int:
    """(j+d)!/j! = prod_{l=1..d} (j+l)."""
    if j < 0 or d < 0:
        raise ValueError("need j, d >= 0")
    return math.prod(j + l for l in range(1, d + 1))


# sup sequences --------------------------------------------------------------

@dataclass
class SupSequence:
    b: dict                  # (m, k, alpha) -> {key: sup}
    omega: list              # alpha -> {key: sup}
    A: dict                  # j -> {key: sup}
    B: dict                  # j -> {key: sup}
    R: float
    rho: float
    nu: float
    samples: int = DEFAULT_SAMPLES
    random_points: int = DEFAULT_RANDOM_POINTS
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return len(self.omega) - 1

    def scaled(self, factor: float) -> "SupSequence":
        """Copy with every b entry multiplied by ``factor``."""
        b = {key: {k: v * factor for k, v in tab.items()} for key, tab in self.b.items()}
        return SupSequence(b, self.omega, self.A, self.B, self.R, self.rho, self.nu,
                           self.samples, self.random_points, self.seed, dict(self.meta))


def min_gap(problem) -> int:
    return min(problem.S - k for k in problem.ks)


def build_sup_sequences(problem, A: int, nu: float, rho: float, R: float | None = None,
                        samples: int = DEFAULT_SAMPLES,
                        random_points: int = DEFAULT_RANDOM_POINTS, seed: int = 0,
                        degree_cap: int | None = None) -> SupSequence:
    """Sampled sup tables of b_{m,k,alpha}, the forcing, A_j and B_j up to order A."""
    if rho <= 0 or nu <= 0:
        raise ConfigurationError("rho and nu must be positive")
    R = problem.R if R is None else R
    cap = problem.degree_cap if degree_cap is None else degree_cap
    kw = dict(samples=samples, random_points=random_points, seed=seed)
    coeffs = problem.coeffs.with_cap(cap)
    b = {}
    for (m, k), seq in coeffs.series.items():
        for a, poly in enumerate(seq):
            if a <= A and not poly.is_zero():
                b[(m, k, a)] = sup_table(poly, R, rho, **kw)
    omega = [w.with_cap(cap) for w in problem.omega]
    forcing = [sup_table(omega_hat(a, coeffs, omega, cap), R, rho, **kw) for a in range(A + 1)]
    jmax = A - min_gap(problem)
    A_tab, B_tab = {}, {}
    for j in range(max(jmax + 1, 0)):
        A_tab[j] = sup_table(build_Aj(j, j + 1, problem.x, nu, cap), R, rho, **kw)
        B_tab[j] = sup_table(build_Bj(j, j + 1, nu, cap), R, rho, **kw)
    return SupSequence(b, forcing, A_tab, B_tab, R, rho, nu, samples, random_points, seed,
                       meta={"A": A, "degree_cap": cap})


# the one-level kernel -------------------------------------------------------

@dataclass
class LevelSource:
    table: dict
    caps: Caps | None        # None: every nonzero entry is stored
    level: int


def _need(caps: Caps, src: LevelSource, dn0: int, dn1: int, dl: int, what: str):
    if src.caps is None:
        return
    for name, need, have in (("n0", caps.n0 + dn0, src.caps.n0),
                             ("n1", caps.n1 + dn1, src.caps.n1),
                             ("sum(l)", caps.l + dl, src.caps.l)):
        if need > have:
            raise CapOverflowError(
                f"{what} at level {src.level} needs {name} up to {need}, computed only to {have}")


def _shifted_entries(src: dict, var: int):
    for kp, vp in src.items():
        if var < len(kp) and kp[var] > 0:
            yield key_shift(kp, var, -1), vp


def _within(caps: Caps | None, key) -> bool:
    return caps is None or caps.admits(key)


def majorant_level(alpha: int, S: int, ks: Sequence[int], b_tab: dict, A_tab: dict,
                   B_tab: dict, source: Callable[[int], LevelSource], forcing: dict,
                   caps: Caps | None) -> dict:
    """Right-hand side of the nonnegative recursion at order ``alpha``.

    psi_alpha = sum_k sum_{a1+a2=alpha, a2>=S-k} C(alpha, a1) [b1 (x) (psi'_{V0+1} + A (x) psi'_{U_j+1})
                + b2 (x) (psi'_{V1+1} + B (x) psi'_{U_j+1}) + b3 (x) psi'] + forcing,
    where psi' is the source at level a2+k-S and (x) is the multinomially
    weighted product of divided-power tables.
    """
    out: dict = {}
    for key, v in forcing.items():
        if _within(caps, key):
            out[key] = out.get(key, 0.0) + v

    def add(parts, value):
        tgt = parts[0]
        for p in parts[1:]:
            tgt = key_add(tgt, p)
        tgt = canon(tgt)
        if not _within(caps, tgt):
            return
        w = multinomial_split_weight(tgt, parts)
        out[tgt] = out.get(tgt, 0.0) + value * w

    for k in ks:
        for a2 in range(S - k, alpha + 1):
            a1 = alpha - a2
            ap = a2 + k - S
            binom = math.comb(alpha, a1)
            src = None
            for m in (1, 2, 3):
                bt = b_tab.get((m, k, a1))
                if not bt:
                    continue
                if src is None:
                    src = source(ap)
                if caps is not None:
                    if m == 3:
                        _need(caps, src, 0, 0, 0, "b3 term")
                    else:
                        _need(caps, src, int(m == 1), int(m == 2), 0, f"b{m} term")
                        _need(caps, src, 0, 0, 1, "A term" if m == 1 else "B term")
                if m == 3:
                    direct = list(src.table.items())
                else:
                    direct = list(_shifted_entries(src.table, V0 if m == 1 else V1))
                for kp, vp in direct:
                    for kb, vb in bt.items():
                        add((kb, kp), binom * vb * vp)
                if m == 3:
                    continue
                lifts = A_tab if m == 1 else B_tab
                for j in range(ap + 1):
                    lift = lifts.get(j)
                    if lift is None:
                        raise ConfigurationError(f"sup table for {'A' if m == 1 else 'B'}_{j} missing")
                    for kp, vp in _shifted_entries(src.table, U(j)):
                        for ka, va in lift.items():
                            for kb, vb in bt.items():
                                add((kb, ka, kp), binom * vb * va * vp)
    return {k: v for k, v in out.items() if v != 0.0}


# psi ---------------------------------------------------------------------------

@dataclass
class MajorantTable:
    A: int
    levels: list             # alpha -> {key: psi}
    caps: list               # alpha -> Caps used at that level
    base_caps: Caps
    norm: object = None

    def entry(self, alpha: int, key) -> float:
        return self.levels[alpha].get(canon(key), 0.0)

    def __getitem__(self, alpha: int) -> dict:
        return self.levels[alpha]


def level_caps(problem, A: int, base: Caps, depth: bool = True) -> list:
    s = min_gap(problem)
    return [base.grow((A - a) // s if depth else 0) for a in range(A + 1)]


def compute_psi(problem, sups: SupSequence, A: int, caps: Caps = Caps(), depth: bool = True,
                norm=None) -> MajorantTable:
    """Majorant table psi_alpha for alpha <= A.

    With ``depth`` the caps at level alpha are widened by the number of
    recursion steps still ahead, so every shifted lookup stays inside the
    computed range; without it a :class:`CapOverflowError` is raised as soon
    as a lookup would leave the range.
    """
    if A > sups.order:
        raise ConfigurationError(f"sup sequences only reach order {sups.order} < {A}")
    per_level = level_caps(problem, A, caps, depth)
    levels: list = []

    def source(ap: int) -> LevelSource:
        return LevelSource(levels[ap], per_level[ap], ap)

    for alpha in range(A + 1):
        levels.append(majorant_level(alpha, problem.S, problem.ks, sups.b, sups.A, sups.B,
                                     source, sups.omega[alpha], per_level[alpha]))
    return MajorantTable(A=A, levels=levels, caps=per_level, base_caps=caps, norm=norm)


# checks --------------------------------------------------------------------------

@dataclass
class CheckRow:
    alpha: int
    key: tuple
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs == 0 else math.inf


@dataclass
class CheckReport:
    name: str
    rows: list
    failures: list
    tolerance: float

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def max_ratio(self) -> float:
        return max((r.ratio for r in self.rows), default=0.0)

    @property
    def checked(self) -> int:
        return len(self.rows)


def check_domination(phi, psi: MajorantTable, caps: Caps | None = None,
                     slack: float = 1e-9) -> CheckReport:
    """|derivative of phi_alpha at 0| <= psi_alpha for every index within ``caps``."""
    caps = psi.base_caps if caps is None else caps
    rows, failures = [], []
    for alpha in range(min(phi.A, psi.A) + 1):
        poly = phi[alpha]
        keys = {k for k in poly.coeffs if caps.admits(k)}
        keys |= {k for k in psi.levels[alpha] if caps.admits(k)}
        for key in sorted(keys):
            lhs = abs(derivative_at_origin(poly, key))
            rhs = psi.levels[alpha].get(key, 0.0)
            row = CheckRow(alpha, key, lhs, rhs)
            rows.append(row)
            if lhs > rhs * (1.0 + slack) + 1e-300:
                failures.append(row)
    return CheckReport("domination", rows, failures, slack)


def varphi_tables(phi, R: float, rho: float, samples: int = DEFAULT_SAMPLES,
                  random_points: int = DEFAULT_RANDOM_POINTS, seed: int = 0) -> list:
    """Sampled sup tables of every derivative of every phi_alpha."""
    return [sup_table(phi[a], R, rho, None, samples, random_points, seed)
            for a in range(phi.A + 1)]


def check_varphi_recursion(problem, phi, sups: SupSequence, caps: Caps = Caps(),
                           slack: float = 1.1, varphi: list | None = None) -> CheckReport:
    """The sup-level inequality for phi: varphi_alpha <= slack * (recursion applied to varphi)."""
    if varphi is None:
        varphi = varphi_tables(phi, sups.R, sups.rho, sups.samples, sups.random_points, sups.seed)

    def source(ap: int) -> LevelSource:
        return LevelSource(varphi[ap], None, ap)

    rows, failures = [], []
    for alpha in range(phi.A + 1):
        rhs = majorant_level(alpha, problem.S, problem.ks, sups.b, sups.A, sups.B, source,
                             sups.omega[alpha], caps)
        for key in sorted(set(varphi[alpha]) | set(rhs)):
            if not caps.admits(key):
                continue
            row = CheckRow(alpha, key, varphi[alpha].get(key, 0.0), rhs.get(key, 0.0))
            rows.append(row)
            if row.lhs > slack * row.rhs + 1e-12 * max(1.0, row.lhs):
                failures.append(row)
    return CheckReport("varphi recursion", rows, failures, slack)


def check_A_bounds(problem, sups: SupSequence, delta: float, alpha_max: int | None = None,
                   nu: float | None = None) -> CheckReport:
    """Sampled A_j entries / key! against the closed-form Cauchy bound."""
    nu = sups.nu if nu is None else nu
    spec = problem.x
    radius = sups.R + delta
    a = coefficient_sup(spec.a, radius, nu)
    ap = max(coefficient_sup(p, radius, nu) for p in spec.a_p)
    d = spec.d
    rho = sups.rho
    top = max(sups.A) if sups.A else -1
    alpha_max = top if alpha_max is None else min(alpha_max, top)
    rows, failures = [], []
    for alpha_p in range(alpha_max + 1):
        bound0 = (a * nu * (alpha_p + 1) ** 2 * (rho + delta)
                  + (d + 1) * ap * (rho + delta) ** d * pd_poly(alpha_p, d))
        for j in range(alpha_p + 1):
            for key, v in sups.A[j].items():
                lhs = v / math.prod(math.factorial(x) for x in key)
                rhs = bound0 / delta ** sum(key)
                row = CheckRow(alpha_p, (j,) + tuple(key), lhs, rhs)
                rows.append(row)
                if lhs > rhs * (1 + 1e-12):
                    failures.append(row)
    return CheckReport("A bound", rows, failures, 0.0)


def check_B_bounds(problem, sups: SupSequence, delta: float,
                   alpha_max: int | None = None) -> CheckReport:
    """Sampled B_j entries / key! against nu (alpha'+1)(rho+delta)/delta^|key|."""
    top = max(sups.B) if sups.B else -1
    alpha_max = top if alpha_max is None else min(alpha_max, top)
    rows, failures = [], []
    for alpha_p in range(alpha_max + 1):
        bound0 = sups.nu * (alpha_p + 1) * (sups.rho + delta)
        for j in range(alpha_p + 1):
            for key, v in sups.B[j].items():
                lhs = v / math.prod(math.factorial(x) for x in key)
                rhs = bound0 / delta ** sum(key)
                row = CheckRow(alpha_p, (j,) + tuple(key), lhs, rhs)
                rows.append(row)
                if lhs > rhs * (1 + 1e-12):
                    failures.append(row)
    return CheckReport("B bound", rows, failures, 0.0)


def scalar_instance(A: int, S: int = 1):
    """Single k = S-1, b3 only, every sup sequence identically 1 (constants only).

    Returns (structure, sups) usable by compute_psi with Caps(0, 0, 0) and by
    the Picard route.
    """
    from .problem import Structure
    structure = Structure(S=S, ks=(S - 1,), b=2.0, d=0)
    one = {(0, 0): 1.0}
    b = {(3, S - 1, a): dict(one) for a in range(A + 1)}
    omega = [dict(one) for _ in range(A + 1)]
    sups = SupSequence(b, omega, {}, {}, R=1.0, rho=2.0, nu=1.0, meta={"A": A, "scalar": True})
    return structure, sups
