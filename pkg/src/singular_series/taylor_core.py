"""Sparse truncated Taylor polynomials in the variables V0, V1, U_0, U_1, ...

A polynomial lives at a *level* ``alpha``; it may involve ``V0, V1`` and
``U_0 .. U_alpha``.  Monomials are keyed by canonical exponent tuples
``(n0, n1, l_0, ..., l_r)`` whose trailing zero ``l`` entries are trimmed, so
the same monomial has the same key at every level.

Coefficients are stored in monomial form, ``P = sum c_m V0^n0 V1^n1 prod U_h^l_h``.
The divided-power form used by majorant tables is ``c_m * n0! n1! prod l_h!``.

Example
-------
>>> p = TruncatedPoly.variable(V0, level=0) + TruncatedPoly.variable(U(0), level=0)
>>> q = p * TruncatedPoly.variable(U(0), level=0)
>>> sorted(q.coeffs.items())
[((0, 0, 2), (1+0j)), ((1, 0, 1), (1+0j))]
"""

from __future__ import annotations

import math
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError

V0 = 0
V1 = 1
DEFAULT_DEGREE_CAP = 6


def U(j: int) -> int:
    """Position of the variable U_j in an exponent key / evaluation point."""
    if j < 0:
        raise IndexError(f"U_{j}: negative index")
    return 2 + j


def var_name(var: int) -> str:
    return {V0: "V0", V1: "V1"}.get(var, f"U{var - 2}")


def canon(key: Iterable[int]) -> tuple:
    """Canonical exponent tuple: at least (n0, n1), trailing zero l's trimmed."""
    key = list(key)
    if len(key) < 2:
        key += [0] * (2 - len(key))
    n = len(key)
    while n > 2 and key[n - 1] == 0:
        n -= 1
    return tuple(int(x) for x in key[:n])


def key_add(a: tuple, b: tuple) -> tuple:
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, x in enumerate(b):
        out[i] += x
    return tuple(out)


def key_shift(key: tuple, var: int, step: int) -> tuple | None:
    """Exponent tuple with ``key[var] += step``; None if it would go negative."""
    lst = list(key)
    if var >= len(lst):
        if step < 0:
            return None
        lst += [0] * (var + 1 - len(lst))
    lst[var] += step
    if lst[var] < 0:
        return None
    return canon(lst)


def key_level(key: tuple) -> int:
    """Smallest level at which the monomial is admissible."""
    return max(len(key) - 3, 0)


def key_factorial(key: tuple) -> int:
    out = 1
    for x in key:
        out *= math.factorial(x)
    return out


class MultiIndex(tuple):
    """Exponent vector (n0, n1, l) with canonical trimming of ``l``.

    Compares and hashes equal to the plain canonical tuple, so it can be
    used interchangeably as a dictionary key.
    """

    def __new__(cls, n0: int = 0, n1: int = 0, l: Sequence[int] = ()):
        if n0 < 0 or n1 < 0 or any(x < 0 for x in l):
            raise ValueError("exponents must be nonnegative")
        return super().__new__(cls, canon((n0, n1, *l)))

    @classmethod
    def from_key(cls, key: Iterable[int]) -> "MultiIndex":
        key = canon(key)
        return cls(key[0], key[1], key[2:])

    @property
    def n0(self) -> int:
        return self[0]

    @property
    def n1(self) -> int:
        return self[1]

    @property
    def l(self) -> tuple:
        return tuple(self[2:])

    @property
    def degree(self) -> int:
        return sum(self)

    def __repr__(self):
        return f"MultiIndex(n0={self[0]}, n1={self[1]}, l={self.l})"


class TruncatedPoly:
    """Immutable sparse polynomial at a given level, truncated at total degree.

    Terms above ``degree_cap`` are discarded on construction; monomials that
    need a level above ``level`` raise ``IndexError``.
    """

    __slots__ = ("level", "degree_cap", "_coeffs", "_arrays")

    def __init__(self, level: int, coeffs: Mapping | None = None,
                 degree_cap: int = DEFAULT_DEGREE_CAP):
        if level < 0:
            raise IndexError("level must be nonnegative")
        if degree_cap < 0:
            raise ConfigurationError("degree_cap must be nonnegative")
        store = {}
        for key, c in (coeffs or {}).items():
            key = canon(key)
            if key_level(key) > level:
                raise IndexError(f"monomial {key} needs level {key_level(key)} > {level}")
            if min(key) < 0:
                raise ValueError(f"negative exponent in {key}")
            if sum(key) > degree_cap:
                continue
            c = complex(c)
            if c != 0:
                store[key] = store.get(key, 0j) + c
        self.level = int(level)
        self.degree_cap = int(degree_cap)
        self._coeffs = {k: v for k, v in store.items() if v != 0}
        self._arrays = None

    # construction helpers
    @classmethod
    def constant(cls, c, level: int = 0, degree_cap: int = DEFAULT_DEGREE_CAP):
        return cls(level, {(0, 0): c}, degree_cap)

    @classmethod
    def variable(cls, var: int, level: int = 0, degree_cap: int = DEFAULT_DEGREE_CAP,
                 coeff=1.0):
        key = [0] * (var + 1)
        key[var] = 1
        return cls(max(level, var - 2), {canon(key): coeff}, degree_cap)

    @classmethod
    def zero(cls, level: int = 0, degree_cap: int = DEFAULT_DEGREE_CAP):
        return cls(level, {}, degree_cap)

    # inspection
    @property
    def coeffs(self) -> Mapping:
        return MappingProxyType(self._coeffs)

    def __len__(self):
        return len(self._coeffs)

    def __bool__(self):
        return bool(self._coeffs)

    def is_zero(self) -> bool:
        return not self._coeffs

    def degree(self) -> int:
        return max((sum(k) for k in self._coeffs), default=-1)

    def degree_in(self, var: int) -> int:
        return max((k[var] if var < len(k) else 0 for k in self._coeffs), default=-1)

    def variables(self) -> list:
        used = set()
        for key in self._coeffs:
            used.update(i for i, x in enumerate(key) if x)
        return sorted(used)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._coeffs.values()), default=0.0)

    def __repr__(self):
        terms = " + ".join(f"({c:.6g})*{_mono_str(k)}" for k, c in sorted(self._coeffs.items()))
        return f"TruncatedPoly(level={self.level}, cap={self.degree_cap}: {terms or '0'})"

    def allclose(self, other: "TruncatedPoly", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        scale = max(self.max_abs_coeff(), other.max_abs_coeff(), 0.0)
        for key in set(self._coeffs) | set(other._coeffs):
            diff = abs(self._coeffs.get(key, 0j) - other._coeffs.get(key, 0j))
            if diff > atol + rtol * scale:
                return False
        return True

    # arithmetic
    def _check_cap(self, other):
        if self.degree_cap != other.degree_cap:
            raise ConfigurationError(
                f"degree caps differ ({self.degree_cap} vs {other.degree_cap})")

    def __add__(self, other):
        if not isinstance(other, TruncatedPoly):
            other = TruncatedPoly.constant(other, self.level, self.degree_cap)
        self._check_cap(other)
        out = dict(self._coeffs)
        for k, c in other._coeffs.items():
            out[k] = out.get(k, 0j) + c
        return TruncatedPoly(max(self.level, other.level), out, self.degree_cap)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedPoly(self.level, {k: -c for k, c in self._coeffs.items()},
                             self.degree_cap)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "TruncatedPoly":
        c = complex(c)
        if c == 0:
            return TruncatedPoly.zero(self.level, self.degree_cap)
        return TruncatedPoly(self.level, {k: v * c for k, v in self._coeffs.items()},
                             self.degree_cap)

    def __mul__(self, other):
        if isinstance(other, TruncatedPoly):
            return poly_mul(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def with_cap(self, degree_cap: int) -> "TruncatedPoly":
        return TruncatedPoly(self.level, self._coeffs, degree_cap)

    # evaluation
    def _get_arrays(self):
        if self._arrays is None:
            nv = self.level + 3
            keys = list(self._coeffs)
            exps = np.zeros((len(keys), nv), dtype=np.int64)
            for i, key in enumerate(keys):
                exps[i, :len(key)] = key
            coef = np.array([self._coeffs[k] for k in keys], dtype=complex)
            self._arrays = (exps, coef)
        return self._arrays

    def eval_many(self, points) -> np.ndarray:
        """Evaluate at each row of ``points`` (shape (N, level+3))."""
        pts = np.asarray(points, dtype=complex)
        if pts.ndim != 2 or pts.shape[1] != self.level + 3:
            raise IndexError(f"points must have {self.level + 3} columns")
        exps, coef = self._get_arrays()
        if len(coef) == 0:
            return np.zeros(pts.shape[0], dtype=complex)
        terms = np.broadcast_to(coef, (pts.shape[0], len(coef))).copy()
        for v in range(exps.shape[1]):
            e = exps[:, v]
            top = int(e.max())
            if top == 0:
                continue
            powers = np.ones((pts.shape[0], top + 1), dtype=complex)
            for i in range(1, top + 1):
                powers[:, i] = powers[:, i - 1] * pts[:, v]
            terms *= powers[:, e]
        return terms.sum(axis=1)


def _mono_str(key) -> str:
    parts = [f"{var_name(i)}^{x}" if x > 1 else var_name(i)
             for i, x in enumerate(key) if x]
    return "*".join(parts) or "1"


def poly_mul(p: TruncatedPoly, q: TruncatedPoly) -> TruncatedPoly:
    """Product of two polynomials, dropping monomials above the common cap."""
    p._check_cap(q)
    cap = p.degree_cap
    out = {}
    qitems = [(k, c, sum(k)) for k, c in q._coeffs.items()]
    for kp, cp in p._coeffs.items():
        dp = sum(kp)
        for kq, cq, dq in qitems:
            if dp + dq > cap:
                continue
            key = key_add(kp, kq)
            out[key] = out.get(key, 0j) + cp * cq
    return TruncatedPoly(max(p.level, q.level), out, cap)


def poly_diff(p: TruncatedPoly, var: int) -> TruncatedPoly:
    """Formal partial derivative with respect to V0, V1 or U_j."""
    if var < 0:
        raise IndexError("negative variable position")
    if var >= 2 and var - 2 > p.level:
        raise IndexError(f"U_{var - 2} is not a variable at level {p.level}")
    out = {}
    for key, c in p._coeffs.items():
        e = key[var] if var < len(key) else 0
        if e:
            out[key_shift(key, var, -1)] = c * e
    return TruncatedPoly(p.level, out, p.degree_cap)


def poly_embed(p: TruncatedPoly, new_level: int) -> TruncatedPoly:
    """View ``p`` at a higher level; the new variables enter with exponent 0."""
    if new_level < p.level:
        raise IndexError(f"cannot embed level {p.level} into level {new_level}")
    return TruncatedPoly(new_level, p._coeffs, p.degree_cap)


def poly_eval(p: TruncatedPoly, point: Sequence[complex]) -> complex:
    """Evaluate at ``(v0, v1, u_0, .., u_level)``."""
    if len(point) != p.level + 3:
        raise IndexError(f"point has length {len(point)}, expected {p.level + 3}")
    total = 0j
    for key, c in p._coeffs.items():
        term = c
        for x, e in zip(point, key):
            if e:
                term *= x ** e
        total += term
    return complex(total)


def multinomial_split_weight(m: Sequence[int], parts: Sequence[Sequence[int]]) -> int:
    """prod over coordinates of m_i! / (prod_parts part_i!), as an exact integer."""
    if len(parts) not in (2, 3):
        raise ValueError("expected 2 or 3 parts")
    m = canon(m)
    parts = [canon(pt) for pt in parts]
    width = max(len(m), *(len(pt) for pt in parts))
    pad = lambda k: tuple(k) + (0,) * (width - len(k))
    m_p = pad(m)
    parts_p = [pad(pt) for pt in parts]
    weight = 1
    for i in range(width):
        total = 0
        for pt in parts_p:
            if pt[i] < 0:
                raise ValueError("negative part")
            total += pt[i]
            weight *= math.comb(total, pt[i])
        if total != m_p[i]:
            raise ValueError(f"parts do not sum to {m} at coordinate {i}")
    return weight


def to_divided(p: TruncatedPoly) -> dict:
    """Divided-power coefficient table ``key -> c_key * key!``."""
    return {k: c * key_factorial(k) for k, c in p._coeffs.items()}


def from_divided(table: Mapping, level: int, degree_cap: int = DEFAULT_DEGREE_CAP) -> TruncatedPoly:
    """Inverse of :func:`to_divided`."""
    return TruncatedPoly(level, {canon(k): v / key_factorial(canon(k)) for k, v in table.items()},
                         degree_cap)


def derivative_at_origin(p: TruncatedPoly, key) -> complex:
    """The derivative of order ``key`` at the origin (a divided-power coefficient)."""
    key = canon(key)
    return p._coeffs.get(key, 0j) * key_factorial(key)


class JetSeries:
    """Truncated series ``sum_alpha P_alpha W^alpha / alpha!`` with polynomial coefficients.

    The alpha-th coefficient is normally a polynomial at level alpha; operator
    images (see ``fixed_point``) may sit one level higher.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Sequence[TruncatedPoly]):
        terms = tuple(terms)
        if not terms:
            raise ValueError("a JetSeries needs at least one level")
        caps = {t.degree_cap for t in terms}
        if len(caps) != 1:
            raise ConfigurationError("all levels of a JetSeries must share one degree cap")
        self.terms = terms

    @classmethod
    def zero(cls, A: int, degree_cap: int = DEFAULT_DEGREE_CAP) -> "JetSeries":
        return cls([TruncatedPoly.zero(a, degree_cap) for a in range(A + 1)])

    @property
    def A(self) -> int:
        return len(self.terms) - 1

    @property
    def degree_cap(self) -> int:
        return self.terms[0].degree_cap

    def __getitem__(self, alpha: int) -> TruncatedPoly:
        return self.terms[alpha]

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def _check(self, other: "JetSeries"):
        if other.A != self.A:
            raise ValueError(f"truncation orders differ ({self.A} vs {other.A})")

    def __add__(self, other: "JetSeries") -> "JetSeries":
        self._check(other)
        return JetSeries([p + q for p, q in zip(self.terms, other.terms)])

    def __sub__(self, other: "JetSeries") -> "JetSeries":
        self._check(other)
        return JetSeries([p - q for p, q in zip(self.terms, other.terms)])

    def scale(self, c) -> "JetSeries":
        return JetSeries([p.scale(c) for p in self.terms])

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.terms)

    def allclose(self, other: "JetSeries", rtol: float = 1e-12) -> bool:
        self._check(other)
        scale = max(max(p.max_abs_coeff() for p in self.terms),
                    max(p.max_abs_coeff() for p in other.terms))
        return all(p.allclose(q, rtol=0.0, atol=rtol * scale)
                   for p, q in zip(self.terms, other.terms))
