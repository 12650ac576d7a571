"""Bivariate truncated Taylor jets in (t, z).

A :class:`Jet2` holds ``c[i, j]``, the coefficient of ``s**i * r**j`` in the
expansion of a function at a base point ``(t*, z*)`` with ``t = t* + s`` and
``z = z* + r``.  Truncation is rectangular: ``i < nt`` and ``j < nz``.  All
products and quotients are exact on the kept rectangle.
"""

from __future__ import annotations

import cmath
import math

import numpy as np


def _conv(x: np.ndarray, y: np.ndarray, n: int) -> np.ndarray:
    return np.convolve(x, y)[:n]


def _inv1(g: np.ndarray) -> np.ndarray:
    """Reciprocal of a univariate series (g[0] != 0)."""
    n = len(g)
    h = np.zeros(n, dtype=complex)
    h[0] = 1.0 / g[0]
    for k in range(1, n):
        h[k] = -np.dot(g[1:k + 1], h[k - 1::-1][:k]) * h[0]
    return h


class Jet2:
    __slots__ = ("c",)

    def __init__(self, c):
        self.c = np.array(c, dtype=complex)
        if self.c.ndim != 2:
            raise ValueError("Jet2 needs a 2-d coefficient array")

    @property
    def shape(self):
        return self.c.shape

    @classmethod
    def const(cls, value, nt: int, nz: int) -> "Jet2":
        c = np.zeros((nt, nz), dtype=complex)
        c[0, 0] = value
        return cls(c)

    @classmethod
    def var_t(cls, t0, nt: int, nz: int) -> "Jet2":
        c = np.zeros((nt, nz), dtype=complex)
        c[0, 0] = t0
        if nt > 1:
            c[1, 0] = 1.0
        return cls(c)

    @classmethod
    def var_z(cls, z0, nt: int, nz: int) -> "Jet2":
        c = np.zeros((nt, nz), dtype=complex)
        c[0, 0] = z0
        if nz > 1:
            c[0, 1] = 1.0
        return cls(c)

    @property
    def value(self) -> complex:
        return complex(self.c[0, 0])

    def _like(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            if other.shape != self.shape:
                raise ValueError(f"jet shapes differ: {self.shape} vs {other.shape}")
            return other
        return Jet2.const(other, *self.shape)

    def __add__(self, other):
        return Jet2(self.c + self._like(other).c)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.c)

    def __sub__(self, other):
        return Jet2(self.c - self._like(other).c)

    def __rsub__(self, other):
        return Jet2(self._like(other).c - self.c)

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.c * complex(other))
        other = self._like(other)
        nt, nz = self.shape
        out = np.zeros((nt, nz), dtype=complex)
        rows_a = [i for i in range(nt) if np.any(self.c[i])]
        rows_b = [i for i in range(nt) if np.any(other.c[i])]
        for a in rows_a:
            for b in rows_b:
                if a + b >= nt:
                    break
                out[a + b] += _conv(self.c[a], other.c[b], nz)
        return Jet2(out)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet2":
        nt, nz = self.shape
        if self.c[0, 0] == 0:
            raise ZeroDivisionError("jet with zero constant term")
        inv0 = _inv1(self.c[0])
        h = np.zeros((nt, nz), dtype=complex)
        h[0] = inv0
        for i in range(1, nt):
            acc = np.zeros(nz, dtype=complex)
            for a in range(1, i + 1):
                acc += _conv(self.c[a], h[i - a], nz)
            h[i] = -_conv(acc, inv0, nz)
        return Jet2(h)

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.c / complex(other))
        return self * self._like(other).reciprocal()

    def __rtruediv__(self, other):
        return self._like(other) * self.reciprocal()

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers")
        out = Jet2.const(1.0, *self.shape)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def exp(self) -> "Jet2":
        nt, nz = self.shape
        c0 = self.c[0, 0]
        rest = Jet2(self.c.copy())
        rest.c[0, 0] = 0
        term = Jet2.const(1.0, nt, nz)
        total = Jet2.const(1.0, nt, nz)
        for n in range(1, nt + nz):
            term = term * rest / n
            if not np.any(term.c):
                break
            total = total + term
        return total * cmath.exp(c0)

    def dt(self) -> "Jet2":
        """d/dt; the last t-row becomes invalid (filled with zeros)."""
        nt, nz = self.shape
        out = np.zeros((nt, nz), dtype=complex)
        if nt > 1:
            out[:-1] = self.c[1:] * np.arange(1, nt)[:, None]
        return Jet2(out)

    def dz(self) -> "Jet2":
        nt, nz = self.shape
        out = np.zeros((nt, nz), dtype=complex)
        if nz > 1:
            out[:, :-1] = self.c[:, 1:] * np.arange(1, nz)[None, :]
        return Jet2(out)

    def eval_offset(self, ds: complex, dr: complex) -> complex:
        nt, nz = self.shape
        ps = ds ** np.arange(nt)
        pr = dr ** np.arange(nz)
        return complex(ps @ self.c @ pr)


def exp(x):
    """exp for numbers and jets."""
    if isinstance(x, Jet2):
        return x.exp()
    return cmath.exp(x)


def horner(coeffs, x):
    """Evaluate sum coeffs[i] x**i for numbers or jets."""
    out = 0j if not isinstance(x, Jet2) else Jet2.const(0.0, *x.shape)
    for c in reversed(list(coeffs)):
        out = out * x + c
    return out


def taylor_factorials(n: int) -> np.ndarray:
    return np.array([math.factorial(i) for i in range(n)], dtype=float)
