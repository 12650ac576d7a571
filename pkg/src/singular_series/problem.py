"""Problem description: PDE structure, coefficient data, initial data, radii."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .banach_norms import NormConfig
from .characteristic_flow import XSpec
from .errors import ConfigurationError, ConstraintError
from .taylor_core import DEFAULT_DEGREE_CAP, U, TruncatedPoly

CONSTRAINT_TEXT = (
    "S ≥ k+1+max(b(d_{1,k}+2)+3, d+1+b(d+d_{1,k}+1))",
    "S ≥ k+3+b(2+d_{2,k})",
    "S ≥ k+1+b·max(d_{1,k},d_{2,k})",
    "S ≥ k+b·d_{3,k}",
)


@dataclass(frozen=True)
class CoefficientFamily:
    """b_{m,k}(v0, v1, u0, w) = sum_alpha b_{m,k,alpha}(v0, v1, u0) w^alpha / alpha!.

    ``series[(m, k)]`` is the tuple of level-0 polynomials (b_{m,k,0}, b_{m,k,1}, ..);
    missing entries mean zero.
    """

    series: dict
    w_radius: float = math.inf

    def get(self, m: int, k: int, alpha: int) -> TruncatedPoly | None:
        seq = self.series.get((m, k), ())
        if alpha < len(seq) and not seq[alpha].is_zero():
            return seq[alpha]
        return None

    def w_degree(self) -> int:
        return max((len(s) - 1 for s in self.series.values()), default=-1)

    def u_degree(self, m: int, k: int) -> int:
        return max((p.degree_in(U(0)) for p in self.series.get((m, k), ())), default=0)

    def with_cap(self, cap: int) -> "CoefficientFamily":
        return CoefficientFamily({key: tuple(p.with_cap(cap) for p in seq)
                                  for key, seq in self.series.items()}, self.w_radius)


@dataclass(frozen=True)
class Structure:
    S: int
    ks: tuple
    b: float
    d: int
    dmk: dict = field(default_factory=dict)   # (m, k) -> degree in u0

    def d_of(self, m: int, k: int) -> int:
        return int(self.dmk.get((m, k), 0))


@dataclass
class ConstraintReport:
    ok: bool
    min_S: dict           # k -> minimal admissible S
    binding: dict         # k -> text of the binding inequality
    bounds: dict          # k -> list of four lower bounds
    violations: list


def _bounds(k: int, b: float, d: int, d1: int, d2: int, d3: int) -> list:
    return [
        k + 1 + max(b * (d1 + 2) + 3, d + 1 + b * (d + d1 + 1)),
        k + 3 + b * (2 + d2),
        k + 1 + b * max(d1, d2),
        k + b * d3,
    ]


def validate_constraints(p, raise_on_failure: bool = True) -> ConstraintReport:
    """Evaluate the four lower bounds on S for every k.

    ``p`` is a :class:`ProblemSpec` or a :class:`Structure`.
    """
    st = p.structure if hasattr(p, "structure") else p
    min_S, binding, bounds, violations = {}, {}, {}, []
    for k in st.ks:
        bs = _bounds(k, st.b, st.d, st.d_of(1, k), st.d_of(2, k), st.d_of(3, k))
        need = max(int(math.ceil(x - 1e-12)) for x in bs)
        need = max(need, k + 1)
        min_S[k] = need
        binding[k] = CONSTRAINT_TEXT[int(np.argmax(bs))]
        bounds[k] = bs
        for i, x in enumerate(bs):
            if st.S < x - 1e-12:
                violations.append((k, i, CONSTRAINT_TEXT[i], x))
        if st.S <= k:
            violations.append((k, -1, "S > k", k + 1))
    report = ConstraintReport(not violations, min_S, binding, bounds, violations)
    if violations and raise_on_failure:
        lines = [f"k={k}: {text} requires S ≥ {_fmt(x)} (got S={st.S})"
                 for k, _, text, x in violations]
        raise ConstraintError("structural constraints violated:\n  " + "\n  ".join(lines),
                              violations)
    return report


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:.6g}"


@dataclass(frozen=True)
class ProblemSpec:
    S: int
    ks: tuple
    coeffs: CoefficientFamily
    x: XSpec
    omega: tuple                  # level-0 polynomials in (v0, v1), j = 0..S-1
    R: float
    R_prime: float
    norm: NormConfig = field(default_factory=NormConfig)
    degree_cap: int = DEFAULT_DEGREE_CAP
    K_grid: np.ndarray | None = None
    profile: dict = field(default_factory=dict)
    source: str = ""

    def __post_init__(self):
        if self.S < 1:
            raise ConfigurationError("pde.S: need S >= 1")
        ks = tuple(sorted(set(int(k) for k in self.ks)))
        if not ks or min(ks) < 0:
            raise ConfigurationError("pde.ks: need a nonempty set of integers k >= 0")
        object.__setattr__(self, "ks", ks)
        if not 0 < self.R < self.R_prime:
            raise ConfigurationError("radii: need 0 < R < R_prime")
        if not self.R + self.norm.delta < self.R_prime:
            raise ConfigurationError("norm.delta: need R + delta < R_prime")
        omega = tuple(self.omega) + (TruncatedPoly.zero(0, self.degree_cap),) * (self.S - len(self.omega))
        if len(omega) > self.S:
            raise ConfigurationError(f"data.omega: at most S = {self.S} entries")
        for j, w in enumerate(omega):
            if w.variables() and max(w.variables()) > 1:
                raise ConfigurationError(f"data.omega_{j}: may only depend on t and z")
        object.__setattr__(self, "omega", tuple(w.with_cap(self.degree_cap) for w in omega))
        for (m, k), seq in self.coeffs.series.items():
            if m not in (1, 2, 3) or k not in ks:
                raise ConfigurationError(f"pde.b_series: entry (m={m}, k={k}) not in the structure")
            for a, poly in enumerate(seq):
                if poly.variables() and max(poly.variables()) > U(0):
                    raise ConfigurationError(f"pde.b_series b{m} (k={k}, alpha={a}): "
                                             "only t, z, u may appear")
                if poly.degree() > self.degree_cap:
                    raise ConfigurationError(
                        f"pde.b_series b{m} (k={k}, alpha={a}): degree {poly.degree()} "
                        f"exceeds the space-degree cap {self.degree_cap}")
        object.__setattr__(self, "coeffs", self.coeffs.with_cap(self.degree_cap))
        validate_constraints(self)

    @property
    def structure(self) -> Structure:
        dmk = {(m, k): self.coeffs.u_degree(m, k) for m in (1, 2, 3) for k in self.ks}
        return Structure(self.S, self.ks, self.norm.b, self.x.d, dmk)

    @property
    def delta(self) -> float:
        return self.norm.delta

    def omega_j(self, j: int) -> TruncatedPoly:
        if 0 <= j < self.S:
            return self.omega[j]
        return TruncatedPoly.zero(0, self.degree_cap)

    def with_cap(self, degree_cap: int) -> "ProblemSpec":
        from dataclasses import replace
        return replace(self, degree_cap=degree_cap,
                       coeffs=self.coeffs.with_cap(degree_cap),
                       omega=tuple(w.with_cap(degree_cap) for w in self.omega))

    def digest(self) -> str:
        """Stable hash of the problem content."""
        payload = {
            "S": self.S, "ks": list(self.ks), "R": self.R, "R_prime": self.R_prime,
            "cap": self.degree_cap, "family": self.x.family, "f": [str(c) for c in self.x.f],
            "norm": [self.norm.sigma, self.norm.b, self.norm.delta_bar, self.norm.delta,
                     self.norm.V0_bar, self.norm.V1_bar],
            "b": {f"{m},{k}": [_poly_repr(p) for p in seq]
                  for (m, k), seq in sorted(self.coeffs.series.items())},
            "omega": [_poly_repr(w) for w in self.omega],
            "K": [] if self.K_grid is None else [[str(complex(v)) for v in row] for row in self.K_grid],
            "profile": {k: str(v) for k, v in sorted(self.profile.items())},
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _poly_repr(p: TruncatedPoly) -> list:
    return [[list(k), repr(complex(c))] for k, c in sorted(p.coeffs.items())]
