"""Problem files: TOML documents describing a PDE instance.

Schema (all polynomial entries are strings in ``t``, ``z`` and, for the
b-series, ``u`` standing for X)::

    [pde]            S, ks
    [pde.b_series.<k>]  b1, b2, b3 = lists of polynomials, one per W-order
    [x]              family, f (coefficients of f), d, optional a, a_p, expression
    [radii]          R, R_prime
    [norm]           sigma, b, delta_bar, delta, V0_bar, V1_bar, rho, W_bar
    [data]           omega = list of polynomials in t, z (j = 0..S-1)
    [compact]        t, z = lists of complex numbers (product grid)
    [profile]        theta_point, approach_from, levels
    [truncation]     degree_cap
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import sympy

from .banach_norms import NormConfig
from .characteristic_flow import XSpec
from .errors import ConfigurationError
from .problem import CoefficientFamily, ProblemSpec
from .taylor_core import TruncatedPoly

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_T, _Z, _U = sympy.symbols("t z u")
_POS = {_T: 0, _Z: 1, _U: 2}
_BIG_CAP = 64


def parse_poly(text, path: str, allow_u: bool = True) -> TruncatedPoly:
    """Polynomial string -> level-0 TruncatedPoly in (v0=t, v1=z, u0=u)."""
    if isinstance(text, (int, float, complex)):
        text = repr(text)
    if not isinstance(text, str):
        raise ConfigurationError(f"{path}: expected a polynomial string")
    allowed = {"t": _T, "z": _Z, "I": sympy.I}
    if allow_u:
        allowed["u"] = _U
    try:
        expr = sympy.sympify(text, locals=allowed)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigurationError(f"{path}: cannot parse {text!r}") from exc
    extra = expr.free_symbols - set(allowed.values())
    if extra:
        names = ", ".join(sorted(str(s) for s in extra))
        raise ConfigurationError(f"{path}: unknown symbol(s) {names}")
    gens = [_T, _Z, _U] if allow_u else [_T, _Z]
    try:
        poly = sympy.Poly(sympy.expand(expr), *gens)
    except sympy.PolynomialError as exc:
        raise ConfigurationError(f"{path}: not a polynomial: {text!r}") from exc
    coeffs = {}
    for monom, c in poly.terms():
        coeffs[tuple(monom)] = complex(sympy.N(c))
    return TruncatedPoly(0, coeffs, _BIG_CAP)


def _get(doc: dict, path: str, required: bool = True, default=None):
    node = doc
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigurationError(f"{path}: missing required field")
            return default
        node = node[part]
    return node


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{path}: expected a number")
    return float(value)


def _complex_list(values, path: str) -> list:
    out = []
    for i, v in enumerate(values):
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append(complex(v))
        elif isinstance(v, str):
            try:
                out.append(complex(v.replace(" ", "")))
            except ValueError as exc:
                raise ConfigurationError(f"{path}[{i}]: bad complex number {v!r}") from exc
        elif isinstance(v, list) and len(v) == 2:
            out.append(complex(_number(v[0], f"{path}[{i}]"), _number(v[1], f"{path}[{i}]")))
        else:
            raise ConfigurationError(f"{path}[{i}]: expected a number")
    return out


def problem_from_dict(doc: dict, source: str = "<dict>", degree_cap: int | None = None) -> ProblemSpec:
    S = _get(doc, "pde.S")
    if not isinstance(S, int):
        raise ConfigurationError("pde.S: expected an integer")
    ks = _get(doc, "pde.ks")
    if not isinstance(ks, list) or not all(isinstance(k, int) for k in ks):
        raise ConfigurationError("pde.ks: expected a list of integers")

    series = {}
    b_doc = _get(doc, "pde.b_series", required=False, default={}) or {}
    for k_str, entry in b_doc.items():
        try:
            k = int(k_str)
        except ValueError as exc:
            raise ConfigurationError(f"pde.b_series.{k_str}: key must be an integer k") from exc
        for m in (1, 2, 3):
            name = f"b{m}"
            if name not in entry:
                continue
            lst = entry[name]
            if not isinstance(lst, list):
                raise ConfigurationError(f"pde.b_series.{k_str}.{name}: expected a list over W-orders")
            series[(m, k)] = tuple(parse_poly(s, f"pde.b_series.{k_str}.{name}[{a}]")
                                   for a, s in enumerate(lst))
    w_radius = float(_get(doc, "pde.w_radius", required=False, default=float("inf")))

    xdoc = _get(doc, "x")
    family = _get(doc, "x.family")
    d = _get(doc, "x.d")
    if not isinstance(d, int):
        raise ConfigurationError("x.d: expected an integer")
    f = _complex_list(_get(doc, "x.f"), "x.f")
    a = parse_poly(xdoc["a"], "x.a", allow_u=False) if "a" in xdoc else None
    a_p = (tuple(parse_poly(s, f"x.a_p[{p}]", allow_u=False) for p, s in enumerate(xdoc["a_p"]))
           if "a_p" in xdoc else None)
    R = _number(_get(doc, "radii.R"), "radii.R")
    R_prime = _number(_get(doc, "radii.R_prime"), "radii.R_prime")
    xspec = XSpec(family=family, f=tuple(f), a=a, a_p=a_p, d=d, R_prime=R_prime,
                  expression=xdoc.get("expression"), denominator=xdoc.get("denominator"))

    ndoc = _get(doc, "norm", required=False, default={}) or {}
    kw = {}
    for name in ("rho", "sigma", "b", "delta_bar", "V0_bar", "V1_bar", "W_bar", "delta"):
        if name in ndoc:
            kw[name] = _number(ndoc[name], f"norm.{name}")
    kw.setdefault("delta", (R_prime - R) / 2.0)
    norm = NormConfig(**kw)

    omega_src = _get(doc, "data.omega", required=False, default=[]) or []
    if not isinstance(omega_src, list):
        raise ConfigurationError("data.omega: expected a list of polynomials")
    omega = tuple(parse_poly(s, f"data.omega[{j}]", allow_u=False) for j, s in enumerate(omega_src))

    grid = None
    cdoc = _get(doc, "compact", required=False)
    if cdoc is not None:
        ts = _complex_list(_get(doc, "compact.t"), "compact.t")
        zs = _complex_list(_get(doc, "compact.z"), "compact.z")
        grid = np.array([(t, z) for t in ts for z in zs], dtype=complex)

    profile = dict(_get(doc, "profile", required=False, default={}) or {})
    for key in ("theta_point", "approach_from"):
        if key in profile:
            profile[key] = tuple(_complex_list(profile[key], f"profile.{key}"))

    cap = degree_cap
    if cap is None:
        cap = int(_get(doc, "truncation.degree_cap", required=False, default=12))

    return ProblemSpec(S=S, ks=tuple(ks), coeffs=CoefficientFamily(series, w_radius), x=xspec,
                       omega=omega, R=R, R_prime=R_prime, norm=norm, degree_cap=cap,
                       K_grid=grid, profile=profile, source=source)


def load_problem(path, degree_cap: int | None = None) -> ProblemSpec:
    """Read and validate a problem file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"{path}: no such problem file")
    try:
        doc = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return problem_from_dict(doc, source=str(p), degree_cap=degree_cap)


def fixture_path(name: str) -> Path:
    """Path of a bundled problem file (``example1``, ``zero``, ..)."""
    base = Path(__file__).with_name("fixtures")
    cand = base / (name if name.endswith(".problem") else f"{name}.problem")
    if not cand.is_file():
        raise ConfigurationError(f"no bundled fixture named {name!r}")
    return cand
