"""Command-line driver: ``singular-series <command> [options]``.

Every command writes one CSV per report into ``--out``; each file starts with
``# key=value`` lines (problem hash, orders, seed).  Exit status is 0 when all
checks pass, 1 when a check fails, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import BudgetError, CalibrationError, ConfigurationError, ConstraintError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("solve", "majorant", "norms", "fixed-point", "profile", "oracle", "all")


@dataclass
class RunConfig:
    command: str
    problem: str
    order_A: int = 12
    degree: int | None = None
    out: Path = Path("out")
    seed: int = 0
    rho: float | None = None
    compacts: int | None = None

    def __post_init__(self):
        if self.order_A < 0:
            raise ConfigurationError("--order-A must be >= 0")
        if self.degree is not None and self.degree < 0:
            raise ConfigurationError("--degree must be >= 0")
        if self.compacts is not None and self.compacts < 1:
            raise ConfigurationError("--compacts must be >= 1")


@dataclass
class Report:
    name: str
    header: list
    rows: list
    ok: bool
    meta: dict = field(default_factory=dict)
    summary: str = ""


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return f"{v.real!r}{v.imag:+.17g}j"
    if isinstance(v, tuple):
        return " ".join(str(x) for x in v)
    return str(v)


def write_report(report: Report, out: Path, base_meta: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{report.name}.csv"
    with path.open("w", newline="") as fh:
        for k, v in {**base_meta, **report.meta}.items():
            fh.write(f"# {k}={_fmt(v)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(report.header)
        for row in report.rows:
            writer.writerow([_fmt(v) for v in row])
    return path


# context shared by the commands ------------------------------------------------

class Context:
    def __init__(self, cfg: RunConfig):
        from .config import fixture_path, load_problem
        path = Path(cfg.problem)
        if not path.is_file():
            path = fixture_path(cfg.problem)
        self.cfg = cfg
        self.problem = load_problem(path, degree_cap=cfg.degree)
        self.A = cfg.order_A
        self._cache: dict = {}

    @property
    def rho(self) -> float:
        return self.cfg.rho if self.cfg.rho is not None else self.problem.norm.rho

    def meta(self) -> dict:
        return {"problem_sha256": self.problem.digest(), "source": Path(self.problem.source).name,
                "order_A": self.A, "degree_cap": self.problem.degree_cap, "seed": self.cfg.seed,
                "rho": self.rho, "version": __version__}

    def region(self):
        if "region" not in self._cache:
            from .characteristic_flow import calibrate
            if self.problem.K_grid is None:
                raise ConfigurationError("compact: a compact grid is required")
            self._cache["region"] = calibrate(self.problem.x, self.problem.K_grid, self.rho,
                                              self.A + 1, R=self.problem.R)
        return self._cache["region"]

    def phi(self, A: int | None = None):
        A = self.A if A is None else A
        key = ("phi", A)
        if key not in self._cache:
            from .series_recursion import compute_phi
            self._cache[key] = compute_phi(self.problem, A, nu=self.region().nu)
        return self._cache[key]

    def sups(self):
        if "sups" not in self._cache:
            from .majorant import build_sup_sequences
            self._cache["sups"] = build_sup_sequences(self.problem, self.A, self.region().nu,
                                                      self.rho, seed=self.cfg.seed)
        return self._cache["sups"]

    def bundle(self):
        if "bundle" not in self._cache:
            from .fixed_point import build_bundle
            from .majorant import Caps, level_caps
            top = level_caps(self.problem, self.A, Caps())[0]
            cap = top.n0 + top.n1 + top.l
            self._cache["bundle"] = build_bundle(self.problem, self.sups(), self.A, cap)
        return self._cache["bundle"]

    def W_search(self):
        if "W_bar" not in self._cache:
            from .fixed_point import search_W_bar
            self._cache["W_bar"] = search_W_bar(self.problem, self.bundle(),
                                                self.problem.norm.with_(rho=self.rho))
        return self._cache["W_bar"]

    def W_bar(self) -> float:
        return self.W_search().W_bar


# commands -------------------------------------------------------------------------

RESIDUAL_TOL = 1e-6


def cmd_solve(ctx: Context) -> list:
    from .assembly import residual_id_u, residual_pde, sample_grid, w_samples
    p = ctx.problem
    phi = ctx.phi()
    W = ctx.W_bar()
    pts = sample_grid(p)
    res = residual_pde(p, phi, pts, w_samples(W))
    id_u = residual_id_u(p, phi, pts)
    rows_phi = [(a, poly.level, len(poly), poly.degree() if len(poly) else 0, poly.max_abs_coeff())
                for a, poly in enumerate(phi.phi)]
    ok = res.max_residual < RESIDUAL_TOL * res.scale and id_u < 1e-9
    rows_res = [(t, z, w, r, y) for t, z, w, r, y in res.per_point]
    return [
        Report("phi", ["alpha", "level", "terms", "degree", "max_abs_coeff"], rows_phi, True,
               {"nu": phi.nu, "truncated": phi.truncated}),
        Report("residual", ["t", "z", "w", "abs_residual", "abs_Y"], rows_res, ok,
               {"W_bar": W, "max_residual": res.max_residual, "scale": res.scale,
                "id_u_residual": id_u},
               f"solve: max residual {res.max_residual:.3e} (scale {res.scale:.3g}), "
               f"U-equation residual {id_u:.3e}"),
    ]


def cmd_majorant(ctx: Context) -> list:
    from .majorant import (Caps, check_A_bounds, check_B_bounds, check_domination,
                           check_varphi_recursion, compute_psi)
    p = ctx.problem
    phi = ctx.phi()
    sups = ctx.sups()
    psi = compute_psi(p, sups, ctx.A, caps=Caps())
    dom = check_domination(phi, psi, caps=Caps())
    extra = [check_varphi_recursion(p, phi, sups, Caps()),
             check_A_bounds(p, sups, p.delta), check_B_bounds(p, sups, p.delta)]
    rows = [(r.alpha, tuple(r.key), r.lhs, r.rhs, r.ratio) for r in dom.rows]
    summary_rows = [(c.name, c.checked, c.max_ratio, len(c.failures), c.ok) for c in [dom] + extra]
    return [
        Report("domination", ["alpha", "key", "phi_coeff", "psi", "ratio"], rows, dom.ok,
               {"checked": dom.checked, "max_ratio": dom.max_ratio},
               f"majorant: {dom.checked} entries, max ratio {dom.max_ratio:.6g}"),
        Report("majorant_checks", ["check", "checked", "max_ratio", "failures", "pass"],
               summary_rows, all(c.ok for c in [dom] + extra)),
    ]


def cmd_norms(ctx: Context) -> list:
    import numpy as np

    from .banach_norms import (check_product_estimate, check_series_product, check_shift_estimates,
                               g_norm, kappa_limit, kappa_lower_bound, factorial_inequality_exhaustive)
    from .fixed_point import apply_DA, apply_DB, random_series
    seed = ctx.cfg.seed
    rows = []
    ok = True
    for rep in (check_product_estimate(seed=seed), check_shift_estimates(seed=seed + 1),
                check_series_product(seed=seed + 2)):
        rows.append((rep.name, rep.trials, rep.max_ratio, len(rep.failures), rep.ok))
        ok &= rep.ok
    count, worst = factorial_inequality_exhaustive()
    rows.append(("factorial_inequality", count, float(worst), int(worst > 1), worst <= 1))
    ok &= worst <= 1
    cfg = ctx.problem.norm.with_(rho=ctx.rho)
    kb = kappa_lower_bound(cfg, ctx.A)
    kl = kappa_limit(cfg)
    rows.append(("kappa_lower_bound", ctx.A + 1, kb, 0, kb >= kl > 0))
    ok &= kb >= kl > 0
    # lift operators: measured ratios only, no asserted constant
    bundle = ctx.bundle()
    cfgW = cfg.with_(W_bar=ctx.W_bar())
    rng = np.random.default_rng(seed)
    for name, op in (("lift_A_ratio", apply_DA), ("lift_B_ratio", apply_DB)):
        worst_r = 0.0
        for _ in range(20):
            s = random_series(bundle, cfgW, rng)
            worst_r = max(worst_r, g_norm(op(bundle, s), cfgW) / g_norm(s, cfgW))
        rows.append((name, 20, worst_r, 0, True))
    return [Report("norms", ["property", "trials", "max_ratio", "failures", "pass"], rows, ok,
                   summary="norms: " + ", ".join(f"{r[0]}={'ok' if r[4] else 'FAIL'}" for r in rows))]


def rho_rows(ctx: Context, rhos=(2.0, 4.0, 8.0, 16.0), trials: int = 50) -> list:
    from .characteristic_flow import calibrate
    from .fixed_point import build_bundle, rho_sweep
    from .majorant import build_sup_sequences
    p = ctx.problem
    cap = ctx.bundle().degree_cap

    def make(rho: float):
        reg = calibrate(p.x, p.K_grid, rho, ctx.A + 1, R=p.R)
        sups = build_sup_sequences(p, ctx.A, reg.nu, rho, seed=ctx.cfg.seed)
        return build_bundle(p, sups, ctx.A, cap), reg.nu

    return rho_sweep(p, make, p.norm.with_(W_bar=ctx.W_bar()), rhos, trials, ctx.cfg.seed)


def cmd_fixed_point(ctx: Context) -> list:
    from .banach_norms import g_norm
    from .fixed_point import contraction_factor, picard_solve, psi_tables
    from .majorant import Caps, compute_psi
    p = ctx.problem
    bundle = ctx.bundle()
    search = ctx.W_search()
    cfg = p.norm.with_(rho=ctx.rho, W_bar=search.W_bar)
    pic = picard_solve(p, bundle)
    psi = compute_psi(p, ctx.sups(), ctx.A, caps=Caps())
    tabs = psi_tables(pic.psi)
    worst = 0.0
    for a in range(ctx.A + 1):
        for key, v in psi.levels[a].items():
            if Caps().admits(key):
                ref = tabs[a].get(key, 0.0)
                worst = max(worst, abs(ref - v) / max(abs(v), 1e-300))
    rep = contraction_factor(p, bundle, cfg, trials=50, seed=ctx.cfg.seed)
    g_psi, g_om = g_norm(pic.psi, cfg), g_norm(bundle.forcing, cfg)
    sweep_rows = rho_rows(ctx)
    factors = [r.factor for r in sweep_rows]
    monotone = all(b <= a * (1 + 1e-12) for a, b in zip(factors, factors[1:]))
    checks = [("picard_vs_psi_max_rel", worst, worst <= 1e-12),
              ("picard_iterations", float(pic.iterations), pic.iterations <= ctx.A + 2),
              ("W_bar", search.W_bar, True),
              ("W_bar_search_start", search.start, True),
              ("contraction_factor", rep.factor, rep.factor <= 0.5),
              ("contraction_sweep_norm", rep.sweep, rep.sweep <= 0.5),
              ("g_norm_psi", g_psi, g_psi <= 2 * g_om),
              ("g_norm_forcing", g_om, True),
              ("factor_nonincreasing_in_rho", float(monotone), monotone)]
    ok = all(c[2] for c in checks)
    return [
        Report("fixed_point", ["quantity", "value", "pass"], checks, ok,
               summary=f"fixed-point: W_bar={search.W_bar:.6g} factor={rep.factor:.3e} "
                       f"|Psi|={g_psi:.4g} <= 2|Omega|={2 * g_om:.4g}"),
        Report("contraction", ["rho", "nu", "factor", "sweep_norm"],
               [(r.rho, r.nu, r.factor, r.sweep) for r in sweep_rows], monotone,
               {"W_bar": search.W_bar, "trials": 50}),
    ]


def cmd_profile(ctx: Context) -> list:
    from .assembly import growth_profile, nested_compacts
    comps = nested_compacts(ctx.problem, ctx.cfg.compacts)
    prof = growth_profile(ctx.problem, ctx.A, W_bar=ctx.W_bar(), compacts=comps,
                          seed=ctx.cfg.seed)
    ok = prof.ok and len(prof.rows) >= min(4, len(comps))
    meta = {"W_bar": prof.W_bar, "C11": prof.C11, "C12": prof.C12, "slope": prof.slope,
            "slope_cap": prof.slope_cap, "skipped": len(prof.skipped)}
    for label, reason in prof.skipped:
        meta[f"skipped_{label}"] = reason
    rows = [(r.rho, r.sup_abs_Y, r.bound, r.passed) for r in prof.rows]
    return [Report("profile", ["rho", "sup_abs_Y", "bound", "pass"], rows, ok, meta,
                   f"profile: {len(prof.rows)} rows, slope {prof.slope:.4g} <= {prof.slope_cap:.4g}")]


def cmd_oracle(ctx: Context) -> list:
    from .assembly import y_coefficients
    from .oracle import compare, default_base, direct_solve, nearby_points
    p = ctx.problem
    phi = ctx.phi()
    base = default_base(p)
    direct = direct_solve(p, base, ctx.A)
    pts = nearby_points(base, 10, seed=ctx.cfg.seed)
    cmp_ = compare(direct, lambda t, z: y_coefficients(p.x, phi, p.omega, p.S, t, z,
                                                       derivatives=False)[0], pts)
    rows = [(n, cmp_.max_rel[n], cmp_.max_rel[n] <= cmp_.tolerance) for n in cmp_.orders]
    return [Report("oracle", ["order", "max_rel_deviation", "pass"], rows, cmp_.ok,
                   {"base": base, "D_tz": direct.D, "points": len(pts)},
                   f"oracle: worst relative deviation {cmp_.worst:.3e}")]


HANDLERS = {"solve": cmd_solve, "majorant": cmd_majorant, "norms": cmd_norms,
            "fixed-point": cmd_fixed_point, "profile": cmd_profile, "oracle": cmd_oracle}


def run(cfg: RunConfig, stream=sys.stdout) -> int:
    """Execute one command; reports are written even when checks fail."""
    try:
        ctx = Context(cfg)
        names = list(HANDLERS) if cfg.command == "all" else [cfg.command]
        reports = []
        for name in names:
            reports.extend(HANDLERS[name](ctx))
    except (ConfigurationError, ConstraintError, BudgetError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    base_meta = {"command": cfg.command, **ctx.meta()}
    ok = True
    for rep in reports:
        path = write_report(rep, Path(cfg.out), base_meta)
        status = "PASS" if rep.ok else "FAIL"
        line = rep.summary or f"{rep.name}: {len(rep.rows)} rows"
        print(f"[{status}] {line} -> {path}", file=stream)
        ok &= rep.ok
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="singular-series",
                                 description="Truncated series solutions near a singular set.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--problem", default="example1",
                        help="problem file path or bundled fixture name")
        sp.add_argument("--order-A", type=int, default=12, dest="order_A")
        sp.add_argument("--degree", type=int, default=None, help="degree cap override")
        sp.add_argument("--out", type=Path, default=Path("out"))
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--rho", type=float, default=None)
        sp.add_argument("--compacts", type=int, default=None,
                        help="number of nested compacts for the profile")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(command=args.command, problem=args.problem, order_A=args.order_A,
                        degree=args.degree, out=args.out, seed=args.seed, rho=args.rho,
                        compacts=args.compacts)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
