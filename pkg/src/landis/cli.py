"""Command-line experiment runner.

Usage::

    landis [--config FILE] COMMAND [--key value ...]

Every ``[run]`` key has a ``--key`` flag that overrides the config value.
Exit codes: 0 all checks pass, 2 a theorem check failed (falsification
candidate), 1 usage or runtime error.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import COMMANDS, RUN_KEYS, ExperimentConfig, load
from .errors import ConfigParse, LandisError, NoBounceInWindow
from .fields import make_profile, radial_bessel_like, constant, sup_ratios
from .harmonics import angular_quadrature, decompose, reconstruct
from .ode1d import bounce_search, dense_gap_scan, solve_linear_ivp, verify_uci
from .parabolic import SpaceTimeField, Barrier, pick_parameters, subsolution_grid, verify_subsolution
from .rates import rate_report, sharp_rate
from .spectral import generalized_lambda1

__all__ = ["main", "run", "build_parser"]

PASS, FAIL, ERROR = 0, 2, 1


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "pass" if x else "fail"
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


class Output:
    """Collects files and report lines for one run."""

    def __init__(self, directory, formats=("csv", "dat")):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.formats = set(formats) | {"csv"}
        self.report: list[str] = []
        self.failed = False

    def csv(self, name, header, rows):
        with open(self.dir / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])

    def dat(self, name, columns, comment=""):
        if "dat" not in self.formats:
            return
        cols = np.column_stack([np.asarray(c, float) for c in columns])
        with open(self.dir / name, "w", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            for row in cols:
                fh.write(" ".join("%.17g" % v for v in row) + "\n")

    def check(self, name, ok, detail=""):
        self.failed |= not ok
        self.report.append(f"{name}: {'pass' if ok else 'fail'}" + (f"  {detail}" if detail else ""))

    def note(self, line):
        self.report.append(line)

    def finish(self):
        with open(self.dir / "report.txt", "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.report) + "\n")
        return FAIL if self.failed else PASS


def _field(cfg: ExperimentConfig, seed=None):
    return make_profile(cfg.profile, cfg.params, cfg.seed if seed is None else seed)


def _initial_slope(cfg, seed):
    if "du0" in cfg.run:
        return float(cfg.run["du0"])
    # one draw per seed keeps batches reproducible entry by entry
    return float(np.random.default_rng(seed).uniform(-5.0, 0.0))


def _solve(cfg, fld, seed):
    r = cfg.run
    x_lo = r.get("x_lo", fld.x_lo)
    x_end = r.get("x_end", fld.x_hi)
    u0 = r.get("u0", 1.0)
    du0 = _initial_slope(cfg, seed)
    traj = solve_linear_ivp(fld, x_lo, u0, du0, x_end, r.get("tol", 1e-10),
                            method=r.get("method", "RK45"))
    return traj, u0, du0


def cmd_rates(cfg, out):
    fld = _field(cfg)
    rep = rate_report(fld, cfg.run.get("grid_n", 20001), cfg.run.get("x_tail"))
    row = rep.csv_row()
    out.csv("rates.csv", list(row), [list(row.values())])
    out.check("threshold ordering kappa_abg >= kappa_limsup", rep.kappa_abg >= rep.kappa_limsup,
              f"kappa={fmt(rep.kappa)}")


def cmd_solve(cfg, out):
    fld = _field(cfg)
    traj, _, _ = _solve(cfg, fld, cfg.seed)
    kappa = cfg.run.get("kappa", sharp_rate(*sup_ratios(fld)).kappa)
    env = np.abs(traj.u) * np.exp(kappa * traj.grid)
    out.csv("trajectory.csv", ["x", "u", "du", "env"], zip(traj.grid, traj.u, traj.du, env))
    out.dat("envelope.dat", [traj.grid, env], f"x |u|exp(kappa x), kappa={kappa!r}")
    res = traj.residual(fld)
    out.check("trajectory residual", res <= cfg.run.get("residual_tol", 1e-6), f"residual={fmt(res)}")


def _uci_entry(args):
    cfg, seed = args
    fld = _field(cfg, seed)
    traj, u0, du0 = _solve(cfg, fld, seed)
    rows = []
    for x0 in cfg.run.get("x0", (fld.x_lo,)):
        rep = verify_uci(fld, traj, x0, tol_thm=cfg.run.get("tol_thm", 1e-2),
                         residual_tol=cfg.run.get("residual_tol", 1e-6),
                         x_tail=cfg.run.get("x_tail"))
        rows.append([seed, x0, rep.kappa, u0, du0, rep.sup_env_after_x0, rep.lower_bound,
                     rep.tail_env, rep.passed, rep.tail_passed, rep.residual])
    env = np.abs(traj.u) * np.exp(rows[0][2] * traj.grid)
    return seed, rows, (traj.grid, env)


def _pool_map(fn, items, workers):
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def cmd_uci_check(cfg, out):
    seeds = cfg.run.get("seeds", (cfg.seed,))
    results = _pool_map(_uci_entry, [(cfg, s) for s in seeds], cfg.run.get("workers", 1))
    rows = [row for _, rr, _ in results for row in rr]
    out.csv("uci.csv", ["seed", "x0", "kappa", "u0", "du0", "sup_env_after_x0", "lower_bound",
                        "tail_env", "pass", "tail_pass", "residual"], rows)
    for seed, _, (x, env) in results:
        out.dat(f"envelope_seed{seed}.dat", [x, env], "x envelope")
    n_fail = sum(not r[8] for r in rows)
    n_tail = sum(not r[9] for r in rows)
    out.check("envelope bound", n_fail == 0, f"{len(rows) - n_fail}/{len(rows)} cases")
    out.note(f"tail-window envelope bound: {len(rows) - n_tail}/{len(rows)} cases")


def cmd_bounce(cfg, out):
    fld = _field(cfg)
    r = cfg.run
    kappa = r.get("kappa", sharp_rate(*sup_ratios(fld)).kappa)
    x_bar = r.get("x_bar", fld.x_lo)
    du0 = r.get("du0", -(kappa + 0.5))
    try:
        w, traj, length = bounce_search(fld, x_bar, r.get("u0", 1.0), du0, kappa,
                                        tol=r.get("tol", 1e-10))
    except NoBounceInWindow as exc:
        out.csv("bounce.csv", ["x_bar", "x_tilde", "h", "ratio", "length"], [])
        out.check("bounce", False, str(exc))
        return
    out.csv("bounce.csv", ["x_bar", "x_tilde", "h", "ratio", "length"],
            [[w.x_bar, w.x_tilde, w.h, w.ratio, length]])
    out.dat("bounce_traj.dat", [traj.grid, traj.u], "x u")
    out.check("bounce", True, f"h={fmt(w.h)}")


def _dense_entry(args):
    cfg, seed = args
    fld = _field(cfg, seed)
    traj, _, _ = _solve(cfg, fld, seed)
    kappa = sharp_rate(*sup_ratios(fld)).kappa
    kp = cfg.run.get("kappa_prime", 1.1 * kappa)
    res = dense_gap_scan(traj, kp, kappa)
    return seed, kappa, kp, res


def cmd_dense_scan(cfg, out):
    seeds = cfg.run.get("seeds", (cfg.seed,))
    results = _pool_map(_dense_entry, [(cfg, s) for s in seeds], cfg.run.get("workers", 1))
    out.csv("dense.csv", ["seed", "start", "end"],
            [[s, a, b] for s, _, _, res in results for a, b in res.gaps])
    out.csv("dense_summary.csv", ["seed", "kappa", "kappa_prime", "max_gap", "open_tail"],
            [[s, k, kp, res.max_gap, res.open_tail] for s, k, kp, res in results])
    h_emp = max(res.max_gap for *_, res in results)
    out.note(f"empirical gap bound h_emp = {fmt(h_emp)}")


def cmd_eigen(cfg, out):
    fld = _field(cfg)
    r = cfg.run
    radii = r.get("radii", tuple(L for L in (5.0, 10.0, 20.0, 40.0) if L <= fld.x_hi - fld.x_lo))
    est = generalized_lambda1(fld, radii, r.get("mesh_density", 50.0))
    out.csv("eigen.csv", ["radius", "lambda"], zip(est.radii, est.lambdas))
    out.csv("eigen_limit.csv", ["lambda_inf", "err_est"], [[est.lambda_inf, est.err_est]])
    out.dat("eigenfunction.dat", est.eigenfunction, "x phi")
    mono = bool(np.all(np.diff(est.lambdas) <= 1e-10 * np.maximum(1, np.abs(est.lambdas[1:]))))
    out.check("eigenvalues nonincreasing in the radius", mono)
    if est.flag:
        out.note(est.flag)


def cmd_harmonics(cfg, out):
    r = cfg.run
    n_dim, band = r.get("n_dim", 3), r.get("band", 4)
    quad = angular_quadrature(n_dim, band)
    ls, _, phi = quad.basis(band)
    rng = np.random.default_rng(cfg.seed)
    radii = np.linspace(r.get("x_lo", 1.0), r.get("x_hi", 2.0), r.get("n_r", 5))
    coef = rng.standard_normal((phi.shape[0], radii.size)) * np.exp(-radii)
    u = coef.T @ phi
    ms = decompose(u, band, n_dim, radii, quadrature=quad)
    err = float(np.max(np.abs(reconstruct(ms) - u)))
    gram = float(np.max(np.abs(quad.gram(band) - np.eye(phi.shape[0]))))
    exact = bool(np.array_equal(ms.lambdas, ls * (ls + n_dim - 2.0)))
    out.csv("modes.csv", ["j", "lambda_j", "r", "u_j"],
            [[j + 1, ms.lambdas[j], rr, ms.u_modes[j, k]]
             for j in range(len(ms)) for k, rr in enumerate(radii)])
    for j in range(len(ms)):
        out.dat(f"mode_{j + 1}.dat", [radii, ms.u_modes[j]], f"r u_{j + 1}")
    out.check("roundtrip", err <= 1e-8, f"max error {fmt(err)}")
    out.check("gram", gram <= 1e-10, f"max deviation {fmt(gram)}")
    out.check("eigenvalues l(l+N-2)", exact)


def _space_time_field(cfg):
    if cfg.profile != "constant":
        raise ConfigParse("barrier needs the 'constant' profile (a, q, v)")
    p = {"a": 1.0, "q": 0.0, "v": -1.0, **cfg.params}
    return SpaceTimeField.constant(p["a"], p["q"], p["v"], cfg.run.get("n_dim", 1))


def cmd_barrier(cfg, out):
    r = cfg.run
    fld = _space_time_field(cfg)
    kappa = r.get("kappa", 1.2)
    b = pick_parameters(fld, kappa, r.get("R1", 0.0))
    if any(k in r for k in ("R", "h", "delta")):
        b = Barrier(b.kappa, r.get("R", b.R), r.get("h", b.h), r.get("delta", b.delta), b.C,
                    b.eps, b.n_dim, b.alpha_inf, b.alpha_sup)
    grid = r.get("grid", (400, 400))
    rho, t, eta, res = subsolution_grid(fld, b, grid)
    out.csv("barrier.csv", ["r", "t", "eta", "P_eta_residual"],
            zip(rho.ravel(), t.ravel(), eta.ravel(), res.ravel()))
    rep = verify_subsolution(fld, b, grid)
    out.note(f"barrier kappa={fmt(b.kappa)} R={fmt(b.R)} h={fmt(b.h)} delta={fmt(b.delta)} "
             f"admissibility={fmt(b.admissibility())}")
    out.check("subsolution", rep.passed, f"max residual {fmt(rep.max_residual)}")


def cmd_demo_bessel(cfg, out):
    r0, r1 = 1.0, 10.0
    tol = cfg.run.get("tol", 1e-12)
    f3 = radial_bessel_like(3, r0, r1)
    e = math.exp(-r0)
    t3 = solve_linear_ivp(f3, r0, e / r0, -e * (1 / r0 + 1 / r0**2), r1, tol)
    f1 = constant(1.0, 0.0, -1.0, r0, r1)
    t1 = solve_linear_ivp(f1, r0, e, -e, r1, tol, dx=t3.grid[1] - t3.grid[0])
    r = t3.grid
    exact = np.exp(-r) / r
    env3 = np.abs(t3.u) * np.exp(r)
    env1 = np.abs(t1.u) * np.exp(t1.grid)
    rel = float(np.max(np.abs(t3.u - exact) / exact))
    out.csv("bessel.csv", ["r", "u_3d", "exact_3d", "env_3d", "u_1d", "env_1d"],
            zip(r, t3.u, exact, env3, t1.u, env1))
    out.dat("bessel_env.dat", [r, env1, env3], "r envelope_1d envelope_3d (kappa = 1)")
    out.check("radial solve matches exp(-r)/r", rel <= 1e-2, f"max relative error {fmt(rel)}")
    out.check("3D envelope decreasing to <= 0.11",
              bool(np.all(np.diff(env3) < 0) and env3[-1] <= 0.11), f"env(10)={fmt(env3[-1])}")
    out.check("1D envelope constant", float(np.max(np.abs(env1 - 1))) <= 1e-6,
              f"max |env-1| {fmt(float(np.max(np.abs(env1 - 1))))}")


HANDLERS = {
    "rates": cmd_rates,
    "solve": cmd_solve,
    "bounce": cmd_bounce,
    "uci-check": cmd_uci_check,
    "dense-scan": cmd_dense_scan,
    "eigen": cmd_eigen,
    "harmonics": cmd_harmonics,
    "barrier": cmd_barrier,
    "demo-bessel": cmd_demo_bessel,
}


def run(cfg: ExperimentConfig, directory=None) -> int:
    """Execute ``cfg`` and write outputs; returns the exit code."""
    command = cfg.command
    if command not in HANDLERS:
        raise ConfigParse(f"unknown or missing command {command!r}; choose from {', '.join(COMMANDS)}")
    out = Output(directory or cfg.output.get("directory", "out"), cfg.output.get("formats", ("csv", "dat")))
    out.note(f"landis {__version__} {command} profile={cfg.profile} seed={cfg.seed}")
    HANDLERS[command](cfg, out)
    return out.finish()


def build_parser():
    p = argparse.ArgumentParser(prog="landis", description="Decay-rate verification experiments.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="INI experiment file")
    p.add_argument("--out", help="output directory (overrides [output] directory)")
    p.add_argument("--profile", help="field profile name")
    p.add_argument("--seed", type=int)
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                   help="profile parameter (repeatable)")
    p.add_argument("command", nargs="?", choices=COMMANDS)
    for key in RUN_KEYS:
        if key != "command":
            p.add_argument(f"--{key.replace('_', '-')}", dest=f"run_{key}", metavar="VALUE")
    return p


def _config_from_args(args) -> ExperimentConfig:
    cfg = load(args.config) if args.config else ExperimentConfig()
    run_over = {}
    for key, (parse_fn, _) in RUN_KEYS.items():
        raw = getattr(args, f"run_{key}", None)
        if raw is not None:
            try:
                run_over[key] = parse_fn(raw)
            except ValueError as exc:
                raise ConfigParse(f"--{key.replace('_', '-')} {raw!r}: {exc}") from None
    if args.command:
        run_over["command"] = args.command
    params = {}
    for item in args.param:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigParse(f"--param expects NAME=VALUE, got {item!r}")
        try:
            params[name] = tuple(float(v) for v in value.split(",")) if "," in value else float(value)
        except ValueError:
            raise ConfigParse(f"--param {item!r}: not a number") from None
    fld = {k: v for k, v in (("profile", args.profile), ("seed", args.seed)) if v is not None}
    out = {"directory": args.out} if args.out else {}
    return cfg.with_overrides(run=run_over, field_=fld, output=out, params=params)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return run(cfg)
    except (LandisError, ValueError, KeyError, OSError) as exc:
        print(f"landis: error: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
