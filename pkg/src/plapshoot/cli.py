"""Command-line interface.

    plapshoot validate CONFIG
    plapshoot shoot    CONFIG --a A [--reference]
    plapshoot solve    CONFIG [--n-max K | --n-max n0+K]
    plapshoot sweep    CONFIG [--a1 A1] [--doublings D]
    plapshoot convert  CONFIG --ladder LADDER.json

Exit codes: 0 ok, 2 config error or parameter rejection, 3 a certification
or check failed, 4 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import re
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import limit_gap_check, sweep, trend_check
from .catalog import Catalog, default_catalog_dir
from .census import CertificationError
from .config import ConfigError, ConfigRejected, RunConfig, load_config
from .integrator import IntegrationError, reference_propagate
from .model import InvalidParameters, make_problem, validate_params
from .outputs import (jsonable, read_json, write_json, write_outputs, write_plot_csv,
                      write_profile_csv)
from .rdomain import r_of_t, to_r_domain
from .shooting import ShootingError, ShootSettings, classify, shoot, solve_ladder

__all__ = ["main", "build_parser", "settings_from_config", "r_domain_checks"]

EXIT_OK, EXIT_CONFIG, EXIT_CERT, EXIT_RUNTIME = 0, 2, 3, 4


def settings_from_config(cfg: RunConfig) -> ShootSettings:
    tl, sc = cfg.tolerances, cfg.scan
    a_hi = sc.a_max if sc.a_hi is None else min(sc.a_hi, sc.a_max)
    return ShootSettings(tol=tl.tol, tol_a=tl.tol_a, tol_match=tl.tol_match,
                         slope_min=tl.slope_min, terminal_window=tl.terminal_window,
                         a_lo=sc.a_lo, a_max=a_hi, growth=sc.growth, tol_E=tl.tol_E,
                         v_band=tl.v_band)


def r_domain_checks(profile, n: int, settings: ShootSettings, problem) -> dict:
    """Sign changes, boundary value and tail monotonicity of one profile."""
    e = problem.params.t_exponent
    T = problem.T_end
    win_r = float(r_of_t(T - settings.window(problem), e)) - problem.params.R
    changes = profile.interior_sign_changes(win_r)
    out = dict(sign_changes=changes, sign_changes_ok=changes == n,
               u_R=profile.u_R, u_R_ok=abs(profile.u_R) <= settings.tol_match,
               tail_ok=profile.tail_decreasing())
    out["passed"] = bool(out["sign_changes_ok"] and out["u_R_ok"] and out["tail_ok"])
    return out


def _out_dir(args, cfg):
    return Path(args.out or cfg.output.dir)


def _problem(cfg):
    return make_problem(cfg.params)


def cmd_validate(args, cfg):
    report = validate_params(cfg.params)
    print(f"{cfg.source}: accepted")
    for k, v in cfg.as_dict()["params"].items():
        print(f"  {k} = {v}")
    return EXIT_OK if report else EXIT_CONFIG


def cmd_shoot(args, cfg):
    problem = _problem(cfg)
    settings = settings_from_config(cfg)
    c = classify(problem, args.a, settings, full=True)
    rep = c.census
    prof = to_r_domain(c.trajectory, args.a, cfg.output.r_max)
    summary = dict(a=args.a, n=c.n, n_total=c.n_total, terminal_sign=c.terminal_sign,
                   census=rep.as_dict(), stats=c.trajectory.stats)
    ok = rep.energy_ok and rep.interleaving_ok and rep.slope_floor_ok
    if args.reference:
        tl = cfg.tolerances
        ref = reference_propagate(problem, c.trajectory.startup, tl.tol_ref, tl.delta)
        vp, qp = c.trajectory.terminal
        vr, qr = ref.terminal
        rel = max(abs(vp - vr) / max(abs(vr), 1.0), abs(qp - qr) / max(abs(qr), 1.0))
        summary["reference"] = dict(terminal_v=vr, terminal_q=qr, rel_diff=rel)
        print(f"reference terminal (v, q) = ({vr:.12e}, {qr:.12e}); rel diff {rel:.3e}")
    print(f"a = {args.a:.12g}: {c.n} interior zeros ({c.n_total} total), "
          f"v(T) = {c.terminal_v:.6e}, v'(T) = {rep.terminal_vprime:.6e}")
    print(f"energy ok: {rep.energy_ok}, min increment {rep.E_min_increment:.3e}; "
          f"residual max {rep.residual_max:.3e}")
    out = _out_dir(args, cfg)
    if "json" in cfg.output.formats:
        write_json(summary, out / "shoot.json")
    if "csv" in cfg.output.formats:
        write_profile_csv(prof, out / "trajectory.csv")
    return EXIT_OK if ok else EXIT_CERT


def _parse_n_max(text):
    if text is None:
        return None, None
    m = re.fullmatch(r"\s*n0\s*\+\s*(\d+)\s*", text)
    if m:
        return None, int(m.group(1))
    try:
        return int(text), None
    except ValueError:
        raise ConfigError(f"--n-max must be an integer or 'n0+K', got {text!r}") from None


def _profiles(ladder, cfg, settings, problem):
    profiles, checks = {}, {}
    for n in sorted(ladder.entries):
        e = ladder.entries[n]
        profiles[n] = to_r_domain(e.trajectory, e.a_n, cfg.output.r_max, n)
        checks[n] = r_domain_checks(profiles[n], n, settings, problem)
    return profiles, checks


def cmd_solve(args, cfg):
    problem = _problem(cfg)
    settings = settings_from_config(cfg)
    n_max, extra = _parse_n_max(args.n_max)
    if n_max is None and extra is None:
        n_max = cfg.scan.n_max
    ladder = solve_ladder(problem, n_max, settings, extra=extra)
    profiles, checks = _profiles(ladder, cfg, settings, problem)
    out = _out_dir(args, cfg)
    paths = write_outputs(out, config=cfg, ladder=ladder, profiles=profiles, checks=checks,
                          formats=cfg.output.formats)
    for note in ladder.notes:
        print(f"note: {note}")
    ok = ladder.all_certified() and ladder.status == "complete"
    for n in sorted(ladder.entries):
        e = ladder.entries[n]
        ck = checks[n]
        ok = ok and ck["passed"]
        print(f"n = {n}: a_n = {e.a_n:.12g}  v(T) = {e.census.terminal_v:+.3e}  "
              f"certified = {e.certified}  r-domain = {ck['passed']}")
    if not args.no_catalog:
        cat = Catalog(default_catalog_dir(cfg.output.catalog))
        recs = {n: dict(a_n=e.a_n, certified=e.certified,
                        terminal_v=e.census.terminal_v,
                        scan=dataclasses.asdict(cfg.scan),
                        artifacts={k: str(p) for k, p in sorted(paths.items())})
                for n, e in ladder.entries.items()}
        key = cat.store(cfg.params.as_dict(), dataclasses.asdict(cfg.tolerances), recs)
        print(f"catalog {cat.root}: key {key[:16]}")
    print(f"status: {ladder.status}; {'all certified' if ok else 'NOT all certified'}")
    return EXIT_OK if ok else EXIT_CERT


def cmd_sweep(args, cfg):
    problem = _problem(cfg)
    a1 = cfg.scan.sweep_a1 if args.a1 is None else args.a1
    d = cfg.scan.sweep_doublings if args.doublings is None else args.doublings
    grid = a1 * 2.0 ** np.arange(d + 1)
    table = sweep(problem, grid, cfg.tolerances.tol)
    trends = trend_check(table)
    k = cfg.params.l + 1.0
    gaps = limit_gap_check(table, cfg.params.p, k)
    write_outputs(_out_dir(args, cfg), config=cfg, sweep_table=table, trends=trends,
                  gaps=gaps, formats=cfg.output.formats)
    for r in table.rows:
        print(f"a = {r.a:12.6g}  M_a = {r.M_a:.6e}  v(M_a) = {r.v_at_M:.6e}  "
              f"z_a = {r.z_a:.6e}  |v'(z_a)| = {r.abs_slope_at_z:.6e}  {r.error}")
    ok = all(v["passed"] for k_, v in trends.items() if k_ != "excluded")
    print(f"first-max threshold: {table.first_max_threshold}; "
          f"limit integral {gaps['limit']:.12f}; gap decreasing: {gaps['passed']}")
    print("trends and inequalities: " + ("pass" if ok else "FAIL"))
    return EXIT_OK if ok and gaps["passed"] else EXIT_CERT


def cmd_convert(args, cfg):
    """Re-integrate stored a_n values and emit r-domain profiles."""
    problem = _problem(cfg)
    settings = settings_from_config(cfg)
    data = read_json(args.ladder)
    profiles, checks, ok = {}, {}, True
    for item in data["entries"]:
        n, a_n = int(item["n"]), float(item["a_n"])
        traj = shoot(problem, a_n, settings.tol, settings.v_band)
        profiles[n] = to_r_domain(traj, a_n, args.r_max or cfg.output.r_max, n)
        checks[n] = r_domain_checks(profiles[n], n, settings, problem)
        ok = ok and checks[n]["passed"]
        print(f"n = {n}: a_n = {a_n:.12g}  sign changes {checks[n]['sign_changes']}  "
              f"u(R) = {checks[n]['u_R']:+.3e}  tail ok {checks[n]['tail_ok']}")
    out = _out_dir(args, cfg)
    for n in sorted(profiles):
        write_profile_csv(profiles[n], out / f"profile_n{n}.csv")
    write_plot_csv(profiles, out / "plot_profiles.csv")
    write_json(jsonable(checks), out / "convert_checks.json")
    return EXIT_OK if ok else EXIT_CERT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plapshoot",
                                 description="Shooting solver for radial sign-changing "
                                             "solutions of a weighted p-Laplacian problem.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="YAML run configuration")
        sp.set_defaults(func=func)
        if name != "validate":
            sp.add_argument("--out", help="output directory (default: output.dir)")
        return sp

    add("validate", cmd_validate, "check the config and the parameter hypotheses")
    sp = add("shoot", cmd_shoot, "integrate one slope and report its census")
    sp.add_argument("--a", type=float, required=True, help="initial slope a > 0")
    sp.add_argument("--reference", action="store_true",
                    help="also run the reference integrator and compare terminal states")
    sp = add("solve", cmd_solve, "compute the certified solution ladder")
    sp.add_argument("--n-max", help="largest zero count, or 'n0+K' (default: scan.n_max)")
    sp.add_argument("--no-catalog", action="store_true", help="do not store in the catalog")
    sp = add("sweep", cmd_sweep, "large-slope sweep over doublings of a")
    sp.add_argument("--a1", type=float, help="first slope (default: scan.sweep_a1)")
    sp.add_argument("--doublings", type=int, help="number of doublings (default: scan.sweep_doublings)")
    sp = add("convert", cmd_convert, "r-domain profiles from a ladder JSON")
    sp.add_argument("--ladder", required=True, help="ladder.json written by solve")
    sp.add_argument("--r-max", type=float, help="outer radius (default: output.r_max or r(10 eps))")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigRejected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, InvalidParameters) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CertificationError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (ShootingError, IntegrationError, OSError, ValueError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
