"""Serialization of profiles, ladders and sweeps.

Every writer is deterministic: fixed column order, ``%.17e`` numbers, JSON
with sorted keys and no timestamps, so identical inputs give identical bytes.

CSV column contracts:

    profile  t, v, q, vprime, r, u, uprime   (one row per grid point, r increasing)
    plot     series, n, r, u                 (long format, one series per ladder entry)
    sweep    the SweepRow fields in declaration order
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .asymptotics import COLUMNS as SWEEP_COLUMNS
from .asymptotics import SweepTable
from .rdomain import RDomainProfile

__all__ = [
    "PROFILE_COLUMNS",
    "PLOT_COLUMNS",
    "SWEEP_COLUMNS",
    "jsonable",
    "write_json",
    "read_json",
    "write_profile_csv",
    "write_plot_csv",
    "write_sweep_csv",
    "ladder_summary",
    "sweep_summary",
    "write_outputs",
]

PROFILE_COLUMNS = ("t", "v", "q", "vprime", "r", "u", "uprime")
PLOT_COLUMNS = ("series", "n", "r", "u")
FMT = "%.17e"


def _num(x) -> str:
    return FMT % x


def jsonable(obj):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    return path


def write_profile_csv(profile: RDomainProfile, path) -> Path:
    # rows follow r increasing; the t columns are the same points, t decreasing
    cols = [profile.t[::-1], profile.v[::-1], profile.q[::-1], profile.vprime[::-1],
            profile.r, profile.u, profile.uprime]
    rows = ([_num(c[i]) for c in cols] for i in range(profile.r.size))
    return _write_rows(path, PROFILE_COLUMNS, rows)


def write_plot_csv(profiles: dict, path) -> Path:
    """Long format: ``series`` is ``n<k>``, one block per ladder entry."""
    def rows():
        for n in sorted(profiles):
            pr = profiles[n]
            for r, u in zip(pr.r, pr.u):
                yield [f"n{n}", str(n), _num(r), _num(u)]
    return _write_rows(path, PLOT_COLUMNS, rows())


def _cell(x) -> str:
    if isinstance(x, bool) or x is None:
        return "" if x is None else str(x).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return _num(x) if math.isfinite(x) else "nan"
    return '"' + str(x).replace('"', "'") + '"' if x else ""


def write_sweep_csv(table: SweepTable, path) -> Path:
    rows = ([_cell(getattr(r, c)) for c in SWEEP_COLUMNS] for r in table.rows)
    return _write_rows(path, SWEEP_COLUMNS, rows)


def ladder_summary(ladder, profiles: dict | None = None, checks: dict | None = None) -> dict:
    """n, a_n, terminal residual and zero list per entry, plus scan metadata."""
    entries = []
    for n in sorted(ladder.entries):
        e = ladder.entries[n]
        rep = e.census
        item = dict(
            n=n, a_n=e.a_n, certified=e.certified,
            terminal_v=rep.terminal_v, terminal_vprime=rep.terminal_vprime,
            zeros=[dict(z=z.z, slope=z.slope) for z in rep.zeros],
            terminal_zeros=[dict(z=z.z, slope=z.slope) for z in rep.terminal_zeros],
            bracket=[e.boundary.a_lo, e.boundary.a_hi],
            bisection_iterations=e.boundary.iterations,
            certification=e.certification,
        )
        if profiles and n in profiles:
            pf = profiles[n]
            item["r_domain"] = dict(r_max=pf.r_max, u_R=pf.u_R, truncated=pf.truncated,
                                    zeros_r=pf.zeros_r, tail_start=pf.tail_start)
        if checks and n in checks:
            item["r_domain_checks"] = checks[n]
        entries.append(item)
    return dict(
        n0=ladder.n0, status=ladder.status, notes=list(ladder.notes),
        entries=entries,
        brackets=[dict(a_lo=b.a_lo, a_hi=b.a_hi, n_lo=b.n_lo, n_hi=b.n_hi, status=b.status)
                  for b in ladder.brackets],
        scan=[dict(a=a, n_total=c) for a, c in ladder.scan],
    )


def sweep_summary(table: SweepTable, trends: dict | None = None,
                  gaps: dict | None = None) -> dict:
    out = dict(columns=list(SWEEP_COLUMNS), rows=[r.as_dict() for r in table.rows],
               first_max_threshold=table.first_max_threshold)
    if trends is not None:
        out["trends"] = trends
    if gaps is not None:
        out["limit_gap"] = gaps
    return out


def write_outputs(out_dir, *, config=None, ladder=None, profiles=None, checks=None,
                  sweep_table=None, trends=None, gaps=None, formats=("csv", "json")) -> dict:
    """Write whatever objects are given; returns {artifact name: path}."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    if config is not None and "json" in formats:
        paths["config"] = write_json(config.as_dict(), out_dir / "config.json")
    if ladder is not None:
        if "json" in formats:
            paths["ladder"] = write_json(ladder_summary(ladder, profiles, checks),
                                         out_dir / "ladder.json")
        if profiles and "csv" in formats:
            for n in sorted(profiles):
                paths[f"profile_n{n}"] = write_profile_csv(profiles[n],
                                                           out_dir / f"profile_n{n}.csv")
            paths["plot"] = write_plot_csv(profiles, out_dir / "plot_profiles.csv")
    if sweep_table is not None:
        if "json" in formats:
            paths["sweep_json"] = write_json(sweep_summary(sweep_table, trends, gaps),
                                             out_dir / "sweep.json")
        if "csv" in formats:
            paths["sweep_csv"] = write_sweep_csv(sweep_table, out_dir / "sweep.csv")
    return paths
