"""Large-slope behaviour of the first maximum and first zero.

As a grows the first local maximum M_a moves toward 0 while v(M_a) grows,
the first zero z_a moves toward 0 while |v'(z_a)| grows, and the descent
from M_a to z_a obeys the time-map bound

    int_M^z h^(1/p) dt <= ((p-1)/p)^(1/p) int_0^v(M) dt / (F(v(M)) - F(t))^(1/p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import integrate
from scipy.special import beta as beta_fn
from scipy.special import roots_legendre

from .census import StepTable, census
from .model import Problem
from .shooting import ShootingError, shoot

__all__ = [
    "SweepRow",
    "SweepTable",
    "sweep",
    "trend_check",
    "timemap_rhs",
    "timemap_rhs_direct",
    "timemap_lhs",
    "timemap_check",
    "normalized_integral",
    "limit_integral",
    "limit_gap_check",
    "sweep_row",
    "TRENDS",
]

TIMEMAP_SLACK = 1e-8

# column, direction (+1 increasing, -1 decreasing)
TRENDS = (
    ("M_a", -1),
    ("v_at_M", +1),
    ("z_a", -1),
    ("abs_slope_at_z", +1),
    ("max_v", +1),
)


@dataclass
class SweepRow:
    a: float
    max_v: float = math.nan
    M_a: float = math.nan
    v_at_M: float = math.nan
    t_a_beta: float = math.nan
    z_a: float = math.nan
    slope_at_z: float = math.nan
    timemap_lhs: float = math.nan
    timemap_rhs: float = math.nan
    ratio: float = math.nan
    tbeta_ok: bool | None = None
    linear_ok: bool | None = None
    slope_bound_ok: bool | None = None
    timemap_ok: bool | None = None
    energy_ok: bool | None = None
    n_zeros: int = -1
    error: str = ""

    @property
    def abs_slope_at_z(self):
        return abs(self.slope_at_z)

    @property
    def has_max(self):
        return math.isfinite(self.M_a)

    @property
    def qualifies(self):
        return math.isfinite(self.M_a) and math.isfinite(self.z_a)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


COLUMNS = [f.name for f in fields(SweepRow)]


@dataclass
class SweepTable:
    rows: list = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def qualifying_suffix(self):
        """Longest run of trailing rows that all have a first max and zero."""
        out = []
        for r in reversed(self.rows):
            if not r.qualifies:
                break
            out.append(r)
        return out[::-1]

    @property
    def first_max_threshold(self):
        """Smallest swept a with a first local maximum."""
        for r in self.rows:
            if r.has_max:
                return r.a
        return None


def limit_integral(p: float, k: float) -> float:
    """int_0^1 ds / (1 - s^k)^(1/p) = B(1/k, 1 - 1/p) / k."""
    return float(beta_fn(1.0 / k, 1.0 - 1.0 / p) / k)


def _gap_ratio(problem: Problem, V: float, FV: float, s: float, xg, wg) -> float:
    """(1 - F(Vs)/F(V)) / (1 - s), evaluated without cancellation near s = 1."""
    if s < 0.5:
        return (1.0 - problem.F(V * s) / FV) / (1.0 - s)
    # (F(V) - F(Vs)) / (1 - s) = V * mean of f over [Vs, V]
    rho = 0.5 * (xg + 1.0)
    vals = np.array([problem.f(V * (s + (1.0 - s) * r)) for r in rho])
    return V * float(np.dot(0.5 * wg, vals)) / FV


def normalized_integral(problem: Problem, V: float) -> float:
    """int_0^1 ds / (1 - F(Vs)/F(V))^(1/p), endpoint weight (1-s)^(-1/p)."""
    p = problem.p
    FV = problem.F(V)
    if not FV > 0:
        raise ValueError(f"F(v(M)) = {FV!r} is not positive")
    xg, wg = roots_legendre(24)
    g = lambda s: _gap_ratio(problem, V, FV, s, xg, wg) ** (-1.0 / p)
    val, _ = integrate.quad(g, 0.0, 1.0, weight="alg", wvar=(0.0, -1.0 / p),
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return float(val)


def timemap_rhs(problem: Problem, V: float) -> float:
    """((p-1)/p)^(1/p) int_0^V dt / (F(V) - F(t))^(1/p), via t = V s."""
    p = problem.p
    FV = problem.F(V)
    return ((p - 1) / p) ** (1 / p) * V / FV ** (1 / p) * normalized_integral(problem, V)


def timemap_rhs_direct(problem: Problem, V: float) -> float:
    """Same integral by plain adaptive quadrature in t (cross-check)."""
    p = problem.p
    FV = problem.F(V)
    g = lambda t: (FV - problem.F(t)) ** (-1.0 / p)
    val, _ = integrate.quad(g, 0.0, V, epsabs=0.0, epsrel=1e-12, limit=500)
    return ((p - 1) / p) ** (1 / p) * float(val)


def timemap_lhs(traj, M: float, z: float) -> float:
    """int_M^z h^(1/p) dt along the trajectory."""
    pr = traj.problem
    p = pr.p
    return StepTable(traj, lambda t, v, q: pr.h(t) ** (1 / p)).integral(M, z)


def timemap_check(traj, M: float, vM: float, z: float):
    """(lhs, rhs, pass); pass is None when F(v(M)) <= 0."""
    pr = traj.problem
    if not pr.F(vM) > 0:
        return math.nan, math.nan, None
    lhs = timemap_lhs(traj, M, z)
    rhs = timemap_rhs(pr, vM)
    return lhs, rhs, bool(lhs <= rhs * (1 + TIMEMAP_SLACK))


def _linear_growth_ok(traj, t_stop: float) -> bool:
    """v(t) > a t on (0, t_stop], startup nodes included."""
    a = traj.a
    st = traj.startup
    ok = bool(np.all(st.w > a))
    sel = traj.t <= t_stop
    return ok and bool(np.all(traj.v[sel] > a * traj.t[sel]))


def sweep_row(problem: Problem, a: float, tol: float = 1e-10) -> SweepRow:
    row = SweepRow(a=float(a))
    try:
        traj = shoot(problem, a, tol)
    except ShootingError as exc:
        row.error = str(exc)
        return row
    rep = census(traj, n_residual_pairs=0)
    p = problem.p
    beta = problem.constants.beta
    row.n_zeros = rep.n_zeros
    row.energy_ok = rep.energy_ok
    row.max_v = rep.v_max
    first_ext = rep.extrema[0] if rep.extrema else None
    if first_ext is not None and first_ext.kind == "max":
        row.M_a, row.v_at_M = first_ext.t, first_ext.v
    if traj.beta_crossings:
        row.t_a_beta = traj.beta_crossings[0]
        row.tbeta_ok = bool(row.t_a_beta < beta / a)
    t_stop = row.t_a_beta if math.isfinite(row.t_a_beta) else (
        row.M_a if math.isfinite(row.M_a) else traj.T_end)
    row.linear_ok = _linear_growth_ok(traj, t_stop)
    if rep.all_zeros:
        z = rep.all_zeros[0]
        row.z_a, row.slope_at_z = z.z, z.slope
    if row.qualifies:
        FM = problem.F(row.v_at_M)
        row.slope_bound_ok = bool(abs(row.slope_at_z) ** p
                                  >= p / (p - 1) * problem.h(traj.T_end) * FM)
        lhs, rhs, ok = timemap_check(traj, row.M_a, row.v_at_M, row.z_a)
        row.timemap_lhs, row.timemap_rhs, row.timemap_ok = lhs, rhs, ok
        if ok is not None:
            row.ratio = normalized_integral(problem, row.v_at_M)
    return row


def sweep(problem: Problem, a_grid, tol: float = 1e-10) -> SweepTable:
    """One row per slope; failures are recorded in the row and the sweep continues."""
    a_grid = np.asarray(a_grid, dtype=float)
    if np.any(np.diff(a_grid) <= 0) or np.any(a_grid <= 0):
        raise ValueError("a_grid must be positive and strictly increasing")
    return SweepTable([sweep_row(problem, a, tol) for a in a_grid])


def trend_check(table: SweepTable, min_rows: int = 6) -> dict:
    """Strict monotone trends over the qualifying suffix, plus row-wise inequalities.

    Returns {name: {"pass": bool, "failures": [...]}}. Trends need at least
    ``min_rows`` qualifying rows.
    """
    rows = table.qualifying_suffix()
    out = {}
    enough = len(rows) >= min_rows
    for name, sign in TRENDS:
        vals = [getattr(r, name) for r in rows]
        bad = [(rows[i].a, rows[i + 1].a) for i in range(len(vals) - 1)
               if not sign * (vals[i + 1] - vals[i]) > 0]
        out[name] = dict(passed=enough and not bad, failures=bad, rows=len(rows))
    excluded = [r.a for r in table.rows if not r.qualifies]
    for name in ("tbeta_ok", "linear_ok", "slope_bound_ok", "timemap_ok"):
        bad = [r.a for r in table.rows if getattr(r, name) is False]
        out[name] = dict(passed=not bad, failures=bad)
    out["excluded"] = excluded
    return out


def limit_gap_check(table: SweepTable, p: float, k: float) -> dict:
    """|ratio - int_0^1 (1 - s^k)^(-1/p) ds| strictly decreasing over rows with a ratio."""
    lim = limit_integral(p, k)
    rows = [r for r in table.rows if math.isfinite(r.ratio)]
    gaps = [abs(r.ratio - lim) for r in rows]
    bad = [(rows[i].a, rows[i + 1].a) for i in range(len(gaps) - 1) if not gaps[i + 1] < gaps[i]]
    return dict(passed=len(rows) >= 2 and not bad, failures=bad, limit=lim,
                gaps=gaps, a=[r.a for r in rows])
