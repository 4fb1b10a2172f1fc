"""Certified observables of a completed trajectory.

Zero count and locations, extrema, the energy trace and its monotonicity,
the residual of the integral identity q(t) - q(s) = -int_s^t h f(v), and a
lower bound on |v'| at each zero derived from energy growth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import roots_legendre

from .integrator import Extremum, Trajectory, ZeroEvent, locate_zero
from .model import phi_inv

__all__ = [
    "CertificationError",
    "CensusReport",
    "census",
    "slope_floor",
    "energy_check",
    "energy_trace",
    "integral_residual",
    "integral_residuals",
    "second_identity_drift",
    "path_integral",
    "TOL_E",
]

TOL_E = 1e-7
SLOPE_SLACK = 1e-6
GL_POINTS = 10


class CertificationError(RuntimeError):
    pass


@dataclass
class CensusReport:
    n_zeros: int
    zeros: list
    terminal_zeros: list
    extrema: list
    M_first: float | None
    v_at_M: float | None
    v_max: float
    E_trace: np.ndarray = field(repr=False)
    E_min_increment: float = 0.0
    E_max: float = 0.0
    energy_ok: bool = True
    residual_max: float = 0.0
    slope_floors: list = field(default_factory=list)
    slope_floor_ok: bool = True
    interleaving_ok: bool = True
    terminal_window: float = 0.0
    terminal_v: float = 0.0
    terminal_vprime: float = 0.0
    missed_events: int = 0

    @property
    def all_zeros(self):
        return self.zeros + self.terminal_zeros

    def as_dict(self) -> dict:
        return dict(
            n_zeros=self.n_zeros,
            zeros=[[z.z, z.slope] for z in self.zeros],
            terminal_zeros=[[z.z, z.slope] for z in self.terminal_zeros],
            extrema=[[e.t, e.v, e.kind] for e in self.extrema],
            M_first=self.M_first, v_at_M=self.v_at_M, v_max=self.v_max,
            E_min_increment=self.E_min_increment, E_max=self.E_max, energy_ok=self.energy_ok,
            residual_max=self.residual_max, slope_floor_ok=self.slope_floor_ok,
            interleaving_ok=self.interleaving_ok, terminal_window=self.terminal_window,
            terminal_v=self.terminal_v, terminal_vprime=self.terminal_vprime,
        )


def _pieces(traj: Trajectory):
    """Steps of every segment as (segment, lo, hi) in the segment's own variable."""
    for seg in traj.segments:
        k = seg.knots
        for a, b in zip(k[:-1], k[1:]):
            if a != b:
                yield seg, a, b


class StepTable:
    """Cumulative integral of g dt over the steps of a trajectory.

    Each step is integrated in its segment's own variable x with
    dt = (dt/dx) dx by Gauss-Legendre. On zero-band steps dt/dx carries the
    factor |v|^m, which keeps the singular part of f bounded.
    """

    def __init__(self, traj: Trajectory, g, n: int = GL_POINTS):
        self.g = g
        self.x, self.w = roots_legendre(n)
        rows = []
        for seg, lo, hi in _pieces(traj):
            ta, tb = (float(c) for c in seg.state(np.array([lo, hi]))[0])
            if ta > tb:
                ta, tb = tb, ta
            rows.append((ta, tb, seg, lo, hi))
        rows.sort(key=lambda r: r[0])
        self.rows = rows
        self.starts = np.array([r[0] for r in rows])
        self.ends = np.array([r[1] for r in rows])
        self.cum = np.concatenate([[0.0], np.cumsum([self._gl(r[2], r[3], r[4]) for r in rows])])

    def _gl(self, seg, a, b):
        if a == b:
            return 0.0
        nodes = 0.5 * (a + b) + 0.5 * (b - a) * self.x
        tt, vv, qq = seg.state(nodes)
        gv = np.array([self.g(ti, vi, qi) for ti, vi, qi in zip(tt, vv, qq)]) * seg.dt_dx(nodes)
        return 0.5 * (b - a) * float(np.dot(self.w, gv))

    def _partial(self, k, t):
        """Integral over step k from its start time to time t.

        Time increases along the integration in every segment kind, so the
        step start lo is its earliest time.
        """
        ta, tb, seg, lo, hi = self.rows[k]
        if t >= tb:
            return self.cum[k + 1] - self.cum[k]
        if t <= ta:
            return 0.0
        return self._gl(seg, lo, _param_in_step(seg, lo, hi, t))

    def integral(self, s: float, t: float) -> float:
        """int_s^t g dt."""
        if t < s:
            return -self.integral(t, s)
        ks = int(np.searchsorted(self.ends, s, side="right"))
        kt = int(np.searchsorted(self.ends, t, side="left"))
        ks, kt = min(ks, len(self.rows) - 1), min(kt, len(self.rows) - 1)
        if ks == kt:
            return self._partial(ks, t) - self._partial(ks, s)
        head = (self.cum[ks + 1] - self.cum[ks]) - self._partial(ks, s)
        body = self.cum[kt] - self.cum[ks + 1]
        return float(head + body + self._partial(kt, t))


def path_integral(traj: Trajectory, g, s: float, t: float, n: int = GL_POINTS) -> float:
    """int_s^t g(t, v, q) dt along the dense output."""
    return StepTable(traj, g, n).integral(s, t)


def _param_in_step(seg, lo, hi, t):
    if seg.kind == "t":
        return t
    return optimize.brentq(lambda x: float(seg.state(x)[0]) - t, lo, hi, xtol=1e-16,
                           rtol=4 * np.finfo(float).eps)


def _q_at(traj, t):
    return traj.state_at(t)[1]


def _forcing(traj):
    h, f = traj.problem.h, traj.problem.f
    return StepTable(traj, lambda x, v, q: h(x) * f(v))


def integral_residual(traj: Trajectory, s: float, t: float, table: StepTable | None = None) -> float:
    """|q(t) - q(s) + int_s^t h f(v)| / (1 + |q(t)|)."""
    tab = _forcing(traj) if table is None else table
    I = tab.integral(s, t)
    qs, qt = _q_at(traj, s), _q_at(traj, t)
    return abs(qt - qs + I) / (1.0 + abs(qt))


def integral_residuals(traj: Trajectory, n_pairs: int = 20, seed: int = 0) -> np.ndarray:
    """Residuals at pseudo-random (s, t) pairs in [eps, T_end]; fixed seed."""
    rng = np.random.default_rng(seed)
    lo, hi = traj.startup.epsilon, traj.T_end
    tab = _forcing(traj)
    out = []
    for _ in range(n_pairs):
        s, t = np.sort(rng.uniform(lo, hi, 2))
        out.append(integral_residual(traj, float(s), float(t), tab))
    return np.asarray(out)


def energy_trace(traj: Trajectory) -> np.ndarray:
    """Columns (t, E) at the dense samples."""
    en = traj.problem.energy
    E = np.array([en(t, v, q) for t, v, q in zip(traj.t, traj.v, traj.q)])
    return np.column_stack([traj.t, E])


def energy_check(traj: Trajectory, tol_E: float = TOL_E):
    """(most negative increment, E_max, pass)."""
    E = energy_trace(traj)[:, 1]
    inc = float(np.min(np.diff(E))) if len(E) > 1 else 0.0
    Emax = float(np.max(np.abs(E)))
    return inc, Emax, bool(inc >= -tol_E * (1.0 + Emax))


def _step_integrals(traj: Trajectory, g, n: int = GL_POINTS):
    """Per-step integrals of g dt, ordered by time, with the step end times."""
    tab = StepTable(traj, g, n)
    return tab.ends, np.diff(tab.cum)


def second_identity_drift(traj: Trajectory) -> float:
    """Relative spread of A(t) = ((p-1)/p)|v'|^p + h F(v) - int_eps^t h' F.

    Evaluated at the step boundaries of the dense output.
    """
    pr = traj.problem
    p = pr.p
    ends, steps = _step_integrals(traj, lambda x, v, q: pr.dh(x) * pr.F(v))
    acc = np.cumsum(steps)
    t0 = traj.startup.epsilon
    v0, q0 = traj.segments[0].state(traj.segments[0].knots[0])[1:]
    pts = [(t0, float(v0), float(q0), 0.0)]
    for seg in traj.segments:
        tt, vv, qq = seg.state(seg.knots[1:])
        pts.extend(zip(np.atleast_1d(tt), np.atleast_1d(vv), np.atleast_1d(qq)))
    pts = sorted(pts[1:], key=lambda r: r[0])
    vals = [(p - 1) / p * abs(float(q0)) ** (p / (p - 1)) + pr.h(t0) * pr.F(float(v0))]
    for (t, v, q), I in zip(pts, acc):
        vals.append((p - 1) / p * abs(q) ** (p / (p - 1)) + pr.h(t) * pr.F(v) - I)
    vals = np.asarray(vals)
    scale = max(1.0, float(np.max(np.abs(vals))))
    return float((vals.max() - vals.min()) / scale)


def slope_floor(traj: Trajectory, z: ZeroEvent, extrema=None):
    """Lower bound ((p/(p-1)) h(z) F(|v(M)|))^(1/p) on |v'(z)|.

    M is the last extremum before z. Returns None when there is none or
    |v(M)| <= gamma (bound not applicable).
    """
    pr = traj.problem
    p = pr.p
    ext = traj.extrema if extrema is None else extrema
    before = [e for e in ext if e.t < z.z]
    if not before:
        return None
    vM = abs(before[-1].v)
    FM = pr.F(vM)
    if vM >= pr.nonlinearity.gamma:
        FM = max(FM, 0.0)  # F(gamma) = 0 may evaluate a rounding below zero
    if FM < 0:
        return None
    return (p / (p - 1) * pr.h(z.z) * FM) ** (1.0 / p)


def _scan_missed(traj: Trajectory, known_zeros, known_extrema):
    """Sign changes of v or q on t-steps that carry no recorded event."""
    p = traj.problem.p
    zeros, extrema = list(known_zeros), list(known_extrema)
    missed = 0
    for seg in traj.segments:
        if seg.kind != "t":
            continue
        k = np.asarray(seg.knots, dtype=float)
        vals = seg.sol(k)
        for i in range(len(k) - 1):
            a, b = k[i], k[i + 1]
            if vals[0][i] * vals[0][i + 1] < 0 and not any(a <= z.z <= b for z in zeros):
                z, s = locate_zero(seg.sol, a, b, p)
                zeros.append(ZeroEvent(float(z), float(s)))
                missed += 1
            if vals[1][i] * vals[1][i + 1] < 0 and not any(a <= e.t <= b for e in extrema):
                q_root = locate_zero(lambda x: seg.sol(x)[::-1], a, b, p)[0]
                v = float(seg.sol(q_root)[0])
                extrema.append(Extremum(float(q_root), v, "max" if v > 0 else "min"))
                missed += 1
    zeros.sort(key=lambda z: z.z)
    extrema.sort(key=lambda e: e.t)
    return zeros, extrema, missed


def census(traj: Trajectory, terminal_window: float | None = None,
           tol_E: float = TOL_E, n_residual_pairs: int = 20, seed: int = 0,
           strict: bool = False) -> CensusReport:
    """Deterministic report on a completed trajectory.

    Zeros within ``terminal_window`` of T_end are reported separately and are
    not counted. With ``strict`` an interleaving violation raises.
    """
    pr = traj.problem
    T = traj.T_end
    if terminal_window is None:
        terminal_window = 1e-6 * T
    zeros, extrema, missed = _scan_missed(traj, traj.zeros, traj.extrema)
    eps = traj.startup.epsilon
    interior = [z for z in zeros if eps < z.z < T - terminal_window]
    terminal = [z for z in zeros if z.z >= T - terminal_window]

    ok = True
    for z1, z2 in zip(zeros[:-1], zeros[1:]):
        if not any(z1.z < e.t < z2.z for e in extrema) or z1.slope * z2.slope >= 0:
            ok = False
    if not all(e1.kind != e2.kind for e1, e2 in zip(extrema[:-1], extrema[1:])):
        ok = False
    if strict and not ok:
        raise CertificationError("zeros and extrema do not interleave")

    floors, floor_ok = [], True
    for z in interior:
        b = slope_floor(traj, z, extrema)
        passed = None if b is None else bool(abs(z.slope) >= b * (1 - SLOPE_SLACK))
        floors.append((z.z, b, passed))
        if passed is False:
            floor_ok = False

    inc, Emax, e_ok = energy_check(traj, tol_E)
    res = integral_residuals(traj, n_residual_pairs, seed) if n_residual_pairs else np.zeros(1)
    maxima = [e for e in extrema if e.kind == "max"]
    vT, qT = traj.terminal
    return CensusReport(
        n_zeros=len(interior), zeros=interior, terminal_zeros=terminal, extrema=extrema,
        M_first=maxima[0].t if maxima else None, v_at_M=maxima[0].v if maxima else None,
        v_max=float(max([np.max(traj.v)] + [e.v for e in extrema])),
        E_trace=energy_trace(traj), E_min_increment=inc, E_max=Emax, energy_ok=e_ok,
        residual_max=float(np.max(res)), slope_floors=floors, slope_floor_ok=floor_ok,
        interleaving_ok=ok, terminal_window=terminal_window, terminal_v=vT,
        terminal_vprime=float(phi_inv(qT, pr.p)), missed_events=missed)
