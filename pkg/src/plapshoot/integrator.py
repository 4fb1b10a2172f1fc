"""Propagation of v' = Phi_p'(q), q' = -h(t) f(v) from t = eps to T_end.

Two independent schemes are provided.

``propagate`` (production) steps with an embedded Runge-Kutta 5(4) pair in
``t`` away from the two places where the vector field is not smooth, and
changes the independent variable near them.

Near a zero of v, where f ~ -sign(v)|v|^-m, it uses

    y = sign(v) |v|^(1-m) / (1-m),   dy = |v|^-m dv,
    dt/dy = |v|^m / Phi_p'(q),   dq/dy = -h(t) |v|^m f(v) / Phi_p'(q),

which is bounded; the zero sits exactly at y = 0.

Near an extremum with p > 2, where Phi_p'(q) = |q|^(1/(p-1)) sign(q) has
an infinite derivative at q = 0, it uses the slope w = v' itself:

    dt/dw = -(p-1)|w|^(p-2) / (h(t) f(v)),   dv/dw = w dt/dw,

smooth on each side of w = 0; the extremum sits exactly at w = 0.

``reference_propagate`` uses an order 8 pair in ``t`` throughout and jumps
over a symmetric window [z - delta, z + delta] around each zero with the
local expansion v ~ s (t - z) (``excise_crossing``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.special import roots_legendre

from .model import Problem, phi, phi_inv
from .startup import StartupResult

__all__ = [
    "IntegrationError",
    "ZeroEvent",
    "Extremum",
    "Segment",
    "Trajectory",
    "propagate",
    "reference_propagate",
    "locate_zero",
    "excise_crossing",
    "crossing_model",
    "default_band",
]

OVERFLOW = 1e150
SAMPLES_PER_STEP = 4
# extremum band: kinetic term (p-1)/p |v'|^p below KAPPA * h F(v)
KAPPA = 0.25


class IntegrationError(RuntimeError):
    pass


@dataclass
class ZeroEvent:
    z: float
    slope: float  # v'(z)


@dataclass
class Extremum:
    t: float
    v: float
    kind: str  # "max" or "min"


class Segment:
    """One dense-output span in its own independent variable x.

    kind "t": x = t, ``sol(x) -> (v, q)``.
    kind "y": x = y (zero band), ``sol(x) -> (t, q)``; ``side`` = sign of v.
    kind "w": x = v' (extremum band), ``sol(x) -> (t, v)``.
    ``knots`` are the step boundaries in integration order.
    """

    def __init__(self, kind, knots, sol, problem, side=0.0):
        self.kind = kind
        self.knots = np.asarray(knots, dtype=float)
        self.sol = sol
        self.problem = problem
        self.side = side
        t0, t1 = float(self.state(self.knots[0])[0]), float(self.state(self.knots[-1])[0])
        self.t_lo, self.t_hi = min(t0, t1), max(t0, t1)

    @property
    def lo(self):
        return self.knots[0]

    @property
    def hi(self):
        return self.knots[-1]

    def state(self, x):
        """(t, v, q) at parameter values x."""
        x = np.asarray(x, dtype=float)
        p, m = self.problem.p, self.problem.m
        a, b = self.sol(x)
        if self.kind == "t":
            return x, a, b
        if self.kind == "y":
            v = np.sign(x) * ((1 - m) * np.abs(x)) ** (1 / (1 - m))
            return a, v, b
        return a, b, phi(x, p)

    def dt_dx(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "t":
            return np.ones_like(x)
        pr = self.problem
        p, m = pr.p, pr.m
        t, v, q = self.state(x)
        if self.kind == "y":
            return np.abs(v) ** m / phi_inv(q, p)
        hf = np.array([pr.h(ti) * pr.f(vi) for ti, vi in zip(np.atleast_1d(t), np.atleast_1d(v))])
        return -(p - 1) * np.abs(x) ** (p - 2) / hf.reshape(np.shape(x))

    def param_at(self, t):
        """Parameter value where this segment reaches time t."""
        if self.kind == "t":
            return t
        k = self.knots
        tk = self.state(k)[0]
        i = int(np.searchsorted(tk, t))
        i = min(max(i, 1), len(k) - 1)
        a, b = k[i - 1], k[i]
        g = lambda x: float(self.state(x)[0]) - t
        ga, gb = g(a), g(b)
        if ga == 0:
            return a
        if gb == 0:
            return b
        return optimize.brentq(g, a, b, xtol=1e-16, rtol=4 * np.finfo(float).eps)


@dataclass
class Trajectory:
    a: float
    problem: Problem = field(repr=False)
    startup: StartupResult = field(repr=False)
    t: np.ndarray = None
    v: np.ndarray = None
    q: np.ndarray = None
    segments: list = field(default_factory=list, repr=False)
    zeros: list = field(default_factory=list)
    extrema: list = field(default_factory=list)
    beta_crossings: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    method: str = "production"

    @property
    def T_end(self):
        return self.problem.T_end

    @property
    def terminal(self):
        return float(self.v[-1]), float(self.q[-1])

    @property
    def vprime(self):
        return phi_inv(self.q, self.problem.p)

    def state_at(self, t: float):
        """(v, q) at t in [eps, T_end] from the dense output."""
        for seg in self.segments:
            if seg.t_lo <= t <= seg.t_hi:
                _, v, q = seg.state(seg.param_at(t))
                return float(v), float(q)
        raise ValueError(f"t={t!r} outside the trajectory")

    def samples(self):
        return np.column_stack([self.t, self.v, self.q])


def _check_finite(t, v, q):
    if not (math.isfinite(v) and math.isfinite(q)) or abs(v) > OVERFLOW or abs(q) > OVERFLOW:
        raise IntegrationError(f"state overflow at t={t!r}: v={v!r}, q={q!r}")


def default_band(problem: Problem) -> float:
    """Half-width in v of the band around zeros."""
    nl = problem.nonlinearity
    return 0.5 * min(problem.constants.beta, nl.U_small if nl.U_small > 0 else math.inf)


def _sample(seg: Segment, k: int = SAMPLES_PER_STEP):
    ks = seg.knots
    pts = [ks[:1]]
    frac = np.arange(1, k + 1) / k
    for a, b in zip(ks[:-1], ks[1:]):
        pts.append(a + (b - a) * frac)
    return seg.state(np.concatenate(pts))


def _fail(sol, a, where):
    if sol.status == -1:
        raise IntegrationError(f"a={a!r}: {sol.message} in {where} phase near its end "
                               f"{sol.t[-1]!r}; last state {sol.y[:, -1]!r}")


def propagate(problem: Problem, startup: StartupResult, tol: float = 1e-10,
              v_band: float | None = None, method: str = "RK45") -> Trajectory:
    """Production integrator from the startup state to T_end."""
    p, m = problem.p, problem.m
    pinv = 1.0 / (p - 1.0)
    pp = p / (p - 1.0)
    h = problem.weight.h
    f = problem.nonlinearity.f
    F = problem.nonlinearity.F
    beta = problem.constants.beta
    T = problem.T_end
    if v_band is None:
        v_band = default_band(problem)
    extremum_band = p > 2

    def rhs_t(t, y):
        v, q = y
        return (math.copysign(abs(q) ** pinv, q), -h(t) * f(v))

    # two signed events: a single step may jump clean across the band
    def enter_from_above(t, y):
        return y[0] - v_band
    enter_from_above.terminal = True
    enter_from_above.direction = -1

    def enter_from_below(t, y):
        return y[0] + v_band
    enter_from_below.terminal = True
    enter_from_below.direction = 1

    def enter_extremum(t, y):
        return (p - 1) / p * abs(y[1]) ** pp - KAPPA * h(t) * F(y[0])
    enter_extremum.terminal = True
    enter_extremum.direction = -1

    def extremum(t, y):
        return y[1]

    def beta_cross(t, y):
        return y[0] - beta
    beta_cross.direction = 1

    events = [enter_from_above, enter_from_below, extremum, beta_cross]
    if extremum_band:
        events.append(enter_extremum)

    eps, v, q = startup.epsilon, startup.v_eps, startup.q_eps
    traj = Trajectory(a=startup.a, problem=problem, startup=startup)
    parts = [(np.array([eps]), np.array([v]), np.array([q]))]
    counts = dict(nfev=0, nsteps=0, zero_bands=0, extremum_bands=0)
    t = eps
    q_scale = max(abs(q), 1e-300)

    def keep(seg, sol):
        counts["nfev"] += sol.nfev
        counts["nsteps"] += len(sol.t) - 1
        traj.segments.append(seg)
        tt, vv, qq = _sample(seg)
        parts.append((tt[1:], vv[1:], qq[1:]))

    # extrema and zeros interleave, so after an extremum band the next one
    # can only come after a zero band
    armed = extremum_band
    while t < T:
        atol = (tol * min(abs(v), v_band), tol * q_scale)
        sol = integrate.solve_ivp(
            rhs_t, (t, T), (v, q), method=method, rtol=tol, atol=atol,
            dense_output=True, events=events if armed else events[:4],
            first_step=min(0.01 * t, T - t))
        _fail(sol, startup.a, "t")
        keep(Segment("t", sol.t, sol.sol, problem), sol)
        for te, ye in zip(sol.t_events[2], sol.y_events[2]):
            # every extremum has |v| > gamma, so its sign gives the kind
            traj.extrema.append(Extremum(float(te), float(ye[0]), "max" if ye[0] > 0 else "min"))
        traj.beta_crossings.extend(float(x) for x in sol.t_events[3])
        t, v, q = float(sol.t[-1]), float(sol.y[0, -1]), float(sol.y[1, -1])
        _check_finite(t, v, q)
        q_scale = max(q_scale, float(np.max(np.abs(sol.y[1]))))
        if sol.status != 1 or t >= T:
            break
        if armed and len(sol.t_events[4]) and sol.t_events[4][-1] == t:
            armed = False
            counts["extremum_bands"] += 1
            w_in = phi_inv(q, p)
            for w0, w1, first_half in ((w_in, 0.0, True), (0.0, -w_in, False)):
                sol_w, hit_end = _w_phase(problem, t, v, w0, w1, first_half, tol, method)
                keep(Segment("w", sol_w.t, sol_w.sol, problem), sol_w)
                w_end = float(sol_w.t[-1])
                t, v = float(sol_w.y[0, -1]), float(sol_w.y[1, -1])
                q = phi(w_end, p)
                if hit_end:
                    t = T
                    break
                if first_half:
                    traj.extrema.append(Extremum(t, v, "max" if v > 0 else "min"))
            continue
        # band around a zero, integrated in y
        armed = extremum_band
        counts["zero_bands"] += 1
        side = math.copysign(1.0, v)
        y_in = side * v_band ** (1 - m) / (1 - m)
        for y0, y1, sgn in ((y_in, 0.0, side), (0.0, -y_in, -side)):
            sol_y, hit_end = _y_phase(problem, t, q, y0, y1, sgn, tol, q_scale, method)
            keep(Segment("y", sol_y.t, sol_y.sol, problem, side=sgn), sol_y)
            t, q = float(sol_y.y[0, -1]), float(sol_y.y[1, -1])
            y_end = float(sol_y.t[-1])
            v = math.copysign(((1 - m) * abs(y_end)) ** (1 / (1 - m)), y_end) if y_end else 0.0
            if hit_end:
                t = T
                break
            if y1 == 0.0:
                traj.zeros.append(ZeroEvent(t, phi_inv(q, p)))
        if hit_end:
            break
        v = -side * v_band

    tt, vv, qq = (np.concatenate(c) for c in zip(*parts))
    order = np.argsort(tt, kind="stable")
    tt, vv, qq = tt[order], vv[order], qq[order]
    mono = np.concatenate([[True], np.diff(tt) > 0])
    traj.t, traj.v, traj.q = tt[mono], vv[mono], qq[mono]
    traj.t[-1] = min(traj.t[-1], T)
    traj.stats = dict(counts, v_band=v_band, tol=tol, method=method)
    return traj


def _truncate_at_event(sol, idx):
    """Cut a solve_ivp result at its terminal event: mutate t/y to end there."""
    te = float(sol.t_events[idx][0])
    ye = sol.y_events[idx][0]
    sol.t = np.append(sol.t[:-1], te) if sol.t[-1] != te else sol.t
    sol.y[:, -1] = ye
    return sol


def _y_phase(problem, t0, q0, y0, y1, side, tol, q_scale, method="RK45"):
    """Integrate (t, q) in y from y0 to y1 with sign(v) = side on the span."""
    p, m = problem.p, problem.m
    pinv = 1.0 / (p - 1.0)
    h = problem.weight.h
    fs = problem.nonlinearity.f_scaled
    T = problem.T_end
    expo = 1.0 / (1.0 - m)

    def rhs_y(y, s):
        t, q = s
        av = ((1 - m) * abs(y)) ** expo
        vp = math.copysign(abs(q) ** pinv, q)
        fsc = fs(side * av) if av > 0 else -side
        return (av ** m / vp, -h(t) * fsc / vp)

    def hit_end(y, s):
        return s[0] - T
    hit_end.terminal = True
    hit_end.direction = 1

    sol = integrate.solve_ivp(rhs_y, (y0, y1), (t0, q0), method=method, rtol=tol,
                              atol=(tol * t0 * 1e-3, tol * q_scale), dense_output=True,
                              events=hit_end)
    _fail(sol, None, "zero band")
    ended = sol.status == 1
    if ended:
        sol = _truncate_at_event(sol, 0)
        sol.y[0, -1] = T
    return sol, ended


def _w_phase(problem, t0, v0, w0, w1, approaching, tol, method="RK45"):
    """Integrate (t, v) in w = v' from w0 to w1 around an extremum."""
    p = problem.p
    h = problem.weight.h
    f = problem.nonlinearity.f
    F = problem.nonlinearity.F
    T = problem.T_end

    def rhs_w(w, s):
        t, v = s
        c = -(p - 1) * abs(w) ** (p - 2) / (h(t) * f(v))
        return (c, w * c)

    def hit_end(w, s):
        return s[0] - T
    hit_end.terminal = True
    hit_end.direction = 1

    def leave(w, s):
        # leaving side: stop early if the potential drops toward F = 0
        return (p - 1) / p * abs(w) ** p - 4 * KAPPA * h(s[0]) * F(s[1])
    leave.terminal = True
    leave.direction = 1

    events = [hit_end] if approaching else [hit_end, leave]
    sol = integrate.solve_ivp(rhs_w, (w0, w1), (t0, v0), method=method, rtol=tol,
                              atol=(tol * t0 * 1e-3, tol * abs(v0)), dense_output=True,
                              events=events)
    _fail(sol, None, "extremum band")
    ended = False
    if sol.status == 1:
        if len(sol.t_events[0]):
            sol = _truncate_at_event(sol, 0)
            sol.y[0, -1] = T
            ended = True
        else:
            sol = _truncate_at_event(sol, 1)
    return sol, ended


def locate_zero(sol, t1: float, t2: float, p: float):
    """Root of v on a dense-output span ``sol(t) -> (v, q)`` with a sign change.

    Returns (z, v'(z)). Falls back to plain bisection if Brent's method fails.
    """
    g = lambda t: float(sol(t)[0])
    g1, g2 = g(t1), g(t2)
    if g1 == 0:
        return t1, phi_inv(float(sol(t1)[1]), p)
    if g2 == 0:
        return t2, phi_inv(float(sol(t2)[1]), p)
    if g1 * g2 > 0:
        raise ValueError("no sign change on the span")
    try:
        z = optimize.brentq(g, t1, t2, xtol=1e-15 * max(abs(t2), 1.0), rtol=4 * np.finfo(float).eps)
    except (RuntimeError, ValueError):
        lo, hi = t1, t2
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) * g1 > 0:
                lo = mid
            else:
                hi = mid
        z = 0.5 * (lo + hi)
    return z, phi_inv(float(sol(z)[1]), p)


def crossing_model(problem: Problem, z: float, s: float, tau):
    """Local expansion (v, q) at t = z + tau of a crossing with v'(z) = s.

    Keeps the leading |tau|^(1-m) term of q and the h'(z) correction.
    """
    p, m = problem.p, problem.m
    hz, dhz = problem.h(z), problem.dh(z)
    sg = math.copysign(1.0, s)
    a = abs(s)
    tau = np.asarray(tau, dtype=float)
    at = np.abs(tau)
    st = np.sign(tau)
    qz = phi(s, p)
    q = (qz + hz * sg * a ** -m * at ** (1 - m) / (1 - m)
         + dhz * sg * a ** -m * st * at ** (2 - m) / (2 - m))
    dphi = a ** (2 - p) / (p - 1)
    v = (s * tau + dphi * hz * sg * a ** -m * st * at ** (2 - m) / ((1 - m) * (2 - m))
         + dphi * dhz * sg * a ** -m * at ** (3 - m) / ((2 - m) * (3 - m)))
    return v, q


def excise_crossing(problem: Problem, z: float, s: float, delta: float,
                    h_correction: bool = True, n_quad: int = 16):
    """(dv, dq) across [z - delta, z + delta] from the local model v ~ s (t - z).

    The frozen-h singular contribution to dq is odd and cancels; what is kept
    is the h'(z) term 2 sign(s)|s|^-m h'(z) delta^(2-m)/(2-m) and the
    quadrature of the regular remainder -h g2(v).
    """
    if not delta > 1e3 * np.finfo(float).eps * max(abs(z), 1.0):
        raise IntegrationError(f"excision radius {delta!r} below resolution at z={z!r}")
    p, m = problem.p, problem.m
    g2 = problem.nonlinearity.g2
    sg = math.copysign(1.0, s)
    dq = 0.0
    if h_correction:
        dq += 2 * sg * abs(s) ** -m * problem.dh(z) * delta ** (2 - m) / (2 - m)
    x, w = roots_legendre(n_quad)
    tau = delta * x
    vm, _ = crossing_model(problem, z, s, tau)
    dq -= delta * sum(wi * problem.h(z + ti) * g2(vi) for wi, ti, vi in zip(w, tau, vm))
    (v_minus, v_plus), _ = crossing_model(problem, z, s, np.array([-delta, delta]))
    if not h_correction:
        (v_minus, v_plus) = (-s * delta - (v_plus - s * delta), v_plus)
    return float(v_plus - v_minus), float(dq)


def _fit_crossing(problem, t0, v0, q0):
    """Invert the local model: find z > t0 and s from the state at t0."""
    p = problem.p
    s = phi_inv(q0, p)
    tau = -v0 / s
    for _ in range(50):
        z = t0 + tau
        v_m, q_m = crossing_model(problem, z, s, -tau)
        # adjust s so that q matches, then tau so that v matches
        s_new = phi_inv(phi(s, p) + (q0 - float(q_m)), p)
        tau_new = tau + (float(v_m) - v0) / s_new
        if abs(s_new - s) <= 1e-15 * abs(s) and abs(tau_new - tau) <= 1e-16 * max(t0, 1.0):
            s, tau = s_new, tau_new
            break
        s, tau = s_new, tau_new
    return t0 + tau, s


def reference_propagate(problem: Problem, startup: StartupResult, tol: float = 1e-12,
                        delta: float | None = None, h_correction: bool = True) -> Trajectory:
    """Independent integrator: DOP853 in t with excision windows at the zeros.

    While v heads toward zero each step is capped at half the linearized
    distance |v/v'| so no step ever straddles the singular point; the window
    edge |v| = delta |v'| is then found on the step interpolant.
    """
    p = problem.p
    pinv = 1.0 / (p - 1.0)
    h = problem.weight.h
    f = problem.nonlinearity.f
    T = problem.T_end
    if delta is None:
        delta = 1e-7 * T

    def rhs(t, y):
        v, q = y
        return np.array((math.copysign(abs(q) ** pinv, q), -h(t) * f(v)))

    def window(y):
        return abs(y[0]) - delta * abs(y[1]) ** pinv

    eps, v, q = startup.epsilon, startup.v_eps, startup.q_eps
    traj = Trajectory(a=startup.a, problem=problem, startup=startup, method="reference")
    ts, vs, qs = [np.array([eps])], [np.array([v])], [np.array([q])]
    t = eps
    q_scale = max(abs(q), 1e-300)
    nfev = nsteps = 0
    first = 0.01 * t
    while t < T:
        solver = integrate.DOP853(rhs, t, np.array((v, q)), T, rtol=tol,
                                  atol=np.array((tol * min(abs(v), 1.0), tol * q_scale)),
                                  first_step=min(first, T - t))
        knots, interps = [t], []
        hit = None
        while solver.status == "running":
            y = solver.y
            vp = math.copysign(abs(y[1]) ** pinv, y[1])
            if y[0] * vp < 0:
                solver.h_abs = min(solver.h_abs, 0.5 * abs(y[0] / vp))
            g_old = window(y)
            t_old = solver.t
            msg = solver.step()
            if solver.status == "failed":
                raise IntegrationError(f"reference a={startup.a!r} at t={t_old!r}: {msg}")
            nsteps += 1
            dense = solver.dense_output()
            _check_finite(solver.t, *solver.y)
            if g_old > 0 and window(solver.y) <= 0:
                te = optimize.brentq(lambda x: window(dense(x)), t_old, solver.t,
                                     xtol=1e-16, rtol=4 * np.finfo(float).eps)
                knots.append(te)
                interps.append(dense)
                hit = te
                break
            knots.append(solver.t)
            interps.append(dense)
        nfev += solver.nfev
        sol = integrate._ivp.common.OdeSolution(knots, interps)
        knots = np.asarray(knots)
        seg = Segment("t", knots, sol, problem)
        traj.segments.append(seg)
        tt, vv, qq = _sample(seg)
        ts.append(tt[1:]); vs.append(vv[1:]); qs.append(qq[1:])
        t = float(knots[-1])
        v, q = (float(x) for x in sol(t))
        q_scale = max(q_scale, float(np.max(np.abs(qq))))
        if hit is None:
            break
        z, s = _fit_crossing(problem, t, v, q)
        d = z - t
        traj.zeros.append(ZeroEvent(z, s))
        if z + d >= T:
            model = problem if h_correction else _Frozen(problem)
            v_T, q_T = crossing_model(model, z, s, T - z)
            t, v, q = T, float(v_T), float(q_T)
            ts.append(np.array([T])); vs.append(np.array([v])); qs.append(np.array([q]))
            break
        dv, dq = excise_crossing(problem, z, s, d, h_correction=h_correction)
        t, v, q = z + d, v + dv, q + dq
        # restart at the window scale: q' ~ |t - z|^-m is still steep here
        first = d
    traj.t = np.concatenate(ts)
    traj.v = np.concatenate(vs)
    traj.q = np.concatenate(qs)
    traj.stats = dict(nfev=nfev, nsteps=nsteps, tol=tol, delta=delta)
    return traj


class _Frozen:
    """Problem view with h' = 0, for crossing models without the h' term."""

    def __init__(self, problem):
        self._p = problem
        self.p, self.m = problem.p, problem.m

    def h(self, t):
        return self._p.h(t)

    def dh(self, t):
        return 0.0
