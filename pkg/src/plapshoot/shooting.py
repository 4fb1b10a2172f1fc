"""Shooting on the initial slope a.

S_n is the set of slopes whose trajectory has exactly n zeros on
(0, T_end). Its supremum a_n is where a new zero enters through t = T_end,
so v_{a_n}(T_end) = 0. The boundary is found by bisection on the integer
count, never by root-finding on v(T_end), which jumps in sign across it.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .census import CensusReport, census
from .integrator import IntegrationError, Trajectory, propagate
from .model import Problem
from .startup import StartupError, solve_startup

__all__ = [
    "ShootingError",
    "ShootClassification",
    "Bracket",
    "BoundaryResult",
    "LadderEntry",
    "SolutionLadder",
    "ShootSettings",
    "shoot",
    "classify",
    "scan_transitions",
    "bisect_boundary",
    "certify",
    "solve_ladder",
]


class ShootingError(RuntimeError):
    def __init__(self, a, cause):
        super().__init__(f"shooting failed at a={a!r}: {cause}")
        self.a = a
        self.cause = cause


@dataclass(frozen=True)
class ShootSettings:
    tol: float = 1e-10
    tol_a: float = 1e-10
    tol_match: float = 1e-6
    slope_min: float | None = None
    terminal_window: float | None = None
    a_lo: float = 0.5
    a_max: float = 1e6
    growth: float = 1.25
    tol_E: float = 1e-7
    v_band: float | None = None

    def window(self, problem: Problem) -> float:
        return 1e-6 * problem.T_end if self.terminal_window is None else self.terminal_window


@dataclass
class ShootClassification:
    a: float
    n: int
    n_total: int
    terminal_v: float
    terminal_sign: int
    trajectory: Trajectory = field(repr=False)
    census: CensusReport | None = field(default=None, repr=False)


def shoot(problem: Problem, a: float, tol: float = 1e-10,
          v_band: float | None = None) -> Trajectory:
    """Startup plus propagation for one slope."""
    try:
        st = solve_startup(problem, a, tol)
        return propagate(problem, st, tol, v_band=v_band)
    except (StartupError, IntegrationError, FloatingPointError, ZeroDivisionError) as exc:
        raise ShootingError(a, exc) from exc


def classify(problem: Problem, a: float, settings: ShootSettings = ShootSettings(),
             full: bool = False) -> ShootClassification:
    """Zero counts and terminal sign for slope a.

    ``n`` excludes zeros inside the terminal window; ``n_total`` counts every
    zero in (eps, T_end]. With ``full`` a complete census is attached.
    """
    if not 0 < a <= settings.a_max:
        raise ValueError(f"a must lie in (0, a_max={settings.a_max}], got {a!r}")
    traj = shoot(problem, a, settings.tol, settings.v_band)
    T = problem.T_end
    win = settings.window(problem)
    rep = None
    if full:
        rep = census(traj, win, settings.tol_E)
        n = rep.n_zeros
        n_total = rep.n_zeros + len(rep.terminal_zeros)
    else:
        n_total = len(traj.zeros)
        n = sum(1 for z in traj.zeros if z.z < T - win)
    vT = traj.terminal[0]
    sign = 0 if abs(vT) <= settings.tol_match else int(math.copysign(1, vT))
    return ShootClassification(a, n, n_total, vT, sign, traj, rep)


@dataclass
class Bracket:
    a_lo: float
    a_hi: float
    n_lo: int
    n_hi: int
    status: str = "unit"  # "unit", "down" (count decreased), "unresolved"


def scan_transitions(problem: Problem, a_lo: float, a_hi: float, growth: float = 1.25,
                     settings: ShootSettings = ShootSettings(), stop_count: int | None = None,
                     log: list | None = None, extra: int | None = None):
    """Geometric scan a_k = a_lo growth^k; every change of count becomes a bracket.

    Jumps by more than one are refined recursively at geometric midpoints.
    Decreases are kept verbatim with status "down". Stops early once the
    count exceeds ``stop_count``, or, with ``extra``, once it exceeds the
    smallest count seen so far by more than ``extra``. Returns (brackets,
    scan points).
    """
    if not (0 < a_lo < a_hi) or not growth > 1:
        raise ValueError("need 0 < a_lo < a_hi and growth > 1")
    count = lambda a: classify(problem, a, settings).n_total
    pts = []
    a = a_lo
    while a <= a_hi * (1 + 1e-12):
        pts.append((a, count(a)))
        if log is not None:
            log.append(pts[-1])
        if stop_count is not None and pts[-1][1] > stop_count:
            break
        if extra is not None and pts[-1][1] > min(c for _, c in pts) + extra:
            break
        a *= growth
    brackets = []
    for (a0, n0), (a1, n1) in zip(pts[:-1], pts[1:]):
        if n1 != n0:
            brackets.extend(_refine(count, a0, a1, n0, n1))
    return brackets, pts


def _refine(count, a0, a1, n0, n1, depth=0):
    if n1 == n0 + 1:
        return [Bracket(a0, a1, n0, n1)]
    if n1 < n0:
        return [Bracket(a0, a1, n0, n1, "down")]
    if (a1 - a0) <= 1e-12 * a1 or depth > 60:
        return [Bracket(a0, a1, n0, n1, "unresolved")]
    am = math.sqrt(a0 * a1)
    nm = count(am)
    out = []
    if nm != n0:
        out += _refine(count, a0, am, n0, nm, depth + 1)
    if n1 != nm:
        out += _refine(count, am, a1, nm, n1, depth + 1)
    return out


@dataclass
class BoundaryResult:
    a_star: float
    a_lo: float
    a_hi: float
    n: int
    iterations: int
    history: list  # (width, midpoint, |v(T_end)| at midpoint)
    classification: ShootClassification = field(repr=False)
    flagged: bool = False


def bisect_boundary(problem: Problem, bracket: Bracket, tol_a: float = 1e-10,
                    settings: ShootSettings = ShootSettings()) -> BoundaryResult:
    """Bisect the total count on a unit bracket until |a+ - a-| <= tol_a a*.

    Returns the midpoint of the final bracket.
    """
    lo, hi, n = bracket.a_lo, bracket.a_hi, bracket.n_lo
    history = []
    it = 0
    flagged = False
    cur = settings
    while hi - lo > tol_a * 0.5 * (lo + hi):
        mid = 0.5 * (lo + hi)
        c = classify(problem, mid, cur)
        if c.n_total not in (n, n + 1):
            if cur.tol == settings.tol:
                # count noise: tighten the integrator once and retry
                cur = dataclasses.replace(settings, tol=settings.tol / 10)
                continue
            flagged = True
            break
        history.append((hi - lo, mid, abs(c.terminal_v)))
        if c.n_total == n:
            lo = mid
        else:
            hi = mid
        it += 1
    a_star = 0.5 * (lo + hi)
    final = classify(problem, a_star, cur, full=True)
    return BoundaryResult(a_star, lo, hi, n, it, history, final, flagged)


@dataclass
class LadderEntry:
    n: int
    a_n: float
    boundary: BoundaryResult = field(repr=False)
    certification: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return bool(self.certification.get("certified", False))

    @property
    def trajectory(self) -> Trajectory:
        return self.boundary.classification.trajectory

    @property
    def census(self) -> CensusReport:
        return self.boundary.classification.census


@dataclass
class SolutionLadder:
    entries: dict
    n0: int | None
    status: str  # "complete" or "range-limited"
    brackets: list
    scan: list
    notes: list = field(default_factory=list)

    def a_values(self):
        return [self.entries[n].a_n for n in sorted(self.entries)]

    def all_certified(self) -> bool:
        return bool(self.entries) and all(e.certified for e in self.entries.values())


def _terminal_floor(problem: Problem, rep: CensusReport):
    """Energy bound on |v'(T_end)| from the last extremum, if applicable."""
    if not rep.extrema:
        return None
    vM = abs(rep.extrema[-1].v)
    FM = problem.F(vM)
    if FM <= 0:
        return None
    p = problem.p
    return (p / (p - 1) * problem.h(problem.T_end) * FM) ** (1 / p)


def certify(problem: Problem, c: ShootClassification, n: int,
            settings: ShootSettings = ShootSettings(), flank=None) -> dict:
    """Exact interior count, terminal match and terminal slope floor."""
    rep = c.census or census(c.trajectory, settings.window(problem), settings.tol_E)
    floor = _terminal_floor(problem, rep)
    slope_min = settings.slope_min
    if slope_min is None:
        slope_min = floor * (1 - 1e-6) if floor is not None else 1e-8
    vpT = abs(rep.terminal_vprime)
    out = dict(
        count_ok=rep.n_zeros == n,
        match_ok=abs(rep.terminal_v) <= settings.tol_match,
        slope_ok=vpT >= slope_min,
        terminal_v=rep.terminal_v, terminal_vprime=rep.terminal_vprime,
        slope_min=slope_min, energy_ok=rep.energy_ok,
        interleaving_ok=rep.interleaving_ok, slope_floor_ok=rep.slope_floor_ok,
    )
    if flank is not None:
        out["flank_counts"] = flank
        out["flank_ok"] = flank == (n, n + 1)
    # a zero crossed more slowly than the energy floor allows is a degenerate
    # contact, which the solver does not model
    out["certified"] = bool(out["count_ok"] and out["match_ok"] and out["slope_ok"]
                            and rep.slope_floor_ok and out.get("flank_ok", True))
    return out


def _flank(problem, a_star, tol_a, settings):
    d = 10 * tol_a * a_star
    return (classify(problem, a_star - d, settings).n_total,
            classify(problem, a_star + d, settings).n_total)


def solve_ladder(problem: Problem, n_max: int | None = None,
                 settings: ShootSettings = ShootSettings(), n_min: int | None = None,
                 extra: int | None = None) -> SolutionLadder:
    """Certified boundary solutions for n0, ..., n_max.

    n0 is the smallest count that has an upward unit transition in the scan
    range. For each n the last bracket leaving count n is bisected, which
    realizes sup S_n within the scanned range. Pass ``extra`` instead of
    ``n_max`` to ask for n0, ..., n0 + extra.
    """
    if (n_max is None) == (extra is None):
        raise ValueError("give exactly one of n_max and extra")
    brackets, pts = scan_transitions(problem, settings.a_lo, settings.a_max, settings.growth,
                                     settings, stop_count=n_max, extra=extra)
    notes = []
    up = [b for b in brackets if b.status == "unit"]
    if any(b.status != "unit" for b in brackets):
        notes.append("non-unit brackets recorded: " + ", ".join(
            f"[{b.a_lo:.6g}, {b.a_hi:.6g}] {b.n_lo}->{b.n_hi} ({b.status})"
            for b in brackets if b.status != "unit"))
    if not up:
        return SolutionLadder({}, None, "range-limited", brackets, pts,
                              notes + ["no count transition in scan range"])
    n0 = min(b.n_lo for b in up)
    notes.append(f"n0 = {n0} is the smallest count observed on [{settings.a_lo}, "
                 f"{pts[-1][0]:.6g}]; smaller counts may exist outside this range")
    if n_max is None:
        n_max = n0 + extra
    start = n0 if n_min is None else max(n0, n_min)
    entries = {}
    status = "complete"
    for n in range(start, n_max + 1):
        cands = [b for b in up if b.n_lo == n]
        if not cands:
            status = "range-limited"
            notes.append(f"no transition out of count {n} below a = {pts[-1][0]:.6g}")
            break
        br = cands[-1]
        res = bisect_boundary(problem, br, settings.tol_a, settings)
        flank = _flank(problem, res.a_star, settings.tol_a, settings)
        cert = certify(problem, res.classification, n, settings, flank)
        if res.flagged:
            cert["certified"] = False
            cert["flagged"] = True
        entries[n] = LadderEntry(n, res.a_star, res, cert)
    return SolutionLadder(entries, n0, status, brackets, pts, notes)
