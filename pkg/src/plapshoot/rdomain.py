"""Map a t-domain trajectory back to the radial profile u(r) = v(r^e).

With e = (p-N)/(p-1) < 0 the map r -> t = r^e is decreasing: r = R is
t = T_end and r -> infinity is t -> 0+. Zeros of u are the images of the
zeros of v, and u'(r) = v'(t) e r^(e-1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .integrator import Trajectory
from .model import phi_inv

__all__ = [
    "RDomainProfile",
    "RDomainWarning",
    "to_r_domain",
    "r_of_t",
    "t_of_r",
    "default_r_max",
    "sign_changes",
]


class RDomainWarning(UserWarning):
    pass


def t_of_r(r, e):
    return np.power(r, e)


def r_of_t(t, e):
    return np.power(t, 1.0 / e)


def default_r_max(traj: Trajectory) -> float:
    """r-image of 10 eps, which keeps the emitted tail on integrated ground."""
    e = traj.problem.params.t_exponent
    return float(r_of_t(10.0 * traj.startup.epsilon, e))


@dataclass
class RDomainProfile:
    """u(r), u'(r) on an increasing r-grid, with the t-grid it came from."""

    r: np.ndarray
    u: np.ndarray
    uprime: np.ndarray
    t: np.ndarray
    v: np.ndarray
    q: np.ndarray
    vprime: np.ndarray
    a: float
    n: int | None
    r_max: float
    truncated: bool = False
    zeros_r: list = field(default_factory=list)
    tail_start: float = math.nan

    @property
    def u_R(self) -> float:
        return float(self.u[0])

    def interior_sign_changes(self, window_r: float = 0.0) -> int:
        """Sign changes of u on the grid, ignoring points with r < R + window_r."""
        sel = self.r >= self.r[0] + window_r
        return sign_changes(self.u[sel])

    def tail_decreasing(self) -> bool:
        """|u| strictly decreasing on r > tail_start (discrete check)."""
        sel = self.r > self.tail_start
        au = np.abs(self.u[sel])
        return bool(au.size >= 2 and np.all(np.diff(au) < 0))


def sign_changes(u) -> int:
    """Number of strict sign changes in a sequence, exact zeros skipped."""
    s = np.sign(np.asarray(u, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def to_r_domain(traj: Trajectory, a_n: float | None = None, r_max: float | None = None,
                n: int | None = None) -> RDomainProfile:
    """Profile on [R, r_max]; r_max beyond r(eps) is truncated with a warning."""
    pr = traj.problem
    e = pr.params.t_exponent
    R = pr.params.R
    if r_max is None:
        r_max = default_r_max(traj)
    if not r_max > R:
        raise ValueError(f"r_max={r_max!r} must exceed R={R!r}")
    t_lo = float(t_of_r(r_max, e))
    eps = float(traj.t[0])
    truncated = False
    if t_lo < eps:
        warnings.warn(f"r_max={r_max:.6g} lies beyond the startup image r(eps)={r_of_t(eps, e):.6g};"
                      " profile truncated", RDomainWarning, stacklevel=2)
        t_lo, r_max, truncated = eps, float(r_of_t(eps, e)), True
    sel = traj.t > t_lo
    t = traj.t[sel]
    v = traj.v[sel]
    q = traj.q[sel]
    if t.size == 0 or t[0] > t_lo:
        v0, q0 = traj.state_at(t_lo)
        t = np.concatenate([[t_lo], t])
        v = np.concatenate([[v0], v])
        q = np.concatenate([[q0], q])
    vp = phi_inv(q, pr.p)
    # reverse so that r increases; pin the endpoints to the exact radii
    r = r_of_t(t, e)[::-1].copy()
    r[0], r[-1] = R, r_max
    u = v[::-1].copy()
    uprime = (vp * e * np.power(t, (e - 1.0) / e))[::-1].copy()
    # distinct t can round to the same r; keep r strictly increasing
    keep = np.concatenate([[True], np.diff(r) > 0])
    if not keep.all():
        r, u, uprime = r[keep], u[keep], uprime[keep]
        rev = keep[::-1]
        t, v, q, vp = t[rev], v[rev], q[rev], vp[rev]
    zeros_r = sorted(float(r_of_t(z.z, e)) for z in traj.zeros)
    tail_start = float(r_of_t(traj.extrema[0].t, e)) if traj.extrema else R
    return RDomainProfile(r=r, u=u, uprime=uprime, t=t, v=v, q=q, vprime=vp,
                          a=float(traj.a if a_n is None else a_n), n=n, r_max=float(r_max),
                          truncated=truncated, zeros_r=zeros_r, tail_start=tail_start)
