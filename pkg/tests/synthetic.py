"""Analytic stand-ins for integrated trajectories."""

from types import SimpleNamespace

import numpy as np

from plapshoot.integrator import Segment, Trajectory
from plapshoot.model import phi


def synthetic_trajectory(problem, v, dv, eps=1e-3, n_knots=400, zeros=(), extrema=(),
                         q=None):
    """One t-segment on [eps, T_end] with v and q = Phi_p(v') given in closed form."""
    p = problem.p
    T = problem.T_end
    qf = q if q is not None else (lambda x: phi(dv(x), p))
    sol = lambda x: np.array([v(np.asarray(x, dtype=float)), qf(np.asarray(x, dtype=float))])
    knots = np.linspace(eps, T, n_knots)
    seg = Segment("t", knots, sol, problem)
    t = np.linspace(eps, T, 4 * n_knots)
    vals = sol(t)
    return Trajectory(a=float(dv(0.0)), problem=problem,
                      startup=SimpleNamespace(epsilon=eps, a=float(dv(0.0))),
                      t=t, v=vals[0], q=vals[1], segments=[seg], zeros=list(zeros),
                      extrema=list(extrema), method="synthetic")
