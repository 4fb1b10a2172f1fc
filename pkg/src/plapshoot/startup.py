"""Local solution near t = 0 by fixed-point iteration on w(t) = v(t)/t.

The map is

    Tw(t) = (a/t) int_0^t Phi_p'(1 - a^(1-p) int_0^s h(x) f(x w(x)) dx) ds,

whose inner integrand behaves like x^-(alpha_tilde1 + m) at the origin.
With theta = 1 - alpha_tilde1 - m and x = eps * u^(1/theta) the weight is
absorbed exactly: h(x) f(xw) dx = (eps^theta / theta) G(u) du with G bounded.
Iterates live on Chebyshev points in u, and both nested integrals are
written as averages over [0, 1] evaluated by Gauss rules, so nothing is ever
divided by a small t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import roots_jacobi, roots_legendre

from .model import Problem, phi_inv

__all__ = [
    "StartupError",
    "StartupResult",
    "pick_epsilon",
    "picard_solve",
    "startup_state",
    "solve_startup",
    "singular_moment",
    "singular_moment_reference",
    "consistency_gap",
    "epsilon_candidates",
    "leading_order_slope",
]

MAX_ITER = 200
RATIO_MAX = 0.5
LOCALITY = 0.25
GRID_SIZES = (16, 32, 64, 128)


class StartupError(RuntimeError):
    pass


def _nodes(n):
    k = np.arange(n)
    angle = (2 * k + 1) * np.pi / (2 * n)
    u = (1 - np.cos(angle)) / 2
    bw = (-1.0) ** k * np.sin(angle)
    return u, bw


def _lagrange(u, bw, x):
    """Matrix L[i, k] = k-th Lagrange basis polynomial at x[i]."""
    x = np.asarray(x, dtype=float)
    d = x[:, None] - u[None, :]
    hit = d == 0
    d[hit] = 1.0
    c = bw[None, :] / d
    L = c / c.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    if rows.any():
        L[rows] = hit[rows].astype(float)
    return L


def _average_operator(u, bw, x, rho, wq):
    """Rows x_i of: values g(u_k) -> sum_j wq_j g(x_i rho_j)."""
    pts = (x[:, None] * rho[None, :]).ravel()
    L = _lagrange(u, bw, pts).reshape(len(x), len(rho), len(u))
    return np.einsum("j,ijk->ik", wq, L)


@lru_cache(maxsize=64)
def _operators(n, theta):
    u, bw = _nodes(n)
    nq = n + 8
    xg, wg = roots_legendre(nq)
    rho_g, w_g = (xg + 1) / 2, wg / 2
    b = 1.0 / theta - 1.0
    xj, wj = roots_jacobi(nq, 0.0, b)
    rho_j, w_j = (xj + 1) / 2, wj / 2 ** (b + 1)
    pts = np.append(u, 1.0)
    # cumulative integral of G in u: I(u) = u * mean of G on [0, u]
    inner = pts[:, None] * _average_operator(u, bw, pts, rho_g, w_g)
    # mean of psi over s in [0, t] written in u
    outer = _average_operator(u, bw, pts, rho_j, w_j) / theta
    return u, bw, inner, outer


@dataclass
class StartupResult:
    a: float
    epsilon: float
    theta: float
    u: np.ndarray
    t: np.ndarray
    w: np.ndarray
    q: np.ndarray
    q_excess: np.ndarray
    v_eps: float
    q_eps: float
    vprime_eps: float
    picard_residual: float
    contraction_estimate: float
    iterations: int
    n_grid: int
    _bw: np.ndarray = None
    _G: np.ndarray = None

    @property
    def w_samples(self):
        return np.column_stack([self.t, self.w])

    def w_at(self, t):
        """Interpolated w at points t in [0, eps]."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        uu = (t / self.epsilon) ** self.theta
        return _lagrange(self.u, self._bw, uu) @ self.w

    def q_excess_at(self, t):
        """Interpolated q(t) - a^(p-1) at points t in [0, eps]."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        uu = (t / self.epsilon) ** self.theta
        return _lagrange(self.u, self._bw, uu) @ self.q_excess

    def ball_ok(self) -> bool:
        return bool(np.all(np.abs(self.w - self.a) <= self.a / 2)
                    and abs(self.v_eps / self.epsilon - self.a) <= self.a / 2)


def _sweep(problem: Problem, a, eps, n, tol, max_iter, stop_on_bad=True):
    """Run the Picard iteration at fixed eps and grid size."""
    p, m = problem.p, problem.m
    at1 = problem.constants.alpha_tilde1
    theta = 1.0 - at1 - m
    u, bw, inner, outer = _operators(n, theta)
    x = eps * u ** (1.0 / theta)
    hs = np.array([problem.weight.h_scaled(xi, at1) for xi in x])
    fs = problem.nonlinearity.f_scaled
    scale = eps ** theta / theta / a ** (p - 1)
    w = np.full(n, float(a))
    dists = []
    good = True
    for k in range(max_iter):
        G = hs * w ** -m * np.array([fs(xi * wi) for xi, wi in zip(x, w)])
        I = scale * (inner @ G)
        psi = phi_inv(1.0 - I[:-1], p) - 1.0
        tw = a + a * (outer @ psi)
        d = float(np.max(np.abs(tw[:-1] - w)))
        dists.append(d)
        w = tw[:-1]
        if not np.all(np.abs(tw - a) <= a / 2) or not np.all(np.isfinite(tw)):
            good = False
            if stop_on_bad:
                break
        if d <= tol:
            break
        if stop_on_bad and len(dists) >= 3 and _ratio(dists, a) > 1.0:
            good = False
            break
    if not good:
        return dict(dists=dists, good=False)
    G = hs * w ** -m * np.array([fs(xi * wi) for xi, wi in zip(x, w)])
    I = scale * (inner @ G)
    I = I * a ** (p - 1)
    return dict(u=u, bw=bw, x=x, w=w, w_eps=float(tw[-1]), I=I[:-1], I_eps=float(I[-1]), G=G,
                dists=dists, theta=theta, good=good and dists[-1] <= tol)


def _ratio(dists, a):
    """Largest observed ratio of successive iterate distances above roundoff."""
    floor = 1e3 * np.finfo(float).eps * max(a, 1.0)
    rs = [dists[k] / dists[k - 1] for k in range(1, len(dists)) if dists[k - 1] > floor]
    return max(rs) if rs else 0.0


def epsilon_candidates(problem: Problem, max_halvings: int = 200):
    """eps_k = (T_end / 4) 2^-k."""
    top = problem.T_end / 4
    return [top * 0.5 ** k for k in range(max_halvings + 1)]


def pick_epsilon(problem: Problem, a: float, tol: float = 1e-10,
                 max_halvings: int = 200, n: int = 32) -> float:
    """Largest candidate eps with an observed contraction ratio <= 1/2.

    The candidate must also keep v(eps) <= beta * LOCALITY so the singular
    part of f dominates on [0, eps].
    """
    if not a > 0:
        raise StartupError(f"shooting slope must be positive, got {a!r}")
    vcap = LOCALITY * problem.constants.beta
    for eps in epsilon_candidates(problem, max_halvings):
        if 0.5 * a * eps > vcap:
            continue
        res = _sweep(problem, a, eps, n, tol, MAX_ITER)
        if (res["good"] and _ratio(res["dists"], a) <= RATIO_MAX
                and eps * res["w_eps"] <= vcap):
            return eps
    raise StartupError(f"no contracting eps found for a={a!r} after {max_halvings} halvings")


def picard_solve(problem: Problem, a: float, eps: float, tol: float = 1e-10,
                 max_retries: int = 20) -> StartupResult:
    """Fixed point of T on [0, eps]; grid doubled until two sizes agree."""
    p = problem.p
    for _ in range(max_retries + 1):
        prev = None
        for n in GRID_SIZES:
            res = _sweep(problem, a, eps, n, tol, MAX_ITER)
            if not res["good"]:
                break
            cur = (res["w_eps"], a ** (p - 1) - res["I_eps"])
            if prev is not None and all(
                    abs(c - q) <= 1e-12 * max(abs(c), abs(q), 1e-300) + tol * 1e-2
                    for c, q in zip(cur, prev)):
                break
            prev = cur
        if res["good"] and _ratio(res["dists"], a) < 1.0:
            return _result(problem, a, eps, res, tol)
        eps *= 0.5
    raise StartupError(f"Picard iteration diverged for a={a!r}")


def _result(problem, a, eps, res, tol):
    p = problem.p
    theta = res["theta"]
    u, bw = res["u"], res["bw"]
    q_eps = a ** (p - 1) - res["I_eps"]
    w_eps = res["w_eps"]
    # v'(eps) = w + t w_t = w(1) + theta * dw/du(1)
    dL = _lagrange_derivative_at_one(u, bw)
    vprime = w_eps + theta * float(dL @ res["w"])
    return StartupResult(
        a=float(a), epsilon=float(eps), theta=theta, u=u, t=res["x"], w=res["w"],
        q=a ** (p - 1) - res["I"], q_excess=-res["I"], v_eps=eps * w_eps, q_eps=q_eps, vprime_eps=vprime,
        picard_residual=res["dists"][-1], contraction_estimate=_ratio(res["dists"], a),
        iterations=len(res["dists"]), n_grid=len(u), _bw=bw, _G=res["G"])


def _lagrange_derivative_at_one(u, bw):
    # derivative of the barycentric interpolant at a point that is not a node
    d = 1.0 - u
    c = bw / d
    s = c.sum()
    L = c / s
    dc = -bw / d ** 2
    ds = dc.sum()
    return (dc - L * ds) / s


def startup_state(result: StartupResult, tol: float = 1e-10):
    """(eps, v(eps), q(eps))."""
    return result.epsilon, result.v_eps, result.q_eps


def consistency_gap(problem: Problem, result: StartupResult) -> float:
    """|Phi_p'(q(eps)) - d/dt (t w)(eps)|."""
    return abs(phi_inv(result.q_eps, problem.p) - result.vprime_eps)


def solve_startup(problem: Problem, a: float, tol: float = 1e-10) -> StartupResult:
    eps = pick_epsilon(problem, a, tol)
    res = picard_solve(problem, a, eps, tol)
    gap = consistency_gap(problem, res)
    if gap > 10 * max(tol, 1e-9) * max(1.0, abs(res.vprime_eps)):
        raise StartupError(f"startup derivative mismatch {gap:.3e} at a={a!r}")
    return res


def singular_moment(problem: Problem, t: float, w, n: int = 32) -> float:
    """int_0^t h(x) (x w(x))^-m dx by the production substitution.

    ``w`` is a callable on [0, t] with values in the ball around w(0).
    """
    m = problem.m
    at1 = problem.constants.alpha_tilde1
    theta = 1.0 - at1 - m
    xg, wg = roots_legendre(n)
    uu = (xg + 1) / 2
    x = t * uu ** (1.0 / theta)
    hs = np.array([problem.weight.h_scaled(xi, at1) for xi in x])
    G = hs * np.array([w(xi) for xi in x]) ** -m
    return float(t ** theta / theta * np.dot(wg / 2, G))


def singular_moment_reference(problem: Problem, t: float, w, delta: float) -> float:
    """Adaptive quadrature on [delta, t] plus the frozen power-law tail on [0, delta]."""
    m = problem.m
    at1 = problem.constants.alpha_tilde1
    theta = 1.0 - at1 - m
    g = lambda x: problem.h(x) * (x * w(x)) ** -m
    # one adaptive quad per half-decade keeps every piece mildly singular
    edges = np.geomspace(delta, t, max(2, int(2 * math.log10(t / delta)) + 2))
    body = sum(integrate.quad(g, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)[0]
               for lo, hi in zip(edges[:-1], edges[1:]))
    c = problem.weight.h_scaled(delta, at1) * w(0.0) ** -m
    tail = c * delta ** theta / theta
    return body + tail


def leading_order_slope(result: StartupResult, decades: float = 12.0, n: int = 200) -> float:
    """Least-squares log-log slope of q(t) - a^(p-1) on log-uniform t in [eps 10^-decades, eps].

    Near the origin q - a^(p-1) ~ C t^theta with theta = 1 - alpha_tilde1 - m.
    """
    t = result.epsilon * np.logspace(-decades, 0, n)
    qe = result.q_excess_at(t)
    return float(np.polyfit(np.log(t), np.log(np.abs(qe)), 1)[0])
