"""Problem family for radial solutions of the singular p-Laplacian on an
exterior domain.

In the transformed coordinate ``t = r**((p-N)/(p-1))`` the radial problem
becomes

    (Phi_p(v'))' + h(t) f(v) = 0,   v(0) = 0,   v(T_end) = 0,

with ``T_end = R**((p-N)/(p-1))``. This module holds the parameter record,
the hypothesis checks, the nonlinearity ``f`` and the transformed weight
``h``, and the constants derived from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "ProblemParams",
    "ValidationReport",
    "DerivedConstants",
    "Nonlinearity",
    "CanonicalNonlinearity",
    "Weight",
    "PowerWeight",
    "Problem",
    "InvalidParameters",
    "phi",
    "phi_inv",
    "validate_params",
    "derived_constants",
    "make_problem",
    "ci1",
    "ci2",
]


class InvalidParameters(ValueError):
    """Raised when a hypothesis clause is violated and a run is requested."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("; ".join(report.violations))


def phi(x, p):
    """Odd power map |x|**(p-2) * x."""
    if isinstance(x, float) or isinstance(x, int):
        return math.copysign(abs(x) ** (p - 1.0), x)
    x = np.asarray(x, dtype=float)
    return np.copysign(np.abs(x) ** (p - 1.0), x)


def phi_inv(y, p):
    """Inverse of :func:`phi`, |y|**(1/(p-1)) * sign(y)."""
    if isinstance(y, float) or isinstance(y, int):
        return math.copysign(abs(y) ** (1.0 / (p - 1.0)), y)
    y = np.asarray(y, dtype=float)
    return np.copysign(np.abs(y) ** (1.0 / (p - 1.0)), y)


@dataclass(frozen=True)
class ProblemParams:
    """Exponents, dimension, inner radius and weight bounds.

    ``alpha1`` and ``K1`` default to ``alpha`` and ``K0`` (pure power weight
    ``K = K0 * r**-alpha``).
    """

    p: float
    N: float
    m: float
    l: float
    alpha: float
    R: float = 1.0
    K0: float = 1.0
    K1: float | None = None
    alpha1: float | None = None

    def __post_init__(self):
        if self.K1 is None:
            object.__setattr__(self, "K1", self.K0)
        if self.alpha1 is None:
            object.__setattr__(self, "alpha1", self.alpha)

    @property
    def t_exponent(self) -> float:
        """Exponent (p-N)/(p-1) of the map r -> t."""
        return (self.p - self.N) / (self.p - 1.0)

    @property
    def T_end(self) -> float:
        return self.R ** self.t_exponent

    def as_dict(self) -> dict:
        return {
            "p": self.p, "N": self.N, "m": self.m, "l": self.l,
            "alpha": self.alpha, "alpha1": self.alpha1,
            "R": self.R, "K0": self.K0, "K1": self.K1,
        }


@dataclass
class ValidationReport:
    accepted: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.accepted


CLAUSE_N = "N > 2"
CLAUSE_P = "1 < p < N"
CLAUSE_M = "0 < m < 1"
CLAUSE_L = "l > p - 1"
CLAUSE_R = "R > 0"
CLAUSE_K = "K0 > 0 and K1 > 0"
CLAUSE_ALPHA1_LOW = "N + m(N-p)/(p-1) < alpha1"
CLAUSE_ALPHA_ORDER = "alpha1 <= alpha"
CLAUSE_ALPHA_HIGH = "alpha < 2(N-1)"
CLAUSE_LOG_DERIV = "rK'/K > -(N-1)p/(p-1)"
CLAUSE_K_BOUNDS = "K0 r^-alpha <= K <= K1 r^-alpha1 on [R, inf)"


def validate_params(params: ProblemParams, weight: "Weight | None" = None) -> ValidationReport:
    """Check every hypothesis inequality; reject with the list of clauses.

    Non-finite fields raise ``ValueError``. ``weight`` defaults to the pure
    power weight; a custom weight is spot-checked on a sample grid.
    """
    values = params.as_dict()
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"parameter {name} is not finite: {value!r}")

    p, N, m, l = params.p, params.N, params.m, params.l
    alpha, alpha1 = params.alpha, params.alpha1
    bad = []
    if not N > 2:
        bad.append(CLAUSE_N)
    if not 1 < p < N:
        bad.append(CLAUSE_P)
    if not 0 < m < 1:
        bad.append(CLAUSE_M)
    if not l > p - 1:
        bad.append(CLAUSE_L)
    if not params.R > 0:
        bad.append(CLAUSE_R)
    if not (params.K0 > 0 and params.K1 > 0):
        bad.append(CLAUSE_K)
    # the remaining clauses divide by p-1 and N-p
    if CLAUSE_P in bad:
        return ValidationReport(False, bad)
    if not N + m * (N - p) / (p - 1) < alpha1:
        bad.append(CLAUSE_ALPHA1_LOW)
    if not alpha1 <= alpha:
        bad.append(CLAUSE_ALPHA_ORDER)
    if not alpha < 2 * (N - 1):
        bad.append(CLAUSE_ALPHA_HIGH)

    bound = -(N - 1) * p / (p - 1)
    if weight is None or isinstance(weight, PowerWeight):
        # rK'/K = -alpha for K0 r^-alpha
        if not -alpha > bound:
            bad.append(CLAUSE_LOG_DERIV)
        if not (bad or params.K0 * params.R ** (alpha1 - alpha) <= params.K1):
            bad.append(CLAUSE_K_BOUNDS)
    elif not bad:
        r = params.R * np.logspace(0, 8, 400)
        K = np.array([weight.K(x) for x in r])
        dK = np.array([weight.dK(x) for x in r])
        if not np.all(K > 0) or not np.all(r * dK / K > bound):
            bad.append(CLAUSE_LOG_DERIV)
        lo = params.K0 * r ** (-alpha)
        hi = params.K1 * r ** (-alpha1)
        if not (np.all(lo <= K * (1 + 1e-12)) and np.all(K <= hi * (1 + 1e-12))):
            bad.append(CLAUSE_K_BOUNDS)
    return ValidationReport(not bad, bad)


class Nonlinearity:
    """Odd nonlinearity f, singular like -sign(u)|u|^-m at 0.

    Subclasses or instances supply ``f`` and the small-|u| remainder ``g2``
    (``f = -sign(u)|u|^-m + g2`` for ``|u| < U_small``) and the large-|u|
    remainder ``g1`` (``f = |u|^(l-1) u + g1`` for ``|u| > U_big``).
    ``F`` defaults to numerical quadrature of ``f``.
    """

    canonical = False

    def __init__(self, m: float, l: float, f: Callable, g1: Callable, g2: Callable,
                 U_big: float, U_small: float, F: Callable | None = None):
        self.m = float(m)
        self.l = float(l)
        self._f = f
        self.g1 = g1
        self.g2 = g2
        self.U_big = float(U_big)
        self.U_small = float(U_small)
        self._F = F
        self.beta = self._find_beta()
        self.gamma = self._find_gamma()
        self.F0 = -self.F(self.beta)
        self.f0 = self._find_f0()

    def f(self, u: float) -> float:
        if u == 0:
            raise ZeroDivisionError("f is singular at u = 0")
        return self._f(u)

    def F(self, u: float) -> float:
        if u == 0:
            return 0.0
        if self._F is not None:
            return self._F(u)
        a = abs(u)
        # split off the integrable singular part near 0
        s = min(a, self.U_small)
        val = -s ** (1 - self.m) / (1 - self.m)
        val += integrate.quad(self.g2, 0.0, s, epsabs=1e-14, epsrel=1e-13)[0]
        if a > s:
            val += integrate.quad(self._f, s, a, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        return val

    def f_scaled(self, u: float) -> float:
        """|u|^m f(u); bounded near 0 with limit -sign(u)."""
        a = abs(u)
        if a < self.U_small:
            return -math.copysign(1.0, u) + a ** self.m * self.g2(u)
        return a ** self.m * self._f(u)

    def _find_beta(self) -> float:
        hi = 1.0
        while self._f(hi) <= 0:
            hi *= 2.0
        lo = hi
        while self._f(lo) > 0:
            lo *= 0.5
        return optimize.brentq(self._f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def _find_gamma(self) -> float:
        hi = 2.0 * self.beta
        while self.F(hi) <= 0:
            hi *= 2.0
        return optimize.brentq(self.F, self.beta, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def _find_f0(self) -> float:
        u = np.logspace(-8, 4, 2000)
        vals = np.array([x ** self.m * self._f(x) for x in u])
        return float(max(-vals.min(), 0.0))


class CanonicalNonlinearity(Nonlinearity):
    """f(u) = |u|^(l-1) u - u / |u|^(m+1), with all constants in closed form."""

    canonical = True

    def __init__(self, m: float, l: float):
        self.m = float(m)
        self.l = float(l)
        self.U_big = 0.0
        self.U_small = math.inf
        self.beta = 1.0
        self.gamma = ((self.l + 1) / (1 - self.m)) ** (1 / (self.l + self.m))
        self.F0 = -self.F(1.0)
        self.f0 = 1.0

    def f(self, u: float) -> float:
        if u == 0:
            raise ZeroDivisionError("f is singular at u = 0")
        a = abs(u)
        val = a ** self.l - a ** -self.m
        return val if u > 0 else -val

    def F(self, u: float) -> float:
        a = abs(u)
        return a ** (self.l + 1) / (self.l + 1) - a ** (1 - self.m) / (1 - self.m)

    def g1(self, u: float) -> float:
        if u == 0:
            raise ZeroDivisionError("g1 is singular at u = 0")
        return -math.copysign(abs(u) ** -self.m, u)

    def g2(self, u: float) -> float:
        return math.copysign(abs(u) ** self.l, u)

    def f_scaled(self, u: float) -> float:
        val = abs(u) ** (self.l + self.m) - 1.0
        return val if u > 0 else -val


class Weight:
    """Weight K(r) and its transformed counterpart h(t).

    ``h`` is evaluated from K through the change of variables; subclasses may
    override it with a closed form.
    """

    def __init__(self, params: ProblemParams, K: Callable, dK: Callable):
        self.params = params
        self._K = K
        self._dK = dK
        p, N = params.p, params.N
        self._c = ((N - p) / (p - 1)) ** p
        self._rexp = (p - 1) / (p - N)
        self._texp = p * (N - 1) / (p - N)

    def K(self, r: float) -> float:
        return self._K(r)

    def dK(self, r: float) -> float:
        return self._dK(r)

    def h_general(self, t):
        """h(t) = t^(p(N-1)/(p-N)) K(t^((p-1)/(p-N))) / ((N-p)/(p-1))^p."""
        t = np.asarray(t, dtype=float)
        r = t ** self._rexp
        K = np.vectorize(self.K, otypes=[float])(r)
        return t ** self._texp * K / self._c

    def h(self, t: float) -> float:
        r = t ** self._rexp
        return t ** self._texp * self.K(r) / self._c

    def dh(self, t: float) -> float:
        r = t ** self._rexp
        drdt = self._rexp * r / t
        return (self._texp / t * self.K(r) + self.dK(r) * drdt) * t ** self._texp / self._c

    def h_scaled(self, t: float, exponent: float) -> float:
        """t^exponent h(t)."""
        return t ** exponent * self.h(t)


class PowerWeight(Weight):
    """K(r) = K0 r^-alpha, so h(t) = K0 ((p-1)/(N-p))^p t^-alpha_tilde."""

    def __init__(self, params: ProblemParams):
        K0, alpha = params.K0, params.alpha
        super().__init__(params, lambda r: K0 * r ** -alpha,
                         lambda r: -alpha * K0 * r ** (-alpha - 1))
        p, N = params.p, params.N
        self.coef = K0 * ((p - 1) / (N - p)) ** p
        self.alpha_tilde = (p * (N - 1) - alpha * (p - 1)) / (N - p)

    def h(self, t: float) -> float:
        return self.coef * t ** -self.alpha_tilde

    def dh(self, t: float) -> float:
        return -self.alpha_tilde * self.coef * t ** (-self.alpha_tilde - 1)

    def h_scaled(self, t: float, exponent: float) -> float:
        return self.coef * t ** (exponent - self.alpha_tilde)


@dataclass(frozen=True)
class DerivedConstants:
    alpha_tilde: float
    alpha_tilde1: float
    T_end: float
    h0: float
    h1: float
    beta: float
    gamma: float
    F0: float
    f0: float


def derived_constants(params: ProblemParams, nonlinearity: Nonlinearity | None = None,
                      weight: Weight | None = None) -> DerivedConstants:
    p, N = params.p, params.N
    at = (p * (N - 1) - params.alpha * (p - 1)) / (N - p)
    at1 = (p * (N - 1) - params.alpha1 * (p - 1)) / (N - p)
    T = params.T_end
    c = ((p - 1) / (N - p)) ** p
    # h0 t^-at <= h <= h1 t^-at1 follows from the K bounds on (0, T]
    h0 = params.K0 * c
    h1 = params.K1 * c
    if weight is None or isinstance(weight, PowerWeight):
        h1 = params.K0 * c * T ** (at1 - at)
    nl = nonlinearity if nonlinearity is not None else CanonicalNonlinearity(params.m, params.l)
    return DerivedConstants(at, at1, T, h0, h1, nl.beta, nl.gamma, nl.F0, nl.f0)


@dataclass(frozen=True)
class Problem:
    """Validated parameters bundled with f, h and the derived constants."""

    params: ProblemParams
    nonlinearity: Nonlinearity
    weight: Weight
    constants: DerivedConstants

    @property
    def p(self) -> float:
        return self.params.p

    @property
    def m(self) -> float:
        return self.params.m

    @property
    def T_end(self) -> float:
        return self.constants.T_end

    # hot-path shortcuts
    def f(self, u: float) -> float:
        return self.nonlinearity.f(u)

    def F(self, u: float) -> float:
        return self.nonlinearity.F(u)

    def h(self, t: float) -> float:
        return self.weight.h(t)

    def dh(self, t: float) -> float:
        return self.weight.dh(t)

    def energy(self, t, v, q):
        """((p-1)/p)|v'|^p / h + F(v), with |v'|^p = |q|^(p/(p-1))."""
        p = self.params.p
        return (p - 1) / p * abs(q) ** (p / (p - 1)) / self.h(t) + self.F(v)


def make_problem(params: ProblemParams, nonlinearity: Nonlinearity | None = None,
                 weight: Weight | None = None) -> Problem:
    """Validate and assemble a :class:`Problem`; raise on rejection."""
    report = validate_params(params, weight)
    if not report:
        raise InvalidParameters(report)
    if nonlinearity is None:
        nonlinearity = CanonicalNonlinearity(params.m, params.l)
    if weight is None:
        weight = PowerWeight(params)
    return Problem(params, nonlinearity, weight,
                   derived_constants(params, nonlinearity, weight))


def ci1(**overrides) -> ProblemParams:
    """p=3, N=5, m=1/2, l=3, alpha=5.75, R=1: t = 1/r and h(t) = t^-1/4."""
    kw = dict(p=3.0, N=5.0, m=0.5, l=3.0, alpha=5.75, R=1.0, K0=1.0)
    kw.update(overrides)
    return ProblemParams(**kw)


def ci2(**overrides) -> ProblemParams:
    """p=2, N=4, m=1/2, l=3, alpha=5.5, R=1: t = r^-2 and h(t) = t^-1/4 / 4."""
    kw = dict(p=2.0, N=4.0, m=0.5, l=3.0, alpha=5.5, R=1.0, K0=1.0)
    kw.update(overrides)
    return ProblemParams(**kw)
