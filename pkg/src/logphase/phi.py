"""Scalar kernels of the log-weighted double phase integrand.

The integrand is

    Phi(t) = t^p + mu * t^q * log(e + t),        t >= 0,

with 1 < p <= q and weight mu >= 0.  Everything downstream (modulars,
energies, operator assembly) reduces to pointwise evaluations of Phi, of
the density

    a(t) = t^(p-1) + mu * [log(e + t) + t / (q (e + t))] * t^(q-1),

which is the t-derivative of the per-exponent-normalized primitive
t^p/p + mu (t^q/q) log(e + t), and of a handful of sharp scalar
inequalities that this module exposes as checkable gap functions.

Two constants govern the log factor: t0, the unique positive solution of
t = e log(e + t), and kappa = e / (e + t0).  The map t^eps / log(e + t)
is increasing exactly for eps >= kappa; below kappa it is only almost
increasing, with a ratio constant computed here on demand.

All functions broadcast over numpy arrays and are pure; module state is
limited to a cached copy of the constants.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

E = math.e

__all__ = [
    "PhiParams",
    "LogConstants",
    "compute_log_constants",
    "log_constants",
    "hlog_eval",
    "hlog_primitive",
    "hlog_density",
    "hlog_density_dt",
    "hlog_field",
    "hlog_primitive_field",
    "hlog_density_field",
    "hlog_density_dt_field",
    "f_epsilon",
    "g_log",
    "f_epsilon_critical_points",
    "f_epsilon_almost_increasing_constant",
    "young_log_gap",
    "monotone_gap",
    "quotient_frac_log_max",
    "log_growth_check",
]


@dataclass(frozen=True)
class PhiParams:
    """Pointwise exponent data (p, q, mu) with 1 < p <= q, mu >= 0."""

    p: float
    q: float
    mu: float

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"p must be > 1, got {self.p}")
        if not self.q >= self.p:
            raise ValueError(f"q must be >= p, got q={self.q} < p={self.p}")
        if not self.mu >= 0.0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")


@dataclass(frozen=True)
class LogConstants:
    """t0 solves t = e log(e + t); kappa = e / (e + t0)."""

    t0: float
    kappa: float


def compute_log_constants(tol: float = 1e-12) -> LogConstants:
    """Root-find t0 and derive kappa.

    Bisection on h(t) = e log(e+t) - t over [1, 10] (h is strictly
    decreasing with h(1) > 0 > h(10)), switching to Newton once the
    bracket is below 1e-3.  The returned t0 satisfies
    |e log(e+t0) - t0| <= tol.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")

    def h(t):
        return E * math.log(E + t) - t

    lo, hi = 1.0, 10.0
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    # Newton polish: h'(t) = e/(e+t) - 1 < 0 on the bracket.
    for _ in range(100):
        r = h(t)
        if abs(r) <= tol:
            break
        t -= r / (E / (E + t) - 1.0)
    return LogConstants(t0=t, kappa=E / (E + t))


@lru_cache(maxsize=None)
def _cached_constants(tol: float) -> LogConstants:
    return compute_log_constants(tol)


def log_constants() -> LogConstants:
    """Shared copy of the constants at default tolerance."""
    return _cached_constants(1e-12)


# ---------------------------------------------------------------------------
# Integrand, primitive, density
# ---------------------------------------------------------------------------

def hlog_field(t, p, q, mu):
    """Phi(t) = t^p + mu t^q log(e+t) with array exponents; t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("integrand argument must be nonnegative")
    return t ** p + mu * t ** q * np.log(E + t)


def hlog_primitive_field(t, p, q, mu):
    """Energy integrand t^p/p + mu (t^q/q) log(e+t); t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("integrand argument must be nonnegative")
    return t ** p / p + mu * (t ** q / q) * np.log(E + t)


def hlog_density_field(t, p, q, mu):
    """a(t) = t^(p-1) + mu [log(e+t) + t/(q(e+t))] t^(q-1); t >= 0.

    a(0) = 0 since p > 1; a is strictly increasing on [0, inf).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("density argument must be nonnegative")
    bracket = np.log(E + t) + t / (q * (E + t))
    return t ** (p - 1.0) + mu * bracket * t ** (q - 1.0)


def hlog_density_dt_field(t, p, q, mu):
    """Derivative of the density; positive for t > 0 (strict convexity).

    Singular at t = 0 when p < 2; the caller regularizes, we raise.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("density derivative needs t > 0 (singular at 0 for p < 2)")
    log_term = np.log(E + t)
    qpart = (q - 1.0) * log_term + 2.0 * t / (E + t) - t ** 2 / (q * (E + t) ** 2)
    return (p - 1.0) * t ** (p - 2.0) + mu * t ** (q - 2.0) * qpart


def hlog_eval(params: PhiParams, t):
    return hlog_field(t, params.p, params.q, params.mu)


def hlog_primitive(params: PhiParams, t):
    return hlog_primitive_field(t, params.p, params.q, params.mu)


def hlog_density(params: PhiParams, t):
    return hlog_density_field(t, params.p, params.q, params.mu)


def hlog_density_dt(params: PhiParams, t):
    return hlog_density_dt_field(t, params.p, params.q, params.mu)


# ---------------------------------------------------------------------------
# The power/log ratio and its almost-increasing constant
# ---------------------------------------------------------------------------

def f_epsilon(eps, t):
    """t^eps / log(e + t) for eps > 0, t > 0.

    Increasing in t for eps >= kappa; for 0 < eps < kappa it has a local
    max at t_{1,eps} and a local min at t_{2,eps} (see
    f_epsilon_critical_points) and is only almost increasing.
    """
    eps = np.asarray(eps, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(eps <= 0) or np.any(t <= 0):
        raise ValueError("f_epsilon needs eps > 0 and t > 0")
    return t ** eps / np.log(E + t)


def g_log(t):
    """g(t) = t / ((e+t) log(e+t)); unimodal with max kappa at t0."""
    t = np.asarray(t, dtype=float)
    return t / ((E + t) * np.log(E + t))


def f_epsilon_critical_points(eps: float) -> tuple[float, float]:
    """Roots t1 < t0 < t2 of g(t) = eps for 0 < eps < kappa.

    t1 is the local max of f_eps, t2 the local min.  Brackets: g rises
    from 0 on (0, t0], falls to 0 on [t0, inf).
    """
    c = log_constants()
    if not 0.0 < eps < c.kappa:
        raise ValueError(f"eps must lie in (0, kappa={c.kappa:.5f}), got {eps}")

    def fn(t):
        return float(g_log(t)) - eps

    lo = 1e-9
    while fn(lo) > 0:  # g(lo) above eps means the bracket start is too big
        lo *= 0.5
    t1 = brentq(fn, lo, c.t0, xtol=1e-14, rtol=8.9e-16)
    hi = 2.0 * c.t0
    while fn(hi) > 0:
        hi *= 4.0
    t2 = brentq(fn, c.t0, hi, xtol=1e-13, rtol=8.9e-16)
    return t1, t2


def f_epsilon_almost_increasing_constant(eps: float) -> float:
    """a_eps = f_eps(t1)/f_eps(t2) >= 1, the almost-increasing ratio."""
    c = log_constants()
    if eps >= c.kappa:
        return 1.0
    t1, t2 = f_epsilon_critical_points(eps)
    return float(f_epsilon(eps, t1) / f_epsilon(eps, t2))


# ---------------------------------------------------------------------------
# Inequality gaps (contract: nonnegative everywhere on their domain)
# ---------------------------------------------------------------------------

def young_log_gap(s, t, r):
    """RHS - LHS of the power-log Young inequality; always >= 0.

        s t^(r-1) [log(e+t) + t/(r(e+t))]
            <= s^r/r log(e+s) + t^r [(r-1)/r log(e+t) + t/(r(e+t))]

    Equality at s = t.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("young_log_gap needs s, t >= 0")
    if np.any(r <= 1):
        raise ValueError("young_log_gap needs r > 1")
    log_t = np.log(E + t)
    corr = t / (r * (E + t))
    lhs = s * t ** (r - 1.0) * (log_t + corr)
    rhs = s ** r / r * np.log(E + s) + t ** r * ((r - 1.0) / r * log_t + corr)
    return rhs - lhs


def _radial_term(v, r, h):
    """h(|v|) |v|^(r-2) v with the 0-limit at v = 0 (valid since r > 1)."""
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = h(norm) * norm ** (r - 2.0)
    coef = np.where(norm > 0.0, coef, 0.0)
    return coef * v


def monotone_gap(xi, eta, r, h=lambda t: np.ones_like(t)):
    """LHS - C_r * RHS of the vector monotonicity inequality; >= 0.

    For r >= 2 (C_r = min(2^(2-r), 1/2)):

        (h(|xi|)|xi|^(r-2) xi - h(|eta|)|eta|^(r-2) eta) . (xi - eta)
            >= C_r |xi - eta|^r h(m),       m = min(|xi|, |eta|),

    and for 1 < r < 2 (C_r = r - 1) the (|xi|+|eta|)^(2-r)-weighted form

        (|xi|+|eta|)^(2-r) (...) . (xi - eta) >= C_r |xi - eta|^2 h(m).

    h must be increasing with h(0) >= 0.  Inputs broadcast over leading
    axes; the last axis is the vector dimension.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    r = float(r)
    if r <= 1.0:
        raise ValueError("monotone_gap needs r > 1")
    nxi = np.linalg.norm(xi, axis=-1)
    neta = np.linalg.norm(eta, axis=-1)
    m = np.minimum(nxi, neta)
    diff = xi - eta
    ndiff = np.linalg.norm(diff, axis=-1)
    dot = np.sum((_radial_term(xi, r, h) - _radial_term(eta, r, h)) * diff, axis=-1)
    hm = h(m)
    if r >= 2.0:
        cr = min(2.0 ** (2.0 - r), 0.5)
        gap = dot - cr * ndiff ** r * hm
    else:
        cr = r - 1.0
        gap = (nxi + neta) ** (2.0 - r) * dot - cr * ndiff ** 2 * hm
    return gap[0] if gap.shape == (1,) else gap


def quotient_frac_log_max(Q: float) -> tuple[float, float]:
    """Argmax and max of t -> t / (Q (e+t) log(e+t)) over t > 0.

    The maximum sits at t0 with value kappa/Q.
    """
    if not Q > 1.0:
        raise ValueError("Q must be > 1")
    c = log_constants()
    return c.t0, c.kappa / Q


def log_growth_check(x, y, C=1.0, q=1.0, rtol: float = 1e-12) -> bool:
    """True iff the elementary log growth bounds hold at these arguments.

    Product forms (x, y >= 0, C >= 1):
        log(e + x y) <= log(e + x) + log(e + y)
        log(e + C x) <= C log(e + x)
    Sum form (q >= 1, s = x, t = y):
        (s+t)^q log(e+s+t) <= 2^(q+1) [s^q log(e+s) + t^q log(e+t)]

    They hold identically; rtol absorbs round-off.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0) or np.any(np.asarray(C) < 1) or np.any(np.asarray(q) < 1):
        raise ValueError("log_growth_check needs x, y >= 0, C >= 1, q >= 1")
    lp = np.log(E + x * y)
    rp = np.log(E + x) + np.log(E + y)
    ok_prod = np.all(lp <= rp + rtol * np.maximum(lp, rp))
    lc = np.log(E + C * x)
    rc = C * np.log(E + x)
    ok_scale = np.all(lc <= rc + rtol * np.maximum(lc, rc))
    s, t = x, y
    ls = (s + t) ** q * np.log(E + s + t)
    rs = 2.0 ** (q + 1.0) * (s ** q * np.log(E + s) + t ** q * np.log(E + t))
    ok_sum = np.all(ls <= rs + rtol * np.maximum(ls, rs))
    return bool(ok_prod and ok_scale and ok_sum)
