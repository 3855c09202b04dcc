"""Modulars and Luxemburg norms for the log double phase integrand.

The modular of a nonnegative field g is

    rho(g) = integral of [ g^p(x) + mu(x) g^q(x) log(e + g) ],

split into its power part and its log-weighted part.  The Luxemburg norm
is the unique lambda > 0 with rho(g/lambda) = 1 (0 for g == 0); it is
found by bracketing and a guarded scalar root solve, which is safe
because lambda -> rho(g/lambda) is continuous and strictly decreasing
from +inf to 0.

Gradient fields are piecewise constant, so their modulars are exact;
zero-order modulars of nodal functions use the lumped vertex rule.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .mesh import DiscreteFunction, ExponentField, Mesh, all_gradients
from .phi import E, log_constants

__all__ = [
    "ModularReport",
    "modular_hlog",
    "modular_hlog_nodal",
    "modular_sobolev",
    "modular_var_exp",
    "luxemburg_norm",
    "norm_grad",
    "norm_hlog_nodal",
    "poincare_ratio",
    "sandwich_bounds",
]

MAX_BRACKET_EXPANSIONS = 200


class LuxemburgError(RuntimeError):
    """Raised when the norm bracket/root loop fails to converge."""


@dataclass
class ModularReport:
    p_part: float
    logq_part: float

    @property
    def total(self) -> float:
        return self.p_part + self.logq_part

    def to_dict(self) -> dict:
        return {
            "p_part": self.p_part,
            "logq_part": self.logq_part,
            "total": self.total,
        }


def _split_modular(g, exps: ExponentField, areas) -> ModularReport:
    # Overflow to inf is acceptable: the bracket search only compares with 1.
    with np.errstate(over="ignore"):
        p_part = float(np.sum(areas * g ** exps.p_at))
        logq_part = float(np.sum(areas * exps.mu_at * g ** exps.q_at * np.log(E + g)))
    return ModularReport(p_part, logq_part)


def modular_hlog(g, exps: ExponentField, mesh: Mesh) -> ModularReport:
    """Modular of a per-element nonnegative field (one-point quadrature)."""
    g = np.broadcast_to(np.asarray(g, dtype=float), (mesh.n_elements,))
    if np.any(g < 0):
        raise ValueError("modular argument must be a nonnegative field")
    return _split_modular(g, exps, mesh.areas)


def modular_hlog_nodal(u: DiscreteFunction, exps: ExponentField, mesh: Mesh) -> ModularReport:
    """Modular of |u| for a nodal function, by the vertex rule.

    Each element contributes area/3 * sum over its vertices of the
    integrand at |u(vertex)|, with the element's exponents.
    """
    vals = np.abs(u.values[mesh.elements])  # (m, 3)
    w = mesh.areas / 3.0
    p = exps.p_at[:, None]
    q = exps.q_at[:, None]
    mu = exps.mu_at[:, None]
    with np.errstate(over="ignore"):
        p_part = float(np.sum(w * np.sum(vals ** p, axis=1)))
        logq_part = float(np.sum(w * np.sum(mu * vals ** q * np.log(E + vals), axis=1)))
    return ModularReport(p_part, logq_part)


def modular_sobolev(u: DiscreteFunction, exps: ExponentField, mesh: Mesh) -> ModularReport:
    """Modular of u plus modular of |grad u|."""
    grad = np.linalg.norm(all_gradients(u), axis=1)
    mg = modular_hlog(grad, exps, mesh)
    mu_ = modular_hlog_nodal(u, exps, mesh)
    return ModularReport(mg.p_part + mu_.p_part, mg.logq_part + mu_.logq_part)


def modular_var_exp(g, r, mesh: Mesh) -> float:
    """Variable-exponent modular: sum of area * g^r over elements."""
    g = np.broadcast_to(np.asarray(g, dtype=float), (mesh.n_elements,))
    r = np.broadcast_to(np.asarray(r, dtype=float), (mesh.n_elements,))
    if np.any(g < 0):
        raise ValueError("field must be nonnegative")
    if np.any(r <= 1):
        raise ValueError("exponent must exceed 1")
    return float(np.sum(mesh.areas * g ** r))


def _luxemburg_root(modular_at, rho1: float, p_minus: float, tol: float) -> float:
    """Solve modular_at(lam) = 1 given rho1 = modular_at(1).

    Bracket per the modular/norm sandwich: start around
    max(rho, rho^(1/p_minus)) and expand geometrically by 10 until the
    modular crosses 1, then polish with a bracketed root solve until the
    modular residual is below tol.
    """
    scale = max(rho1, rho1 ** (1.0 / p_minus))
    lo, hi = scale * 1e-2, scale * 1e2
    expansions = 0
    while modular_at(lo) < 1.0:
        lo /= 10.0
        expansions += 1
        if expansions > MAX_BRACKET_EXPANSIONS:
            raise LuxemburgError("no lower bracket for the Luxemburg norm")
    while modular_at(hi) > 1.0:
        hi *= 10.0
        expansions += 1
        if expansions > MAX_BRACKET_EXPANSIONS:
            raise LuxemburgError("no upper bracket for the Luxemburg norm")
    lam = brentq(lambda s: modular_at(s) - 1.0, lo, hi, xtol=1e-300, rtol=8.9e-16)
    if abs(modular_at(lam) - 1.0) > tol:
        raise LuxemburgError("Luxemburg residual above tolerance (pathological field)")
    return float(lam)


def luxemburg_norm(g, exps: ExponentField, mesh: Mesh, tol: float = 1e-10) -> float:
    """Luxemburg norm of a per-element field: rho(g/lambda) = 1."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = np.broadcast_to(np.asarray(g, dtype=float), (mesh.n_elements,))
    if np.any(g < 0):
        raise ValueError("field must be nonnegative")
    rho1 = modular_hlog(g, exps, mesh).total
    if rho1 == 0.0:
        return 0.0
    return _luxemburg_root(
        lambda lam: modular_hlog(g / lam, exps, mesh).total, rho1, exps.p_minus, tol
    )


def norm_grad(u: DiscreteFunction, exps: ExponentField, mesh: Mesh, tol: float = 1e-10) -> float:
    """Equivalent zero-trace norm: Luxemburg norm of |grad u|."""
    grad = np.linalg.norm(all_gradients(u), axis=1)
    return luxemburg_norm(grad, exps, mesh, tol)


def norm_hlog_nodal(u: DiscreteFunction, exps: ExponentField, mesh: Mesh, tol: float = 1e-10) -> float:
    """Luxemburg norm of u itself (vertex-rule modular)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    rho1 = modular_hlog_nodal(u, exps, mesh).total
    if rho1 == 0.0:
        return 0.0
    scaled = u.copy()

    def modular_at(lam):
        scaled.values = u.values / lam
        return modular_hlog_nodal(scaled, exps, mesh).total

    return _luxemburg_root(modular_at, rho1, exps.p_minus, tol)


def poincare_ratio(u: DiscreteFunction, exps: ExponentField, mesh: Mesh, tol: float = 1e-10) -> float:
    """||u|| / ||grad u|| in the Luxemburg norms; diagnostic only.

    Finite for every nonzero zero-trace function (its gradient cannot
    vanish identically); the max over a corpus estimates the constant of
    the norm inequality empirically.
    """
    num = norm_hlog_nodal(u, exps, mesh, tol)
    den = norm_grad(u, exps, mesh, tol)
    if den == 0.0:
        raise ValueError("gradient vanishes; function is not a nonzero zero-trace field")
    return num / den


def sandwich_bounds(lam: float, exps: ExponentField) -> tuple[float, float]:
    """(min, max) of {lam^p_minus, lam^(q_plus + kappa)}.

    The modular of a field with Luxemburg norm lam lies between these.
    """
    kappa = log_constants().kappa
    a = lam ** exps.p_minus
    b = lam ** (exps.q_plus + kappa)
    return (min(a, b), max(a, b))
