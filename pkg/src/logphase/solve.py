"""Root finders and descent schemes for the double phase Dirichlet problem.

Four entry points:

* :func:`solve_fixed_rhs` -- the operator equation A(u) = g for a fixed
  functional g.  The operator is strictly monotone and coercive, so the
  associated energy I(u) - <g, u> is strictly convex and a preconditioned
  descent with Armijo backtracking converges to the unique solution; a
  damped Newton polish then drives the residual to tight tolerances.

* :func:`fibering_root` -- the unique ray parameter t_u > 0 putting t_u u
  on the natural constraint set {<phi'(w), w> = 0}.  The derivative of
  t -> phi(t u) is positive near 0 and negative at infinity under the
  superlinearity assumptions, so geometric bracketing plus a bracketed
  scalar root solve is exact and cheap (the pairing reduces to per-element
  scalars, no reassembly per trial t).

* :func:`solve_constant_sign` -- minimizes phi over the fibering-projected
  positive (or negative) cone by alternating projection, preconditioned
  truncated-gradient descent on the truncated energy, and re-truncation;
  a guarded Newton polish refines the residual.

* :func:`solve_sign_changing` -- same alternation on two-signed iterates:
  nodal split into positive/negative parts, decoupled fibering projection
  of both parts, descent on the full energy, re-split.  Collapse of either
  part triggers a reseeded restart.  The result is checked for exactly one
  positive and one negative nodal component.

The Laplace preconditioner (P1 stiffness on interior nodes, factorized
once per mesh) is the Sobolev-gradient choice; `none` and `diagonal` are
available for experiments.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .energy import (
    DualVector,
    RhsSpec,
    apply_A,
    assemble_hessian,
    energy_I,
    energy_phi,
    energy_phi_pm,
    grad_phi,
    grad_phi_pm,
)
from .mesh import DiscreteFunction, ExponentField, Mesh, all_gradients, nodal_domains, truncate
from .phi import E

__all__ = [
    "SolverConfig",
    "SolverResult",
    "SolverError",
    "solve_fixed_rhs",
    "fibering_root",
    "solve_constant_sign",
    "nehari0_project",
    "solve_sign_changing",
    "poincare_miranda_box_check",
]

FIBER_BRACKET_LO = 1e-8
FIBER_BRACKET_HI = 1e8
FIBER_EXPANSION = 4.0
FIBER_MAX_STEPS = 60


class SolverError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    tol_residual: float = 1e-9
    tol_fiber: float = 1e-11
    max_iters: int = 400
    armijo_c1: float = 1e-4
    armijo_backtrack: float = 0.5
    seed: int = 0
    preconditioner: str = "laplace"

    def __post_init__(self):
        if not 0.0 < self.armijo_c1 < 1.0:
            raise ValueError("armijo_c1 must lie in (0, 1)")
        if not 0.0 < self.armijo_backtrack < 1.0:
            raise ValueError("armijo_backtrack must lie in (0, 1)")
        if self.tol_residual <= 0 or self.tol_fiber <= 0:
            raise ValueError("tolerances must be positive")
        if self.preconditioner not in ("none", "diagonal", "laplace"):
            raise ValueError("preconditioner must be none, diagonal or laplace")


@dataclass
class SolverResult:
    u: DiscreteFunction
    energy: float
    residual: float
    iterations: int
    t_history: list = field(default_factory=list)
    nodal: tuple = (0, 0)
    status: str = "converged"
    phi_trace: list = field(default_factory=list)  # energy after each accepted step

    def summary(self) -> dict:
        return {
            "energy": self.energy,
            "residual": self.residual,
            "iterations": self.iterations,
            "nodal": list(self.nodal),
            "status": self.status,
        }


class _Preconditioner:
    """Applies the inverse of the chosen preconditioner on interior nodes."""

    def __init__(self, mesh: Mesh, kind: str):
        self.kind = kind
        idx = mesh.interior
        if kind == "laplace":
            K = mesh.stiffness[idx][:, idx].tocsc()
            self._solve = spla.factorized(K)
        elif kind == "diagonal":
            d = mesh.stiffness.diagonal()[idx]
            self._solve = lambda r: r / d
        else:
            self._solve = lambda r: r

    def __call__(self, r_interior: np.ndarray) -> np.ndarray:
        return self._solve(r_interior)


_PRECON_CACHE: dict = {}


def _preconditioner(mesh: Mesh, kind: str) -> _Preconditioner:
    key = (id(mesh), kind)
    if key not in _PRECON_CACHE:
        _PRECON_CACHE[key] = _Preconditioner(mesh, kind)
    return _PRECON_CACHE[key]


def _as_dual(g, mesh: Mesh) -> DualVector:
    """Accept a DualVector, nodal source values, or a callable f(x)."""
    if isinstance(g, DualVector):
        dual = DualVector(g.values.copy(), mesh)
    else:
        if callable(g):
            vals = np.asarray(g(mesh.nodes), dtype=float)
        else:
            vals = np.broadcast_to(np.asarray(g, dtype=float), (mesh.n_nodes,)).copy()
        dual = DualVector(mesh.lumped_mass * vals, mesh)
    dual.values[mesh.boundary_mask] = 0.0
    return dual


def solve_fixed_rhs(g, exps: ExponentField, mesh: Mesh, cfg: SolverConfig | None = None,
                    u0: DiscreteFunction | None = None) -> SolverResult:
    """Solve A(u) = g for a u-independent right-hand side.

    Strict monotonicity makes the solution unique; convergence is
    declared when the Euclidean norm of the interior dual residual drops
    below cfg.tol_residual.
    """
    cfg = cfg or SolverConfig()
    precon = _preconditioner(mesh, cfg.preconditioner)
    rhs_dual = _as_dual(g, mesh)
    idx = mesh.interior
    u = u0.copy() if u0 is not None else DiscreteFunction(mesh)

    def objective(vals):
        w = DiscreteFunction(mesh)
        w.values = vals
        return energy_I(w, exps, mesh) - float(rhs_dual.values @ vals)

    def residual_of(vals):
        w = DiscreteFunction(mesh)
        w.values = vals
        return apply_A(w, exps, mesh).values[idx] - rhs_dual.values[idx]

    vals = u.values
    alpha0 = 1.0
    status = "max_iters"
    iters = 0
    res = np.inf
    for iters in range(1, cfg.max_iters + 1):
        r = residual_of(vals)
        res = float(np.linalg.norm(r))
        if res <= cfg.tol_residual:
            status = "converged"
            break
        d = -precon(r)
        slope = float(r @ d)  # negative for a descent direction
        if not np.isfinite(slope) or slope >= 0.0:
            d = -r
            slope = -float(r @ r)
        j0 = objective(vals)
        alpha = alpha0
        accepted = False
        for _ in range(60):
            trial = vals.copy()
            trial[idx] += alpha * d
            if objective(trial) <= j0 + cfg.armijo_c1 * alpha * slope:
                accepted = True
                break
            alpha *= cfg.armijo_backtrack
        if not accepted:
            status = "diverged"
            break
        vals = trial
        alpha0 = min(1.0, alpha / cfg.armijo_backtrack)

    # Newton polish: quadratic local convergence for tight tolerances.
    if status != "diverged":
        vals, res, extra = _newton_polish(
            vals, residual_of, lambda v: _hessian_at(v, exps, mesh, None),
            idx, mesh, cfg.tol_residual,
        )
        iters += extra
        status = "converged" if res <= cfg.tol_residual else status

    u = DiscreteFunction(mesh)
    u.values = vals
    return SolverResult(
        u=u,
        energy=energy_I(u, exps, mesh) - float(rhs_dual.values @ vals),
        residual=res,
        iterations=iters,
        nodal=nodal_domains(u)[:2],
        status=status,
    )


def _hessian_at(vals, exps, mesh, rhs):
    w = DiscreteFunction(mesh)
    w.values = vals
    return assemble_hessian(w, exps, mesh, rhs)


def _newton_polish(vals, residual_of, hessian_of, idx, mesh, tol, max_steps: int = 40):
    """Damped Newton on the residual; only accepts norm-decreasing steps."""
    vals = vals.copy()
    r = residual_of(vals)
    res = float(np.linalg.norm(r))
    steps = 0
    for _ in range(max_steps):
        if res <= tol:
            break
        try:
            H = hessian_of(vals)
            delta = spla.spsolve(H.tocsc(), -r)
        except Exception:
            break
        if not np.all(np.isfinite(delta)):
            break
        improved = False
        alpha = 1.0
        for _ in range(30):
            trial = vals.copy()
            trial[idx] += alpha * delta
            r_trial = residual_of(trial)
            res_trial = float(np.linalg.norm(r_trial))
            if res_trial < res:
                vals, r, res = trial, r_trial, res_trial
                improved = True
                break
            alpha *= 0.5
        steps += 1
        if not improved:
            break
    return vals, res, steps


# ---------------------------------------------------------------------------
# Fibering map machinery
# ---------------------------------------------------------------------------

class _Ray:
    """Caches the per-element and per-node data of t -> phi(t u)."""

    def __init__(self, u: DiscreteFunction, exps: ExponentField, mesh: Mesh, rhs: RhsSpec):
        self.mesh = mesh
        self.exps = exps
        self.rhs = rhs
        self.g = np.linalg.norm(all_gradients(u), axis=1)  # |grad u| per element
        self.uvals = u.values
        self.mass = mesh.lumped_mass

    def dphi(self, t: float) -> float:
        """<phi'(t u), u> evaluated from cached magnitudes."""
        exps, mesh = self.exps, self.mesh
        tg = t * self.g
        bracket = np.log(E + tg) + tg / (exps.q_at * (E + tg))
        a_tg = tg ** (exps.p_at - 1.0) + exps.mu_at * bracket * tg ** (exps.q_at - 1.0)
        op = float(np.sum(mesh.areas * a_tg * self.g))
        fv = self.rhs.f_nodal(mesh, t * self.uvals)
        return op - float(np.sum(self.mass * fv * self.uvals))

    def phi(self, t: float) -> float:
        exps, mesh = self.exps, self.mesh
        tg = t * self.g
        dens = tg ** exps.p_at / exps.p_at + exps.mu_at * (tg ** exps.q_at / exps.q_at) * np.log(E + tg)
        op = float(np.sum(mesh.areas * dens))
        Fv = self.rhs.F_nodal(mesh, t * self.uvals)
        return op - float(np.sum(self.mass * Fv))


def fibering_root(u: DiscreteFunction, exps: ExponentField, mesh: Mesh, rhs: RhsSpec,
                  cfg: SolverConfig | None = None) -> float:
    """Unique t_u > 0 with <phi'(t_u u), u> = 0 along the ray of u.

    Brackets by geometric expansion from t = 1 (factor 4, at most 60
    steps each way, clamped to [1e-8, 1e8]), then solves the bracketed
    scalar root.  The one-sided slope signs theta'(t_u/2) > 0 and
    theta'(2 t_u) < 0 are verified; failure of bracketing or of the sign
    pattern signals an assumption violation for this instance.
    """
    cfg = cfg or SolverConfig()
    if u.sup_norm() == 0.0:
        raise ValueError("fibering_root needs a nonzero function")
    ray = _Ray(u, exps, mesh, rhs)

    t_lo = t_hi = 1.0
    v = ray.dphi(1.0)
    if v > 0.0:
        for _ in range(FIBER_MAX_STEPS):
            t_hi = min(t_hi * FIBER_EXPANSION, FIBER_BRACKET_HI)
            if ray.dphi(t_hi) <= 0.0:
                break
            if t_hi >= FIBER_BRACKET_HI:
                raise SolverError("no fibering sign change up to 1e8 (assumption violation)")
        t_lo = t_hi / FIBER_EXPANSION
    elif v < 0.0:
        for _ in range(FIBER_MAX_STEPS):
            t_lo = max(t_lo / FIBER_EXPANSION, FIBER_BRACKET_LO)
            if ray.dphi(t_lo) >= 0.0:
                break
            if t_lo <= FIBER_BRACKET_LO:
                raise SolverError("no fibering sign change down to 1e-8 (assumption violation)")
        t_hi = t_lo * FIBER_EXPANSION

    if t_lo == t_hi:  # derivative exactly zero at t = 1
        t_u = 1.0
    else:
        t_u = float(brentq(ray.dphi, t_lo, t_hi, xtol=1e-14, rtol=8.9e-16))

    scale = 1.0 + abs(ray.phi(t_u))
    if abs(ray.dphi(t_u)) > cfg.tol_fiber * scale:
        raise SolverError("fibering residual above tolerance")
    if not (ray.dphi(0.5 * t_u) > 0.0 and ray.dphi(2.0 * t_u) < 0.0):
        raise SolverError("fibering map is not single-crossing at the located root")
    return t_u


# ---------------------------------------------------------------------------
# Nehari projection for two-signed data
# ---------------------------------------------------------------------------

def _supports_element_disjoint(u_plus, u_minus, mesh: Mesh) -> bool:
    on_p = (u_plus.values[mesh.elements] > 0.0).any(axis=1)
    on_m = (u_minus.values[mesh.elements] < 0.0).any(axis=1)
    return not bool(np.any(on_p & on_m))


def poincare_miranda_box_check(H, rect, n_samples: int = 9) -> bool:
    """Componentwise sign pattern of H on the boundary of a rectangle.

    Checks H_1 > 0 on the left edge and < 0 on the right edge, H_2 > 0 on
    the bottom edge and < 0 on the top edge -- the hypothesis under which
    a continuous H has a zero inside the box.
    """
    (s_lo, s_hi), (t_lo, t_hi) = rect
    ss = np.linspace(s_lo, s_hi, n_samples)
    ts = np.linspace(t_lo, t_hi, n_samples)
    for t in ts:
        if not (H(s_lo, t)[0] > 0.0 > H(s_hi, t)[0]):
            return False
    for s in ss:
        if not (H(s, t_lo)[1] > 0.0 > H(s, t_hi)[1]):
            return False
    return True


def nehari0_project(u_plus: DiscreteFunction, u_minus: DiscreteFunction,
                    exps: ExponentField, mesh: Mesh, rhs: RhsSpec,
                    cfg: SolverConfig | None = None) -> tuple[float, float]:
    """Scaling pair (s, t) putting s u_plus and t u_minus on the constraint set.

    When the supports are disjoint at element granularity the two pairing
    conditions decouple into independent fibering roots.  Overlapping
    supports fall back to a rectangle search: nested bisection of the
    coupled pairings inside a box whose boundary exhibits the
    intermediate-value sign pattern.
    """
    cfg = cfg or SolverConfig()
    if u_plus.sup_norm() == 0.0 or np.any(u_plus.values < 0.0):
        raise ValueError("u_plus must be nonnegative and nonzero")
    if u_minus.sup_norm() == 0.0 or np.any(u_minus.values > 0.0):
        raise ValueError("u_minus must be nonpositive and nonzero")

    if _supports_element_disjoint(u_plus, u_minus, mesh):
        return (
            fibering_root(u_plus, exps, mesh, rhs, cfg),
            fibering_root(u_minus, exps, mesh, rhs, cfg),
        )

    # Coupled rectangle search.  D1/D2 are the pairings of the combined
    # iterate against each part; each is a decreasing function of its own
    # scale for fixed other scale near the solution.
    def combined(s, t):
        w = DiscreteFunction(mesh)
        w.values = s * u_plus.values + t * u_minus.values
        return grad_phi(w, exps, mesh, rhs)

    def D(s, t):
        d = combined(s, t)
        return np.array([d.pair(u_plus) * s, d.pair(u_minus) * t])

    def inner_root(t):
        def f(s):
            return D(s, t)[0]

        lo = hi = 1.0
        if f(1.0) > 0:
            for _ in range(FIBER_MAX_STEPS):
                hi = min(hi * FIBER_EXPANSION, FIBER_BRACKET_HI)
                if f(hi) <= 0:
                    break
            lo = hi / FIBER_EXPANSION
        else:
            for _ in range(FIBER_MAX_STEPS):
                lo = max(lo / FIBER_EXPANSION, FIBER_BRACKET_LO)
                if f(lo) >= 0:
                    break
            hi = lo * FIBER_EXPANSION
        return float(brentq(f, lo, hi, xtol=1e-13, rtol=8.9e-16))

    def outer(t):
        return D(inner_root(t), t)[1]

    lo = hi = 1.0
    if outer(1.0) > 0:
        for _ in range(FIBER_MAX_STEPS):
            hi = min(hi * FIBER_EXPANSION, FIBER_BRACKET_HI)
            if outer(hi) <= 0:
                break
        lo = hi / FIBER_EXPANSION
    else:
        for _ in range(FIBER_MAX_STEPS):
            lo = max(lo / FIBER_EXPANSION, FIBER_BRACKET_LO)
            if outer(lo) >= 0:
                break
        hi = lo * FIBER_EXPANSION
    t_star = float(brentq(outer, lo, hi, xtol=1e-13, rtol=8.9e-16))
    return inner_root(t_star), t_star


# ---------------------------------------------------------------------------
# Constant-sign solver
# ---------------------------------------------------------------------------

def _default_bump(mesh: Mesh, sign: str) -> DiscreteFunction:
    xs, ys = mesh.nodes[:, 0], mesh.nodes[:, 1]
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    bump = np.sin(np.pi * (xs - x0) / (x1 - x0)) * np.sin(np.pi * (ys - y0) / (y1 - y0))
    return DiscreteFunction(mesh, bump if sign == "+" else -bump)


def solve_constant_sign(sign: str, exps: ExponentField, mesh: Mesh, rhs: RhsSpec,
                        cfg: SolverConfig | None = None,
                        u0: DiscreteFunction | None = None) -> SolverResult:
    """Nontrivial solution of the requested sign via Nehari descent.

    Alternates (a) fibering projection of the cone iterate, (b) one
    Armijo step of preconditioned descent on the truncated energy, (c)
    re-truncation to the cone, then polishes with damped Newton on the
    full residual.  Raises SolverError if the iterate collapses to zero
    (small-ball geometry failure for the instance).
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    cfg = cfg or SolverConfig()
    precon = _preconditioner(mesh, cfg.preconditioner)
    idx = mesh.interior

    u = (u0.copy() if u0 is not None else _default_bump(mesh, sign))
    u = truncate(u, sign)
    if sign == "-":
        u.values = -u.values
    if u.sup_norm() == 0.0:
        raise SolverError("initial iterate collapsed to zero in the requested cone")

    t_history: list[float] = []

    def project(w: DiscreteFunction) -> tuple[DiscreteFunction, float]:
        t_w = fibering_root(w, exps, mesh, rhs, cfg)
        out = DiscreteFunction(mesh)
        out.values = t_w * w.values
        return out, t_w

    u, t_w = project(u)
    t_history.append(t_w)
    phi_now = energy_phi_pm(u, exps, mesh, rhs, sign)
    phi_trace = [phi_now]
    status = "max_iters"
    iters = 0
    res = np.inf
    descent_budget = cfg.max_iters
    switch = max(cfg.tol_residual, 1e-4 * (1.0 + abs(phi_now)))

    for iters in range(1, descent_budget + 1):
        r_full = grad_phi_pm(u, exps, mesh, rhs, sign).values[idx]
        res = float(np.linalg.norm(r_full))
        if res <= switch:
            break
        d = -precon(r_full)
        slope = float(r_full @ d)
        if slope >= 0.0:
            d, slope = -r_full, -float(r_full @ r_full)
        alpha = 1.0
        moved = False
        for _ in range(50):
            trial = u.copy()
            trial.values[idx] += alpha * d
            trial = truncate(trial, sign)
            if sign == "-":
                trial.values = -trial.values
            if trial.sup_norm() == 0.0:
                alpha *= cfg.armijo_backtrack
                continue
            try:
                trial_p, t_w = project(trial)
            except SolverError:
                alpha *= cfg.armijo_backtrack
                continue
            phi_trial = energy_phi_pm(trial_p, exps, mesh, rhs, sign)
            if phi_trial <= phi_now + cfg.armijo_c1 * alpha * slope:
                u, phi_now = trial_p, phi_trial
                t_history.append(t_w)
                phi_trace.append(phi_now)
                moved = True
                break
            alpha *= cfg.armijo_backtrack
        if not moved:
            break  # stationary on the projected cone at this resolution

    if u.sup_norm() == 0.0:
        raise SolverError("iterate collapsed to zero (no small-ball geometry)")

    def residual_of(vals):
        w = DiscreteFunction(mesh)
        w.values = vals
        return grad_phi(w, exps, mesh, rhs).values[idx]

    vals, res, extra = _newton_polish(
        u.values, residual_of, lambda v: _hessian_at(v, exps, mesh, rhs),
        idx, mesh, cfg.tol_residual,
    )
    u = DiscreteFunction(mesh)
    u.values = vals
    iters += extra
    status = "converged" if res <= cfg.tol_residual else status

    wrong = np.max(np.maximum(-u.values if sign == "+" else u.values, 0.0))
    if wrong > 1e-8 * max(u.sup_norm(), 1e-300):
        status = "diverged"

    return SolverResult(
        u=u,
        energy=energy_phi(u, exps, mesh, rhs),
        residual=res,
        iterations=iters,
        t_history=t_history,
        nodal=nodal_domains(u)[:2],
        status=status,
        phi_trace=phi_trace,
    )


# ---------------------------------------------------------------------------
# Sign-changing solver
# ---------------------------------------------------------------------------

def _two_bump(mesh: Mesh, amplitude: float = 1.0, swirl: float = 0.0) -> DiscreteFunction:
    """Positive bump on the left half, negative on the right."""
    xs, ys = mesh.nodes[:, 0], mesh.nodes[:, 1]
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    sx = (xs - x0) / (x1 - x0)
    sy = (ys - y0) / (y1 - y0)
    vals = amplitude * np.sin(2.0 * np.pi * sx) * np.sin(np.pi * sy)
    if swirl != 0.0:
        vals += swirl * np.sin(np.pi * sx) * np.sin(2.0 * np.pi * sy)
    return DiscreteFunction(mesh, vals)


def solve_sign_changing(exps: ExponentField, mesh: Mesh, rhs: RhsSpec,
                        cfg: SolverConfig | None = None,
                        u0: DiscreteFunction | None = None) -> SolverResult:
    """Sign-changing solution via projected descent on two-signed iterates.

    Each sweep splits the iterate at node granularity, projects both
    parts onto the constraint set by decoupled fibering roots, and takes
    an Armijo step of preconditioned descent on the full energy; a damped
    Newton polish follows.  If either part degenerates to zero the solve
    restarts from a rescaled two-bump seed (up to 3 times).
    """
    cfg = cfg or SolverConfig()
    rng = np.random.default_rng(cfg.seed)
    precon = _preconditioner(mesh, cfg.preconditioner)
    idx = mesh.interior

    seeds = [u0.copy() if u0 is not None else _two_bump(mesh)]
    for k in range(3):
        seeds.append(_two_bump(mesh, amplitude=1.0 + 0.5 * k, swirl=0.1 * rng.standard_normal()))

    last_error = None
    for attempt, seed in enumerate(seeds):
        try:
            return _sign_changing_attempt(seed, exps, mesh, rhs, cfg, precon, idx)
        except SolverError as err:
            last_error = err
    raise SolverError(f"all restarts degenerated: {last_error}")


def _split(w: DiscreteFunction):
    plus = truncate(w, "+")
    minus = truncate(w, "-")
    minus.values = -minus.values  # the nonpositive part itself
    return plus, minus


def _project_parts(w, exps, mesh, rhs, cfg, t_history):
    plus, minus = _split(w)
    if plus.sup_norm() == 0.0 or minus.sup_norm() == 0.0:
        raise SolverError("a signed part degenerated to zero")
    s, t = nehari0_project(plus, minus, exps, mesh, rhs, cfg)
    t_history.extend([s, t])
    out = DiscreteFunction(mesh)
    out.values = s * plus.values + t * minus.values
    return out


def _sign_changing_attempt(w, exps, mesh, rhs, cfg, precon, idx) -> SolverResult:
    t_history: list[float] = []
    w = _project_parts(w, exps, mesh, rhs, cfg, t_history)
    phi_now = energy_phi(w, exps, mesh, rhs)
    phi_trace = [phi_now]
    status = "max_iters"
    res = np.inf
    iters = 0
    switch = max(cfg.tol_residual, 1e-4 * (1.0 + abs(phi_now)))

    for iters in range(1, cfg.max_iters + 1):
        r = grad_phi(w, exps, mesh, rhs).values[idx]
        res = float(np.linalg.norm(r))
        if res <= switch:
            break
        d = -precon(r)
        slope = float(r @ d)
        if slope >= 0.0:
            d, slope = -r, -float(r @ r)
        alpha = 1.0
        moved = False
        for _ in range(50):
            trial = w.copy()
            trial.values[idx] += alpha * d
            try:
                trial = _project_parts(trial, exps, mesh, rhs, cfg, t_history)
            except SolverError:
                alpha *= cfg.armijo_backtrack
                continue
            phi_trial = energy_phi(trial, exps, mesh, rhs)
            if phi_trial <= phi_now + cfg.armijo_c1 * alpha * slope:
                w, phi_now = trial, phi_trial
                phi_trace.append(phi_now)
                moved = True
                break
            alpha *= cfg.armijo_backtrack
        if not moved:
            break

    def residual_of(vals):
        v = DiscreteFunction(mesh)
        v.values = vals
        return grad_phi(v, exps, mesh, rhs).values[idx]

    vals, res, extra = _newton_polish(
        w.values, residual_of, lambda v: _hessian_at(v, exps, mesh, rhs),
        idx, mesh, cfg.tol_residual,
    )
    w = DiscreteFunction(mesh)
    w.values = vals
    iters += extra

    plus, minus = _split(w)
    if plus.sup_norm() == 0.0 or minus.sup_norm() == 0.0:
        raise SolverError("converged iterate lost a signed part")
    status = "converged" if res <= cfg.tol_residual else status

    return SolverResult(
        u=w,
        energy=energy_phi(w, exps, mesh, rhs),
        residual=res,
        iterations=iters,
        t_history=t_history,
        nodal=nodal_domains(w)[:2],
        status=status,
        phi_trace=phi_trace,
    )
