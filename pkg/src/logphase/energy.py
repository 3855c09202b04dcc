"""Energy functional, weak-form operator, and right-hand-side library.

The gradient energy of a discrete function u is

    I(u) = sum_e area_e * [ g^p/p + mu (g^q/q) log(e + g) ],   g = |grad u|_e,

and its exact discrete gradient with respect to interior nodal values is
the operator pairing

    <A(u), v> = sum_e area_e * dens(g) grad_u . grad_v,
    dens(g)   = g^(p-2) + mu [log(e+g) + g/(q(e+g))] g^(q-2),

assembled elementwise with the convention that zero-gradient elements
contribute exactly zero (the flux magnitude g^(p-1) vanishes even when
p < 2 makes dens blow up).  The full energy phi subtracts the primitive
term integral of F(x, u) under the lumped vertex rule, which keeps kinks
of f in t away from element interiors.

Right-hand sides are :class:`RhsSpec` objects; ``builtin_rhs`` provides
the superlinear instance catalog and ``validate_assumptions`` reports
which structural and growth conditions an instance satisfies on sampled
grids.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import DiscreteFunction, ExponentField, Mesh, all_gradients
from .modular import norm_grad
from .phi import E, log_constants

__all__ = [
    "RhsSpec",
    "DualVector",
    "energy_I",
    "apply_A",
    "energy_phi",
    "grad_phi",
    "energy_phi_pm",
    "grad_phi_pm",
    "builtin_rhs",
    "validate_assumptions",
    "residual_norms",
    "assemble_hessian",
]

# Floor on |grad u| used only inside second-derivative (Hessian) assembly;
# residuals are always assembled with the exact zero-gradient limit.
EPS_REG = 1e-10


@dataclass
class DualVector:
    """Coefficients of a functional against nodal test functions.

    Entries at Dirichlet nodes are kept at zero; pairings run over the
    interior because test functions have zero trace.
    """

    values: np.ndarray
    mesh: Mesh

    def pair(self, v) -> float:
        vv = v.values if isinstance(v, DiscreteFunction) else np.asarray(v)
        return float(self.values @ vv)

    def interior(self) -> np.ndarray:
        return self.values[self.mesh.interior]

    def euclidean_norm(self) -> float:
        return float(np.linalg.norm(self.interior()))

    def __sub__(self, other):
        return DualVector(self.values - other.values, self.mesh)


@dataclass
class RhsSpec:
    """Right-hand side f(x, t) with primitive F(x, t), F(x, 0) = 0.

    f and F are vectorized: (points (k, 2), values (k,)) -> (k,).
    r_minus/r_plus bound the growth exponent; flags record which of the
    structural conditions the instance claims.
    """

    name: str
    f: callable
    F: callable
    r_minus: float
    r_plus: float
    flags: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def f_nodal(self, mesh: Mesh, values: np.ndarray) -> np.ndarray:
        return np.asarray(self.f(mesh.nodes, values), dtype=float)

    def F_nodal(self, mesh: Mesh, values: np.ndarray) -> np.ndarray:
        return np.asarray(self.F(mesh.nodes, values), dtype=float)


# ---------------------------------------------------------------------------
# Energies and their exact discrete gradients
# ---------------------------------------------------------------------------

def _gradient_magnitudes(u: DiscreteFunction):
    grads = all_gradients(u)
    return grads, np.linalg.norm(grads, axis=1)


def energy_I(u: DiscreteFunction, exps: ExponentField, mesh: Mesh) -> float:
    """Gradient energy; zero iff u == 0."""
    _, g = _gradient_magnitudes(u)
    dens = g ** exps.p_at / exps.p_at + exps.mu_at * (g ** exps.q_at / exps.q_at) * np.log(E + g)
    return float(np.sum(mesh.areas * dens))


def _flux_coefficient(g, exps: ExponentField):
    """dens(g) with the exact zero limit on zero-gradient elements."""
    pos = g > 0.0
    coef = np.zeros_like(g)
    if np.any(pos):
        gp = g[pos]
        p, q, mu = exps.p_at[pos], exps.q_at[pos], exps.mu_at[pos]
        bracket = np.log(E + gp) + gp / (q * (E + gp))
        coef[pos] = gp ** (p - 2.0) + mu * bracket * gp ** (q - 2.0)
    return coef


def apply_A(u: DiscreteFunction, exps: ExponentField, mesh: Mesh) -> DualVector:
    """Weak form of the operator: the exact gradient of energy_I."""
    grads, g = _gradient_magnitudes(u)
    coef = _flux_coefficient(g, exps)
    flux = (mesh.areas * coef)[:, None] * grads  # (m, 2), area-weighted
    dual = mesh.grad_operator.T @ flux.ravel()
    dual[mesh.boundary_mask] = 0.0
    return DualVector(dual, mesh)


def energy_phi(u: DiscreteFunction, exps: ExponentField, mesh: Mesh, rhs: RhsSpec) -> float:
    """Full energy: I(u) - integral of F(x, u) (vertex rule)."""
    fterm = float(mesh.lumped_mass @ rhs.F_nodal(mesh, u.values))
    return energy_I(u, exps, mesh) - fterm


def grad_phi(u: DiscreteFunction, exps: ExponentField, mesh: Mesh, rhs: RhsSpec) -> DualVector:
    """Exact discrete gradient of energy_phi."""
    dual = apply_A(u, exps, mesh)
    fvals = mesh.lumped_mass * rhs.f_nodal(mesh, u.values)
    fvals[mesh.boundary_mask] = 0.0
    dual.values = dual.values - fvals
    return dual


def _signed_part(values: np.ndarray, sign: str) -> np.ndarray:
    """+u^+ or -u^- of the nodal values (the argument fed to F)."""
    if sign == "+":
        return np.maximum(values, 0.0)
    if sign == "-":
        return np.minimum(values, 0.0)
    raise ValueError("sign must be '+' or '-'")


def energy_phi_pm(u, exps, mesh, rhs: RhsSpec, sign: str) -> float:
    """Truncated energy: F sees only the requested signed part of u.

    Coincides with energy_phi whenever u already has the requested sign.
    """
    part = _signed_part(u.values, sign)
    fterm = float(mesh.lumped_mass @ rhs.F_nodal(mesh, part))
    return energy_I(u, exps, mesh) - fterm


def grad_phi_pm(u, exps, mesh, rhs: RhsSpec, sign: str) -> DualVector:
    """Gradient of the truncated energy.

    d/du_i F(x_i, part(u_i)) = f(x_i, part(u_i)) * 1{part active}, and
    f(x, 0) = 0 keeps the kink at u_i = 0 harmless.
    """
    dual = apply_A(u, exps, mesh)
    part = _signed_part(u.values, sign)
    active = (u.values > 0.0) if sign == "+" else (u.values < 0.0)
    fvals = mesh.lumped_mass * rhs.f_nodal(mesh, part) * active
    fvals[mesh.boundary_mask] = 0.0
    dual.values = dual.values - fvals
    return dual


def assemble_hessian(u, exps, mesh, rhs: RhsSpec | None = None) -> sp.csr_matrix:
    """Second derivative of phi at u on interior nodes, regularized.

    Element blocks: G_e^T [ (a(g)/g) (Id - n n^T) + a'(g) n n^T ] G_e
    with g floored at EPS_REG (the residual is never regularized, only
    this matrix).  The F-term contributes -m_i f_t(x_i, u_i) on the
    diagonal, with f_t by central differences.
    """
    grads, g = _gradient_magnitudes(u)
    greg = np.maximum(g, EPS_REG)
    p, q, mu = exps.p_at, exps.q_at, exps.mu_at
    bracket = np.log(E + greg) + greg / (q * (E + greg))
    a_over_g = greg ** (p - 2.0) + mu * bracket * greg ** (q - 2.0)
    log_term = np.log(E + greg)
    qpart = (q - 1.0) * log_term + 2.0 * greg / (E + greg) - greg ** 2 / (q * (E + greg) ** 2)
    a_prime = (p - 1.0) * greg ** (p - 2.0) + mu * greg ** (q - 2.0) * qpart

    n_vec = grads / greg[:, None]
    m = mesh.n_elements
    # 2x2 tensor per element: a/g * Id + (a' - a/g) * n n^T
    tensor = np.zeros((m, 2, 2))
    tensor[:, 0, 0] = a_over_g
    tensor[:, 1, 1] = a_over_g
    anis = (a_prime - a_over_g)[:, None, None] * (n_vec[:, :, None] * n_vec[:, None, :])
    tensor += anis
    tensor *= mesh.areas[:, None, None]

    blocks = np.einsum("eki,ekl,elj->eij", mesh.grad_maps, tensor, mesh.grad_maps)
    rows = np.repeat(mesh.elements, 3, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 3)).ravel()
    H = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()

    if rhs is not None:
        h = 1e-6 * (1.0 + np.abs(u.values))
        ft = (rhs.f_nodal(mesh, u.values + h) - rhs.f_nodal(mesh, u.values - h)) / (2.0 * h)
        H = H - sp.diags(mesh.lumped_mass * ft)

    idx = mesh.interior
    return H[idx][:, idx].tocsr()


def residual_norms(dual: DualVector, exps, mesh, probes=None) -> tuple[float, float]:
    """(Euclidean interior norm, probe-set dual-norm estimate).

    The dual estimate is sup <dual, v>/||v|| over a fixed probe set of
    smooth modes (plus the residual itself), a desk-scale surrogate for
    the true dual norm.
    """
    eucl = dual.euclidean_norm()
    if probes is None:
        xs, ys = mesh.nodes[:, 0], mesh.nodes[:, 1]
        x0, x1 = xs.min(), xs.max()
        y0, y1 = ys.min(), ys.max()
        sx = (xs - x0) / (x1 - x0)
        sy = (ys - y0) / (y1 - y0)
        probes = [
            np.sin(np.pi * i * sx) * np.sin(np.pi * j * sy)
            for i in (1, 2, 3)
            for j in (1, 2, 3)
        ]
        probes.append(dual.values.copy())
    best = 0.0
    for vals in probes:
        v = DiscreteFunction(mesh, np.asarray(vals, dtype=float))
        nv = norm_grad(v, exps, mesh)
        if nv > 0:
            best = max(best, abs(dual.pair(v)) / nv)
    return eucl, best


# ---------------------------------------------------------------------------
# Right-hand-side catalog
# ---------------------------------------------------------------------------

def _as_xfun(value):
    """Constant or vectorized callable of points -> per-point array."""
    if callable(value):
        return lambda x: np.asarray(value(x), dtype=float)
    c = float(value)
    return lambda x: np.full(np.asarray(x).shape[0], c)


def builtin_rhs(name: str, params: dict) -> RhsSpec:
    """Instance catalog of superlinear right-hand sides.

    * ``pure_power``: f = |t|^(r-2) t, F = |t|^r / r.
    * ``example_i``:  f = |t|^(gamma+eps-2) t with the threshold
      exponent gamma = q_plus (1 + kappa/q_minus); requires
      0 < eps < 1 - q_plus kappa / q_minus (needs q_plus kappa < q_minus).
    * ``example_ii``: odd piecewise power with a log tilt outside [-1, 1]:
      f = |t|^(m(x)-2) t on |t| < 1 and |t|^(l(x)-2) t [1 + log|t|]
      outside (exponent l_tilde on the negative side), with the exact
      primitive stitched at |t| = 1.
    """
    kappa = log_constants().kappa

    if name == "pure_power":
        r = float(params["r"])
        if r <= 1.0:
            raise ValueError("pure_power needs r > 1")

        def f(x, t):
            t = np.asarray(t, dtype=float)
            at = np.abs(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = at ** (r - 2.0) * t
            return np.where(at > 0.0, out, 0.0)

        def F(x, t):
            t = np.asarray(t, dtype=float)
            return np.abs(t) ** r / r

        # Growth flags depend on r versus the exponent field; only the
        # unconditional claims are made here, validation fills the rest.
        return RhsSpec("pure_power", f, F, r, r,
                       flags={"f1": True, "f2": True, "f4": False},
                       params={"r": r})

    if name == "example_i":
        q_plus = float(params["q_plus"])
        q_minus = float(params["q_minus"])
        eps = float(params["eps"])
        gamma = q_plus * (1.0 + kappa / q_minus)
        eps_max = 1.0 - q_plus * kappa / q_minus
        if eps_max <= 0.0:
            raise ValueError("example_i needs q_plus * kappa < q_minus")
        if not 0.0 < eps < eps_max:
            raise ValueError(f"example_i needs 0 < eps < {eps_max:.6f}, got {eps}")
        r = gamma + eps

        def f(x, t):
            t = np.asarray(t, dtype=float)
            return np.abs(t) ** (r - 2.0) * t

        def F(x, t):
            t = np.asarray(t, dtype=float)
            return np.abs(t) ** r / r

        return RhsSpec("example_i", f, F, r, r,
                       flags={"f1": True, "f2": True, "f3": True, "f3_prime": True,
                              "f4": False, "f4_prime": True, "f5": True, "f6": True},
                       params={"eps": eps, "q_plus": q_plus, "q_minus": q_minus,
                               "gamma": gamma, "l": gamma})

    if name == "example_ii":
        l_fun = _as_xfun(params["l"])
        lt_fun = _as_xfun(params.get("l_tilde", params["l"]))
        m_fun = _as_xfun(params["m"])

        def f(x, t):
            t = np.asarray(t, dtype=float)
            l, lt, m = l_fun(x), lt_fun(x), m_fun(x)
            at = np.abs(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                mid = at ** (m - 2.0) * t
                outer_exp = np.where(t >= 0.0, l, lt)
                outer = at ** (outer_exp - 2.0) * t * (1.0 + np.log(np.maximum(at, 1.0)))
            return np.where(at > 0.0, np.where(at < 1.0, mid, outer), 0.0)

        def F(x, t):
            t = np.asarray(t, dtype=float)
            l, lt, m = l_fun(x), lt_fun(x), m_fun(x)
            at = np.abs(t)
            mid = at ** m / m
            ex = np.where(t >= 0.0, l, lt)
            s = np.maximum(at, 1.0)
            tail = (1.0 / m
                    + (s ** ex - 1.0) / ex
                    + s ** ex * np.log(s) / ex
                    - (s ** ex - 1.0) / ex ** 2)
            return np.where(at < 1.0, mid, tail)

        # Growth bounds from the sampled exponents are filled lazily by
        # validate_assumptions; store nominal constants when available.
        r_min = float(params.get("r_minus", 0.0))
        r_max = float(params.get("r_plus", 0.0))
        return RhsSpec("example_ii", f, F, r_min, r_max,
                       flags={"f1": True, "f2": True, "f3": True, "f3_prime": True,
                              "f4": False, "f4_prime": True, "f5": True, "f6": True},
                       params=dict(params))

    raise ValueError(f"unknown right-hand side {name!r}")


# ---------------------------------------------------------------------------
# Assumption validation (report-only, sampled)
# ---------------------------------------------------------------------------

def _sample_points(mesh: Mesh, k: int = 32) -> np.ndarray:
    stride = max(1, mesh.n_elements // k)
    return mesh.barycenters[::stride][:k]


def validate_assumptions(exps: ExponentField, rhs: RhsSpec, t_max: float = 1e6) -> dict:
    """Empirical flag report for an (exponents, right-hand side) pair.

    Structural bounds are exact; growth conditions are sampled on log
    grids of t up to t_max and can only falsify asymptotic statements,
    never certify them.  The quotient monotonicity check runs at the
    threshold exponent gamma = q_plus (1 + kappa/q_minus): dividing the
    fibering derivative by t^(gamma-1) makes the log-phase terms
    non-increasing, so f/|t|^(gamma-1) nondecreasing is what uniqueness
    of the Nehari projection actually consumes.
    """
    kappa = log_constants().kappa
    mesh = exps.mesh
    xs = _sample_points(mesh)
    gamma = exps.q_plus * (1.0 + kappa / exps.q_minus)

    t_pos = np.logspace(-3, np.log10(t_max), 120)
    grids = [t_pos, -t_pos[::-1]]

    report = {
        "H": exps.check_H(),
        "H2": exps.check_H2(),
        "H3": exps.check_H3(),
    }

    def for_all_samples(check):
        for x in xs:
            pts = np.tile(x, (len(t_pos), 1))
            for t in grids:
                if not check(pts, t):
                    return False
        return True

    # (f1) continuity of t -> f(x, t), sampled jump test
    def f1(pts, t):
        f0 = rhs.f(pts, t)
        f1_ = rhs.f(pts, t * (1.0 + 1e-9) + 1e-12)
        scale = 1.0 + np.abs(f0)
        return bool(np.all(np.abs(f1_ - f0) <= 1e-5 * scale))

    # (f2) growth: empirical log-log slope at the largest |t| <= r_plus - 1
    def f2(pts, t):
        if rhs.r_plus <= 0:
            return True
        idx = np.argsort(np.abs(t))[-20:]
        tt = np.abs(t[idx])
        fv = np.abs(rhs.f(pts[idx], t[idx])) + 1e-300
        slope = np.polyfit(np.log(tt), np.log(fv), 1)[0]
        return bool(slope <= rhs.r_plus - 1.0 + 0.05)

    # (f3) superlinear beyond the log phase: F/(|t|^q_plus log(e+|t|)) grows
    def f3(pts, t):
        big = np.abs(t) >= 10.0
        if not np.any(big):
            return True
        tb = t[big]
        order = np.argsort(np.abs(tb))
        tb = tb[order]
        ratio = rhs.F(pts[big][order], tb) / (
            np.abs(tb) ** exps.q_plus * np.log(E + np.abs(tb))
        )
        return bool(ratio[-1] > 0 and ratio[-1] >= 3.0 * ratio[0])

    # (f3') quotient monotonicity at the threshold exponent gamma
    def f3p(pts, t):
        quot = rhs.f(pts, t) / np.abs(t) ** (gamma - 1.0)
        dq = np.diff(quot)
        return bool(np.all(dq >= -1e-9 * np.maximum(np.abs(quot[:-1]), 1e-300)))

    # (f4') F/|t|^p -> 0 as t -> 0, sampled on t = 2^-k
    def f4p_at(x):
        p_loc = float(np.max(exps.p_at))
        ks = np.arange(1, 41)
        tt = 2.0 ** (-ks.astype(float))
        pts = np.tile(x, (len(tt), 1))
        for t in (tt, -tt):
            vals = np.abs(rhs.F(pts, t)) / np.abs(t) ** p_loc
            if not (vals[-1] <= 1e-8 or vals[-1] <= 1e-4 * (vals[0] + 1e-300)):
                return False
        return True

    # (f5) Cerami numerator growth at the exponent l (default gamma)
    l_exp = float(rhs.params.get("l", gamma))

    def f5(pts, t):
        big = np.abs(t) >= 1e3
        if not np.any(big):
            return True
        tb = t[big]
        num = rhs.f(pts[big], tb) * tb - gamma * rhs.F(pts[big], tb)
        return bool(np.all(num / np.abs(tb) ** l_exp > 0.0))

    # (f6) nonnegativity of the Cerami numerator everywhere sampled
    def f6(pts, t):
        num = rhs.f(pts, t) * t - gamma * rhs.F(pts, t)
        scale = 1.0 + np.abs(rhs.F(pts, t))
        return bool(np.all(num >= -1e-12 * scale))

    report["f1"] = for_all_samples(f1)
    report["f2"] = for_all_samples(f2)
    report["f3"] = for_all_samples(f3)
    report["f3_prime"] = for_all_samples(f3p)
    report["f4_prime"] = all(f4p_at(x) for x in xs)
    report["f5"] = for_all_samples(f5)
    report["f6"] = for_all_samples(f6)
    report["gamma"] = gamma
    return report
