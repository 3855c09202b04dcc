"""Structured P1 triangulations and discrete functions with zero trace.

A :class:`Mesh` is a triangulation of a rectangle (optionally restricted
by a mask predicate) carrying per-element areas, the constant-per-element
gradient maps of the affine interpolant, a Dirichlet boundary mask and
node adjacency.  :class:`DiscreteFunction` holds nodal values that vanish
on the Dirichlet boundary.  :class:`ExponentField` samples the exponents
p, q and the weight mu at element barycenters and carries their bounds.

Gradient-dependent integrands are exact under one-point quadrature
because P1 gradients are constant per element; zero-order terms use the
lumped (vertex) rule exposed through ``mesh.lumped_mass``.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

__all__ = [
    "Mesh",
    "DiscreteFunction",
    "ExponentField",
    "build_rect_mesh",
    "element_gradient",
    "all_gradients",
    "truncate",
    "nodal_domains",
    "save_mesh_csv",
    "save_solution_csv",
    "load_solution_csv",
]


class Mesh:
    """Immutable triangulation with per-element gradient maps.

    Attributes
    ----------
    nodes : (n, 2) float array of vertex coordinates
    elements : (m, 3) int array of vertex indices, positively oriented
    areas : (m,) positive element areas
    grad_maps : (m, 2, 3) maps from the three nodal values to the
        constant element gradient
    boundary_mask : (n,) bool, True on Dirichlet nodes
    adjacency : (n_edges, 2) unique undirected node pairs
    """

    def __init__(self, nodes, elements):
        nodes = np.asarray(nodes, dtype=float)
        elements = np.asarray(elements, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValueError("nodes must be (n, 2)")
        if elements.ndim != 2 or elements.shape[1] != 3:
            raise ValueError("elements must be (m, 3)")

        # Enforce positive orientation.
        p0 = nodes[elements[:, 0]]
        e1 = nodes[elements[:, 1]] - p0
        e2 = nodes[elements[:, 2]] - p0
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        flip = det < 0
        if np.any(flip):
            elements = elements.copy()
            elements[flip, 1], elements[flip, 2] = (
                elements[flip, 2].copy(),
                elements[flip, 1].copy(),
            )
            det = np.abs(det)
        if np.any(det <= 0):
            raise ValueError("degenerate element (zero area)")

        self.nodes = nodes
        self.elements = elements
        self.areas = 0.5 * det

        # grad_maps[e] = B^{-T} @ [[-1, 1, 0], [-1, 0, 1]] with B the edge matrix.
        p0 = nodes[elements[:, 0]]
        e1 = nodes[elements[:, 1]] - p0
        e2 = nodes[elements[:, 2]] - p0
        inv_det = 1.0 / det
        binv_t = np.empty((len(elements), 2, 2))
        binv_t[:, 0, 0] = e2[:, 1] * inv_det
        binv_t[:, 0, 1] = -e1[:, 1] * inv_det
        binv_t[:, 1, 0] = -e2[:, 0] * inv_det
        binv_t[:, 1, 1] = e1[:, 0] * inv_det
        local = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
        self.grad_maps = binv_t @ local

        # Boundary = nodes of edges that belong to exactly one element.
        edges = np.concatenate(
            [elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]]
        )
        edges = np.sort(edges, axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        self.adjacency = uniq
        boundary_edges = uniq[counts == 1]
        mask = np.zeros(len(nodes), dtype=bool)
        mask[boundary_edges.ravel()] = True
        self.boundary_mask = mask
        self.interior = np.flatnonzero(~mask)

        self.barycenters = nodes[elements].mean(axis=1)
        self.n_nodes = len(nodes)
        self.n_elements = len(elements)

        # Lumped (vertex-rule) mass: area/3 to each vertex of each element.
        lm = np.zeros(self.n_nodes)
        np.add.at(lm, elements.ravel(), np.repeat(self.areas / 3.0, 3))
        self.lumped_mass = lm

        self._grad_op = None
        self._stiffness = None
        self._adj_matrix = None

    @property
    def grad_operator(self):
        """Sparse (2m, n) map: (G @ values).reshape(m, 2) = element gradients."""
        if self._grad_op is None:
            m, n = self.n_elements, self.n_nodes
            rows = np.repeat(np.arange(2 * m), 3)
            cols = np.tile(self.elements, (1, 2)).ravel()
            data = self.grad_maps.reshape(2 * m, 3).ravel()
            self._grad_op = sp.csr_matrix((data, (rows, cols)), shape=(2 * m, n))
        return self._grad_op

    @property
    def stiffness(self):
        """P1 stiffness matrix (full, n x n): G^T diag(area) G."""
        if self._stiffness is None:
            g = self.grad_operator
            w = sp.diags(np.repeat(self.areas, 2))
            self._stiffness = (g.T @ w @ g).tocsr()
        return self._stiffness

    @property
    def adjacency_matrix(self):
        if self._adj_matrix is None:
            i, j = self.adjacency[:, 0], self.adjacency[:, 1]
            ones = np.ones(len(i))
            n = self.n_nodes
            a = sp.coo_matrix((ones, (i, j)), shape=(n, n))
            self._adj_matrix = (a + a.T).tocsr()
        return self._adj_matrix

    def max_diameter(self) -> float:
        pts = self.nodes[self.elements]
        d01 = np.linalg.norm(pts[:, 0] - pts[:, 1], axis=1)
        d12 = np.linalg.norm(pts[:, 1] - pts[:, 2], axis=1)
        d20 = np.linalg.norm(pts[:, 2] - pts[:, 0], axis=1)
        return float(np.max(np.stack([d01, d12, d20])))


def build_rect_mesh(x_range, y_range, nx: int, ny: int, mask=None) -> Mesh:
    """Structured triangulation of a rectangle, two triangles per cell.

    Cell diagonals alternate with (i+j) parity so even grids are
    symmetric under coordinate reflection.  Node count is
    (nx+1)(ny+1), element count 2*nx*ny.

    ``mask``, if given, is a predicate on barycenter coordinates
    (vectorized, (k,2) -> bool); elements where it is falsy are dropped,
    unused nodes removed, and the Dirichlet boundary recomputed from the
    retained elements.
    """
    x0, x1 = map(float, x_range)
    y0, y1 = map(float, y_range)
    if not (nx >= 1 and ny >= 1):
        raise ValueError("nx, ny must be >= 1")
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate rectangle")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            if (i + j) % 2 == 0:  # diagonal a-c
                tris.append((a, b, c))
                tris.append((a, c, d))
            else:  # diagonal b-d
                tris.append((a, b, d))
                tris.append((b, c, d))
    elements = np.array(tris, dtype=np.int64)

    if mask is not None:
        bary = nodes[elements].mean(axis=1)
        keep = np.asarray(mask(bary), dtype=bool).ravel()
        if not keep.any():
            raise ValueError("mask removes every element")
        elements = elements[keep]
        used = np.unique(elements)
        remap = -np.ones(len(nodes), dtype=np.int64)
        remap[used] = np.arange(len(used))
        nodes = nodes[used]
        elements = remap[elements]

    return Mesh(nodes, elements)


class DiscreteFunction:
    """Nodal values of a P1 function, zero on the Dirichlet boundary."""

    def __init__(self, mesh: Mesh, values=None):
        self.mesh = mesh
        if values is None:
            v = np.zeros(mesh.n_nodes)
        else:
            v = np.array(values, dtype=float)
            if v.shape != (mesh.n_nodes,):
                raise ValueError(
                    f"values shape {v.shape} does not match mesh with {mesh.n_nodes} nodes"
                )
            v[mesh.boundary_mask] = 0.0  # membership in the zero-trace space
        self.values = v

    @classmethod
    def from_callable(cls, mesh, fn):
        return cls(mesh, np.asarray(fn(mesh.nodes), dtype=float))

    def copy(self):
        out = DiscreteFunction(self.mesh)
        out.values = self.values.copy()
        return out

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0

    def __neg__(self):
        out = DiscreteFunction(self.mesh)
        out.values = -self.values
        return out

    def __add__(self, other):
        out = DiscreteFunction(self.mesh)
        out.values = self.values + other.values
        return out

    def __sub__(self, other):
        out = DiscreteFunction(self.mesh)
        out.values = self.values - other.values
        return out

    def __mul__(self, scalar):
        out = DiscreteFunction(self.mesh)
        out.values = self.values * float(scalar)
        return out

    __rmul__ = __mul__


def element_gradient(u: DiscreteFunction, e: int):
    """Constant gradient of the affine interpolant on element e."""
    mesh = u.mesh
    if not 0 <= e < mesh.n_elements:
        raise IndexError(f"element index {e} out of range")
    return mesh.grad_maps[e] @ u.values[mesh.elements[e]]


def all_gradients(u: DiscreteFunction):
    """All element gradients as an (m, 2) array."""
    mesh = u.mesh
    return (mesh.grad_operator @ u.values).reshape(mesh.n_elements, 2)


def truncate(u: DiscreteFunction, sign: str) -> DiscreteFunction:
    """Nodal positive/negative part: max(+u, 0) or max(-u, 0).

    u == truncate(u, '+') - truncate(u, '-') nodewise.
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    out = DiscreteFunction(u.mesh)
    out.values = np.maximum(u.values if sign == "+" else -u.values, 0.0)
    return out


def nodal_domains(u: DiscreteFunction, tau: float | None = None):
    """Count sign components of u under mesh adjacency.

    Connected components of {u > tau} and {u < -tau} among nodes joined
    by mesh edges with matching sign.  tau defaults to 1e-8 * sup|u|.
    Returns (n_pos, n_neg, labels) with labels 0 for neutral nodes,
    1..n_pos on positive components, -1..-n_neg on negative ones.
    """
    mesh = u.mesh
    if tau is None:
        tau = 1e-8 * u.sup_norm()
    if tau <= 0.0:
        # u identically zero (or caller passed tau = 0 for it)
        if u.sup_norm() == 0.0:
            return 0, 0, np.zeros(mesh.n_nodes, dtype=int)
        raise ValueError("tau must be positive")

    labels = np.zeros(mesh.n_nodes, dtype=int)
    counts = []
    for side, sgn in ((u.values > tau, 1), (u.values < -tau, -1)):
        idx = np.flatnonzero(side)
        if len(idx) == 0:
            counts.append(0)
            continue
        sub = mesh.adjacency_matrix[idx][:, idx]
        n_comp, comp = connected_components(sub, directed=False)
        labels[idx] = sgn * (comp + 1)
        counts.append(n_comp)
    return counts[0], counts[1], labels


class ExponentField:
    """Exponents p, q and weight mu sampled at element barycenters.

    Scalar bounds (p_minus etc.) are taken over the samples; the
    assumption checks use the critical exponent p* = N p/(N - p) for
    p < N (N = 2 here) and +inf otherwise.
    """

    def __init__(self, mesh: Mesh, p_at, q_at, mu_at):
        m = mesh.n_elements
        self.mesh = mesh
        self.p_at = np.broadcast_to(np.asarray(p_at, dtype=float), (m,)).copy()
        self.q_at = np.broadcast_to(np.asarray(q_at, dtype=float), (m,)).copy()
        self.mu_at = np.broadcast_to(np.asarray(mu_at, dtype=float), (m,)).copy()
        if np.any(self.p_at <= 1.0):
            raise ValueError("need p > 1 everywhere")
        if np.any(self.q_at < self.p_at):
            raise ValueError("need p <= q everywhere")
        if np.any(self.mu_at < 0.0):
            raise ValueError("need mu >= 0 everywhere")
        self.p_minus = float(self.p_at.min())
        self.p_plus = float(self.p_at.max())
        self.q_minus = float(self.q_at.min())
        self.q_plus = float(self.q_at.max())
        self.mu_sup = float(self.mu_at.max())

    @classmethod
    def from_functions(cls, mesh: Mesh, p, q, mu):
        """Build from constants or vectorized callables of (x, y)."""

        def sample(f):
            if callable(f):
                return np.asarray(f(mesh.barycenters), dtype=float)
            return np.full(mesh.n_elements, float(f))

        return cls(mesh, sample(p), sample(q), sample(mu))

    def p_star_minus(self) -> float:
        """Critical Sobolev exponent of p_minus in dimension 2."""
        if self.p_minus >= 2.0:
            return np.inf
        return 2.0 * self.p_minus / (2.0 - self.p_minus)

    def check_H(self) -> bool:
        """q(x) < p*(x) elementwise."""
        p, q = self.p_at, self.q_at
        with np.errstate(divide="ignore"):
            p_star = np.where(p < 2.0, 2.0 * p / (2.0 - p), np.inf)
        return bool(np.all(q < p_star))

    def check_H2(self) -> bool:
        """q_plus < p*_minus."""
        return self.q_plus < self.p_star_minus()

    def check_H3(self) -> bool:
        """q_plus + 1 < p*_minus."""
        return self.q_plus + 1.0 < self.p_star_minus()


# ---------------------------------------------------------------------------
# CSV serialization (full 17-significant-digit decimals for reload fidelity)
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_mesh_csv(mesh: Mesh, nodes_path, elements_path):
    with open(nodes_path, "w") as fh:
        fh.write("id,x,y,boundary\n")
        for i, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{i},{_fmt(x)},{_fmt(y)},{int(mesh.boundary_mask[i])}\n")
    with open(elements_path, "w") as fh:
        fh.write("id,n0,n1,n2\n")
        for i, (a, b, c) in enumerate(mesh.elements):
            fh.write(f"{i},{a},{b},{c}\n")


def save_solution_csv(u: DiscreteFunction, path):
    with open(path, "w") as fh:
        fh.write("id,x,y,value\n")
        for i, (x, y) in enumerate(u.mesh.nodes):
            fh.write(f"{i},{_fmt(x)},{_fmt(y)},{_fmt(u.values[i])}\n")


def load_solution_csv(mesh: Mesh, path) -> DiscreteFunction:
    raw = np.loadtxt(path, delimiter=",", skiprows=1)
    if raw.ndim == 1:
        raw = raw[None, :]
    if raw.shape[0] != mesh.n_nodes:
        raise ValueError(
            f"field file has {raw.shape[0]} rows, mesh has {mesh.n_nodes} nodes"
        )
    order = np.argsort(raw[:, 0])
    return DiscreteFunction(mesh, raw[order, 3])
