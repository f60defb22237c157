"""Structured triangular mesh on the unit square and finite element assembly.

Provides the Friedrichs-Keller triangulation of (0,1)^2, piecewise-constant
(P0) and continuous piecewise-linear (P1) fields, and the bilinear/linear
forms used by the solvers: Poisson stiffness, masses, the P0-P1 coupling,
the linear-elasticity energy form, and the P1 -> P0 divergence.

All integrands appearing in the forms are piecewise polynomial, so assembly
is exact. Discontinuous data is projected to P0 by recursive midpoint
quadrature (see :func:`project_p0`).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class InteriorEdges:
    """Edges shared by exactly two triangles.

    ``cells[e] = (left, right)`` are the adjacent triangle indices,
    ``normals[e]`` is the unit normal pointing from left to right.
    """

    cells: np.ndarray    # (m, 2) int
    lengths: np.ndarray  # (m,)
    normals: np.ndarray  # (m, 2)


@dataclass(frozen=True)
class Mesh:
    """Friedrichs-Keller triangulation of the unit square.

    ``n`` subdivisions per side give ``(n+1)**2`` nodes and ``2*n**2``
    congruent right triangles; every grid square is split along the
    lower-left to upper-right diagonal.
    """

    n: int
    nodes: np.ndarray               # (n_nodes, 2)
    triangles: np.ndarray           # (n_tri, 3) int, counterclockwise
    interior_edges: InteriorEdges
    boundary_node_mask: np.ndarray  # (n_nodes,) bool
    cell_areas: np.ndarray          # (n_tri,)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.triangles.shape[0]

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_node_mask)


@dataclass
class P0Field:
    """One real value per triangle."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)


@dataclass
class P1ScalarField:
    """One real value per node (continuous piecewise-linear function)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)


@dataclass
class P1VectorField:
    """Two real values per node; vanishes on the boundary (H^1_0 vector field)."""

    values: np.ndarray  # (n_nodes, 2)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != 2:
            raise ValueError("P1VectorField values must have shape (n_nodes, 2)")


def build_friedrichs_keller(n: int) -> Mesh:
    """Triangulate (0,1)^2 into 2*n^2 right triangles with legs 1/n.

    The diagonal of every grid square runs from the lower-left to the
    upper-right corner, so the result is deterministic in n.
    """
    if n < 1:
        raise ValueError(f"need at least one subdivision per side, got n={n}")

    side = np.arange(n + 1) / n
    xx, yy = np.meshgrid(side, side, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])  # node (i, j) -> j*(n+1)+i

    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    a = (jj * (n + 1) + ii).ravel()       # lower-left corner of each square
    b = a + 1
    c = a + n + 2                         # upper-right
    d = a + n + 1
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    coords = nodes[triangles]
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    gi = np.tile(np.arange(n + 1), n + 1)
    gj = np.repeat(np.arange(n + 1), n + 1)
    boundary = (gi == 0) | (gi == n) | (gj == 0) | (gj == n)

    interior_edges = _collect_interior_edges(nodes, triangles)

    return Mesh(
        n=n,
        nodes=nodes,
        triangles=triangles,
        interior_edges=interior_edges,
        boundary_node_mask=boundary,
        cell_areas=areas,
    )


def _collect_interior_edges(nodes, triangles) -> InteriorEdges:
    seen: dict[tuple[int, int], list[int]] = {}
    order: list[tuple[int, int]] = []
    for t, tri in enumerate(triangles):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(min(a, b)), int(max(a, b)))
            if key in seen:
                seen[key].append(t)
            else:
                seen[key] = [t]
                order.append(key)

    pairs, cells = [], []
    for key in order:
        tris = seen[key]
        if len(tris) == 2:
            pairs.append(key)
            cells.append(tris)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)

    vec = nodes[pairs[:, 1]] - nodes[pairs[:, 0]]
    lengths = np.hypot(vec[:, 0], vec[:, 1])
    normals = np.column_stack([vec[:, 1], -vec[:, 0]]) / lengths[:, None]
    centroids = nodes[triangles].mean(axis=1)
    towards_right = centroids[cells[:, 1]] - centroids[cells[:, 0]]
    flip = np.sum(normals * towards_right, axis=1) < 0
    normals[flip] *= -1.0
    return InteriorEdges(cells=cells, lengths=lengths, normals=normals)


def basis_gradients(mesh: Mesh) -> np.ndarray:
    """Gradients of the three barycentric basis functions per triangle, (n_tri, 3, 2)."""
    coords = mesh.nodes[mesh.triangles]
    x, y = coords[..., 0], coords[..., 1]
    two_a = 2.0 * mesh.cell_areas
    grads = np.empty_like(coords)
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        grads[:, a, 0] = (y[:, b] - y[:, c]) / two_a
        grads[:, a, 1] = (x[:, c] - x[:, b]) / two_a
    return grads


def _symmetrized_csr(rows, cols, data, shape) -> sp.csr_matrix:
    m = sp.coo_matrix((data, (rows, cols)), shape=shape).tocsr()
    m.sum_duplicates()
    return (m + m.T) * 0.5


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """P1 Galerkin matrix of the Laplacian on all nodes (no boundary conditions).

    Rows sum to zero (constants lie in the kernel); the restriction to
    interior nodes is symmetric positive definite.
    """
    grads = basis_gradients(mesh)
    local = np.einsum("tad,tbd->tab", grads, grads) * mesh.cell_areas[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    return _symmetrized_csr(rows, cols, local.ravel(), (mesh.n_nodes, mesh.n_nodes))


def assemble_mass_p1(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix on all nodes (exact integration)."""
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    data = (mesh.cell_areas[:, None, None] * local).ravel()
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    return _symmetrized_csr(rows, cols, data, (mesh.n_nodes, mesh.n_nodes))


def assemble_mass_p0(mesh: Mesh) -> np.ndarray:
    """Diagonal of the P0 mass matrix: the cell areas."""
    return mesh.cell_areas.copy()


def assemble_p0_p1_coupling(mesh: Mesh) -> sp.csr_matrix:
    """Map P0 coefficients to the P1 load vector: B[v, T] = integral of basis_v over T.

    Each triangle contributes area/3 to each of its vertices (exact for the
    linear basis).
    """
    rows = mesh.triangles.ravel()
    cols = np.repeat(np.arange(mesh.n_cells), 3)
    data = np.repeat(mesh.cell_areas / 3.0, 3)
    return sp.coo_matrix((data, (rows, cols)), shape=(mesh.n_nodes, mesh.n_cells)).tocsr()


@dataclass(frozen=True)
class ElasticityForm:
    """Linear elasticity energy a[phi, psi] = int sym_grad(phi) : C sym_grad(psi) dx.

    C is the isotropic Lame tensor, C eps = 2 mu eps + lam tr(eps) I, with
    mu = E / (2 (1 + nu)) and lam = E nu / ((1 + nu) (1 - 2 nu)). ``matrix``
    is the assembled operator on interior vector degrees of freedom
    (node-major: dof 2q and 2q+1 belong to the q-th interior node).
    """

    E: float
    nu: float
    mu: float
    lam: float
    matrix: sp.csr_matrix

    def energy(self, x: np.ndarray) -> float:
        """a[phi, phi] for the interior dof vector x of a boundary-vanishing field."""
        x = np.asarray(x, dtype=float).ravel()
        return float(x @ (self.matrix @ x))


def assemble_elasticity(
    mesh: Mesh, E: float = 2900.0, nu: float = 0.4, reduce: bool = True
) -> ElasticityForm:
    """Assemble the elasticity form, reduced to interior vector dofs.

    With ``reduce=False`` the operator keeps all nodes (rigid translations
    then lie in its kernel); the reduced operator is positive definite.
    """
    if not 0.0 < nu < 0.5:
        raise ValueError(f"shear module must lie in (0, 0.5), got nu={nu}")
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    grads = basis_gradients(mesh)
    dots = np.einsum("tad,tbd->tab", grads, grads)
    t1 = np.einsum("tab,ij->taibj", dots, np.eye(2))
    t2 = np.einsum("taj,tbi->taibj", grads, grads)
    t3 = np.einsum("tai,tbj->taibj", grads, grads)
    local = mesh.cell_areas[:, None, None, None, None] * (mu * (t1 + t2) + lam * t3)

    dofs = (2 * mesh.triangles[:, :, None] + np.arange(2)).reshape(-1, 6)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    full = _symmetrized_csr(rows, cols, local.ravel(), (2 * mesh.n_nodes, 2 * mesh.n_nodes))

    matrix = full
    if reduce:
        vec_dofs = _interior_vector_dofs(mesh)
        matrix = full[np.ix_(vec_dofs, vec_dofs)].tocsr()
    return ElasticityForm(E=E, nu=nu, mu=mu, lam=lam, matrix=matrix)


def _interior_vector_dofs(mesh: Mesh) -> np.ndarray:
    ii = mesh.interior_nodes
    return np.column_stack([2 * ii, 2 * ii + 1]).ravel()


def divergence_p1_to_p0(mesh: Mesh, phi: P1VectorField) -> P0Field:
    """Cellwise divergence of a P1 vector field (constant per triangle).

    For boundary-vanishing fields the result satisfies the discrete
    divergence identity: sum_T area_T * div|_T = 0.
    """
    vals = phi.values if isinstance(phi, P1VectorField) else np.asarray(phi, dtype=float)
    grads = basis_gradients(mesh)
    div = np.einsum("tad,tad->t", grads, vals[mesh.triangles])
    return P0Field(div)


@lru_cache(maxsize=None)
def _subtriangle_centroids(depth: int) -> np.ndarray:
    """Barycentric centroids of the 4^depth uniform subtriangles, (4^depth, 3)."""
    tris = np.eye(3)[None, :, :]
    for _ in range(depth):
        b0, b1, b2 = tris[:, 0], tris[:, 1], tris[:, 2]
        m01, m12, m02 = (b0 + b1) / 2, (b1 + b2) / 2, (b0 + b2) / 2
        tris = np.concatenate([
            np.stack([b0, m01, m02], axis=1),
            np.stack([m01, b1, m12], axis=1),
            np.stack([m02, m12, b2], axis=1),
            np.stack([m01, m12, m02], axis=1),
        ])
    return tris.mean(axis=1)


def project_p0(f, mesh: Mesh, subdivision_depth: int = 4) -> P0Field:
    """Approximate cell averages of f by the midpoint rule on 4^depth subtriangles.

    Exact for affine f at any depth; O(h^2)-accurate away from
    discontinuities of f. ``f(x, y)`` must accept numpy arrays.
    """
    bary = _subtriangle_centroids(subdivision_depth)
    pts = np.einsum("qc,tcd->tqd", bary, mesh.nodes[mesh.triangles])
    vals = np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float)
    vals = np.broadcast_to(vals, pts.shape[:2])
    return P0Field(vals.mean(axis=1))


def interpolate_p1(f, mesh: Mesh, dirichlet: bool = False) -> P1ScalarField:
    """Nodal interpolation; with ``dirichlet=True`` boundary values are forced to 0."""
    vals = np.asarray(f(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float)
    vals = np.broadcast_to(vals, (mesh.n_nodes,)).copy()
    if dirichlet:
        vals[mesh.boundary_node_mask] = 0.0
    return P1ScalarField(vals)


def _p0_values(u) -> np.ndarray:
    return u.values if isinstance(u, P0Field) else np.asarray(u, dtype=float)


def l2_norm_p0(mesh: Mesh, u) -> float:
    v = _p0_values(u)
    if v.shape != (mesh.n_cells,):
        raise ValueError(f"expected {mesh.n_cells} cell values, got shape {v.shape}")
    return float(np.sqrt(np.sum(mesh.cell_areas * v * v)))


def l2_error_p0(mesh: Mesh, u, v) -> float:
    a, b = _p0_values(u), _p0_values(v)
    if a.shape != b.shape:
        raise ValueError(f"mismatched P0 lengths: {a.shape} vs {b.shape}")
    return l2_norm_p0(mesh, a - b)


def l2_norm_p1(mesh: Mesh, mass_p1: sp.csr_matrix, y) -> float:
    v = y.values if isinstance(y, P1ScalarField) else np.asarray(y, dtype=float)
    return float(np.sqrt(v @ (mass_p1 @ v)))


@dataclass(frozen=True)
class Forms:
    """All assembled operators for one mesh, shared by the solvers.

    Interior reductions eliminate homogeneous Dirichlet dofs by deletion,
    preserving exact symmetric positive definiteness.
    """

    mesh: Mesh
    interior_nodes: np.ndarray
    stiffness_full: sp.csr_matrix    # all nodes, rows sum to 0
    stiffness: sp.csr_matrix         # interior x interior, SPD
    mass_p1: sp.csr_matrix           # all nodes
    mass_interior: sp.csr_matrix     # interior rows x all nodes
    load_interior: sp.csr_matrix     # interior nodes x cells: int u * basis dx
    cell_average: sp.csr_matrix      # cells x all nodes: P1 -> cell mean
    elasticity: ElasticityForm       # interior vector dofs
    divergence: sp.csr_matrix        # cells x (2 * n_interior)
    areas: np.ndarray

    @property
    def n_interior(self) -> int:
        return self.interior_nodes.size

    def interior_vector(self, phi: P1VectorField) -> np.ndarray:
        """Flatten a boundary-vanishing vector field to interior dofs (node-major)."""
        return phi.values[self.interior_nodes].ravel()

    def full_vector_field(self, x: np.ndarray) -> P1VectorField:
        """Expand interior vector dofs to a full nodal field with zero boundary."""
        vals = np.zeros((self.mesh.n_nodes, 2))
        vals[self.interior_nodes] = x.reshape(-1, 2)
        return P1VectorField(vals)

    def full_scalar_field(self, y_int: np.ndarray) -> P1ScalarField:
        vals = np.zeros(self.mesh.n_nodes)
        vals[self.interior_nodes] = y_int
        return P1ScalarField(vals)

    def dual_load(self, u) -> np.ndarray:
        """Vector b with b_j = int u * div(basis_j) dx over interior vector dofs."""
        return self.divergence.T @ (self.areas * _p0_values(u))

    def integrate_u_div(self, u, x: np.ndarray) -> float:
        """int u * div(phi) dx for interior dof vector x."""
        return float(self.dual_load(u) @ x)


def build_forms(mesh: Mesh, E: float = 2900.0, nu: float = 0.4) -> Forms:
    interior = mesh.interior_nodes
    stiffness_full = assemble_stiffness(mesh)
    mass_p1 = assemble_mass_p1(mesh)
    coupling = assemble_p0_p1_coupling(mesh)

    grads = basis_gradients(mesh)
    pos = np.full(mesh.n_nodes, -1, dtype=np.int64)
    pos[interior] = np.arange(interior.size)
    tri_pos = pos[mesh.triangles]                       # (n_tri, 3), -1 on boundary
    keep = tri_pos >= 0
    t_idx, a_idx = np.nonzero(keep)
    rows = np.repeat(t_idx, 2)
    cols = (2 * tri_pos[t_idx, a_idx][:, None] + np.arange(2)).ravel()
    data = grads[t_idx, a_idx].ravel()
    divergence = sp.coo_matrix(
        (data, (rows, cols)), shape=(mesh.n_cells, 2 * interior.size)
    ).tocsr()

    rows3 = np.repeat(np.arange(mesh.n_cells), 3)
    cell_average = sp.coo_matrix(
        (np.full(3 * mesh.n_cells, 1.0 / 3.0), (rows3, mesh.triangles.ravel())),
        shape=(mesh.n_cells, mesh.n_nodes),
    ).tocsr()

    return Forms(
        mesh=mesh,
        interior_nodes=interior,
        stiffness_full=stiffness_full,
        stiffness=stiffness_full[np.ix_(interior, interior)].tocsr(),
        mass_p1=mass_p1,
        mass_interior=mass_p1[interior].tocsr(),
        load_interior=coupling[interior].tocsr(),
        cell_average=cell_average,
        elasticity=assemble_elasticity(mesh, E=E, nu=nu),
        divergence=divergence,
        areas=mesh.cell_areas.copy(),
    )
