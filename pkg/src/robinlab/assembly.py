"""P1 Galerkin matrices for the Robin energy form and its pieces."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy import sparse

from .geometry import BoundaryTraversal, MeshError, TriangleMesh, boundary_traversal, prolongation, refine

__all__ = [
    "AssemblyError",
    "DiscreteForm",
    "DirichletReduction",
    "element_stiffness",
    "element_mass",
    "assemble_stiffness",
    "assemble_mass",
    "sample_boundary_function",
    "assemble_boundary_weighted",
    "assemble_nonlocal",
    "assemble_rank_one",
    "boundary_block",
    "reduce_dirichlet",
    "neumann_trace_residual",
    "write_matrix",
]


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteForm:
    """Symmetric sparse matrix of a bilinear form on the P1 space.

    kind is one of stiffness, mass, boundary_weighted, nonlocal, composite;
    definiteness one of psd, pd, indefinite, nsd, unknown.
    """

    matrix: sparse.csr_matrix
    kind: str
    definiteness: str = "unknown"

    @property
    def n_dof(self) -> int:
        return self.matrix.shape[0]

    def quad(self, u) -> float:
        u = np.asarray(u)
        return float(np.real(np.vdot(u, self.matrix @ u)))

    def __add__(self, other: "DiscreteForm") -> "DiscreteForm":
        if other.n_dof != self.n_dof:
            raise AssemblyError("forms live on different spaces")
        if self.definiteness == other.definiteness and self.definiteness in ("psd", "nsd"):
            d = self.definiteness
        else:
            d = "unknown"
        return DiscreteForm((self.matrix + other.matrix).tocsr(), "composite", d)

    def __neg__(self) -> "DiscreteForm":
        flip = {"psd": "nsd", "nsd": "psd", "pd": "unknown"}.get(self.definiteness, self.definiteness)
        return DiscreteForm((-self.matrix).tocsr(), self.kind, flip)

    def symmetry_defect(self) -> float:
        """max|M - M^T| / max|M| (0 for the zero matrix)."""
        a = self.matrix
        big = abs(a).max() if a.nnz else 0.0
        if big == 0:
            return 0.0
        d = a - a.T
        return (abs(d).max() if d.nnz else 0.0) / big


def zero_form(n: int) -> DiscreteForm:
    return DiscreteForm(sparse.csr_matrix((n, n)), "boundary_weighted", "psd")


def _triangle_geometry(mesh):
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    # b_i = y_j - y_k, c_i = x_k - x_j over cyclic (i, j, k)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    if np.any(area <= 0):
        raise AssemblyError("degenerate triangle")
    return b, c, area


def _scatter(mesh, local, n=None):
    t = mesh.triangles
    n = mesh.n_nodes if n is None else n
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def element_stiffness(p) -> np.ndarray:
    """3x3 stiffness matrix of a single triangle with vertex rows ``p``."""
    p = np.asarray(p, dtype=float)
    x, y = p[:, 0], p[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    area = 0.5 * (b[0] * c[1] - b[1] * c[0])
    if area <= 0:
        raise AssemblyError("degenerate triangle")
    return (np.outer(b, b) + np.outer(c, c)) / (4 * area)


def element_mass(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    d1, d2 = p[1] - p[0], p[2] - p[0]
    area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
    if area <= 0:
        raise AssemblyError("degenerate triangle")
    return area / 12.0 * (np.ones((3, 3)) + np.eye(3))


def assemble_stiffness(mesh: TriangleMesh) -> DiscreteForm:
    b, c, area = _triangle_geometry(mesh)
    local = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4 * area[:, None, None])
    return DiscreteForm(_scatter(mesh, local), "stiffness", "psd")


def assemble_mass(mesh: TriangleMesh) -> DiscreteForm:
    _, _, area = _triangle_geometry(mesh)
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = area[:, None, None] * ref[None]
    return DiscreteForm(_scatter(mesh, local), "mass", "pd")


ThetaLike = Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def sample_boundary_function(theta: ThetaLike, mesh: TriangleMesh, traversal: BoundaryTraversal) -> np.ndarray:
    """Values of a boundary function at the Gauss points, shape (n_edges, 2).

    ``theta`` may be a scalar, an array of per-boundary-edge constants in
    ``mesh.boundary_edges`` order, or a callable of arclength ``s``.
    """
    nb = len(traversal.edge_index)
    if callable(theta):
        vals = np.asarray(theta(traversal.quad_s), dtype=float)
        vals = np.broadcast_to(vals, (nb, 2)).copy()
    elif np.ndim(theta) == 0:
        vals = np.full((nb, 2), float(theta))
    else:
        per_edge = np.asarray(theta, dtype=float)
        if per_edge.shape != (len(mesh.boundary_edges),):
            raise AssemblyError("per-edge weights must match the number of boundary edges")
        vals = np.repeat(per_edge[traversal.edge_index][:, None], 2, axis=1)
    if not np.all(np.isfinite(vals)):
        raise AssemblyError("non-finite boundary weight sample")
    if np.iscomplexobj(vals):
        raise AssemblyError("boundary weight must be real")
    return vals


def _embed_boundary(block, mesh, traversal):
    """Place a dense boundary-DOF block into an n x n sparse matrix."""
    n = mesh.n_nodes
    bn = traversal.boundary_nodes
    coo = sparse.coo_matrix(block)
    return sparse.csr_matrix((coo.data, (bn[coo.row], bn[coo.col])), shape=(n, n))


def assemble_boundary_weighted(mesh: TriangleMesh, traversal: BoundaryTraversal, theta: ThetaLike = 1.0) -> DiscreteForm:
    """Matrix of (u, v) -> integral over the boundary of theta*u*v (2-point Gauss per edge)."""
    vals = sample_boundary_function(theta, mesh, traversal)
    w = traversal.quad_weights * vals
    phi = traversal.quad_phi
    local = np.einsum("eq,qa,qb->eab", w, phi, phi)
    en = traversal.edge_nodes
    rows = np.repeat(en, 2, axis=1).ravel()
    cols = np.tile(en, (1, 2)).ravel()
    n = mesh.n_nodes
    mat = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    if np.all(vals >= 0):
        d = "psd"
    elif np.all(vals <= 0):
        d = "nsd"
    else:
        d = "indefinite"
    return DiscreteForm(mat, "boundary_weighted", d)


def _trace_projector(traversal):
    """(n_boundary, 2*n_edges) matrix of w_q * phi_i(x_q)."""
    nb = traversal.n_boundary
    el = traversal.edge_local()
    ne = len(el)
    q = np.arange(2 * ne).reshape(ne, 2)
    rows, cols, vals = [], [], []
    for a in range(2):
        for qq in range(2):
            rows.append(el[:, a])
            cols.append(q[:, qq])
            vals.append(traversal.quad_weights[:, qq] * traversal.quad_phi[qq, a])
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(nb, 2 * ne))


def assemble_nonlocal(mesh: TriangleMesh, traversal: BoundaryTraversal,
                      kernel: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> DiscreteForm:
    """Matrix of the double boundary integral of k(s,t) u(s) v(t).

    ``kernel`` is evaluated on broadcast arclength arrays and symmetrized.
    """
    s = traversal.quad_s.ravel()
    kmat = np.asarray(kernel(s[:, None], s[None, :]), dtype=float)
    kmat = np.broadcast_to(kmat, (len(s), len(s)))
    if not np.all(np.isfinite(kmat)):
        raise AssemblyError("non-finite kernel evaluation")
    kmat = 0.5 * (kmat + kmat.T)
    p = _trace_projector(traversal)
    block = p @ (p @ kmat).T
    block = 0.5 * (block + block.T)
    return DiscreteForm(_embed_boundary(block, mesh, traversal), "nonlocal", "unknown")


def assemble_rank_one(mesh: TriangleMesh, traversal: BoundaryTraversal, g: ThetaLike, c: float) -> DiscreteForm:
    """Matrix of c * (integral of g u) * (integral of g v)."""
    gq = sample_boundary_function(g, mesh, traversal).ravel()
    b = _trace_projector(traversal) @ gq
    block = float(c) * np.outer(b, b)
    d = "psd" if c >= 0 else "nsd"
    return DiscreteForm(_embed_boundary(block, mesh, traversal), "nonlocal", d)


def boundary_block(form: DiscreteForm, traversal: BoundaryTraversal) -> np.ndarray:
    """Dense restriction of a form to the boundary DOFs (traversal order)."""
    bn = traversal.boundary_nodes
    return form.matrix[bn][:, bn].toarray()


@dataclass(frozen=True, eq=False)
class DirichletReduction:
    interior: np.ndarray
    stiffness: DiscreteForm
    mass: DiscreteForm
    n_full: int

    @property
    def n_dof(self) -> int:
        return len(self.interior)

    def extend(self, x) -> np.ndarray:
        """Pad interior coefficient vectors (columns) with boundary zeros."""
        x = np.asarray(x)
        out = np.zeros((self.n_full,) + x.shape[1:], dtype=x.dtype)
        out[self.interior] = x
        return out


def reduce_dirichlet(stiffness: DiscreteForm, mass: DiscreteForm, mesh: TriangleMesh) -> DirichletReduction:
    """Eliminate boundary DOFs (u = 0 on the boundary)."""
    if stiffness.n_dof != mesh.n_nodes or mass.n_dof != mesh.n_nodes:
        raise AssemblyError("forms were not assembled on this mesh")
    interior = mesh.interior_nodes
    if len(interior) == 0:
        raise MeshError("mesh has no interior nodes; refine before imposing Dirichlet conditions")
    k = stiffness.matrix[interior][:, interior].tocsr()
    m = mass.matrix[interior][:, interior].tocsr()
    return DirichletReduction(
        interior=interior,
        stiffness=DiscreteForm(k, "stiffness", "pd"),
        mass=DiscreteForm(m, "mass", "pd"),
        n_full=mesh.n_nodes,
    )


def _dual_norm(r, tmat):
    return float(np.sqrt(max(float(r @ np.linalg.solve(tmat, r)), 0.0)))


ThetaBuilder = Callable[[TriangleMesh, BoundaryTraversal], DiscreteForm]


def neumann_trace_residual(mesh: TriangleMesh, traversal: BoundaryTraversal, u, lam: float,
                           theta: Union[DiscreteForm, ThetaBuilder, None] = None,
                           enriched: bool = True, eig_tol: float = 1e-6) -> float:
    """Boundary residual of the weak Robin condition for a discrete eigenpair.

    r(phi) = a(u, phi) + <phi, Theta u> - lam (u, phi) over boundary hat
    functions phi, measured in the dual norm of the boundary mass matrix.
    With ``enriched`` the hats come from one uniform refinement, which turns
    the Galerkin-orthogonal (zero) residual into a genuine consistency
    measure; this needs ``theta`` as a builder ``(mesh, traversal) -> form``.
    """
    u = np.asarray(u, dtype=float)
    if isinstance(theta, DiscreteForm) or theta is None:
        bform = theta if theta is not None else zero_form(mesh.n_nodes)
        builder = None if theta is not None else (lambda m, t: zero_form(m.n_nodes))
    else:
        builder = theta
        bform = builder(mesh, traversal)

    k = assemble_stiffness(mesh).matrix
    m = assemble_mass(mesh).matrix
    a = k + bform.matrix
    res = a @ u - lam * (m @ u)
    scale = (abs(a).max() + abs(lam) * abs(m).max()) * np.linalg.norm(u) + 1e-300
    if np.linalg.norm(res) > eig_tol * scale:
        raise AssemblyError("u is not a discrete eigenvector for lam within tolerance")

    if not enriched:
        bn = traversal.boundary_nodes
        tmat = boundary_block(assemble_boundary_weighted(mesh, traversal, 1.0), traversal)
        return _dual_norm(res[bn], tmat)

    if builder is None:
        raise AssemblyError("enriched residual needs a theta builder, not an assembled form")
    fine = refine(mesh)
    ftr = boundary_traversal(fine)
    uf = prolongation(mesh) @ u
    af = assemble_stiffness(fine).matrix + builder(fine, ftr).matrix
    rf = af @ uf - lam * (assemble_mass(fine).matrix @ uf)
    bn = ftr.boundary_nodes
    tmat = boundary_block(assemble_boundary_weighted(fine, ftr, 1.0), ftr)
    return _dual_norm(rf[bn], tmat)


def write_matrix(form: DiscreteForm, path) -> None:
    """Coordinate dump: ``DIM n`` then ``i j value`` lines in row-major order."""
    coo = form.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [f"DIM {form.n_dof}"]
    lines += [f"{i} {j} {v!r}" for i, j, v in
              zip(coo.row[order].tolist(), coo.col[order].tolist(), coo.data[order].tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
