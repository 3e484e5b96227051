"""Lagrange P1/P2 finite elements on the cut submesh.

Spaces are built on the inside triangles of a CutMesh together with its
tagged boundary.  Assembly is vectorized over elements with exact (degree-4)
triangle quadrature, so all polynomial integrands of the elasticity forms
are integrated exactly on the straight-sided cells; boundary terms use a
degree-5 Gauss rule to better resolve the nonsmooth contact integrands.

Matrices are scipy CSR with symmetric content; systems are solved by a
Jacobi-preconditioned conjugate gradient method that reports its iteration
count and flags indefiniteness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .meshing import CONTACT, DIRICHLET, FREE, NEUMANN

__all__ = [
    "MaterialParams",
    "LoadSpec",
    "FESpace",
    "SpaceEdge",
    "assemble_elasticity",
    "assemble_load",
    "assemble_boundary_operator",
    "assemble_scalar_h1",
    "apply_dirichlet",
    "solve_spd",
    "SolverError",
    "h1_norm",
    "export_matrix_market",
]

# degree-4 rule on the reference triangle (6 points, weights sum to 1)
_TRI_QP = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])
_TRI_QW = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)

# 3-point Gauss on [0, 1], exact through degree 5
_EDGE_QP = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
_EDGE_QW = np.array([5.0, 8.0, 5.0]) / 18.0


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    """Isotropic Hooke material, Lame coefficients derived from (E, nu)."""

    E: float
    nu: float

    def __post_init__(self):
        if self.E <= 0:
            raise ValueError("Young modulus must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in (-1, 0.5)")

    @property
    def lam(self):
        return self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))

    @property
    def mu(self):
        return self.E / (2 * (1 + self.nu))


@dataclass(frozen=True)
class LoadSpec:
    """Volumetric force f and traction tau on the Neumann boundary."""

    f: tuple = (0.0, 0.0)
    tau: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not np.all(np.isfinite(self.f)) or not np.all(np.isfinite(self.tau)):
            raise ValueError("load components must be finite")


def p_basis(degree, lam):
    """Values of the Lagrange basis at barycentric points lam (nq, 3)."""
    lam = np.atleast_2d(lam)
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    if degree == 1:
        return np.stack([l0, l1, l2], axis=1)
    return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], axis=1)


def p_basis_grad(degree, lam):
    """Reference gradients (nq, nb, 2) with lam0 = 1 - xi - eta."""
    lam = np.atleast_2d(lam)
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    # gradients of barycentric coordinates in (xi, eta)
    g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 1:
        return np.broadcast_to(g, (len(lam), 3, 2)).copy()
    out = np.empty((len(lam), 6, 2))
    for k, lk in enumerate((l0, l1, l2)):
        out[:, k] = (4 * lk - 1)[:, None] * g[k]
    pairs = ((0, 1), (1, 2), (2, 0))
    lval = (l0, l1, l2)
    for k, (a, b) in enumerate(pairs):
        out[:, 3 + k] = 4 * (lval[a][:, None] * g[b] + lval[b][:, None] * g[a])
    return out


def edge_basis(degree, t):
    """Trace basis on an edge parametrized by t in [0, 1]."""
    t = np.atleast_1d(t)
    if degree == 1:
        return np.stack([1 - t, t], axis=1)
    return np.stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)],
                    axis=1)


@dataclass
class SpaceEdge:
    nodes: np.ndarray     # space node ids (2 for P1, 3 with midpoint for P2)
    verts: tuple          # cut-mesh vertex ids (v0, v1)
    tag: str
    cell: int             # local index of the adjacent cell in the space
    normal: np.ndarray    # outward unit normal of the submesh
    length: float


class FESpace:
    """Vector or scalar Lagrange space on the inside submesh of a CutMesh."""

    def __init__(self, cm, boundary, degree=2, components=2):
        if degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        self.cm = cm
        self.degree = degree
        self.components = components
        cells = cm.sub_triangles[cm.inside]
        self.cell_ids = np.nonzero(cm.inside)[0]

        used = np.unique(cells)
        vmap = -np.ones(len(cm.vertices), dtype=int)
        vmap[used] = np.arange(len(used))
        self.vmap = vmap
        coords = [cm.vertices[used]]
        nn = len(used)

        tris = vmap[cells]
        if degree == 2:
            raw = np.concatenate([cells[:, [0, 1]], cells[:, [1, 2]],
                                  cells[:, [2, 0]]])
            raw.sort(axis=1)
            edges, inv = np.unique(raw, axis=0, return_inverse=True)
            mid_ids = nn + np.arange(len(edges))
            coords.append(cm.vertices[edges].mean(axis=1))
            nn += len(edges)
            emap = {tuple(e): mid_ids[i] for i, e in enumerate(edges)}
            self._edge_mid = emap
            mids = inv.reshape(3, -1).T
            self.cell_nodes = np.column_stack([tris, nn - len(edges) + mids])
        else:
            self._edge_mid = {}
            self.cell_nodes = tris

        self.node_coords = np.vstack(coords)
        self.nnodes = nn
        self.ndof = nn * components

        v = cm.vertices
        e1 = v[cells[:, 1]] - v[cells[:, 0]]
        e2 = v[cells[:, 2]] - v[cells[:, 0]]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            raise SolverError("inverted element in the submesh")
        self.detJ = det
        inv_jt = np.empty((len(cells), 2, 2))
        inv_jt[:, 0, 0] = e2[:, 1]
        inv_jt[:, 0, 1] = -e1[:, 1]
        inv_jt[:, 1, 0] = -e2[:, 0]
        inv_jt[:, 1, 1] = e1[:, 0]
        self.invJT = inv_jt / det[:, None, None]
        self.cell_coords = v[cells]

        self._cell_of_sub = {int(s): i for i, s in enumerate(self.cell_ids)}
        self.edges = [self._make_edge(b) for b in boundary]
        self.dirichlet_dofs = self._dirichlet_dofs()

        # quadrature caches
        self.qp_bary = _TRI_QP
        self.qp_w = _TRI_QW
        self.basis_qp = p_basis(degree, _TRI_QP)
        ref_g = p_basis_grad(degree, _TRI_QP)
        # physical gradients (cells, qp, basis, 2)
        self.grad_qp = np.einsum("cij,qbj->cqbi", self.invJT, ref_g)

    # -- construction helpers ------------------------------------------------

    def _make_edge(self, b):
        n0, n1 = self.vmap[b.v0], self.vmap[b.v1]
        nodes = [n0, n1]
        if self.degree == 2:
            nodes.append(self._edge_mid[tuple(sorted((b.v0, b.v1)))])
        cell = self._cell_of_sub[b.sub_tri]
        p0 = self.cm.vertices[b.v0]
        p1 = self.cm.vertices[b.v1]
        tangent = p1 - p0
        length = float(np.hypot(*tangent))
        normal = np.array([tangent[1], -tangent[0]]) / length
        centroid = self.cell_coords[cell].mean(axis=0)
        if np.dot(normal, 0.5 * (p0 + p1) - centroid) < 0:
            normal = -normal
        return SpaceEdge(np.asarray(nodes), (b.v0, b.v1), b.tag, cell,
                         normal, length)

    def _dirichlet_dofs(self):
        nodes = sorted({int(n) for e in self.edges if e.tag == DIRICHLET
                        for n in e.nodes})
        dofs = [n * self.components + c for n in nodes
                for c in range(self.components)]
        return np.asarray(dofs, dtype=int)

    # -- evaluation helpers --------------------------------------------------

    def dofs_of(self, cell):
        nodes = self.cell_nodes[cell]
        c = self.components
        return (nodes[:, None] * c + np.arange(c)).ravel()

    def edge_points(self, edge, t=None):
        """Physical quadrature points and scaled weights along an edge."""
        t = _EDGE_QP if t is None else np.atleast_1d(t)
        p0 = self.cm.vertices[edge.verts[0]]
        p1 = self.cm.vertices[edge.verts[1]]
        x = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
        w = _EDGE_QW * edge.length if t is _EDGE_QP else None
        return x, w, t

    def edge_values(self, edge, u, t=None):
        """Values of a vector dof field at points of an edge."""
        _, _, t = self.edge_points(edge, t)
        nb = edge_basis(self.degree, t)
        c = self.components
        un = u.reshape(-1, c)[edge.nodes]
        return nb @ un

    def cell_values_grads_at(self, cell, pts):
        """Field values and gradients of a dof vector evaluator at points.

        Returns a closure-friendly pair (basis, grads) where basis has shape
        (np, nb) and grads (np, nb, 2) in physical coordinates.
        """
        lam = self._bary(cell, pts)
        basis = p_basis(self.degree, lam)
        ref_g = p_basis_grad(self.degree, lam)
        grads = np.einsum("ij,pbj->pbi", self.invJT[cell], ref_g)
        return basis, grads

    def _bary(self, cell, pts):
        a = self.cell_coords[cell][0]
        m = np.column_stack([self.cell_coords[cell][1] - a,
                             self.cell_coords[cell][2] - a])
        loc = np.linalg.solve(m, (np.atleast_2d(pts) - a).T).T
        return np.column_stack([1 - loc.sum(axis=1), loc])

    def eval_field(self, u, cell, pts):
        basis, grads = self.cell_values_grads_at(cell, pts)
        un = u.reshape(-1, self.components)[self.cell_nodes[cell]]
        vals = np.einsum("pb,bc->pc", basis, un)
        grd = np.einsum("pbi,bc->pci", grads, un)
        return vals, grd  # (np, c), (np, c, 2): grd[p, c, i] = d u_c / d x_i

    def interior_volume(self):
        return float(0.5 * self.detJ.sum())

    def tagged_edges(self, tag):
        return [e for e in self.edges if e.tag == tag]


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _scatter(space, ke):
    """Assemble per-cell dense blocks (nc, nd, nd) into CSR."""
    nc, nd, _ = ke.shape
    dofs = np.empty((nc, nd), dtype=int)
    for c in range(nc):
        dofs[c] = space.dofs_of(c)
    rows = np.repeat(dofs, nd, axis=1).ravel()
    cols = np.tile(dofs, (1, nd)).ravel()
    a = sp.coo_matrix((ke.ravel(), (rows, cols)),
                      shape=(space.ndof, space.ndof))
    return a.tocsr()


def assemble_elasticity(space: FESpace, mat: MaterialParams):
    """Stiffness of the isotropic linear elasticity bilinear form."""
    if space.components != 2:
        raise ValueError("elasticity needs a 2-component space")
    lam, mu = mat.lam, mat.mu
    g = space.grad_qp                      # (nc, nq, nb, 2)
    w = (space.qp_w[None, :] * 0.5 * space.detJ[:, None])  # (nc, nq)
    # K[(a,i),(b,j)] = int mu (delta_ij g_a.g_b + g_a[j] g_b[i])
    #                      + lam g_a[i] g_b[j]
    term_gg = np.einsum("cq,cqai,cqbi->cab", w, g, g)
    cross = np.einsum("cq,cqaj,cqbi->cajbi", w, g, g)
    nc, _, nb, _ = g.shape
    ke = np.zeros((nc, nb, 2, nb, 2))
    for i in range(2):
        ke[:, :, i, :, i] += mu * term_gg
    for i in range(2):
        for j in range(2):
            ke[:, :, i, :, j] += mu * cross[:, :, j, :, i]
            ke[:, :, i, :, j] += lam * cross[:, :, i, :, j]
    return _scatter(space, ke.reshape(nc, 2 * nb, 2 * nb))


def assemble_load(space: FESpace, load: LoadSpec, neumann_edges=None):
    """Right-hand side of the equilibrium problem: volume force + traction."""
    rhs = np.zeros(space.ndof)
    f = np.asarray(load.f, dtype=float)
    if np.any(f != 0):
        w = space.qp_w[None, :] * 0.5 * space.detJ[:, None]
        fe = np.einsum("cq,qb,i->cbi", w, space.basis_qp, f)
        nc, nb, _ = fe.shape
        for c in range(nc):
            rhs[space.dofs_of(c)] += fe[c].ravel()
    tau = np.asarray(load.tau, dtype=float)
    edges = neumann_edges if neumann_edges is not None \
        else space.tagged_edges(NEUMANN)
    if np.any(tau != 0):
        for e in edges:
            _, w, t = space.edge_points(e)
            nb = edge_basis(space.degree, t)
            fe = np.einsum("q,qb,i->bi", w, nb, tau)
            dofs = (e.nodes[:, None] * 2 + np.arange(2)).ravel()
            rhs[dofs] += fe.ravel()
    return rhs


def assemble_boundary_operator(space: FESpace, edges, coeff):
    """PSD boundary operator  v, w -> sum_edges int (C(x) w) . v.

    ``coeff(x, edge)`` returns a (nq, 2, 2) symmetric PSD matrix per
    quadrature point.
    """
    rows, cols, vals = [], [], []
    for e in edges:
        x, w, t = space.edge_points(e)
        nb = edge_basis(space.degree, t)
        c = np.asarray(coeff(x, e))
        ke = np.einsum("q,qa,qb,qij->aibj", w, nb, nb, c)
        dofs = (e.nodes[:, None] * 2 + np.arange(2)).ravel()
        nd = len(dofs)
        rows.append(np.repeat(dofs, nd))
        cols.append(np.tile(dofs, nd))
        vals.append(ke.reshape(nd, nd).ravel())
    if not rows:
        return sp.csr_matrix((space.ndof, space.ndof))
    a = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(space.ndof, space.ndof))
    return a.tocsr()


def assemble_scalar_h1(space: FESpace, alpha: float):
    """Stiffness + alpha * mass for a scalar space (H^1 inner product)."""
    if space.components != 1:
        raise ValueError("scalar assembly needs a 1-component space")
    g = space.grad_qp
    w = space.qp_w[None, :] * 0.5 * space.detJ[:, None]
    ke = np.einsum("cq,cqai,cqbi->cab", w, g, g)
    ke += alpha * np.einsum("cq,qa,qb->cab", w, space.basis_qp,
                            space.basis_qp)
    return _scatter(space, ke)


def apply_dirichlet(A, b, space_or_dofs):
    """Symmetric elimination of homogeneous Dirichlet dofs.

    Rows and columns are zeroed, the diagonal set to one and the right-hand
    side entries to zero, so the reduced system stays SPD.
    """
    dofs = getattr(space_or_dofs, "dirichlet_dofs", space_or_dofs)
    dofs = np.asarray(dofs, dtype=int)
    n = A.shape[0]
    if len(dofs) == 0:
        return A.copy(), b.copy()
    m = np.ones(n)
    m[dofs] = 0.0
    dm = sp.diags(m)
    a2 = dm @ A @ dm + sp.diags(1.0 - m)
    b2 = b * m
    return a2.tocsr(), b2


def solve_spd(A, b, rel_tol=1e-12, max_iter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients for SPD systems.

    Returns (x, iterations).  Raises SolverError on stagnation or when a
    direction of nonpositive curvature reveals an indefinite operator.
    """
    n = A.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), 0
    if max_iter is None:
        max_iter = max(1000, 20 * n)
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("nonpositive diagonal entry; operator not SPD")
    minv = 1.0 / d
    x = np.zeros(n) if x0 is None else x0.copy()
    r = b - A @ x
    z = minv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        ap = A @ p
        pap = p @ ap
        if pap <= 0:
            raise SolverError("negative curvature; operator not SPD")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= rel_tol * bnorm:
            return x, it
        z = minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not converge in {max_iter} iterations")


def h1_norm(space: FESpace, u):
    """Full H^1 norm of a dof vector: (sum_c |grad u_c|^2 + u_c^2)^(1/2)."""
    w = space.qp_w[None, :] * 0.5 * space.detJ[:, None]
    un = u.reshape(-1, space.components)[space.cell_nodes]  # (nc, nb, c)
    vals = np.einsum("qb,cbk->cqk", space.basis_qp, un)
    grads = np.einsum("cqbi,cbk->cqki", space.grad_qp, un)
    total = np.einsum("cq,cqk->", w, vals ** 2)
    total += np.einsum("cq,cqki->", w, grads ** 2)
    return float(np.sqrt(total))


def export_matrix_market(path, A):
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))
