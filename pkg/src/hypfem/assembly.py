"""Discrete operators: lumped masses, transport coefficients, cell forms.

All integrals are piecewise polynomial of degree <= 2 on P1 elements, so
closed-form quadrature is exact everywhere.  Assembly iterates cells and
edges in ascending index order, which makes the result bitwise
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, Stencils, node_stencils


@dataclass(frozen=True)
class MeshMetrics:
    """Quantities entering the a-priori CFL bound."""

    h_min: float
    mu_min: float
    mu_max: float
    theta_min: float


@dataclass(frozen=True)
class AssembledOperators:
    """Immutable operator bundle for one mesh.

    Attributes
    ----------
    m : (N,) array
        Lumped masses, m_i = integral of shape function i.
    c : tuple of (N, N) CSR matrices
        One sparse matrix per space dimension; entry (i, j) of c[d] is
        component d of the transport vector c_ij.
    bk : (M, n_K, n_K) array
        Per-cell graph-Laplacian-like bilinear forms.
    metrics : MeshMetrics
    pair_i, pair_j : (E,) int arrays
        Unordered stencil pairs with i < j.
    c_ij, c_ji : (E, dim) arrays
        Transport vectors for both orientations of each pair.
    pair_bk_sum : (E,) array
        Sum over shared cells T of -b_T(phi_j, phi_i) = theta_T |T|.
    cell_pair_index : (M, n_pairs_per_cell) int array
        For each cell, indices into the pair arrays of its local pairs.
    boundary_colsum : (N, dim) array
        Column sums of c; the discrete boundary-flux weights (zero for
        interior nodes and on periodic meshes).
    stencils : Stencils
    """

    m: np.ndarray
    c: tuple
    bk: np.ndarray
    metrics: MeshMetrics
    pair_i: np.ndarray
    pair_j: np.ndarray
    c_ij: np.ndarray
    c_ji: np.ndarray
    pair_bk_sum: np.ndarray
    cell_pair_index: np.ndarray
    boundary_colsum: np.ndarray
    stencils: Stencils

    @property
    def n_nodes(self) -> int:
        return len(self.m)

    @property
    def n_pairs(self) -> int:
        return len(self.pair_i)


def _cell_gradients(mesh: Mesh) -> np.ndarray:
    """Constant P1 shape-function gradients per cell, shape (M, d+1, d)."""
    x = mesh.node_coords
    cells = mesh.cells
    if mesh.dim == 1:
        h = mesh.cell_measures()
        grads = np.empty((mesh.n_cells, 2, 1))
        grads[:, 0, 0] = -1.0 / h
        grads[:, 1, 0] = 1.0 / h
        return grads
    p0, p1, p2 = x[cells[:, 0]], x[cells[:, 1]], x[cells[:, 2]]
    d1 = p1 - p0
    d2 = p2 - p0
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]  # 2|K|
    grads = np.empty((mesh.n_cells, 3, 2))
    # grad of the barycentric coordinate at vertex k: rotated opposite edge / 2|K|
    for k, (a, b) in enumerate(((1, 2), (2, 0), (0, 1))):
        edge = x[cells[:, b]] - x[cells[:, a]]
        grads[:, k, 0] = -edge[:, 1] / area2
        grads[:, k, 1] = edge[:, 0] / area2
    return grads


def assemble_lumped_mass(mesh: Mesh) -> np.ndarray:
    """m_i as the cellwise sum of |K|/(d+1) over incident cells."""
    m = np.zeros(mesh.n_nodes)
    contrib = mesh.cell_measures() / (mesh.dim + 1)
    for k in range(mesh.dim + 1):
        np.add.at(m, mesh.cells[:, k], contrib)
    return m


def assemble_cij(mesh: Mesh):
    """Sparse transport matrices, c_ij = int phi_i grad(phi_j).

    Returns one CSR matrix per space dimension.  Explicit zeros are kept
    on the full stencil pattern so every matrix shares it.
    """
    grads = _cell_gradients(mesh)
    measures = mesh.cell_measures()
    nk = mesh.dim + 1
    weight = measures / nk  # int_K phi_i, same for every i in K
    rows = np.repeat(mesh.cells, nk, axis=1).ravel()          # i index
    cols = np.tile(mesh.cells, (1, nk)).ravel()               # j index
    mats = []
    n = mesh.n_nodes
    for d in range(mesh.dim):
        block = np.broadcast_to(grads[:, None, :, d], (mesh.n_cells, nk, nk))
        vals = (weight[:, None, None] * block).ravel()
        a = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        a.sort_indices()
        mats.append(a)
    return tuple(mats)


def assemble_bk(mesh: Mesh) -> np.ndarray:
    """Per-cell forms: |K| on the diagonal, -theta_K |K| off it."""
    nk = mesh.dim + 1
    theta = 1.0 / (nk - 1)
    measures = mesh.cell_measures()
    base = np.full((nk, nk), -theta)
    np.fill_diagonal(base, 1.0)
    return measures[:, None, None] * base[None, :, :]


def mesh_metrics(mesh: Mesh, stencils: Stencils | None = None) -> MeshMetrics:
    """h_min, mu bounds, and theta_min for the CFL estimate.

    mu_min = mu_max = 1/(d+1) holds exactly because only simplices are
    supported.
    """
    if stencils is None:
        stencils = node_stencils(mesh)
    grads = _cell_gradients(mesh)
    gnorm = np.linalg.norm(grads, axis=2)  # (M, d+1)
    h_min = np.inf
    cells = mesh.cells
    for k, cell in enumerate(cells):
        worst = 0.0
        for a in range(len(cell)):
            for b in range(len(cell)):
                if a == b:
                    continue
                i, j = int(cell[a]), int(cell[b])
                # sup of |grad phi_i| over S_ij spans every shared cell
                for t in stencils.shared_cells[(i, j)]:
                    pos = np.nonzero(cells[t] == i)[0][0]
                    worst = max(worst, gnorm[t, pos])
        h_min = min(h_min, 1.0 / worst)
    nk = mesh.dim + 1
    mu = 1.0 / nk
    return MeshMetrics(h_min=float(h_min), mu_min=mu, mu_max=mu,
                       theta_min=1.0 / (nk - 1))


def assemble_operators(mesh: Mesh, stencils: Stencils | None = None) -> AssembledOperators:
    """Assemble every operator the solver needs, plus edge-level views."""
    if stencils is None:
        stencils = node_stencils(mesh)
    m = assemble_lumped_mass(mesh)
    c = assemble_cij(mesh)
    bk = assemble_bk(mesh)
    metrics = mesh_metrics(mesh, stencils)

    pairs = sorted(
        (i, j) for (i, j) in stencils.shared_cells if i < j
    )
    pair_i = np.array([p[0] for p in pairs], dtype=np.int64)
    pair_j = np.array([p[1] for p in pairs], dtype=np.int64)
    dim = mesh.dim
    e = len(pairs)
    c_ij = np.empty((e, dim))
    c_ji = np.empty((e, dim))
    for d in range(dim):
        cd = c[d]
        c_ij[:, d] = np.asarray(cd[pair_i, pair_j]).ravel()
        c_ji[:, d] = np.asarray(cd[pair_j, pair_i]).ravel()

    theta = 1.0 / dim if dim == 2 else 1.0
    measures = mesh.cell_measures()
    pair_index = {p: k for k, p in enumerate(pairs)}
    pair_bk_sum = np.zeros(e)
    for (i, j), cells_list in stencils.shared_cells.items():
        if i < j:
            k = pair_index[(i, j)]
            pair_bk_sum[k] = theta * sum(measures[t] for t in cells_list)

    nk = dim + 1
    locals_ = [(a, b) for a in range(nk) for b in range(a + 1, nk)]
    cell_pair_index = np.empty((mesh.n_cells, len(locals_)), dtype=np.int64)
    for t, cell in enumerate(mesh.cells):
        for q, (a, b) in enumerate(locals_):
            i, j = int(cell[a]), int(cell[b])
            cell_pair_index[t, q] = pair_index[(min(i, j), max(i, j))]

    colsum = np.stack([np.asarray(cd.sum(axis=0)).ravel() for cd in c], axis=1)
    return AssembledOperators(
        m=m, c=c, bk=bk, metrics=metrics,
        pair_i=pair_i, pair_j=pair_j, c_ij=c_ij, c_ji=c_ji,
        pair_bk_sum=pair_bk_sum, cell_pair_index=cell_pair_index,
        boundary_colsum=colsum, stencils=stencils,
    )
