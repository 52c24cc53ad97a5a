import numpy as np
import pytest

from hypfem.assembly import (
    assemble_bk,
    assemble_cij,
    assemble_lumped_mass,
    assemble_operators,
    mesh_metrics,
)
from hypfem.mesh import build_interval_mesh, build_triangle_mesh, node_stencils


def dense_cij_oracle(mesh):
    """Independent slow assembly of int phi_i grad(phi_j), one loop per cell.

    Gradients come from solving the local vertex interpolation system,
    and int_K phi_i = |K|/(d+1) because phi_i is linear with value 1 at
    one vertex and 0 at the others.
    """
    n = mesh.n_nodes
    out = np.zeros((n, n, mesh.dim))
    measures = mesh.cell_measures()
    for t, cell in enumerate(mesh.cells):
        pts = mesh.node_coords[cell]
        if mesh.dim == 1 and mesh.periodic and pts[1, 0] < pts[0, 0]:
            pts = pts.copy()
            pts[1, 0] += mesh.extent
        nk = mesh.dim + 1
        # rows [1, x, (y)] @ coeffs = e_k gives the barycentric functions
        vander = np.hstack([np.ones((nk, 1)), pts])
        coeffs = np.linalg.solve(vander, np.eye(nk))
        grads = coeffs[1:, :].T  # (nk, dim)
        for a in range(nk):
            for b in range(nk):
                out[cell[a], cell[b]] += measures[t] / nk * grads[b]
    return out


def test_lumped_mass_interval():
    m = build_interval_mesh(10, (0.0, 1.0))
    mass = assemble_lumped_mass(m)
    h = 0.1
    assert mass[0] == pytest.approx(h / 2)
    assert mass[-1] == pytest.approx(h / 2)
    assert np.allclose(mass[1:-1], h)
    assert mass.sum() == pytest.approx(1.0)


def test_lumped_mass_triangle_sums_to_area():
    m = build_triangle_mesh(6, 5, ((0.0, 2.0), (0.0, 1.0)), perturbation=0.1, seed=4)
    mass = assemble_lumped_mass(m)
    assert np.all(mass > 0.0)
    assert mass.sum() == pytest.approx(2.0, rel=1e-13)


def test_cij_interval_uniform_values():
    m = build_interval_mesh(8, (0.0, 1.0))
    (c,) = assemble_cij(m)
    dense = c.toarray()
    for i in range(1, 8):
        assert dense[i, i + 1] == pytest.approx(0.5)
        assert dense[i, i - 1] == pytest.approx(-0.5)
        assert dense[i, i] == pytest.approx(0.0)
    assert dense[0, 0] == pytest.approx(-0.5)
    assert dense[0, 1] == pytest.approx(0.5)


def test_cij_row_sums_vanish():
    for mesh in (
        build_interval_mesh(9, (0.0, 1.0)),
        build_interval_mesh(9, (0.0, 1.0), periodic=True),
        build_triangle_mesh(5, 5, ((0.0, 1.0), (0.0, 1.0)), perturbation=0.15, seed=1),
    ):
        for c in assemble_cij(mesh):
            rows = np.asarray(c.sum(axis=1)).ravel()
            assert np.abs(rows).max() < 1e-14


def test_cij_matches_dense_oracle():
    for mesh in (
        build_interval_mesh(6, (0.0, 2.0)),
        build_interval_mesh(6, (0.0, 2.0), periodic=True),
        build_triangle_mesh(4, 4, ((0.0, 1.0), (-1.0, 1.0)), perturbation=0.2, seed=9),
    ):
        oracle = dense_cij_oracle(mesh)
        for d, c in enumerate(assemble_cij(mesh)):
            assert np.abs(c.toarray() - oracle[:, :, d]).max() < 1e-13


def test_cij_antisymmetric_for_interior_pairs():
    mesh = build_triangle_mesh(5, 5, ((0.0, 1.0), (0.0, 1.0)), perturbation=0.1, seed=2)
    ops = assemble_operators(mesh)
    boundary = mesh.boundary_nodes
    interior_pair = ~(
        np.isin(ops.pair_i, list(boundary)) | np.isin(ops.pair_j, list(boundary))
    )
    assert interior_pair.any()
    assert np.abs(ops.c_ij[interior_pair] + ops.c_ji[interior_pair]).max() < 1e-15


def test_boundary_colsum_is_boundary_flux_weight():
    m = build_interval_mesh(10, (0.0, 1.0))
    ops = assemble_operators(m)
    # column sums equal the outward boundary values of the shape functions
    assert ops.boundary_colsum[0, 0] == pytest.approx(-1.0)
    assert ops.boundary_colsum[-1, 0] == pytest.approx(1.0)
    assert np.abs(ops.boundary_colsum[1:-1]).max() < 1e-14

    per = build_interval_mesh(10, (0.0, 1.0), periodic=True)
    ops_per = assemble_operators(per)
    assert np.abs(ops_per.boundary_colsum).max() < 1e-14


def test_bk_structure():
    m1 = build_interval_mesh(4, (0.0, 1.0))
    bk = assemble_bk(m1)
    h = 0.25
    assert bk.shape == (4, 2, 2)
    assert np.allclose(bk[:, 0, 0], h)
    assert np.allclose(bk[:, 0, 1], -h)

    m2 = build_triangle_mesh(3, 3, ((0.0, 1.0), (0.0, 1.0)))
    bk2 = assemble_bk(m2)
    areas = m2.cell_measures()
    assert np.allclose(bk2[:, 1, 1], areas)
    assert np.allclose(bk2[:, 0, 2], -0.5 * areas)
    # off-diagonal weight theta_K makes every row sum to zero
    assert np.abs(bk2.sum(axis=2)).max() < 1e-15


def test_metrics_interval():
    m = build_interval_mesh(20, (0.0, 1.0))
    met = mesh_metrics(m)
    assert met.h_min == pytest.approx(0.05)
    assert met.mu_min == met.mu_max == pytest.approx(0.5)
    assert met.theta_min == pytest.approx(1.0)


def test_metrics_triangle_uniform():
    m = build_triangle_mesh(4, 4, ((0.0, 1.0), (0.0, 1.0)))
    met = mesh_metrics(m)
    # right triangles with legs h: largest gradient norm is sqrt(2)/h
    h = 0.25
    assert met.h_min == pytest.approx(h / np.sqrt(2.0))
    assert met.mu_min == met.mu_max == pytest.approx(1.0 / 3.0)
    assert met.theta_min == pytest.approx(0.5)


def test_operator_pair_views_consistent():
    mesh = build_triangle_mesh(4, 4, ((0.0, 1.0), (0.0, 1.0)), perturbation=0.1, seed=5)
    ops = assemble_operators(mesh)
    assert np.all(ops.pair_i < ops.pair_j)
    for d in range(mesh.dim):
        dense = ops.c[d].toarray()
        assert np.allclose(ops.c_ij[:, d], dense[ops.pair_i, ops.pair_j])
        assert np.allclose(ops.c_ji[:, d], dense[ops.pair_j, ops.pair_i])

    st = node_stencils(mesh)
    measures = mesh.cell_measures()
    for k in range(ops.n_pairs):
        i, j = int(ops.pair_i[k]), int(ops.pair_j[k])
        shared = st.shared_cells[(i, j)]
        expected = 0.5 * sum(measures[t] for t in shared)
        assert ops.pair_bk_sum[k] == pytest.approx(expected)

    # every local cell pair points back at a pair containing its nodes
    for t, cell in enumerate(mesh.cells):
        for q in ops.cell_pair_index[t]:
            i, j = int(ops.pair_i[q]), int(ops.pair_j[q])
            assert i in cell and j in cell
