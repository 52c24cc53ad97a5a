"""Interval meshes and triangulations with P1 Lagrange node stencils.

Only 1D segments and 2D triangles are supported.  Meshes are immutable
after construction and safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COVER_RTOL = 1e-12


def _cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """z-component of the cross product of batches of 2D vectors."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class MeshError(ValueError):
    """Invalid mesh data or construction parameters."""


@dataclass(frozen=True)
class Mesh:
    """Geometric substrate: node coordinates plus cell connectivity.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    node_coords : (N, dim) float array
        Node positions.
    cells : (M, dim+1) int array
        Vertex indices per cell (segments or triangles), positively
        oriented.
    periodic : bool
        1D only; node 0 is the wrap-around image of the last node.
    boundary_nodes : frozenset of int
        Node indices on the domain boundary (empty when periodic).
    extent : float or None
        Domain length for periodic 1D meshes; needed because the
        wrap-around cell measure cannot be read off the coordinates.
    """

    dim: int
    node_coords: np.ndarray
    cells: np.ndarray
    periodic: bool = False
    boundary_nodes: frozenset = frozenset()
    extent: float | None = None

    def __post_init__(self):
        coords = np.asarray(self.node_coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        coords = np.ascontiguousarray(coords)
        cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.int64))
        object.__setattr__(self, "node_coords", coords)
        object.__setattr__(self, "cells", cells)
        if self.dim not in (1, 2):
            raise MeshError(f"unsupported dimension {self.dim}")
        if coords.shape[1] != self.dim:
            raise MeshError("coordinate array does not match mesh dimension")
        if cells.shape[1] != self.dim + 1:
            raise MeshError("cell arity does not match mesh dimension")
        if self.periodic and self.dim != 1:
            raise MeshError("periodic identification is 1D-only")
        if self.periodic and self.extent is None:
            raise MeshError("periodic mesh requires an explicit extent")
        n = coords.shape[0]
        if cells.min(initial=0) < 0 or cells.max(initial=-1) >= n:
            raise MeshError("cell refers to a node index out of range")
        measures = self.cell_measures()
        if np.any(measures <= 0.0):
            bad = int(np.argmax(measures <= 0.0))
            raise MeshError(f"cell {bad} has nonpositive measure {measures[bad]}")
        total = measures.sum()
        dom = self.domain_measure()
        if abs(total - dom) > COVER_RTOL * max(abs(dom), 1.0):
            raise MeshError(
                f"cells do not tile the domain: sum |K| = {total}, |domain| = {dom}"
            )

    @property
    def n_nodes(self) -> int:
        return self.node_coords.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def cell_measures(self) -> np.ndarray:
        """Lengths (1D) or areas (2D) of all cells, positive by construction."""
        x = self.node_coords
        if self.dim == 1:
            lengths = x[self.cells[:, 1], 0] - x[self.cells[:, 0], 0]
            if self.periodic:
                # the wrap-around cell closes the torus
                wrap = lengths < 0.0
                lengths = np.where(wrap, lengths + self.extent, lengths)
            return lengths
        p0 = x[self.cells[:, 0]]
        p1 = x[self.cells[:, 1]]
        p2 = x[self.cells[:, 2]]
        return 0.5 * _cross2(p1 - p0, p2 - p0)

    def domain_measure(self) -> float:
        if self.dim == 1:
            if self.periodic:
                return float(self.extent)
            x = self.node_coords[:, 0]
            return float(x.max() - x.min())
        x = self.node_coords
        spans = x.max(axis=0) - x.min(axis=0)
        return float(spans[0] * spans[1])


@dataclass(frozen=True)
class Stencils:
    """Node adjacency I(S_i) in CSR layout plus shared-cell lists S_ij.

    ``indices[indptr[i]:indptr[i+1]]`` is the sorted list of nodes whose
    shape-function support overlaps that of node i (i itself included).
    ``shared_cells[(i, j)]`` lists the cells containing both i and j.
    """

    indptr: np.ndarray
    indices: np.ndarray
    shared_cells: dict = field(repr=False)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def n_nodes(self) -> int:
        return len(self.indptr) - 1


def build_interval_mesh(n_cells: int, bounds, periodic: bool = False) -> Mesh:
    """Uniform 1D mesh of [a, b] with ``n_cells`` segments.

    When periodic, node 0 and node ``n_cells`` are identified, leaving
    ``n_cells`` distinct nodes and a wrap-around cell.
    """
    if n_cells < 2:
        raise MeshError(f"need at least 2 cells, got {n_cells}")
    a, b = float(bounds[0]), float(bounds[1])
    if not b > a:
        raise MeshError(f"degenerate bounds [{a}, {b}]")
    xs = np.linspace(a, b, n_cells + 1)
    if periodic:
        coords = xs[:-1, None]
        cells = np.stack(
            [np.arange(n_cells), (np.arange(n_cells) + 1) % n_cells], axis=1
        )
        return Mesh(1, coords, cells, periodic=True, extent=b - a)
    cells = np.stack([np.arange(n_cells), np.arange(n_cells) + 1], axis=1)
    return Mesh(1, xs[:, None], cells, boundary_nodes=frozenset({0, n_cells}))


def build_triangle_mesh(nx: int, ny: int, bounds, perturbation: float = 0.0,
                        seed: int = 0) -> Mesh:
    """Structured rectangle triangulation with optional interior jitter.

    The rectangle is split into ``2*nx*ny`` triangles.  Interior nodes are
    moved by at most ``perturbation`` times the local spacing, drawn
    deterministically from ``seed``; boundary nodes stay put.  If the
    jitter inverts a triangle the perturbation is halved and the mesh
    rebuilt, at most 5 times.
    """
    if nx < 2 or ny < 2:
        raise MeshError(f"need nx, ny >= 2, got ({nx}, {ny})")
    if not 0.0 <= perturbation < 0.3:
        raise MeshError(f"perturbation must lie in [0, 0.3), got {perturbation}")
    (x0, x1), (y0, y1) = bounds
    if not (x1 > x0 and y1 > y0):
        raise MeshError(f"degenerate bounds {bounds}")
    hx = (x1 - x0) / nx
    hy = (y1 - y0) / ny

    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    base = np.stack([x0 + ii.ravel() * hx, y0 + jj.ravel() * hy], axis=1)
    interior = (ii.ravel() > 0) & (ii.ravel() < nx) & (jj.ravel() > 0) & (jj.ravel() < ny)

    def node(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    cells = np.array(tris, dtype=np.int64)

    boundary = frozenset(np.nonzero(~interior)[0].tolist())
    amp = perturbation
    for _ in range(6):
        rng = np.random.default_rng(seed)
        coords = base.copy()
        jitter = rng.uniform(-1.0, 1.0, size=base.shape)
        coords[interior, 0] += amp * hx * jitter[interior, 0]
        coords[interior, 1] += amp * hy * jitter[interior, 1]
        p0, p1, p2 = coords[cells[:, 0]], coords[cells[:, 1]], coords[cells[:, 2]]
        areas = 0.5 * _cross2(p1 - p0, p2 - p0)
        if np.all(areas > 0.0):
            return Mesh(2, coords, cells, boundary_nodes=boundary)
        amp *= 0.5
    raise MeshError("perturbation keeps inverting triangles after 5 halvings")


def node_stencils(mesh: Mesh) -> Stencils:
    """Extract I(S_i) = {j : i, j share a cell} and the shared-cell map."""
    n = mesh.n_nodes
    neigh = [set() for _ in range(n)]
    shared: dict = {}
    for k, cell in enumerate(mesh.cells):
        for i in cell:
            for j in cell:
                neigh[i].add(int(j))
                shared.setdefault((int(i), int(j)), []).append(k)
    indptr = np.zeros(n + 1, dtype=np.int64)
    chunks = []
    for i in range(n):
        s = np.array(sorted(neigh[i]), dtype=np.int64)
        chunks.append(s)
        indptr[i + 1] = indptr[i] + len(s)
    indices = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    shared = {k: tuple(v) for k, v in shared.items()}
    return Stencils(indptr=indptr, indices=indices, shared_cells=shared)


def write_mesh(mesh: Mesh, path) -> None:
    """Write the whitespace-separated ASCII mesh format.

    Line 1 is ``dim N M periodic`` (with the domain extent appended for
    periodic meshes), then N coordinate lines and M cell lines.
    """
    with open(path, "w") as fh:
        head = f"{mesh.dim} {mesh.n_nodes} {mesh.n_cells} {int(mesh.periodic)}"
        if mesh.periodic:
            head += f" {mesh.extent!r}"
        fh.write(head + "\n")
        for row in mesh.node_coords:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        for cell in mesh.cells:
            fh.write(" ".join(str(int(v)) for v in cell) + "\n")


def read_mesh(path) -> Mesh:
    """Parse the mesh text format written by :func:`write_mesh`."""
    with open(path) as fh:
        tokens = fh.readline().split()
        if len(tokens) not in (4, 5):
            raise MeshError(f"{path}: malformed header {tokens!r}")
        dim, n, m, per = int(tokens[0]), int(tokens[1]), int(tokens[2]), int(tokens[3])
        extent = float(tokens[4]) if len(tokens) == 5 else None
        coords = np.array(
            [[float(v) for v in fh.readline().split()] for _ in range(n)]
        )
        cells = np.array(
            [[int(v) for v in fh.readline().split()] for _ in range(m)],
            dtype=np.int64,
        )
    boundary: frozenset = frozenset()
    if not per:
        if dim == 1:
            x = coords[:, 0]
            boundary = frozenset({int(np.argmin(x)), int(np.argmax(x))})
        else:
            lo = coords.min(axis=0)
            hi = coords.max(axis=0)
            on = (
                np.isclose(coords[:, 0], lo[0]) | np.isclose(coords[:, 0], hi[0])
                | np.isclose(coords[:, 1], lo[1]) | np.isclose(coords[:, 1], hi[1])
            )
            boundary = frozenset(np.nonzero(on)[0].tolist())
    return Mesh(dim, coords, cells, periodic=bool(per), boundary_nodes=boundary,
                extent=extent)
