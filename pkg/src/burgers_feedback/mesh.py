"""P1 meshes: partitions of [0, 1] and structured triangulations of the unit square."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Partition ``0 = x_0 < x_1 < ... < x_N = 1`` with elements ``(j-1, j)``."""

    nodes: NDArray[np.float64]
    elements: NDArray[np.int64] = field(init=False)
    h: float = field(init=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a 1D mesh needs at least two nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError("nodes must start at 0 and end at 1")
        lengths = np.diff(nodes)
        if np.any(lengths <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        nodes.setflags(write=False)
        elements = np.column_stack([np.arange(nodes.size - 1), np.arange(1, nodes.size)])
        elements.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "h", float(lengths.max()))

    dim = 1

    @property
    def num_nodes(self) -> int:
        return self.nodes.size

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def lengths(self) -> NDArray[np.float64]:
        return np.diff(self.nodes)


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Conforming triangulation of the unit square.

    Triangles are stored counter-clockwise; ``boundary_edges`` walks the
    boundary once counter-clockwise, starting at the origin.
    """

    vertices: NDArray[np.float64]
    triangles: NDArray[np.int64]
    boundary_edges: NDArray[np.int64]
    h: float = field(init=False)

    dim = 2

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.areas <= 0.0):
            raise ValueError("triangles must have positive (counter-clockwise) area")
        p = self.vertices[self.triangles]
        diam = np.max(
            [np.linalg.norm(p[:, i] - p[:, j], axis=1) for i, j in ((0, 1), (1, 2), (2, 0))],
            axis=0,
        )
        object.__setattr__(self, "h", float(diam.max()))

    @property
    def num_nodes(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_elements(self) -> int:
        return self.triangles.shape[0]

    @property
    def areas(self) -> NDArray[np.float64]:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def edge_lengths(self) -> NDArray[np.float64]:
        p = self.vertices[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)


Mesh = Mesh1D | Mesh2D


def build_uniform_1d(n: int) -> Mesh1D:
    """Uniform partition of [0, 1] into ``n`` elements."""
    if n < 1:
        raise ValueError(f"element count must be positive, got {n}")
    nodes = np.arange(n + 1, dtype=float) / n
    return Mesh1D(nodes)


def build_structured_2d(n: int) -> Mesh2D:
    """Uniform ``n x n`` grid on the unit square, each cell cut along its
    lower-left to upper-right diagonal.

    Vertex ``(i, j)`` (column ``i``, row ``j``) has index ``j * (n + 1) + i``,
    so the vertices of this mesh are a subset of those of ``build_structured_2d(2 * n)``.
    """
    if n < 1:
        raise ValueError(f"subdivision count must be positive, got {n}")
    ticks = np.arange(n + 1, dtype=float) / n
    xx, yy = np.meshgrid(ticks, ticks)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    sw, se, ne, nw = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
    lower = np.column_stack([sw, se, ne])
    upper = np.column_stack([sw, ne, nw])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    loop = _boundary_loop(n)
    edges = np.column_stack([loop, np.roll(loop, -1)])
    return Mesh2D(vertices, triangles, edges)


def _boundary_loop(n: int) -> NDArray[np.int64]:
    k = np.arange(n)
    bottom = k
    right = n + k * (n + 1)
    top = n * (n + 1) + (n - k)
    left = (n - k) * (n + 1)
    return np.concatenate([bottom, right, top, left]).astype(np.int64)


def boundary_nodes(mesh: Mesh) -> list[int]:
    """Boundary node indices: ``[0, N]`` in 1D, the counter-clockwise loop in 2D."""
    if isinstance(mesh, Mesh1D):
        return [0, mesh.num_nodes - 1]
    return [int(v) for v in mesh.boundary_edges[:, 0]]


def interpolate(mesh: Mesh, func) -> NDArray[np.float64]:
    """Nodal interpolant of ``func`` (called with coordinate arrays)."""
    if isinstance(mesh, Mesh1D):
        return np.asarray(func(mesh.nodes), dtype=float) * np.ones(mesh.num_nodes)
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    return np.asarray(func(x, y), dtype=float) * np.ones(mesh.num_nodes)


def coarse_node_indices(coarse: Mesh, fine: Mesh) -> NDArray[np.int64]:
    """Indices into ``fine`` of the nodes of a nested ``coarse`` uniform mesh."""
    if type(coarse) is not type(fine):
        raise TypeError("meshes must have the same dimension")
    if isinstance(coarse, Mesh1D):
        nc, nf = coarse.num_elements, fine.num_elements
        if nf % nc:
            raise ValueError(f"mesh with {nc} elements does not nest in one with {nf}")
        return np.arange(nc + 1) * (nf // nc)
    nc = round(np.sqrt(coarse.num_elements / 2))
    nf = round(np.sqrt(fine.num_elements / 2))
    if nf % nc:
        raise ValueError(f"{nc}x{nc} grid does not nest in {nf}x{nf} grid")
    r = nf // nc
    j, i = np.divmod(np.arange(coarse.num_nodes), nc + 1)
    return (j * r) * (nf + 1) + i * r


def write_mesh(mesh: Mesh, path: str | Path) -> None:
    """Plain-text dump: header ``<num_nodes> <num_elements>``, one vertex per
    line (``x`` or ``x y``), then one element per line of vertex indices."""
    coords = mesh.nodes[:, None] if isinstance(mesh, Mesh1D) else mesh.vertices
    cells = mesh.elements if isinstance(mesh, Mesh1D) else mesh.triangles
    lines = [f"{mesh.num_nodes} {mesh.num_elements}"]
    lines += [" ".join(f"{c:.17g}" for c in row) for row in coords]
    lines += [" ".join(str(int(v)) for v in row) for row in cells]
    Path(path).write_text("\n".join(lines) + "\n")
