"""P1 finite-element operators for the controlled Burgers problem.

All matrices are ``scipy.sparse.csr_matrix`` with sorted column indices.
Integrals are exact for P1 data: element mass matrices are used wherever an
integrand is a product of linear functions, and the cubic boundary term uses
3-point Gauss-Legendre per edge (exact to degree 5).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from .mesh import Mesh, Mesh1D, Mesh2D

_GAUSS3_T, _GAUSS3_W = np.polynomial.legendre.leggauss(3)
# map to [0, 1]
_GAUSS3_T = 0.5 * (_GAUSS3_T + 1.0)
_GAUSS3_W = 0.5 * _GAUSS3_W


@dataclass(frozen=True)
class BoundaryParams:
    """Viscosity, steady state and feedback gains.

    ``c0``/``c1`` are the 1D gains at x=0 and x=1, ``c2`` the 2D gain.
    Gains not used by a problem may be left at their defaults.
    """

    nu: float
    w_d: float = 0.0
    c0: float = 1.0
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.w_d >= 0:
            raise ValueError(f"w_d must be non-negative, got {self.w_d}")
        for name in ("c0", "c1", "c2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


def _csr(rows, cols, vals, n) -> sp.csr_matrix:
    mat = sp.coo_matrix(
        (np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=(n, n)
    ).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def _pattern(cells):
    """Row/column index arrays for local (k x k) element matrices."""
    k = cells.shape[1]
    rows = np.repeat(cells, k, axis=1)
    cols = np.tile(cells, (1, k))
    return rows, cols


def _gradients(mesh: Mesh2D):
    """Areas and constant barycentric gradients, shape (T, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.areas
    # grad(lambda_i) = rot90(opposite edge) / (2|K|)
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * area[:, None, None])
    return area, grads


_LOCAL_MASS_1D = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
_LOCAL_MASS_2D = (np.ones((3, 3)) + np.eye(3)) / 12.0


def _local_mass(mesh: Mesh):
    """Element mass matrices, shape (E, k, k)."""
    if isinstance(mesh, Mesh1D):
        return mesh.lengths[:, None, None] * _LOCAL_MASS_1D
    return mesh.areas[:, None, None] * _LOCAL_MASS_2D


def _cells(mesh: Mesh):
    return mesh.elements if isinstance(mesh, Mesh1D) else mesh.triangles


def _direction_derivs(mesh: Mesh):
    """Derivative of each local basis function along the convection direction
    (d/dx in 1D, (1, 1) in 2D), shape (E, k)."""
    if isinstance(mesh, Mesh1D):
        inv = 1.0 / mesh.lengths
        return np.column_stack([-inv, inv])
    _, grads = _gradients(mesh)
    return grads.sum(axis=-1)


def _check_state(mesh: Mesh, U) -> NDArray[np.float64]:
    U = np.asarray(U, dtype=float)
    if U.shape != (mesh.num_nodes,):
        raise ValueError(f"state has shape {U.shape}, mesh has {mesh.num_nodes} nodes")
    return U


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Consistent mass matrix ``M[i, j] = (phi_j, phi_i)``."""
    rows, cols = _pattern(_cells(mesh))
    return _csr(rows, cols, _local_mass(mesh), mesh.num_nodes)


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """``A[i, j] = (grad phi_j, grad phi_i)`` (no viscosity factor)."""
    cells = _cells(mesh)
    if isinstance(mesh, Mesh1D):
        local = (1.0 / mesh.lengths)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
    else:
        area, grads = _gradients(mesh)
        local = area[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)
    rows, cols = _pattern(cells)
    return _csr(rows, cols, local, mesh.num_nodes)


def assemble_convection(mesh: Mesh) -> sp.csr_matrix:
    """``C[i, j] = (d phi_j, phi_i)`` with ``d`` the x-derivative in 1D and the
    (1, 1)-directional derivative in 2D. The caller scales by ``w_d``."""
    cells = _cells(mesh)
    k = cells.shape[1]
    measure = mesh.lengths if isinstance(mesh, Mesh1D) else mesh.areas
    # integral of a P1 basis function over its element is |K| / k
    local = (measure / k)[:, None, None] * _direction_derivs(mesh)[:, None, :]
    local = np.broadcast_to(local, (cells.shape[0], k, k))
    rows, cols = _pattern(cells)
    return _csr(rows, cols, local, mesh.num_nodes)


def burgers_term(mesh: Mesh, U) -> tuple[NDArray[np.float64], sp.csr_matrix]:
    """Residual ``r_i = (U dU, phi_i)`` of the quadratic convection and its
    Jacobian with respect to the nodal values of ``U``.

    On each element ``dU = sum_m b_m U_m`` is constant, so ``r_K = d M_K U_K``
    and ``J_K[i, m] = b_m (M_K U_K)_i + d M_K[i, m]``.
    """
    U = _check_state(mesh, U)
    cells = _cells(mesh)
    mass = _local_mass(mesh)
    b = _direction_derivs(mesh)
    Uk = U[cells]
    d = np.einsum("tj,tj->t", b, Uk)
    mu = np.einsum("tij,tj->ti", mass, Uk)
    local_res = d[:, None] * mu
    local_jac = mu[:, :, None] * b[:, None, :] + d[:, None, None] * mass

    res = np.zeros(mesh.num_nodes)
    np.add.at(res, cells, local_res)
    rows, cols = _pattern(cells)
    return res, _csr(rows, cols, local_jac, mesh.num_nodes)


def _feedback_poly(c, w_d, u, scale=1.0):
    """``scale * (c + w_d) u + (2 / (9 c)) u^3`` and its derivative."""
    value = scale * (c + w_d) * u + 2.0 / (9.0 * c) * u**3
    deriv = scale * (c + w_d) + 6.0 / (9.0 * c) * u**2
    return value, deriv


def boundary_feedback_1d(
    U, params: BoundaryParams
) -> tuple[NDArray[np.float64], sp.csr_matrix]:
    """Point feedback terms at x=0 (gain c0) and x=1 (gain c1)."""
    U = np.asarray(U, dtype=float)
    if U.ndim != 1 or U.size < 2:
        raise ValueError("1D boundary feedback needs a nodal vector with at least 2 entries")
    n = U.size
    res = np.zeros(n)
    diag = np.zeros(2)
    idx = np.array([0, n - 1])
    for pos, (node, c) in enumerate(zip(idx, (params.c0, params.c1))):
        res[node], diag[pos] = _feedback_poly(c, params.w_d, U[node])
    jac = sp.csr_matrix((diag, (idx, idx)), shape=(n, n))
    jac.sort_indices()
    return res, jac


def boundary_feedback_2d(
    mesh: Mesh, U, params: BoundaryParams
) -> tuple[NDArray[np.float64], sp.csr_matrix]:
    """Edge integrals ``int (2 (c2 + w_d) U + 2/(9 c2) U^3) phi_i`` over the
    boundary and their Jacobian."""
    if not isinstance(mesh, Mesh2D):
        raise TypeError("boundary_feedback_2d requires a 2D mesh")
    U = _check_state(mesh, U)
    edges = mesh.boundary_edges
    length = mesh.edge_lengths
    shape = np.column_stack([1.0 - _GAUSS3_T, _GAUSS3_T])  # (q, 2)
    uq = U[edges] @ shape.T  # (E, q)
    f, df = _feedback_poly(params.c2, params.w_d, uq, scale=2.0)
    wq = length[:, None] * _GAUSS3_W[None, :]
    local_res = np.einsum("eq,qa->ea", wq * f, shape)
    local_jac = np.einsum("eq,qa,qb->eab", wq * df, shape, shape)

    res = np.zeros(mesh.num_nodes)
    np.add.at(res, edges, local_res)
    rows, cols = _pattern(edges)
    return res, _csr(rows, cols, local_jac, mesh.num_nodes)


def boundary_feedback(mesh: Mesh, U, params: BoundaryParams):
    """Dimension dispatch for the feedback terms."""
    if isinstance(mesh, Mesh1D):
        _check_state(mesh, U)
        return boundary_feedback_1d(U, params)
    return boundary_feedback_2d(mesh, U, params)
