"""Problem definitions and feedback control laws.

The solver works with the shifted variable ``w = y - w_d``, which the
feedback drives to zero. The 1D laws act at the two end points::

    v0 =  (1/nu) ((c0 + w_d) w(0) + 2/(9 c0) w(0)^3)
    v1 = -(1/nu) ((c1 + w_d) w(1) + 2/(9 c1) w(1)^3)

and the 2D law acts along the whole boundary::

    v2 = -(1/nu) (2 (c2 + w_d) w + 2/(9 c2) w^3)
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .assembly import BoundaryParams, _GAUSS3_T, _GAUSS3_W
from .mesh import Mesh, Mesh1D, Mesh2D, boundary_nodes, interpolate

_CONSTANT_RE = re.compile(r"^constant\(\s*([-+0-9.eE]+)\s*\)$")


def initial_condition(name: str, dimension: int, w_d: float):
    """Return the named initial state ``w_0`` as a function of the coordinates.

    Known names: ``example1`` (1D, ``sin(pi x) - w_d``), ``example2``
    (2D, ``5 x1 (1 - x1) x2 (1 - x2) - w_d``), ``zero`` and ``constant(k)``.
    """
    if name == "example1":
        if dimension != 1:
            raise ValueError("initial condition 'example1' is one-dimensional")
        return lambda x: np.sin(np.pi * x) - w_d
    if name == "example2":
        if dimension != 2:
            raise ValueError("initial condition 'example2' is two-dimensional")
        return lambda x, y: 5.0 * x * (1.0 - x) * y * (1.0 - y) - w_d
    if name == "zero":
        return lambda *xs: np.zeros_like(xs[0])
    match = _CONSTANT_RE.match(name)
    if match:
        kappa = float(match.group(1))
        return lambda *xs: np.full_like(xs[0], kappa)
    raise ValueError(f"unknown initial condition {name!r}")


@dataclass(frozen=True)
class ProblemSpec:
    """A shifted Burgers problem, controlled or with zero Neumann data."""

    dimension: int
    params: BoundaryParams
    controlled: bool = True
    initial_condition: str = "zero"

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        # fail early on bad names
        initial_condition(self.initial_condition, self.dimension, self.params.w_d)

    @property
    def w_d(self) -> float:
        return self.params.w_d

    def initial_state(self, mesh: Mesh) -> NDArray[np.float64]:
        if mesh.dim != self.dimension:
            raise ValueError(f"{self.dimension}D problem on a {mesh.dim}D mesh")
        func = initial_condition(self.initial_condition, self.dimension, self.params.w_d)
        return interpolate(mesh, func)


def example1(**overrides) -> ProblemSpec:
    """1D benchmark: nu=0.1, w_d=1, c0=c1=0.1, w0 = sin(pi x) - 1."""
    controlled = overrides.pop("controlled", True)
    values = dict(nu=0.1, w_d=1.0, c0=0.1, c1=0.1)
    values.update(overrides)
    return ProblemSpec(1, BoundaryParams(**values), controlled, "example1")


def example2(**overrides) -> ProblemSpec:
    """2D benchmark: nu=1, w_d=2, w0 = 5 x1(1-x1) x2(1-x2) - 2."""
    controlled = overrides.pop("controlled", True)
    values = dict(nu=1.0, w_d=2.0, c2=0.1)
    values.update(overrides)
    return ProblemSpec(2, BoundaryParams(**values), controlled, "example2")


def control_law_1d(w0: float, w1: float, params: BoundaryParams) -> tuple[float, float]:
    """``(v0, v1)`` for boundary values ``w(0)``, ``w(1)``."""
    g0 = (params.c0 + params.w_d) * w0 + 2.0 / (9.0 * params.c0) * w0**3
    g1 = (params.c1 + params.w_d) * w1 + 2.0 / (9.0 * params.c1) * w1**3
    return g0 / params.nu, -g1 / params.nu


def control_input_1d(W, params: BoundaryParams) -> tuple[float, float]:
    W = np.asarray(W, dtype=float)
    return control_law_1d(W[0], W[-1], params)


def control_law_2d(w, params: BoundaryParams):
    w = np.asarray(w, dtype=float)
    return -(2.0 * (params.c2 + params.w_d) * w + 2.0 / (9.0 * params.c2) * w**3) / params.nu


def boundary_lp_norm(mesh: Mesh2D, values, p: int = 2, func=None) -> float:
    """``L^p(boundary)`` norm of ``func(P1 trace)`` (identity by default).

    Gauss-Legendre per edge: 3 points for the bare trace (degree <= 4), 5 or
    7 points when a cubic ``func`` is applied (degree 6 or 12).
    """
    if p not in (2, 4):
        raise ValueError("only p = 2 and p = 4 are integrated exactly")
    values = np.asarray(values, dtype=float)
    if func is None:
        t, w = _GAUSS3_T, _GAUSS3_W
    else:
        t, w = np.polynomial.legendre.leggauss(5 if p == 2 else 7)
        t, w = 0.5 * (t + 1.0), 0.5 * w
    edges = mesh.boundary_edges
    uq = values[edges[:, 0], None] * (1.0 - t) + values[edges[:, 1], None] * t
    if func is not None:
        uq = func(uq)
    total = np.sum(mesh.edge_lengths[:, None] * w * np.abs(uq) ** p)
    return float(total ** (1.0 / p))


def control_input_2d(mesh: Mesh2D, W, params: BoundaryParams):
    """Nodal boundary values of ``v2`` (in loop order) and ``||v2||_{L2(boundary)}``.

    The norm integrates the control law applied to the P1 trace, not the P1
    interpolant of the nodal control values.
    """
    W = np.asarray(W, dtype=float)
    nodes = boundary_nodes(mesh)
    nodal = control_law_2d(W[nodes], params)
    norm = boundary_lp_norm(mesh, W, p=2, func=lambda u: control_law_2d(u, params))
    return nodal, norm


def control_error_pair_1d(W, w_ref_boundary, params: BoundaryParams, scaled: bool = True):
    """``(|v0(ref) - v0(W)|, |v1(ref) - v1(W)|)``.

    ``scaled=True`` uses the signed, 1/nu-scaled laws; ``scaled=False`` the
    unscaled feedback values ``(c_i + w_d) w + 2/(9 c_i) w^3``. The two differ
    by the constant factor ``nu``.
    """
    W = np.asarray(W, dtype=float)
    ref = control_law_1d(w_ref_boundary[0], w_ref_boundary[1], params)
    got = control_law_1d(W[0], W[-1], params)
    factor = 1.0 if scaled else params.nu
    return abs(ref[0] - got[0]) * factor, abs(ref[1] - got[1]) * factor


def shift_to_physical(W, w_d: float) -> NDArray[np.float64]:
    """Recover ``y = w + w_d``."""
    return np.asarray(W, dtype=float) + w_d


@dataclass
class ControlTrace:
    """Control inputs along a trajectory (1D: v0, v1; 2D: boundary values and L2 norm)."""

    times: NDArray[np.float64]
    v0: NDArray[np.float64] | None = None
    v1: NDArray[np.float64] | None = None
    v2_boundary_l2: NDArray[np.float64] | None = None
    v2_boundary_values: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)


def control_trace(problem: ProblemSpec, mesh: Mesh, states, times) -> ControlTrace:
    """Evaluate the feedback laws on every state of a trajectory.

    For uncontrolled problems the applied Neumann data is zero and no law is
    evaluated.
    """
    times = np.asarray(times, dtype=float)
    n = len(times)
    params = problem.params
    if isinstance(mesh, Mesh1D):
        if not problem.controlled:
            return ControlTrace(times, np.zeros(n), np.zeros(n))
        pairs = np.array([control_input_1d(W, params) for W in states])
        return ControlTrace(times, pairs[:, 0], pairs[:, 1])
    if not problem.controlled:
        nb = len(boundary_nodes(mesh))
        return ControlTrace(times, v2_boundary_l2=np.zeros(n),
                            v2_boundary_values=[np.zeros(nb)] * n)
    values, norms = [], []
    for W in states:
        nodal, norm = control_input_2d(mesh, W, params)
        values.append(nodal)
        norms.append(norm)
    return ControlTrace(times, v2_boundary_l2=np.array(norms), v2_boundary_values=values)


def control_error_2d(mesh: Mesh2D, W, W_ref, params: BoundaryParams) -> float:
    """``||v2(W_ref) - v2(W)||_{L2(boundary)}`` with both laws applied to P1 traces."""
    W = np.asarray(W, dtype=float)
    W_ref = np.asarray(W_ref, dtype=float)
    t, w = np.polynomial.legendre.leggauss(5)
    t, w = 0.5 * (t + 1.0), 0.5 * w
    edges = mesh.boundary_edges

    def trace(values):
        return values[edges[:, 0], None] * (1.0 - t) + values[edges[:, 1], None] * t

    diff = control_law_2d(trace(W_ref), params) - control_law_2d(trace(W), params)
    return float(np.sqrt(np.sum(mesh.edge_lengths[:, None] * w * diff**2)))
