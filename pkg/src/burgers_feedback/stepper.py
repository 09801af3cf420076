"""Theta-scheme time stepping with Newton's method.

One step solves ``F(W_next) = 0`` for

    F = M (W_next - W_n) / k + nu A V + w_d C V + B(V) + G(V),
    V = theta W_next + (1 - theta) W_n,

where ``B`` is the Burgers term and ``G`` the boundary feedback (absent for
the uncontrolled, zero-Neumann problem). ``theta = 0`` is handled by a single
mass-matrix solve instead of Newton.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .assembly import (
    assemble_convection,
    assemble_mass,
    assemble_stiffness,
    boundary_feedback,
    burgers_term,
)
from .mesh import Mesh
from .models import ProblemSpec

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Base class for failures of the nonlinear or linear solves."""


class NonConvergence(SolverError):
    def __init__(self, message, step=None, residual_history=()):
        super().__init__(message)
        self.step = step
        self.residual_history = list(residual_history)


class SingularJacobian(SolverError):
    pass


@dataclass(frozen=True)
class ThetaConfig:
    theta: float
    k: float
    M: int
    newton_tol: float = 1e-12
    newton_max_iter: int = 25

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if not self.k > 0:
            raise ValueError(f"time step must be positive, got {self.k}")
        if self.M < 1:
            raise ValueError(f"number of steps must be at least 1, got {self.M}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")

    @classmethod
    def from_final_time(cls, theta: float, T: float, M: int, **kwargs) -> ThetaConfig:
        if M < 1:
            raise ValueError(f"number of steps must be at least 1, got {M}")
        return cls(theta=theta, k=T / M, M=M, **kwargs)


@dataclass
class StepReport:
    step: int
    newton_iterations: int
    final_residual_norm: float
    converged: bool
    residual_history: list[float] = field(default_factory=list)


@dataclass
class StateTrajectory:
    states: list[NDArray[np.float64]]
    times: NDArray[np.float64]
    reports: list[StepReport]
    l2_history: NDArray[np.float64]

    @property
    def final_state(self) -> NDArray[np.float64]:
        return self.states[-1]


class Operators:
    """Assembled linear operators plus the nonlinear terms for one problem on one mesh."""

    def __init__(self, mesh: Mesh, problem: ProblemSpec):
        if mesh.dim != problem.dimension:
            raise ValueError(f"{problem.dimension}D problem on a {mesh.dim}D mesh")
        self.mesh = mesh
        self.problem = problem
        self.params = problem.params
        self.mass = assemble_mass(mesh)
        self.stiffness = assemble_stiffness(mesh)
        self.convection = assemble_convection(mesh)
        # nu A + w_d C never changes
        self.linear = (self.params.nu * self.stiffness + self.params.w_d * self.convection).tocsr()

    @property
    def size(self) -> int:
        return self.mesh.num_nodes

    @cached_property
    def mass_lu(self):
        return _factorize(self.mass)

    def spatial(self, V) -> tuple[NDArray[np.float64], sp.csr_matrix]:
        """All spatial terms at ``V`` and their Jacobian."""
        res_b, jac_b = burgers_term(self.mesh, V)
        res = self.linear @ V + res_b
        jac = self.linear + jac_b
        if self.problem.controlled:
            res_g, jac_g = boundary_feedback(self.mesh, V, self.params)
            res = res + res_g
            jac = jac + jac_g
        return res, jac


def _factorize(matrix):
    try:
        return spla.splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        raise SingularJacobian(str(exc)) from exc


def _check_dims(ops: Operators, *vectors):
    for v in vectors:
        if np.shape(v) != (ops.size,):
            raise ValueError(f"state has shape {np.shape(v)}, expected ({ops.size},)")


def step_residual(W_next, W_n, ops: Operators, config: ThetaConfig) -> NDArray[np.float64]:
    """Residual of the theta scheme tested against every basis function."""
    W_next = np.asarray(W_next, dtype=float)
    W_n = np.asarray(W_n, dtype=float)
    _check_dims(ops, W_next, W_n)
    theta = config.theta
    V = theta * W_next + (1.0 - theta) * W_n
    spatial, _ = ops.spatial(V)
    return ops.mass @ (W_next - W_n) / config.k + spatial


def _residual_and_jacobian(W_next, W_n, ops: Operators, config: ThetaConfig):
    theta = config.theta
    V = theta * W_next + (1.0 - theta) * W_n
    spatial, jac = ops.spatial(V)
    res = ops.mass @ (W_next - W_n) / config.k + spatial
    return res, ops.mass / config.k + theta * jac


def newton_step_solve(
    W_n, ops: Operators, config: ThetaConfig, step: int = 0
) -> tuple[NDArray[np.float64], StepReport]:
    """Advance one step with Newton's method from the initial guess ``W_n``.

    Raises ``NonConvergence`` if the residual sup-norm does not drop below
    ``config.newton_tol`` within ``config.newton_max_iter`` iterations.
    """
    if config.theta <= 0.0:
        raise ValueError("newton_step_solve needs theta > 0; use explicit_step")
    W_n = np.asarray(W_n, dtype=float)
    _check_dims(ops, W_n)
    W = W_n.copy()
    res, jac = _residual_and_jacobian(W, W_n, ops, config)
    history = [float(np.max(np.abs(res)))]
    iterations = 0
    while history[-1] > config.newton_tol:
        if iterations >= config.newton_max_iter or not np.isfinite(history[-1]):
            raise NonConvergence(
                f"Newton failed at step {step} after {iterations} iterations "
                f"(residual {history[-1]:.3e})",
                step=step,
                residual_history=history,
            )
        delta = _factorize(jac).solve(-res)
        W = W + delta
        iterations += 1
        res, jac = _residual_and_jacobian(W, W_n, ops, config)
        history.append(float(np.max(np.abs(res))))
    report = StepReport(step, iterations, history[-1], True, history)
    return W, report


def explicit_step(W_n, ops: Operators, config: ThetaConfig) -> NDArray[np.float64]:
    """Forward Euler: ``M (W_next - W_n) / k = -(spatial terms at W_n)``."""
    if config.theta != 0.0:
        raise ValueError("explicit_step is the theta = 0 scheme")
    W_n = np.asarray(W_n, dtype=float)
    _check_dims(ops, W_n)
    with np.errstate(over="ignore", invalid="ignore"):
        spatial, _ = ops.spatial(W_n)
        return W_n - config.k * ops.mass_lu.solve(spatial)


def run_simulation(problem: ProblemSpec, mesh: Mesh, config: ThetaConfig) -> StateTrajectory:
    """Run ``config.M`` steps from the nodal interpolant of the initial condition.

    On Newton failure the partial trajectory is attached to the raised
    ``NonConvergence`` as ``exc.trajectory``.
    """
    ops = Operators(mesh, problem)
    W = problem.initial_state(mesh)
    states = [W]
    reports: list[StepReport] = []
    for n in range(config.M):
        if config.theta == 0.0:
            W = explicit_step(W, ops, config)
            reports.append(StepReport(n, 0, float("nan"), True))
        else:
            try:
                W, report = newton_step_solve(W, ops, config, step=n)
            except NonConvergence as exc:
                exc.trajectory = _trajectory(states, reports, config, ops)
                raise
            reports.append(report)
        states.append(W)
    log.debug("finished %d steps on %d nodes", config.M, mesh.num_nodes)
    return _trajectory(states, reports, config, ops)


def _trajectory(states, reports, config, ops) -> StateTrajectory:
    times = np.arange(len(states)) * config.k
    with np.errstate(over="ignore", invalid="ignore"):
        l2 = np.array([np.sqrt(W @ (ops.mass @ W)) for W in states])
    return StateTrajectory(states, times, reports, l2)
