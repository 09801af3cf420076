"""Self-convergence studies against refined-grid reference solutions.

No closed-form solution is known, so every study runs the solver once on a
reference grid that nests all study grids (``reference_factor`` times finer
than the finest study resolution along the refined axis, identical along
the other) and restricts it to the coarse nodes / time levels.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_mass
from .mesh import Mesh1D, build_structured_2d, build_uniform_1d, coarse_node_indices
from .models import ProblemSpec, control_error_2d, control_law_1d
from .stepper import SolverError, StateTrajectory, ThetaConfig, run_simulation

log = logging.getLogger(__name__)


class NonPositiveError(ValueError):
    pass


def observed_order(e_coarse: float, e_fine: float, ratio: float = 2.0) -> float:
    """``log(e_coarse / e_fine) / log(ratio)``."""
    if not (e_coarse > 0 and e_fine > 0):
        raise NonPositiveError(f"errors must be positive, got {e_coarse}, {e_fine}")
    if not ratio > 1:
        raise ValueError(f"refinement ratio must exceed 1, got {ratio}")
    return math.log(e_coarse / e_fine) / math.log(ratio)


def build_mesh(dimension: int, n: int):
    return build_uniform_1d(n) if dimension == 1 else build_structured_2d(n)


@dataclass
class Reference:
    """A reference trajectory that can be restricted to nested coarse grids."""

    problem: ProblemSpec
    mesh: object
    config: ThetaConfig
    trajectory: StateTrajectory

    def restrict(self, coarse_mesh, coarse_M: int) -> list[np.ndarray]:
        """Reference states at the coarse nodes and coarse time levels."""
        if self.config.M % coarse_M:
            raise ValueError(f"{coarse_M} steps do not nest in {self.config.M}")
        stride = self.config.M // coarse_M
        idx = coarse_node_indices(coarse_mesh, self.mesh)
        return [W[idx] for W in self.trajectory.states[::stride]]


def build_reference(problem: ProblemSpec, fine_n: int, fine_M: int, theta: float,
                    T: float = 1.0) -> Reference:
    """Solve on the ``fine_n`` mesh with ``fine_M`` steps up to time ``T``."""
    mesh = build_mesh(problem.dimension, fine_n)
    config = ThetaConfig.from_final_time(theta, T, fine_M)
    log.info("reference run: n=%d M=%d theta=%g", fine_n, fine_M, theta)
    return Reference(problem, mesh, config, run_simulation(problem, mesh, config))


@dataclass
class StudyPlan:
    """One convergence table.

    ``resolutions`` are element counts per side (spatial axis, h = 1/n) or
    step counts (temporal axis, k = T/M), increasing so that h or k
    decreases. ``fixed`` is the step count (spatial) or element count
    (temporal) shared by all rows and the reference.

    ``control_time`` selects how control errors are reduced over time:
    ``"final"`` (at t = T) or ``"max"`` (over all coarse time levels).
    """

    axis: str
    resolutions: list[int]
    fixed: int
    theta: float
    problem: ProblemSpec
    T: float = 1.0
    reference_factor: int = 8
    control_time: str = "final"

    def __post_init__(self):
        if self.axis not in ("spatial", "temporal"):
            raise ValueError(f"axis must be 'spatial' or 'temporal', got {self.axis!r}")
        if self.control_time not in ("final", "max"):
            raise ValueError(f"control_time must be 'final' or 'max', got {self.control_time!r}")
        res = list(self.resolutions)
        if not res or any(r < 1 for r in res) or any(b <= a for a, b in zip(res, res[1:])):
            raise ValueError("resolutions must be positive and strictly increasing counts")
        if self.reference_factor < 1:
            raise ValueError("reference_factor must be at least 1")
        finest = res[-1] * self.reference_factor
        if any(finest % r for r in res):
            raise ValueError("study grids do not nest in the reference grid")

    @property
    def reference_grid(self) -> tuple[int, int]:
        """``(n, M)`` of the reference run."""
        fine = self.resolutions[-1] * self.reference_factor
        return (fine, self.fixed) if self.axis == "spatial" else (self.fixed, fine)

    def grid(self, resolution: int) -> tuple[int, int]:
        return (resolution, self.fixed) if self.axis == "spatial" else (self.fixed, resolution)

    def step_size(self, resolution: int) -> float:
        """h or k of a row."""
        return 1.0 / resolution if self.axis == "spatial" else self.T / resolution


@dataclass
class ConvergenceRow:
    resolution: float
    errors: dict[str, float]
    orders: dict[str, float | None] = field(default_factory=dict)
    failure: str | None = None

    @property
    def error_l2(self) -> float:
        return self.errors["l2"]

    @property
    def error_linf(self) -> float:
        return self.errors["linf"]


STATE_COLUMNS = ["l2", "linf"]


def control_columns(dimension: int) -> list[str]:
    return ["v0", "v1"] if dimension == 1 else ["v2_l2"]


def row_errors(plan: StudyPlan, mesh, coarse_ref: list, trajectory: StateTrajectory) -> dict[str, float]:
    """State errors at the final time and control errors per ``plan.control_time``."""
    problem = plan.problem
    params = problem.params
    mass = assemble_mass(mesh)
    e = coarse_ref[-1] - trajectory.final_state
    errors = {
        "l2": float(np.sqrt(max(e @ (mass @ e), 0.0))),
        "linf": float(np.max(np.abs(e))),
    }
    if not problem.controlled:
        return errors
    levels = list(zip(coarse_ref, trajectory.states))
    if plan.control_time == "final":
        levels = levels[-1:]
    if isinstance(mesh, Mesh1D):
        diffs = []
        for ref, W in levels:
            r0, r1 = control_law_1d(ref[0], ref[-1], params)
            w0, w1 = control_law_1d(W[0], W[-1], params)
            diffs.append((abs(r0 - w0), abs(r1 - w1)))
        worst = np.max(np.array(diffs), axis=0)
        errors["v0"], errors["v1"] = float(worst[0]), float(worst[1])
    else:
        errors["v2_l2"] = max(control_error_2d(mesh, W, ref, params) for ref, W in levels)
    return errors


def _fill_orders(rows: list[ConvergenceRow]):
    for prev, row in zip(rows, rows[1:]):
        ratio = prev.resolution / row.resolution
        for col, err in row.errors.items():
            before = prev.errors.get(col, math.nan)
            try:
                row.orders[col] = observed_order(before, err, ratio)
            except NonPositiveError:
                row.orders[col] = None
    if rows:
        rows[0].orders = {col: None for col in rows[0].errors}


def run_study(plan: StudyPlan, reference: Reference | None = None) -> list[ConvergenceRow]:
    """Errors and observed orders for every row of ``plan``.

    A row whose solve fails is kept with NaN errors and the failure message;
    the remaining rows still run.
    """
    problem = plan.problem
    if reference is None:
        fine_n, fine_M = plan.reference_grid
        reference = build_reference(problem, fine_n, fine_M, plan.theta, plan.T)
    columns = list(STATE_COLUMNS)
    if problem.controlled:
        columns += control_columns(problem.dimension)
    rows = []
    for resolution in plan.resolutions:
        n, M = plan.grid(resolution)
        mesh = build_mesh(problem.dimension, n)
        config = ThetaConfig.from_final_time(plan.theta, plan.T, M)
        size = plan.step_size(resolution)
        try:
            trajectory = run_simulation(problem, mesh, config)
        except SolverError as exc:
            log.warning("row %s failed: %s", size, exc)
            rows.append(ConvergenceRow(size, {c: math.nan for c in columns}, failure=str(exc)))
            continue
        coarse_ref = reference.restrict(mesh, M)
        rows.append(ConvergenceRow(size, row_errors(plan, mesh, coarse_ref, trajectory)))
    _fill_orders(rows)
    return rows


def spatial_study(plan: StudyPlan, reference: Reference | None = None) -> list[ConvergenceRow]:
    if plan.axis != "spatial":
        raise ValueError("spatial_study needs a spatial plan")
    return run_study(plan, reference)


def temporal_study(plan: StudyPlan, reference: Reference | None = None) -> list[ConvergenceRow]:
    if plan.axis != "temporal":
        raise ValueError("temporal_study needs a temporal plan")
    return run_study(plan, reference)
