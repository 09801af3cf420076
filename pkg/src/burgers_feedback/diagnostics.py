"""Norms, energy monitoring and decay-rate fitting for P1 states."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import BoundaryParams, assemble_mass, assemble_stiffness
from .mesh import Mesh, Mesh1D, Mesh2D
from .models import boundary_lp_norm


class NonPositiveNorm(ValueError):
    """A log-linear fit was asked to take the log of a zero (or invalid) norm."""


def _state(mesh: Mesh, W):
    W = np.asarray(W, dtype=float)
    if W.shape != (mesh.num_nodes,):
        raise ValueError(f"state has shape {W.shape}, mesh has {mesh.num_nodes} nodes")
    return W


def _quad_form(matrix, W) -> float:
    # clip tiny negative round-off before the square root
    return max(float(W @ (matrix @ W)), 0.0)


def norm_l2(mesh: Mesh, W, mass=None) -> float:
    """Exact L2 norm of the P1 function with nodal values ``W``."""
    W = _state(mesh, W)
    mass = assemble_mass(mesh) if mass is None else mass
    return float(np.sqrt(_quad_form(mass, W)))


def norm_h1(mesh: Mesh, W, mass=None, stiffness=None) -> float:
    W = _state(mesh, W)
    mass = assemble_mass(mesh) if mass is None else mass
    stiffness = assemble_stiffness(mesh) if stiffness is None else stiffness
    return float(np.sqrt(_quad_form(mass, W) + _quad_form(stiffness, W)))


def norm_linf(W) -> float:
    """Max nodal magnitude, which is the sup norm of a P1 function."""
    W = np.asarray(W, dtype=float)
    return float(np.max(np.abs(W))) if W.size else 0.0


def triple_norm(mesh: Mesh, W, mass=None) -> float:
    """``sqrt(||W||^2 + W(0)^2 + W(1)^2)`` on the unit interval."""
    if not isinstance(mesh, Mesh1D):
        raise TypeError("triple_norm is defined for 1D meshes only")
    W = _state(mesh, W)
    return float(np.sqrt(norm_l2(mesh, W, mass) ** 2 + W[0] ** 2 + W[-1] ** 2))


@dataclass
class NormReport:
    l2: float
    h1: float
    linf: float
    triple_norm: float | None = None
    boundary_l2: float | None = None
    boundary_l4: float | None = None


def norm_report(mesh: Mesh, W, mass=None, stiffness=None) -> NormReport:
    W = _state(mesh, W)
    mass = assemble_mass(mesh) if mass is None else mass
    stiffness = assemble_stiffness(mesh) if stiffness is None else stiffness
    report = NormReport(
        l2=norm_l2(mesh, W, mass),
        h1=norm_h1(mesh, W, mass, stiffness),
        linf=norm_linf(W),
    )
    if isinstance(mesh, Mesh1D):
        report.triple_norm = triple_norm(mesh, W, mass)
    else:
        report.boundary_l2 = boundary_lp_norm(mesh, W, 2)
        report.boundary_l4 = boundary_lp_norm(mesh, W, 4)
    return report


def boundary_norms(mesh: Mesh2D, W) -> tuple[float, float]:
    """``(||W||_{L2(boundary)}, ||W||_{L4(boundary)})``."""
    W = _state(mesh, W)
    return boundary_lp_norm(mesh, W, 2), boundary_lp_norm(mesh, W, 4)


@dataclass
class MonotonicityVerdict:
    passed: bool
    first_violation: int | None = None

    def __bool__(self):
        return self.passed


def lyapunov_monitor(trajectory, tol_mono: float = 1e-12) -> MonotonicityVerdict:
    """Check ``||W^{n+1}|| <= ||W^n|| + tol_mono`` along a trajectory.

    ``first_violation`` is the index ``n + 1`` of the first offending state.
    Non-finite norms count as violations.
    """
    norms = np.asarray(getattr(trajectory, "l2_history", trajectory), dtype=float)
    with np.errstate(invalid="ignore"):
        ok = norms[1:] <= norms[:-1] + tol_mono
    bad = np.flatnonzero(~ok)
    if bad.size:
        return MonotonicityVerdict(False, int(bad[0]) + 1)
    return MonotonicityVerdict(True)


@dataclass
class DecayFit:
    alpha_hat: float
    fit_window: tuple[int, int]
    residual: float


def fit_decay_rate(trajectory, window: tuple[int, int] | None = None, times=None) -> DecayFit:
    """Least-squares fit of ``ln ||W^n|| = a - alpha_hat t_n``.

    ``window`` is a half-open step range; by default the first 10% of the
    steps are skipped. ``trajectory`` may be a ``StateTrajectory`` or a plain
    sequence of norms (then ``times`` is required).
    """
    if times is None:
        times = trajectory.times
        norms = trajectory.l2_history
    else:
        norms = trajectory
    norms = np.asarray(norms, dtype=float)
    times = np.asarray(times, dtype=float)
    if window is None:
        window = (len(norms) // 10, len(norms))
    lo, hi = window
    if not 0 <= lo < hi <= len(norms) or hi - lo < 2:
        raise ValueError(f"invalid fit window {window} for {len(norms)} samples")
    sample = norms[lo:hi]
    if not np.all(np.isfinite(sample)) or np.any(sample <= 0.0):
        raise NonPositiveNorm("decay fit needs strictly positive, finite norms")
    coef, res, *_ = np.polyfit(times[lo:hi], np.log(sample), 1, full=True)
    residual = float(res[0]) if len(res) else 0.0
    return DecayFit(alpha_hat=float(-coef[0]), fit_window=(lo, hi), residual=residual)


def compute_E1(mesh: Mesh, W, params: BoundaryParams) -> float:
    """Boundary energy ``(c0+w_d) w(0)^2 + (c1+w_d) w(1)^2 + w(0)^4/(9 c0) + w(1)^4/(9 c1)``."""
    if not isinstance(mesh, Mesh1D):
        raise TypeError("E1 is defined for 1D meshes only")
    W = _state(mesh, W)
    a, b = W[0], W[-1]
    return float(
        (params.c0 + params.w_d) * a**2
        + (params.c1 + params.w_d) * b**2
        + a**4 / (9.0 * params.c0)
        + b**4 / (9.0 * params.c1)
    )
