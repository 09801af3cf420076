"""Finite-element theta schemes for Burgers' equation with nonlinear Neumann
boundary feedback control, in 1D and on the unit square."""
from .assembly import (
    BoundaryParams,
    assemble_convection,
    assemble_mass,
    assemble_stiffness,
    boundary_feedback_1d,
    boundary_feedback_2d,
    burgers_term,
)
from .convergence import (
    ConvergenceRow,
    StudyPlan,
    build_reference,
    observed_order,
    spatial_study,
    temporal_study,
)
from .diagnostics import (
    compute_E1,
    fit_decay_rate,
    lyapunov_monitor,
    norm_h1,
    norm_l2,
    norm_linf,
    triple_norm,
)
from .mesh import Mesh1D, Mesh2D, boundary_nodes, build_structured_2d, build_uniform_1d
from .models import (
    ProblemSpec,
    control_input_1d,
    control_input_2d,
    example1,
    example2,
    shift_to_physical,
)
from .stepper import (
    NonConvergence,
    SingularJacobian,
    StateTrajectory,
    ThetaConfig,
    explicit_step,
    newton_step_solve,
    run_simulation,
    step_residual,
)

__version__ = "0.1.0"
