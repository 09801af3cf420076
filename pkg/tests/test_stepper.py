import numpy as np
import pytest

from burgers_feedback.assembly import BoundaryParams, boundary_feedback_1d, burgers_term
from burgers_feedback.mesh import build_structured_2d, build_uniform_1d
from burgers_feedback.models import ProblemSpec, example1, example2
from burgers_feedback.stepper import (
    NonConvergence,
    Operators,
    ThetaConfig,
    explicit_step,
    newton_step_solve,
    run_simulation,
    step_residual,
)


def test_config_validation():
    with pytest.raises(ValueError):
        ThetaConfig(theta=1.5, k=0.1, M=3)
    with pytest.raises(ValueError):
        ThetaConfig(theta=0.5, k=0.0, M=3)
    with pytest.raises(ValueError):
        ThetaConfig(theta=0.5, k=0.1, M=0)
    with pytest.raises(ValueError):
        ThetaConfig.from_final_time(0.5, 1.0, 0)
    cfg = ThetaConfig.from_final_time(0.5, 1.0, 40)
    assert cfg.k == 0.025 and cfg.M == 40


@pytest.mark.parametrize("problem, mesh", [
    (ProblemSpec(1, example1().params, True, "zero"), build_uniform_1d(10)),
    (ProblemSpec(2, example2().params, True, "zero"), build_structured_2d(4)),
], ids=["1d", "2d"])
def test_zero_is_fixed_point(problem, mesh):
    traj = run_simulation(problem, mesh, ThetaConfig.from_final_time(1.0, 1.0, 10))
    for W in traj.states:
        assert np.abs(W).max() <= 1e-14
    assert np.all(traj.l2_history <= 1e-14)


@pytest.mark.parametrize("theta", [0.5, 1.0])
def test_uncontrolled_constant_stays_constant(theta):
    params = BoundaryParams(nu=0.3, w_d=1.0)
    problem = ProblemSpec(1, params, controlled=False, initial_condition="constant(0.7)")
    traj = run_simulation(problem, build_uniform_1d(12), ThetaConfig.from_final_time(theta, 1.0, 8))
    np.testing.assert_allclose(traj.final_state, 0.7, atol=1e-12)


def test_linear_diffusion_three_nodes():
    """Pure diffusion, no convection or feedback: one backward Euler step is a linear solve."""
    params = BoundaryParams(nu=1.0, w_d=0.0)
    mesh = build_uniform_1d(2)
    problem = ProblemSpec(1, params, controlled=False, initial_condition="zero")
    ops = Operators(mesh, problem)
    # 0 is a fixed point of the Burgers term, so start from a state where it is small
    W0 = np.array([1e-9, 0.0, -1e-9])
    k = 0.1
    h = 0.5
    M = h / 6 * np.array([[2, 1, 0], [1, 4, 1], [0, 1, 2]])
    A = 1 / h * np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    expected = np.linalg.solve(M / k + A, M @ W0 / k)
    W1, report = newton_step_solve(W0, ops, ThetaConfig(1.0, k, 1))
    np.testing.assert_allclose(W1, expected, atol=1e-20)
    assert report.converged


def _hand_residual(W1, W0, mesh, params, theta, k, controlled):
    """The theta-scheme residual written out from the element formulas."""
    x = mesh.nodes
    n = len(x)
    Mm = np.zeros((n, n))
    A = np.zeros((n, n))
    C = np.zeros((n, n))
    for e in range(n - 1):
        h = x[e + 1] - x[e]
        idx = np.ix_([e, e + 1], [e, e + 1])
        Mm[idx] += h / 6 * np.array([[2, 1], [1, 2]])
        A[idx] += 1 / h * np.array([[1, -1], [-1, 1]])
        C[idx] += 0.5 * np.array([[-1, 1], [-1, 1]])
    V = theta * W1 + (1 - theta) * W0
    res = Mm @ (W1 - W0) / k + params.nu * A @ V + params.w_d * C @ V
    for e in range(n - 1):
        a, b = V[e], V[e + 1]
        # int (a phi0 + b phi1)(b - a)/h phi_i over the element
        res[e] += (b - a) * (2 * a + b) / 6
        res[e + 1] += (b - a) * (a + 2 * b) / 6
    if controlled:
        for i, c in ((0, params.c0), (n - 1, params.c1)):
            res[i] += (c + params.w_d) * V[i] + 2 / (9 * c) * V[i] ** 3
    return res


@pytest.mark.parametrize("theta", [0.5, 1.0])
@pytest.mark.parametrize("controlled", [True, False])
def test_residual_matches_hand_formula(theta, controlled, rng):
    mesh = build_uniform_1d(7)
    params = BoundaryParams(nu=0.2, w_d=1.5, c0=0.3, c1=0.6)
    ops = Operators(mesh, ProblemSpec(1, params, controlled))
    cfg = ThetaConfig(theta, 0.05, 1)
    for _ in range(10):
        W0, W1 = rng.normal(size=(2, mesh.num_nodes))
        got = step_residual(W1, W0, ops, cfg)
        want = _hand_residual(W1, W0, mesh, params, theta, 0.05, controlled)
        np.testing.assert_allclose(got, want, atol=1e-13)


def test_newton_solution_zeroes_residual():
    mesh = build_uniform_1d(30)
    problem = example1()
    ops = Operators(mesh, problem)
    cfg = ThetaConfig.from_final_time(0.5, 1.0, 100)
    W0 = problem.initial_state(mesh)
    W1, report = newton_step_solve(W0, ops, cfg)
    assert np.abs(step_residual(W1, W0, ops, cfg)).max() <= 1e-12
    assert report.newton_iterations <= 8
    assert report.residual_history[0] > report.residual_history[-1]


def test_explicit_matches_nearly_explicit_newton(rng):
    mesh = build_uniform_1d(10)
    problem = example1()
    ops = Operators(mesh, problem)
    W0 = 0.3 * rng.normal(size=mesh.num_nodes)
    k = 1e-3
    W_exp = explicit_step(W0, ops, ThetaConfig(0.0, k, 1))
    W_newton, _ = newton_step_solve(W0, ops, ThetaConfig(1e-12, k, 1))
    np.testing.assert_allclose(W_exp, W_newton, atol=1e-8)


def test_explicit_and_newton_guard_theta():
    mesh = build_uniform_1d(3)
    ops = Operators(mesh, example1())
    with pytest.raises(ValueError):
        explicit_step(np.zeros(4), ops, ThetaConfig(0.5, 0.1, 1))
    with pytest.raises(ValueError):
        newton_step_solve(np.zeros(4), ops, ThetaConfig(0.0, 0.1, 1))


def test_dimension_checks():
    with pytest.raises(ValueError):
        Operators(build_structured_2d(2), example1())
    ops = Operators(build_uniform_1d(3), example1())
    with pytest.raises(ValueError):
        step_residual(np.zeros(3), np.zeros(4), ops, ThetaConfig(1.0, 0.1, 1))


def test_nonconvergence_reported():
    mesh = build_uniform_1d(30)
    problem = example1()
    cfg = ThetaConfig.from_final_time(1.0, 1.0, 5, newton_max_iter=1)
    with pytest.raises(NonConvergence) as info:
        run_simulation(problem, mesh, cfg)
    exc = info.value
    assert exc.step == 0
    assert len(exc.residual_history) == 2
    assert exc.residual_history[-1] > 1e-12
    assert len(exc.trajectory.states) == 1


def test_newton_quadratic_convergence():
    mesh = build_uniform_1d(30)
    problem = example1()
    traj = run_simulation(problem, mesh, ThetaConfig.from_final_time(1.0, 1.0, 100))
    hist = traj.reports[0].residual_history
    assert hist[-1] <= 1e-12
    # in the asymptotic regime each residual is at most the square of the previous one
    pairs = [(a, b) for a, b in zip(hist, hist[1:]) if a < 0.1 and b > 1e-13]
    assert pairs
    assert all(b <= a**2 for a, b in pairs)
    assert max(rep.newton_iterations for rep in traj.reports) <= 8


def test_run_is_deterministic():
    mesh = build_structured_2d(5)
    cfg = ThetaConfig.from_final_time(0.5, 0.5, 10)
    a = run_simulation(example2(), mesh, cfg)
    b = run_simulation(example2(), mesh, cfg)
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.states, b.states))


def test_trajectory_bookkeeping():
    mesh = build_uniform_1d(8)
    traj = run_simulation(example1(), mesh, ThetaConfig.from_final_time(1.0, 0.5, 5))
    assert len(traj.states) == 6 and len(traj.reports) == 5
    np.testing.assert_allclose(traj.times, np.linspace(0, 0.5, 6), atol=1e-15)
    assert traj.final_state is traj.states[-1]


def test_jacobian_of_step_residual_is_consistent(rng):
    """Newton from a perturbed guess converges in one iteration on a linear problem."""
    params = BoundaryParams(nu=0.5, w_d=0.7)
    mesh = build_uniform_1d(6)
    ops = Operators(mesh, ProblemSpec(1, params, controlled=False))
    W0 = 1e-8 * rng.normal(size=7)
    _, report = newton_step_solve(W0, ops, ThetaConfig(1.0, 0.1, 1))
    assert report.newton_iterations <= 2
    # sanity check that the nonlinear helpers are quiet at tiny amplitude
    assert np.abs(burgers_term(mesh, W0)[0]).max() < 1e-15
    assert np.abs(boundary_feedback_1d(W0, BoundaryParams(nu=1.0))[0]).max() < 1e-7
