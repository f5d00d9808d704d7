"""Cavitation sweep, direct solves, load integrals, equilibrium Newton."""

import math

import numpy as np
import pytest
import scipy.sparse as sp

from lubfvm.assembly import BoundaryConditions
from lubfvm.errors import ContactError, NonConvergedError, SolverError
from lubfvm.lubrication import (KinematicsState, LubricantModel,
                                build_gre_problem, build_gre_system,
                                gre_coefficients, gre_residual)
from lubfvm.mesh import pair_periodic_boundaries, structured_rect_mesh
from lubfvm.solvers import (DynamicsProblem, SorConfig, flooded_direct_solve,
                            hydrodynamic_loads, linear_solve,
                            newton_equilibrium, sor_p_theta)

MODEL = LubricantModel(density0=810.0, viscosity0=0.1)
KIN = KinematicsState(journal_velocity=(10.0, 0.0),
                      bushing_velocity=(0.0, 0.0),
                      q=np.zeros(4), q_dot=np.zeros(4))
P_AMB = 1e5


def strip_system(h_of_x, n_x=24, n_y=8, length=0.1, width=0.08):
    """Pressure system for a slider strip with ambient ends."""
    mesh = structured_rect_mesh(0, length, -width / 2, width / 2,
                                n_x, n_y, "QUAD4")
    mesh.boundary_sets["axial_left"] = mesh.boundary_sets.pop("y_min")
    mesh.boundary_sets["axial_right"] = mesh.boundary_sets.pop("y_max")
    h = h_of_x(mesh.nodes[:, 0] / length)
    co = gre_coefficients(h, 0.1, 810.0)
    problem, bcs = build_gre_problem(mesh, co, KIN, MODEL, p_ambient=P_AMB)
    d = dict(bcs.dirichlet)
    for name in ("x_min", "x_max"):
        for n in mesh.set_nodes(name):
            d[int(n)] = P_AMB
    system = build_gre_system(mesh, problem,
                              BoundaryConditions(dirichlet=d), MODEL)
    return mesh, system


# ---------------------------------------------------------------------------
# cavitation sweep
# ---------------------------------------------------------------------------

def test_sor_config_validation():
    with pytest.raises(ValueError):
        SorConfig(omega_p=2.5)
    with pytest.raises(ValueError):
        SorConfig(omega_theta=0.0)
    with pytest.raises(ValueError):
        SorConfig(p_scale=-1.0)


def test_flooded_sweep_matches_direct_solve():
    _, system = strip_system(lambda s: 2e-4 - 1e-4 * s)
    result = sor_p_theta(system, config=SorConfig(tol=1e-11))
    assert result.converged
    assert np.all(result.theta == 1.0)
    direct = flooded_direct_solve(system)
    assert np.abs(result.p - direct).max() <= 1e-8 * np.abs(direct).max()


def test_divergent_gap_cavitates_with_exact_complementarity():
    _, system = strip_system(lambda s: 1e-4 + 1.5e-4 * s)
    result = sor_p_theta(system, config=SorConfig(tol=1e-9))
    assert result.converged
    assert result.cavitated_history[-1] > 0
    assert np.all(result.theta >= 0.0) and np.all(result.theta <= 1.0)
    comp = np.abs((result.p - MODEL.cavitation_pressure)
                  * (1.0 - result.theta))
    assert comp.max() == 0.0
    res, free = gre_residual(system, result.p, result.theta)
    flux_scale = np.abs(system.C @ result.theta).max()
    assert np.abs(res[free]).max() <= 1e-6 * flux_scale


def test_sweep_cap_returns_unconverged_with_history():
    _, system = strip_system(lambda s: 2e-4 - 1e-4 * s)
    result = sor_p_theta(system, config=SorConfig(tol=1e-14, max_iter=3))
    assert not result.converged
    assert result.n_sweeps == 3
    assert result.error_history.shape == (3,)
    assert result.cavitated_history.shape == (3,)


def test_sweep_error_history_is_recorded_decreasing_overall():
    _, system = strip_system(lambda s: 2e-4 - 1e-4 * s)
    result = sor_p_theta(system, config=SorConfig(tol=1e-10))
    assert result.error_history[-1] <= 1e-10
    assert result.error_history[0] > result.error_history[-1]


def test_periodic_slaves_mirror_masters():
    mesh = structured_rect_mesh(0, 0.1, -0.04, 0.04, 16, 6, "QUAD4")
    mesh.boundary_sets["axial_left"] = mesh.boundary_sets.pop("y_min")
    mesh.boundary_sets["axial_right"] = mesh.boundary_sets.pop("y_max")
    pair_periodic_boundaries(mesh, axis="x")
    h = 1.5e-4 + 0.5e-4 * np.cos(2 * math.pi * mesh.nodes[:, 0] / 0.1)
    co = gre_coefficients(h, 0.1, 810.0)
    problem, bcs = build_gre_problem(mesh, co, KIN, MODEL, p_ambient=P_AMB)
    system = build_gre_system(mesh, problem, bcs, MODEL)
    result = sor_p_theta(system, config=SorConfig(tol=1e-9))
    m, s = mesh.periodic_pairs.T
    assert np.array_equal(result.p[m], result.p[s])
    assert np.array_equal(result.theta[m], result.theta[s])


# ---------------------------------------------------------------------------
# direct linear solve
# ---------------------------------------------------------------------------

def test_linear_solve_exact_small_system():
    class Sys:
        A = sp.csr_matrix(np.array([[4.0, 1.0], [1.0, 3.0]]))
        b = np.array([1.0, 2.0])
    x = linear_solve(Sys())
    assert np.allclose(x, np.linalg.solve(Sys.A.toarray(), Sys.b),
                       atol=1e-14)


def test_linear_solve_rejects_singular():
    class Sys:
        A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
        b = np.array([1.0, 2.0])
    with pytest.raises(SolverError):
        linear_solve(Sys())


# ---------------------------------------------------------------------------
# load integrals
# ---------------------------------------------------------------------------

def periodic_band(n_x=64, n_y=16, radius=0.03, length=0.08):
    mesh = structured_rect_mesh(0, 2 * math.pi * radius,
                                -length / 2, length / 2, n_x, n_y, "QUAD4")
    pair_periodic_boundaries(mesh, axis="x")
    return mesh


def test_cosine_pressure_gives_closed_form_vertical_load():
    radius, length, P0 = 0.03, 0.08, 1e6
    mesh = periodic_band()
    p = P0 * np.cos(mesh.nodes[:, 0] / radius)
    W, M = hydrodynamic_loads(mesh, p, radius=radius)
    assert W[1] == pytest.approx(-P0 * math.pi * radius * length, rel=1e-12)
    assert abs(W[0]) <= 1e-9 * abs(W[1])
    assert np.abs(M).max() <= 1e-9 * abs(W[1]) * length


def test_sine_pressure_gives_closed_form_horizontal_load():
    radius, length, P0 = 0.03, 0.08, 1e6
    mesh = periodic_band()
    p = P0 * np.sin(mesh.nodes[:, 0] / radius)
    W, _ = hydrodynamic_loads(mesh, p, radius=radius)
    assert W[0] == pytest.approx(-P0 * math.pi * radius * length, rel=1e-12)


def test_antisymmetric_pressure_gives_pure_moment():
    radius, length, P0 = 0.03, 0.08, 1e6
    mesh = periodic_band()
    y = mesh.nodes[:, 1]
    p = P0 * (2 * y / length) * np.cos(mesh.nodes[:, 0] / radius)
    W, M = hydrodynamic_loads(mesh, p, radius=radius)
    assert abs(W[1]) <= 1e-9 * abs(M[0])
    # nodal quadrature of the y^2 weight converges at second order
    assert M[0] == pytest.approx(P0 * math.pi * radius * length ** 2 / 6.0,
                                 rel=0.01)


def test_uniform_pressure_yields_no_net_load_on_closed_band():
    mesh = periodic_band()
    W, M = hydrodynamic_loads(mesh, np.full(mesh.n_nodes, 7e5), radius=0.03)
    assert np.abs(W).max() <= 1e-6
    assert np.abs(M).max() <= 1e-6


# ---------------------------------------------------------------------------
# Newton equilibrium
# ---------------------------------------------------------------------------

def test_linear_residual_converges_in_one_iteration():
    A = np.array([[2.0, 0.3], [0.1, 1.5]])
    b = np.array([1.0, -2.0])
    problem = DynamicsProblem(f_ext_norm=np.linalg.norm(b),
                              scales=np.ones(2), tol=1e-6)
    result = newton_equilibrium(lambda q: A @ q - b, np.zeros(2), problem)
    assert result.converged
    assert result.n_iter == 1
    assert np.allclose(result.q, np.linalg.solve(A, b), rtol=1e-6)


def test_cubic_residual_shows_quadratic_tail():
    problem = DynamicsProblem(f_ext_norm=8.0, scales=np.ones(1), tol=1e-13)
    result = newton_equilibrium(lambda q: np.array([q[0] ** 3 - 8.0]),
                                np.array([3.0]), problem)
    assert result.converged
    assert result.q[0] == pytest.approx(2.0, rel=1e-10)
    errs = [r for _, r, _ in result.history if r > 1e-9]
    assert len(errs) >= 3
    ratios = [errs[k + 1] / errs[k] ** 2 for k in range(len(errs) - 1)]
    assert all(r < 0.5 for r in ratios[-2:])


def test_zero_initial_residual_returns_immediately():
    problem = DynamicsProblem(f_ext_norm=1.0, scales=np.ones(1), tol=1e-6)
    result = newton_equilibrium(lambda q: np.array([0.0]),
                                np.array([5.0]), problem)
    assert result.converged and result.n_iter == 0
    assert result.q[0] == 5.0


def test_line_search_backs_off_from_contact():
    # residual defined only for q < 1: the solver must damp its step
    # rather than cross the contact barrier.
    def residual(q):
        if q[0] >= 1.0:
            raise ContactError("film closed")
        return np.array([1.0 / (1.0 - q[0]) - 4.0])   # root at 0.75

    problem = DynamicsProblem(f_ext_norm=4.0, scales=np.ones(1), tol=1e-10)
    result = newton_equilibrium(residual, np.array([0.0]), problem)
    assert result.converged
    assert result.q[0] == pytest.approx(0.75, rel=1e-8)


def test_unreachable_residual_raises_with_diagnostics():
    problem = DynamicsProblem(f_ext_norm=1.0, scales=np.ones(1),
                              tol=1e-12, max_iter=4)
    with pytest.raises(NonConvergedError) as err:
        newton_equilibrium(lambda q: np.array([q[0] ** 2 + 1.0]),
                           np.array([2.0]), problem)
    assert err.value.diagnostics is not None


def test_dynamics_problem_validation():
    with pytest.raises(ValueError):
        DynamicsProblem(f_ext_norm=1.0, scales=np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        DynamicsProblem(f_ext_norm=-1.0, scales=np.ones(2))
