"""Lubricant property closures, film geometry, and the pressure-equation
coefficient integrals."""

import math

import mpmath
import numpy as np
import pytest

from lubfvm.errors import ContactError
from lubfvm.lubrication import (KinematicsState, LubricantModel,
                                build_gre_problem, build_gre_system,
                                density, film_thickness, gre_coefficients,
                                mixture_adjust, viscosity)
from lubfvm.mesh import structured_rect_mesh

MODEL = LubricantModel(density0=810.0, viscosity0=0.1)
T0 = MODEL.reference_temperature


# ---------------------------------------------------------------------------
# density and viscosity
# ---------------------------------------------------------------------------

def test_density_reference_state_exact():
    assert density(0.0, T0, MODEL) == 810.0


def test_density_pressure_rise_at_1gpa():
    p = 1.0e9
    expected = 810.0 * (1.0 + 0.6e-9 * p / (1.0 + 1.7e-9 * p))
    assert density(p, T0, MODEL) == pytest.approx(expected, rel=1e-15)
    assert density(p, T0, MODEL) / 810.0 == pytest.approx(1.2222, rel=1e-4)


def test_density_thermal_expansion():
    assert density(0.0, T0 + 100.0, MODEL) / 810.0 == pytest.approx(
        0.935, rel=1e-12)


def test_viscosity_reference_state_exact():
    assert viscosity(0.0, T0, MODEL) == pytest.approx(0.1, rel=1e-15)


def test_viscosity_pole_temperature_rejected():
    with pytest.raises(ValueError):
        viscosity(0.0, 138.0, MODEL)
    with pytest.raises(ValueError):
        viscosity(0.0, 120.0, MODEL)


def test_viscosity_matches_high_precision_evaluation():
    mpmath.mp.dps = 50
    z, s0 = MODEL.roelands_z, MODEL.roelands_s0
    pr, eta0 = MODEL.roelands_pr, MODEL.viscosity0
    for p in (0.0, 5e6, 2e8):
        for T in (313.15, T0, 393.15):
            lead = mpmath.log(eta0) + mpmath.mpf("9.67")
            term = (-1 + (1 + mpmath.mpf(p) / pr) ** z
                    * ((mpmath.mpf(T) - 138) / (mpmath.mpf(T0) - 138))
                    ** (-s0))
            expected = float(eta0 * mpmath.exp(lead * term))
            got = viscosity(p, T, MODEL)
            assert abs(got - expected) <= 1e-12 * expected


def test_mixture_scaling():
    eta_m, rho_m = mixture_adjust(0.2, 900.0, 0.5)
    assert eta_m == 0.1
    assert rho_m == 450.0


# ---------------------------------------------------------------------------
# film thickness
# ---------------------------------------------------------------------------

def test_film_thickness_concentric_is_clearance():
    x = np.linspace(0, 2 * math.pi, 20)
    y = np.zeros_like(x)
    h = film_thickness(x, y, np.zeros(4), 20e-6)
    assert np.allclose(h, 20e-6, atol=0)


def test_film_thickness_eccentricity_pattern():
    c = 20e-6
    x = np.array([0.0, math.pi / 2, math.pi, 3 * math.pi / 2])
    y = np.zeros_like(x)
    h = film_thickness(x, y, np.array([0.0, -0.5 * c, 0.0, 0.0]), c)
    assert h[0] == pytest.approx(1.5 * c, rel=1e-14)    # wide at angle 0
    assert h[2] == pytest.approx(0.5 * c, rel=1e-14)    # pinched opposite
    h2 = film_thickness(x, y, np.array([0.5 * c, 0.0, 0.0, 0.0]), c)
    assert h2[1] == pytest.approx(1.5 * c, rel=1e-14)


def test_film_thickness_tilt_varies_linearly_in_y():
    c, L = 20e-6, 0.08
    y = np.array([-L / 2, 0.0, L / 2])
    x = np.full_like(y, math.pi / 2)        # sin = 1 plane
    q = np.array([0.0, 0.0, 0.0, 2e-4])     # tilt about Y
    h = film_thickness(x, y, q, c)
    slope = (h[2] - h[0]) / L
    assert slope == pytest.approx(-2e-4, rel=1e-12)
    assert h[1] == pytest.approx(c, rel=1e-12)


def test_film_thickness_angle_scaling_with_radius():
    c, R = 20e-6, 0.03
    q = np.array([0.0, -0.5 * c, 0.0, 0.0])
    h_angle = film_thickness(np.array([math.pi]), np.zeros(1), q, c)
    h_arc = film_thickness(np.array([math.pi * R]), np.zeros(1), q, c,
                           radius=R)
    assert h_angle[0] == h_arc[0]


def test_film_thickness_texture_adds_depth():
    from lubfvm.mesh import dimple_row
    tex = dimple_row(1, 1e-3, 8e-3, depth=20e-6)
    cx, cy, _ = tex.dimples[0]
    h = film_thickness(np.array([cx, cx + 5e-3]), np.array([cy, cy]),
                       np.zeros(4), 20e-6, texture=tex)
    assert h[0] == pytest.approx(40e-6, rel=1e-14)
    assert h[1] == pytest.approx(20e-6, rel=1e-14)


def test_film_contact_raises():
    c = 20e-6
    with pytest.raises(ContactError):
        film_thickness(np.array([math.pi]), np.zeros(1),
                       np.array([0.0, -1.5 * c, 0.0, 0.0]), c)


# ---------------------------------------------------------------------------
# coefficient integrals
# ---------------------------------------------------------------------------

def test_isoviscous_coefficients():
    h = np.array([1e-4, 2e-4])
    eta = 0.05
    rho = 850.0
    co = gre_coefficients(h, eta, rho, n_z=11)
    assert np.abs(co.eps - rho * h ** 3 / (12 * eta)).max() \
        <= 1e-12 * co.eps.max()
    assert np.abs(co.rho_e - rho * h).max() <= 1e-12 * (rho * h).max()
    assert np.abs(co.rho_e_star - rho * h).max() <= 1e-12 * (rho * h).max()
    assert np.abs(co.rho_1_star).max() <= 1e-12 * (rho * h).max()


def test_coefficients_scale_with_film_cubed():
    co1 = gre_coefficients(np.array([1e-4]), 0.1, 810.0)
    co2 = gre_coefficients(np.array([2e-4]), 0.1, 810.0)
    assert co2.eps[0] / co1.eps[0] == pytest.approx(8.0, rel=1e-12)
    assert co2.rho_e[0] / co1.rho_e[0] == pytest.approx(2.0, rel=1e-12)


def test_coefficients_match_dense_quadrature_for_varying_viscosity():
    # Linear cross-film viscosity profile, reference values from a very
    # fine trapezoid evaluation of the defining integrals.
    h = 1e-4
    eta0 = 0.1

    def eta_of_z(z):
        return eta0 * (1.0 + z / h)

    z = np.linspace(0.0, h, 100_001)
    eta = eta_of_z(z)
    inv_eta = 1.0 / eta
    F = np.concatenate([[0.0], np.cumsum(
        0.5 * (inv_eta[1:] + inv_eta[:-1]) * np.diff(z))])
    g = np.concatenate([[0.0], np.cumsum(
        0.5 * (z[1:] * inv_eta[1:] + z[:-1] * inv_eta[:-1]) * np.diff(z))])
    rho = 810.0
    eta_e = 1.0 / np.trapezoid(inv_eta, z)
    eta_e_p = 1.0 / np.trapezoid(z * inv_eta, z)
    rho_p = np.trapezoid(rho * F, z)
    rho_pp = np.trapezoid(rho * g, z)
    eps_ref = (eta_e / eta_e_p) * rho_p - rho_pp
    rho_e_star_ref = 2.0 * eta_e * rho_p

    co = gre_coefficients(np.array([h]), eta_of_z, rho, n_z=201)
    assert abs(co.eps[0] - eps_ref) <= 1e-8 * abs(eps_ref)
    assert abs(co.rho_e_star[0] - rho_e_star_ref) <= 1e-8 * rho_e_star_ref
    assert abs(co.rho_e[0] - rho * h) <= 1e-12 * rho * h
    assert abs(co.rho_1_star[0]
               - (rho * h - rho_e_star_ref)) <= 1e-8 * rho * h


def test_coefficient_stations_must_be_odd():
    with pytest.raises(ValueError):
        gre_coefficients(np.array([1e-4]), 0.1, 810.0, n_z=10)


# ---------------------------------------------------------------------------
# pressure problem wiring
# ---------------------------------------------------------------------------

def _bearing_surface():
    mesh = structured_rect_mesh(0, 0.1, -0.04, 0.04, 8, 4, "QUAD4")
    mesh.boundary_sets["axial_left"] = mesh.boundary_sets.pop("y_min")
    mesh.boundary_sets["axial_right"] = mesh.boundary_sets.pop("y_max")
    return mesh


def test_problem_has_single_stream_for_stationary_bushing():
    mesh = _bearing_surface()
    co = gre_coefficients(np.full(mesh.n_nodes, 1e-4), 0.1, 810.0)
    kin = KinematicsState(journal_velocity=(10.0, 0.0),
                          bushing_velocity=(0.0, 0.0),
                          q=np.zeros(4), q_dot=np.zeros(4))
    problem, bcs = build_gre_problem(mesh, co, kin, MODEL, p_ambient=1e5)
    assert len(problem.convection) == 1
    gamma_c, v = problem.convection[0]
    assert np.allclose(v[:, 0], 5.0, atol=0)        # mean surface speed
    ends = set(map(int, mesh.set_nodes("axial_left"))) \
        | set(map(int, mesh.set_nodes("axial_right")))
    assert set(bcs.dirichlet) == ends
    assert all(v == 1e5 for v in bcs.dirichlet.values())


def test_problem_adds_datum_stream_for_moving_bushing():
    mesh = _bearing_surface()
    co = gre_coefficients(np.full(mesh.n_nodes, 1e-4), 0.1, 810.0)
    kin = KinematicsState(journal_velocity=(10.0, 0.0),
                          bushing_velocity=(2.0, 0.0),
                          q=np.zeros(4), q_dot=np.zeros(4))
    problem, _ = build_gre_problem(mesh, co, kin, MODEL, p_ambient=1e5)
    assert len(problem.convection) == 2
    _, v_datum = problem.convection[1]
    assert np.allclose(v_datum[:, 0], 2.0, atol=0)


def test_system_fixes_theta_on_pressurised_boundaries():
    mesh = _bearing_surface()
    co = gre_coefficients(np.full(mesh.n_nodes, 1e-4), 0.1, 810.0)
    kin = KinematicsState(journal_velocity=(10.0, 0.0),
                          bushing_velocity=(0.0, 0.0),
                          q=np.zeros(4), q_dot=np.zeros(4))
    problem, bcs = build_gre_problem(mesh, co, kin, MODEL, p_ambient=1e5)
    system = build_gre_system(mesh, problem, bcs, MODEL)
    fixed = np.flatnonzero(system.p_fixed)
    assert set(fixed) == set(bcs.dirichlet)
    assert np.all(system.theta_fixed[fixed])        # ambient > cavitation
    assert np.all(system.theta_values[fixed] == 1.0)
