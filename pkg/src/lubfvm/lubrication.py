"""Cavitation-aware Reynolds problem on the bearing surface mesh.

Builds the thin-film pressure equation as a transport problem: the
Poiseuille term is diffusion of ``p`` with coefficient ``eps``; the
Couette term is upwind convection of the film fraction ``theta`` carried
by the surface-velocity streams; the squeeze term is the backward-Euler
time derivative of ``theta * rho_e``.  Cross-film property variation
enters through five z-integrals of the viscosity/density profiles,
evaluated per surface node by composite Simpson quadrature.

Cross-film datum: ``z = 0`` at the bushing surface, ``z = h`` at the
journal.  The secondary Couette stream (coefficient
``rho_1 = rho_e - rho_e_star``) is carried by the velocity of the datum
surface -- the bushing -- which follows from re-deriving the film-averaged
mass flux with this datum; it vanishes for a stationary bushing.

Also houses the lubricant property closures (density, piezoviscosity,
liquid/vapour mixture scaling), the film-thickness law with misalignment
and texture, and the reduced system hand-off to the pressure/film-
fraction relaxation solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_simpson, simpson

from .assembly import BoundaryConditions, TransportProblem, assemble_raw, fold_map
from .errors import ContactError, MeshError
from .mesh import Mesh, TextureSpec, evaluate_texture_depth

__all__ = [
    "LubricantModel", "FilmState", "KinematicsState", "GreCoefficients",
    "GreSystem", "film_thickness", "density", "viscosity", "mixture_adjust",
    "gre_coefficients", "build_gre_problem", "build_gre_system",
    "gre_residual",
]

_ROELANDS_T_POLE = 138.0     # [K] temperature pole of the viscosity law


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------

@dataclass
class LubricantModel:
    """Lubricant property closure constants (SI units).

    ``c1``/``c2`` are the pressure-densification constants [1/Pa], ``c3``
    the thermal expansion of density [1/K]; ``roelands_*`` parametrise
    the pressure/temperature viscosity law; ``expansivity`` is the
    thermal compressibility ``beta`` entering the compressive-heating
    source.
    """

    density0: float                      # rho_0 [kg/m^3]
    viscosity0: float                    # eta_0 [Pa s]
    c1: float = 0.6e-9                   # [1/Pa]
    c2: float = 1.7e-9                   # [1/Pa]
    c3: float = 6.5e-4                   # [1/K]
    roelands_z: float = 0.689
    roelands_s0: float = 1.3891
    roelands_pr: float = 5.1e9           # [Pa]
    conductivity: float = 0.105          # k [W/(m K)]
    heat_capacity: float = 2300.0        # c_p [J/(kg K)]
    expansivity: float = 6.5e-4          # beta [1/K]
    cavitation_pressure: float = 0.0     # p_cav [Pa]
    reference_temperature: float = 353.15  # T_0 [K]

    def __post_init__(self):
        for name in ("density0", "viscosity0", "conductivity", "heat_capacity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class KinematicsState:
    """Surface velocities and journal position.

    ``journal_velocity``/``bushing_velocity`` are the tangential surface
    velocities (u, v) [m/s]; ``q = (X_r, Y_r, A_r, B_r)`` collects the
    journal-centre displacements [m] and tilts [rad], ``q_dot`` their
    rates.
    """

    journal_velocity: tuple = (0.0, 0.0)
    bushing_velocity: tuple = (0.0, 0.0)
    q: np.ndarray = field(default_factory=lambda: np.zeros(4))
    q_dot: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.q_dot = np.asarray(self.q_dot, dtype=float)

    @property
    def mean_velocity(self) -> np.ndarray:
        j, b = self.journal_velocity, self.bushing_velocity
        return 0.5 * (np.asarray(j, float) + np.asarray(b, float))

    @property
    def datum_velocity(self) -> np.ndarray:
        """Velocity of the z = 0 (bushing) surface."""
        return np.asarray(self.bushing_velocity, dtype=float)


@dataclass
class FilmState:
    """Nodal solution snapshot of the film problem.

    Current pressure/film-fraction/thickness plus the previous-time-level
    copies needed by the squeeze term.
    """

    p: np.ndarray
    theta: np.ndarray
    h: np.ndarray
    p_prev: np.ndarray | None = None
    theta_prev: np.ndarray | None = None
    h_prev: np.ndarray | None = None

    def complementarity(self, p_cav: float) -> np.ndarray:
        """Per-node cavitation complementarity residual ``(p - p_cav)(1 - theta)``."""
        return (self.p - p_cav) * (1.0 - self.theta)


class GreCoefficients(NamedTuple):
    """Cross-film integral coefficients per surface node."""

    eps: np.ndarray          # Poiseuille diffusivity [kg s / m]... rho h^3/(12 eta) limit
    rho_e: np.ndarray        # film-integrated density [kg/m^2]
    rho_e_star: np.ndarray   # mean-velocity Couette coefficient [kg/m^2]
    rho_1_star: np.ndarray   # datum-surface Couette coefficient [kg/m^2]


# ---------------------------------------------------------------------------
# Property closures
# ---------------------------------------------------------------------------

def density(p, T, model: LubricantModel) -> np.ndarray:
    """Pressure/temperature density law.

    ``rho = rho0 * (1 + c1 p / (1 + c2 p)) * (1 - c3 (T - T0))``.
    """
    p = np.asarray(p, dtype=float)
    T = np.asarray(T, dtype=float)
    return model.density0 * (1.0 + model.c1 * p / (1.0 + model.c2 * p)) \
        * (1.0 - model.c3 * (T - model.reference_temperature))


def viscosity(p, T, model: LubricantModel) -> np.ndarray:
    """Pressure/temperature viscosity law (piezoviscous, thermally thinning).

    ``eta = eta0 * exp{(ln eta0 + 9.67) * [-1 + (1 + p/p_r)^Z *
    ((T - 138)/(T0 - 138))^(-S0)]}`` with T in kelvin; the law has a pole
    at T = 138 K and any sample at or below it raises ``ValueError``.
    """
    p = np.asarray(p, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(T <= _ROELANDS_T_POLE):
        raise ValueError(
            f"viscosity law undefined for T <= {_ROELANDS_T_POLE} K "
            f"(got min {np.min(T):.6g} K)")
    t_ratio = (T - _ROELANDS_T_POLE) / \
        (model.reference_temperature - _ROELANDS_T_POLE)
    exponent = (np.log(model.viscosity0) + 9.67) * (
        -1.0 + (1.0 + p / model.roelands_pr) ** model.roelands_z
        * t_ratio ** (-model.roelands_s0))
    return model.viscosity0 * np.exp(exponent)


def mixture_adjust(eta, rho, theta):
    """Liquid/vapour mixture properties: both scale linearly with ``theta``."""
    theta = np.asarray(theta, dtype=float)
    return theta * np.asarray(eta, float), theta * np.asarray(rho, float)


# ---------------------------------------------------------------------------
# Film thickness
# ---------------------------------------------------------------------------

def film_thickness(x, y, q, c: float, texture: TextureSpec | None = None,
                   radius: float | None = None) -> np.ndarray:
    """Gap height with journal displacement, tilt and texture pockets.

    ``h = c - (Y_r - A_r y) cos(xh) + (X_r - B_r y) sin(xh) + h_T(x, y)``
    where ``xh`` is the circumferential angle: ``x / radius`` when
    ``radius`` is given, else ``x`` itself is taken as the angle.
    Raises :class:`ContactError` if the film closes anywhere (h <= 0);
    never clamps.
    """
    if not c > 0:
        raise ValueError(f"clearance must be positive, got {c}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X_r, Y_r, A_r, B_r = np.asarray(q, dtype=float)
    xh = x / radius if radius is not None else x
    h = c - (Y_r - A_r * y) * np.cos(xh) + (X_r - B_r * y) * np.sin(xh)
    if texture is not None:
        h = h + evaluate_texture_depth(x, y, texture)
    h_min = np.min(h)
    if h_min <= 0:
        raise ContactError(
            f"film thickness reached {h_min:.4e} m (surfaces touch)")
    return h


# ---------------------------------------------------------------------------
# Cross-film coefficient integrals
# ---------------------------------------------------------------------------

def _sample_profile(profile, h: np.ndarray, zf: np.ndarray, name: str) -> np.ndarray:
    """Evaluate a property profile at the fractional z-stations.

    Accepts a callable ``f(z)`` (vectorised, z in metres, broadcast
    against ``h[..., None] * zf``), a ``(..., n_z)`` sample array, or a
    scalar/nodal constant.
    """
    n_z = zf.size
    if callable(profile):
        return np.asarray(profile(h[..., None] * zf), dtype=float) \
            * np.ones(h.shape + (n_z,))
    arr = np.asarray(profile, dtype=float)
    if arr.ndim == 0:
        return np.full(h.shape + (n_z,), float(arr))
    if arr.shape == h.shape:
        return np.repeat(arr[..., None], n_z, axis=-1)
    if arr.shape[-1] == n_z and arr.shape[:-1] in (h.shape, (1,) * h.ndim, ()):
        return np.broadcast_to(arr, h.shape + (n_z,)).astype(float)
    raise ValueError(
        f"{name} must be callable, scalar, shape {h.shape} or "
        f"(..., {n_z}); got {arr.shape}")


def gre_coefficients(h, eta, rho, n_z: int = 11) -> GreCoefficients:
    """Cross-film integrals of the viscosity/density profiles.

    Five integrals over ``z in [0, h]`` (composite Simpson on ``n_z``
    uniform stations, ``n_z`` odd and >= 3) combine into the Poiseuille
    diffusivity ``eps``, the film-integrated density ``rho_e`` and the
    two Couette coefficients.  ``eta``/``rho`` may be callables of z,
    precomputed ``(..., n_z)`` station samples, or constants.  For
    constant properties ``eps = rho h^3 / (12 eta)`` exactly.
    """
    if n_z < 3 or n_z % 2 == 0:
        raise ValueError(f"n_z must be odd and >= 3, got {n_z}")
    h = np.asarray(h, dtype=float)
    scalar_in = h.ndim == 0
    h = np.atleast_1d(h)
    if np.any(h <= 0):
        raise ContactError(f"non-positive film thickness {np.min(h):.4e} m")
    zf = np.linspace(0.0, 1.0, n_z)
    eta_s = _sample_profile(eta, h, zf, "eta")
    rho_s = _sample_profile(rho, h, zf, "rho")
    if np.any(eta_s <= 0):
        raise ValueError("viscosity profile has a non-positive sample")

    z = h[..., None] * zf                       # (..., n_z) physical stations
    dx = h / (n_z - 1)

    def integ(f):
        return simpson(f, dx=1.0, axis=-1) * dx

    inv_eta_e = integ(1.0 / eta_s)
    inv_eta_p = integ(z / eta_s)
    rho_e = integ(rho_s)
    # Inner cumulative integrals F(z) = int_0^z dz'/eta, g(z) = int_0^z z' dz'/eta.
    F = cumulative_simpson(1.0 / eta_s, x=z, axis=-1, initial=0.0)
    g = cumulative_simpson(z / eta_s, x=z, axis=-1, initial=0.0)
    rho_p = integ(rho_s * F)
    rho_pp = integ(rho_s * g)

    eta_e = 1.0 / inv_eta_e
    eta_p = 1.0 / inv_eta_p
    eps = (eta_e / eta_p) * rho_p - rho_pp
    rho_e_star = 2.0 * eta_e * rho_p
    rho_1_star = rho_e - rho_e_star
    out = GreCoefficients(eps=eps, rho_e=rho_e, rho_e_star=rho_e_star,
                          rho_1_star=rho_1_star)
    if scalar_in:
        out = GreCoefficients(*(np.squeeze(a) for a in out))
    return out


# ---------------------------------------------------------------------------
# Problem construction
# ---------------------------------------------------------------------------

def build_gre_problem(mesh: Mesh, coeffs: GreCoefficients,
                      kin: KinematicsState,
                      model: LubricantModel,
                      p_supply: float | None = None,
                      p_ambient: float = 0.0,
                      dt: float | None = None,
                      prev_mass: np.ndarray | None = None,
                      ) -> tuple[TransportProblem, BoundaryConditions]:
    """Transport problem + boundary conditions of the film pressure equation.

    Diffusion of ``p`` with coefficient ``eps``; convection of ``theta``
    by the mean-surface-velocity stream and the datum-surface stream;
    squeeze history via ``prev_mass = (rho_e theta)`` of the previous
    level when ``dt`` is given.  Boundary conditions: supply pressure on
    the ``feed_hole`` set (if present), ambient pressure on the axial
    ends, periodic closure across the circumferential seam.
    """
    n = mesh.n_nodes
    ones = np.ones((n, 1))
    streams = [(coeffs.rho_e_star, ones * kin.mean_velocity)]
    v_ref = kin.datum_velocity
    if np.any(v_ref != 0.0):
        streams.append((coeffs.rho_1_star, ones * v_ref))
    problem = TransportProblem(
        gamma_d=coeffs.eps, convection=streams,
        rho=coeffs.rho_e, prev_mass=prev_mass, dt=dt)

    diri: dict[int, float] = {}
    for name in ("axial_left", "axial_right"):
        if name in mesh.boundary_sets:
            for node in mesh.boundary_sets[name]:
                diri[int(node)] = p_ambient
    flooded: tuple = ()
    if p_supply is not None and "feed_hole" in mesh.boundary_sets:
        for node in mesh.boundary_sets["feed_hole"]:
            diri[int(node)] = p_supply
        flooded = tuple(int(n) for n in mesh.boundary_sets["feed_hole"])
    return problem, BoundaryConditions(dirichlet=diri, flooded=flooded)


@dataclass
class GreSystem:
    """Folded sparse operators of the film equation, ready for relaxation.

    All arrays live on the full node space; periodic slaves have empty
    matrix rows/columns and are excluded from ``sweep_nodes`` (their
    values mirror the master after each solve).  The nodal balance is
    ``s1*theta + C theta - D p = rhs``.
    """

    D: sp.csr_matrix
    C: sp.csr_matrix
    s1: np.ndarray
    rhs: np.ndarray
    sweep_nodes: np.ndarray
    p_fixed: np.ndarray          # bool; value imposed in p_values
    p_values: np.ndarray
    theta_fixed: np.ndarray      # bool; value imposed in theta_values
    theta_values: np.ndarray
    node_map: np.ndarray
    p_cav: float

    @property
    def n_nodes(self) -> int:
        return self.node_map.size

    def impose(self, p: np.ndarray, theta: np.ndarray) -> None:
        """Write the fixed values and mirror masters onto slaves in place."""
        p[self.p_fixed] = self.p_values[self.p_fixed]
        theta[self.theta_fixed] = self.theta_values[self.theta_fixed]
        slaves = np.flatnonzero(self.node_map != np.arange(self.n_nodes))
        p[slaves] = p[self.node_map[slaves]]
        theta[slaves] = theta[self.node_map[slaves]]


def build_gre_system(mesh: Mesh, problem: TransportProblem,
                     bcs: BoundaryConditions, model: LubricantModel,
                     ) -> GreSystem:
    """Assemble and fold the film equation for the relaxation solver.

    Nodes with prescribed pressure above the cavitation pressure also get
    ``theta = 1`` (a flooded boundary); prescribed pressure at or below
    it leaves ``theta`` free so the cavitated state can extend to the
    boundary (a ventilated edge).  Nodes in ``bcs.flooded`` (oil
    sources) are kept at ``theta = 1`` regardless of their pressure.
    """
    diri, pairs = bcs.normalised(mesh)
    raw = assemble_raw(mesh, problem)
    n = raw.n_nodes
    node_map = fold_map(n, pairs)

    D = raw.diffusion_csr(node_map)
    C = raw.convection_csr(node_map)
    s1 = np.zeros(n)
    np.add.at(s1, node_map, raw.s1)
    rhs = np.zeros(n)
    np.add.at(rhs, node_map, raw.s3 + raw.history)

    p_fixed = np.zeros(n, dtype=bool)
    p_values = np.zeros(n)
    theta_fixed = np.zeros(n, dtype=bool)
    theta_values = np.ones(n)
    p_cav = model.cavitation_pressure
    for node, value in diri.items():
        p_fixed[node] = True
        p_values[node] = value
        if value > p_cav:
            theta_fixed[node] = True
            theta_values[node] = 1.0
    for node in bcs.flooded:
        theta_fixed[node] = True
        theta_values[node] = 1.0
    is_slave = node_map != np.arange(n)
    if np.any(p_fixed & is_slave):
        raise MeshError("prescribed pressure landed on a periodic slave node")
    sweep = np.flatnonzero(~is_slave)
    return GreSystem(D=D, C=C, s1=s1, rhs=rhs, sweep_nodes=sweep,
                     p_fixed=p_fixed, p_values=p_values,
                     theta_fixed=theta_fixed, theta_values=theta_values,
                     node_map=node_map, p_cav=p_cav)


def gre_residual(system: GreSystem, p: np.ndarray, theta: np.ndarray,
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Re-evaluated nodal balance and a mask of the CVs that must satisfy it.

    Returns ``(residual, free)`` where ``residual = s1*theta + C theta -
    D p - rhs`` on the folded node space and ``free`` excludes
    pressure-prescribed nodes and periodic slaves (their CVs absorb
    boundary flux).
    """
    res = system.s1 * theta + system.C @ theta - system.D @ p - system.rhs
    free = ~system.p_fixed
    free[np.flatnonzero(system.node_map != np.arange(system.n_nodes))] = False
    return res, free
