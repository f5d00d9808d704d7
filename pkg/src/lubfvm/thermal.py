"""Film energy equation on the extruded three-dimensional gap mesh.

The temperature field is solved in the physical gap: the surface mesh is
extruded column-wise through the local film thickness (``z = 0`` bushing
wall, ``z = h`` journal wall), quadrilaterals becoming hexahedron stacks
and triangles becoming wedge stacks.  Temperature transport is plain
advection--diffusion with ``rho c_p`` capacity, conductivity ``k``, and a
volumetric source combining compressive heating ``beta T (dp/dt +
vbar . grad p)`` (mean-flow velocity) and viscous shear heating
``eta [(du/dz)^2 + (dv/dz)^2]``.

The in-film velocity is the standard thin-film closure: a Poiseuille
parabola from the surface pressure gradient plus a linear Couette part
between the wall velocities, with the local (node-wise) viscosity in the
parabolic factor; the cross-film component ``w`` follows from integrating
the continuity equation upward from the bushing wall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import BoundaryConditions, TransportProblem, nodal_gradient
from .errors import ContactError, MeshError
from .lubrication import KinematicsState, LubricantModel
from .mesh import Mesh

__all__ = [
    "FilmMesh3D", "VelocityField", "extrude_film_mesh",
    "reconstruct_velocity", "heat_sources", "heat_source_split",
    "build_energy_problem", "extract_midplane",
]


@dataclass
class FilmMesh3D:
    """Extruded gap mesh plus the column bookkeeping.

    ``columns[s, k]`` is the 3D node id of surface node ``s`` at level
    ``k`` (``k = 0`` bushing wall ... ``n_layers`` journal wall); levels
    are evenly spaced through the local thickness ``h[s]``.
    """

    mesh: Mesh
    surface: Mesh
    n_layers: int
    columns: np.ndarray
    h: np.ndarray

    @property
    def n_surface(self) -> int:
        return self.surface.n_nodes

    @property
    def z_fractions(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_layers + 1)

    def column_field(self, nodal: np.ndarray) -> np.ndarray:
        """Reshape a 3D nodal field to (n_surface, n_layers + 1)."""
        return np.asarray(nodal)[self.columns]

    def spread_surface(self, surf_nodal: np.ndarray) -> np.ndarray:
        """Copy a surface nodal field to every level of the 3D mesh."""
        out = np.empty(self.mesh.n_nodes)
        out[self.columns] = np.asarray(surf_nodal, dtype=float)[:, None]
        return out


@dataclass
class VelocityField:
    """Nodal film velocity and the analytic cross-film shear rates."""

    v: np.ndarray        # (n3, 3) [m/s]
    du_dz: np.ndarray    # (n3,) [1/s]
    dv_dz: np.ndarray    # (n3,) [1/s]


def extrude_film_mesh(surface: Mesh, h: np.ndarray, n_layers: int) -> FilmMesh3D:
    """Extrude the surface mesh through the film into volume elements.

    Produces ``n_layers + 1`` node levels at ``z_k = k h / n_layers`` per
    column; Quad4 cells become Hex8 stacks and Tri3 cells Prism6 stacks.
    Surface node sets are propagated to all levels, wall sets
    ``wall_bushing`` (z = 0) and ``wall_journal`` (z = h) are added, and
    periodic pairs replicate level-wise.
    """
    if n_layers < 2:
        raise MeshError(f"n_layers must be >= 2, got {n_layers}")
    if surface.dim != 2:
        raise MeshError("extrusion requires a surface (2D) mesh")
    h = np.asarray(h, dtype=float)
    if h.shape != (surface.n_nodes,):
        raise ValueError(f"h must have shape ({surface.n_nodes},)")
    if np.any(h <= 0):
        raise ContactError(
            f"cannot extrude a non-positive film (min h = {h.min():.4e} m)")

    ns = surface.n_nodes
    levels = np.arange(n_layers + 1)
    columns = levels[None, :] * ns + np.arange(ns)[:, None]     # (ns, L+1)
    xy = surface.nodes[:, :2]
    nodes = np.empty(((n_layers + 1) * ns, 3))
    for k in levels:
        nodes[k * ns:(k + 1) * ns, :2] = xy
        nodes[k * ns:(k + 1) * ns, 2] = h * (k / n_layers)

    element_blocks: dict[str, np.ndarray] = {}
    for kind, conn in surface.element_blocks.items():
        stacked = []
        for k in range(n_layers):
            lo = conn + k * ns
            hi = conn + (k + 1) * ns
            stacked.append(np.hstack([lo, hi]))
        vol_kind = "HEX8" if kind == "QUAD4" else "PRISM6"
        element_blocks[vol_kind] = np.vstack(stacked)

    boundary_sets = {}
    for name, ids in surface.boundary_sets.items():
        boundary_sets[name] = (ids[None, :] + levels[:, None] * ns).ravel()
    boundary_sets["wall_bushing"] = np.arange(ns)
    boundary_sets["wall_journal"] = n_layers * ns + np.arange(ns)

    pairs = surface.periodic_pairs
    if len(pairs):
        pairs3 = np.vstack([pairs + k * ns for k in levels])
    else:
        pairs3 = np.empty((0, 2), dtype=np.int64)

    mesh3 = Mesh(nodes=nodes, element_blocks=element_blocks,
                 boundary_sets=boundary_sets, periodic_pairs=pairs3)
    return FilmMesh3D(mesh=mesh3, surface=surface, n_layers=n_layers,
                      columns=columns, h=h)


def reconstruct_velocity(film3d: FilmMesh3D, p_surface: np.ndarray,
                         eta3: np.ndarray, kin: KinematicsState,
                         ) -> VelocityField:
    """Thin-film velocity at every 3D node.

    ``u(z) = (1/(2 eta)) dp/dx (z^2 - z h) + u2 + (u1 - u2) z/h`` with
    ``(u1, v1)`` the journal (z = h) and ``(u2, v2)`` the bushing (z = 0)
    surface velocities and ``eta`` the local nodal viscosity; same
    pattern for ``v``.  ``w`` integrates the continuity equation
    level-wise upward from ``w = 0`` at the bushing wall.
    """
    u1, v1 = np.asarray(kin.journal_velocity, dtype=float)
    u2, v2 = np.asarray(kin.bushing_velocity, dtype=float)
    grad_p = nodal_gradient(film3d.surface, p_surface)      # (ns, 2)
    h = film3d.h
    zf = film3d.z_fractions                                  # (L+1,)
    z = h[:, None] * zf[None, :]                             # (ns, L+1)
    eta_c = film3d.column_field(eta3)                        # (ns, L+1)

    poiseuille = (z * z - z * h[:, None]) / (2.0 * eta_c)
    u = grad_p[:, [0]] * poiseuille + u2 + (u1 - u2) * zf[None, :]
    v = grad_p[:, [1]] * poiseuille + v2 + (v1 - v2) * zf[None, :]
    dpara = (2.0 * z - h[:, None]) / (2.0 * eta_c)
    du_dz = grad_p[:, [0]] * dpara + (u1 - u2) / h[:, None]
    dv_dz = grad_p[:, [1]] * dpara + (v1 - v2) / h[:, None]

    # Cross-film component from integrated continuity (level-wise surface
    # divergence, trapezoid in z, w = 0 at the bushing wall).
    n_levels = film3d.n_layers + 1
    div = np.empty_like(u)
    for k in range(n_levels):
        gu = nodal_gradient(film3d.surface, u[:, k])
        gv = nodal_gradient(film3d.surface, v[:, k])
        div[:, k] = gu[:, 0] + gv[:, 1]
    dz = np.diff(z, axis=1)
    w = np.zeros_like(u)
    w[:, 1:] = -np.cumsum(0.5 * (div[:, 1:] + div[:, :-1]) * dz, axis=1)

    n3 = film3d.mesh.n_nodes
    vel = np.empty((n3, 3))
    vel[film3d.columns.ravel(), 0] = u.ravel()
    vel[film3d.columns.ravel(), 1] = v.ravel()
    vel[film3d.columns.ravel(), 2] = w.ravel()
    out = np.empty(n3)
    out[film3d.columns.ravel()] = du_dz.ravel()
    dvz = np.empty(n3)
    dvz[film3d.columns.ravel()] = dv_dz.ravel()
    return VelocityField(v=vel, du_dz=out, dv_dz=dvz)


def _compression_coefficient(film3d: FilmMesh3D, p_surface: np.ndarray,
                             vel: VelocityField, model: LubricantModel,
                             dt: float | None,
                             p_surface_prev: np.ndarray | None) -> np.ndarray:
    """``beta (dp/dt + ubar dp/dx + vbar dp/dy)`` per 3D node.

    The compressive heating is this coefficient times the local
    temperature; pressure is uniform across the film, so the cross-film
    advection term drops.  The planar velocity enters as the cross-film
    *mean* ``(ubar, vbar)``: the pressure gradient is z-uniform, so the
    column-integrated work ``integral(u dz) dp/dx = h ubar dp/dx`` is
    exactly preserved, while the z-profile weighting is dropped.  The
    profile weighting is untrustworthy precisely where it matters most:
    at sharp film steps the parabolic part can locally reverse against
    the mean flow, and a recirculating cell then holds a large one-sided
    ``u dp/dx`` source with no advective path out, producing spurious
    hundreds-of-kelvin excursions where the streamline-integrated effect
    ``beta T dp / (rho c_p)`` is only a few kelvin.
    """
    grad_p = nodal_gradient(film3d.surface, p_surface)       # (ns, 2)
    zf = film3d.z_fractions
    u_cols = film3d.column_field(vel.v[:, 0])                # (ns, L+1)
    v_cols = film3d.column_field(vel.v[:, 1])
    ubar = np.trapezoid(u_cols, zf, axis=1)                  # (ns,)
    vbar = np.trapezoid(v_cols, zf, axis=1)
    material = (film3d.spread_surface(ubar * grad_p[:, 0]
                                      + vbar * grad_p[:, 1]))
    if dt is not None and p_surface_prev is not None:
        material = material + film3d.spread_surface(
            (np.asarray(p_surface, float) - np.asarray(p_surface_prev, float))
            / dt)
    return model.expansivity * material


def heat_sources(film3d: FilmMesh3D, p_surface: np.ndarray, T3: np.ndarray,
                 vel: VelocityField, eta3: np.ndarray, model: LubricantModel,
                 dt: float | None = None,
                 p_surface_prev: np.ndarray | None = None) -> np.ndarray:
    """Volumetric heat source per 3D node at the given temperature.

    Compressive heating ``beta T (dp/dt + ubar dp/dx + vbar dp/dy)``
    with the cross-film mean velocity (see
    :func:`_compression_coefficient`), plus viscous dissipation
    ``eta [(du/dz)^2 + (dv/dz)^2]`` from the analytic profile
    derivatives.  Enthalpic heating vanishes for the constant heat
    capacity used here, and internal sources are neglected.
    """
    c3 = _compression_coefficient(film3d, p_surface, vel, model,
                                  dt, p_surface_prev)
    q_phi = np.asarray(eta3, float) * (vel.du_dz ** 2 + vel.dv_dz ** 2)
    return c3 * np.asarray(T3, float) + q_phi


def heat_source_split(film3d: FilmMesh3D, p_surface: np.ndarray,
                      T3: np.ndarray, vel: VelocityField, eta3: np.ndarray,
                      model: LubricantModel, dt: float | None = None,
                      p_surface_prev: np.ndarray | None = None,
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Heat input split into an explicit source and an implicit sink.

    The compressive term ``beta T (dp/dt + u dp/dx + v dp/dy)`` is
    linear in temperature, so its sign decides how a fixed-point solve
    should treat it: where the coefficient heats it must stay an
    explicit source (evaluated at the current iterate ``T3``), but where
    it cools, lagging it makes the iteration overshoot -- on sharp film
    steps the local coefficient can exceed the advective turnover and
    the lagged loop diverges to unbounded negative temperatures.
    Returning the cooling part as a non-negative reaction coefficient
    lets the assembly absorb it into the matrix diagonal, where it is
    unconditionally stable and even strengthens the iterative solver.

    Returns ``(source, reaction)`` with ``source`` the viscous
    dissipation plus the heating branch [W/m^3] and ``reaction`` the
    cooling branch coefficient [W/(m^3 K)]; both sides agree with
    :func:`heat_sources` at a converged temperature field:
    ``source - reaction * T == heat_sources(..., T, ...)``.
    """
    c3 = _compression_coefficient(film3d, p_surface, vel, model,
                                  dt, p_surface_prev)
    q_phi = np.asarray(eta3, float) * (vel.du_dz ** 2 + vel.dv_dz ** 2)
    source = q_phi + np.maximum(c3, 0.0) * np.asarray(T3, float)
    reaction = np.maximum(-c3, 0.0)
    return source, reaction


def build_energy_problem(film3d: FilmMesh3D, vel: VelocityField,
                         q_t: np.ndarray, rho3: np.ndarray,
                         model: LubricantModel,
                         t_supply: float | None = None,
                         t_ambient: float | None = None,
                         wall_temperature: float | None = None,
                         dt: float | None = None,
                         prev_mass: np.ndarray | None = None,
                         reaction: np.ndarray | None = None,
                         ) -> tuple[TransportProblem, BoundaryConditions]:
    """Temperature transport problem on the extruded mesh.

    Diffusivity ``k``, convection ``rho c_p v``, source ``q_t``, optional
    implicit sink ``reaction`` (see :func:`heat_source_split`).
    Boundary conditions: supply temperature on feed-hole columns, ambient
    temperature on the axial ends, periodic circumferential closure,
    walls adiabatic unless ``wall_temperature`` pins them.
    """
    mesh3 = film3d.mesh
    rho3 = np.asarray(rho3, dtype=float)
    problem = TransportProblem(
        gamma_d=model.conductivity,
        convection=[(rho3 * model.heat_capacity, vel.v)],
        rho=rho3 * model.heat_capacity,
        prev_mass=prev_mass, source=q_t, reaction=reaction, dt=dt)

    diri: dict[int, float] = {}
    if t_ambient is not None:
        for name in ("axial_left", "axial_right"):
            if name in mesh3.boundary_sets:
                for node in mesh3.boundary_sets[name]:
                    diri[int(node)] = t_ambient
    if wall_temperature is not None:
        for name in ("wall_bushing", "wall_journal"):
            for node in mesh3.boundary_sets[name]:
                diri[int(node)] = wall_temperature
    if t_supply is not None and "feed_hole" in mesh3.boundary_sets:
        for node in mesh3.boundary_sets["feed_hole"]:
            diri[int(node)] = t_supply
    return problem, BoundaryConditions(dirichlet=diri)


def extract_midplane(film3d: FilmMesh3D, T3: np.ndarray) -> np.ndarray:
    """Per-surface-node value at mid film height ``z = h/2``.

    Falls on a level for even layer counts; linearly interpolated between
    the two central levels otherwise.
    """
    cols = film3d.column_field(T3)
    L = film3d.n_layers
    if L % 2 == 0:
        return cols[:, L // 2].copy()
    return 0.5 * (cols[:, L // 2] + cols[:, L // 2 + 1])
