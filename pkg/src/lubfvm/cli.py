"""Case configuration, the coupled solve loop, and field output.

A case file is a line-oriented text format: ``[section]`` headers with
``key = value`` pairs, ``#`` comments, SI units throughout.  Unknown
keys, malformed values, and physical-range violations are reported with
their line numbers.  Every key the file omits falls back to a logged
default so a run is fully reproducible from its dumped configuration.
"""

from __future__ import annotations

import io
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__
from .assembly import BoundaryConditions, assemble_global
from .errors import (ConfigError, ContactError, LubfvmError,
                     NonConvergedError)
from .lubrication import (GreSystem, KinematicsState, LubricantModel,
                          build_gre_problem, build_gre_system, density,
                          film_thickness, gre_coefficients, viscosity)
from .mesh import (DomainSpec, Mesh, TextureSpec, dimple_row,
                   generate_bearing_mesh, herringbone_grooves,
                   parse_mesh_file, sawtooth_grooves, write_mesh_file)
from .solvers import (DynamicsProblem, NewtonResult, SorConfig, SorResult,
                      hydrodynamic_loads, linear_solve, newton_equilibrium,
                      sor_p_theta)
from .thermal import (FilmMesh3D, build_energy_problem, extract_midplane,
                      extrude_film_mesh, heat_source_split,
                      reconstruct_velocity)

log = logging.getLogger("lubfvm")

__all__ = ["CaseConfig", "Results", "load_case", "dump_case", "run_case",
           "write_fields", "main"]


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

def _at_least(name, lo):
    def check(v):
        if v < lo:
            raise ValueError(f"{name} must be at least {lo}, got {v}")
    return check


def _positive(name):
    def check(v):
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")
    return check


def _non_negative(name):
    def check(v):
        if v < 0:
            raise ValueError(f"{name} must be non-negative, got {v}")
    return check


def _choice(name, options):
    def check(v):
        if v not in options:
            raise ValueError(f"{name} must be one of {sorted(options)}, "
                             f"got {v!r}")
    return check


_REQUIRED = object()

# section -> key -> (type, default-or-required, validator-or-None)
_SCHEMA: dict[str, dict[str, tuple]] = {
    "bearing": {
        "radius": (float, _REQUIRED, _positive("radius")),
        "length": (float, _REQUIRED, _positive("length")),
        "clearance": (float, _REQUIRED, _positive("clearance")),
    },
    "lubricant": {
        "density": (float, _REQUIRED, _positive("density")),
        "viscosity": (float, _REQUIRED, _positive("viscosity")),
        "conductivity": (float, 0.105, _positive("conductivity")),
        "heat_capacity": (float, 2300.0, _positive("heat_capacity")),
        "c1": (float, 0.6e-9, None),
        "c2": (float, 1.7e-9, None),
        "c3": (float, 6.5e-4, None),
        "roelands_z": (float, 0.689, None),
        "roelands_s0": (float, 1.3891, None),
        "roelands_pr": (float, 5.1e9, _positive("roelands_pr")),
        "expansivity": (float, 6.5e-4, None),
        "cavitation_pressure": (float, 0.0, None),
        "reference_temperature": (float, 353.15,
                                  _positive("reference_temperature")),
    },
    "operating": {
        "speed": (float, _REQUIRED, None),                  # rev/min
        "load_x": (float, 0.0, None),
        "load_y": (float, 0.0, None),
        "moment_x": (float, 0.0, None),
        "moment_y": (float, 0.0, None),
        "supply_temperature": (float, 353.15,
                               _positive("supply_temperature")),
        "ambient_temperature": (float, 353.15,
                                _positive("ambient_temperature")),
        "ambient_pressure": (float, 1.0e5, None),
        "supply_pressure": (float, None, None),     # defaults to ambient
        "wall_temperature": (float, None, None),    # None => adiabatic walls
        "x_r0": (float, 0.0, None),
        "y_r0": (float, 0.0, None),
        "a_r0": (float, 0.0, None),
        "b_r0": (float, 0.0, None),
    },
    "mesh": {
        "n_x": (int, _REQUIRED, _positive("n_x")),
        "n_y": (int, _REQUIRED, _positive("n_y")),
        "n_layers": (int, 8, _at_least("n_layers", 2)),
        "element": (str, "quad", _choice("element", {"quad", "tri"})),
        "feed_radius": (float, 0.0, _non_negative("feed_radius")),
        "feed_angle": (float, math.pi / 2.0, None),   # rad
        "feed_y": (float, 0.0, None),
        "auto_refine": (int, 1, _positive("auto_refine")),
    },
    "texture": {
        "pattern": (str, "none",
                    _choice("pattern",
                            {"none", "dimples", "herringbone", "sawtooth"})),
        "depth": (float, 20e-6, _non_negative("depth")),
        "count": (int, 6, _positive("count")),
        "dimple_radius": (float, 3e-3, _positive("dimple_radius")),
        "row_y": (float, 0.0, None),
        "width_frac": (float, None, None),
        "span_frac": (float, 0.8, _positive("span_frac")),
        "sweep_frac": (float, None, None),
        "segments": (int, 3, _positive("segments")),
    },
    "solver": {
        "sor_omega_p": (float, 1.5, None),
        "sor_omega_theta": (float, 0.8, None),
        "sor_tol": (float, 1e-6, _positive("sor_tol")),
        "sor_max_iter": (int, 100_000, _positive("sor_max_iter")),
        "newton_tol": (float, 1e-6, _positive("newton_tol")),
        "newton_max_iter": (int, 50, _positive("newton_max_iter")),
        "outer_tol": (float, 1e-5, _positive("outer_tol")),
        "outer_max_iter": (int, 60, _positive("outer_max_iter")),
        "relax_temperature": (float, 0.5, _positive("relax_temperature")),
    },
    "output": {
        "vtk": (bool, True, None),
    },
}

_REQUIRED_SECTIONS = ("bearing", "lubricant", "operating", "mesh")


def _parse_scalar(raw: str, typ, section: str, key: str, line_no: int):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("yes", "true", "on", "1"):
                return True
            if low in ("no", "false", "off", "0"):
                return False
            raise ValueError(f"expected yes/no, got {raw!r}")
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}", line_no=line_no)


@dataclass
class CaseConfig:
    """Validated case description with all defaults materialised."""

    values: dict[str, dict[str, object]]

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.values[section]

    def get(self, section: str, key: str):
        return self.values[section][key]

    # ---- derived builders -------------------------------------------------

    @property
    def circumference(self) -> float:
        return 2.0 * math.pi * self.get("bearing", "radius")

    def lubricant_model(self) -> LubricantModel:
        """Lubricant property model built from the ``[lubricant]`` section.

        ``cavitation_pressure`` is the absolute rupture threshold; the
        default of zero lets the film sustain sub-ambient pressure down
        to vacuum before it cavitates, with the bearing ends acting as
        an oil reservoir at ambient pressure.
        """
        lub = self.values["lubricant"]
        return LubricantModel(
            density0=lub["density"], viscosity0=lub["viscosity"],
            c1=lub["c1"], c2=lub["c2"], c3=lub["c3"],
            roelands_z=lub["roelands_z"], roelands_s0=lub["roelands_s0"],
            roelands_pr=lub["roelands_pr"],
            conductivity=lub["conductivity"],
            heat_capacity=lub["heat_capacity"],
            expansivity=lub["expansivity"],
            cavitation_pressure=lub["cavitation_pressure"],
            reference_temperature=lub["reference_temperature"])

    def kinematics(self, q: np.ndarray,
                   q_dot: np.ndarray | None = None) -> KinematicsState:
        omega = 2.0 * math.pi * self.get("operating", "speed") / 60.0
        u1 = omega * self.get("bearing", "radius")
        return KinematicsState(
            journal_velocity=(u1, 0.0), bushing_velocity=(0.0, 0.0),
            q=np.asarray(q, dtype=float),
            q_dot=np.zeros(4) if q_dot is None else np.asarray(q_dot, float))

    def texture_spec(self) -> TextureSpec | None:
        tex = self.values["texture"]
        msh = self.values["mesh"]
        C = self.circumference
        L = self.get("bearing", "length")
        feed_center = None
        feed_radius = msh["feed_radius"]
        if feed_radius > 0.0:
            feed_center = (msh["feed_angle"] * self.get("bearing", "radius"),
                           msh["feed_y"])
        pattern = tex["pattern"]
        if pattern == "none":
            if feed_center is None:
                return None
            return TextureSpec(pattern="none", depth=0.0,
                               feed_center=feed_center,
                               feed_radius=feed_radius)
        common = dict(depth=tex["depth"], feed_center=feed_center,
                      feed_radius=feed_radius)
        if pattern == "dimples":
            return dimple_row(tex["count"], tex["dimple_radius"], C,
                              y=tex["row_y"], **common)
        wf = tex["width_frac"]
        sf = tex["sweep_frac"]
        if pattern == "herringbone":
            return herringbone_grooves(
                tex["count"], C, L,
                width_frac=0.35 if wf is None else wf,
                span_frac=tex["span_frac"],
                sweep_frac=0.45 if sf is None else sf, **common)
        return sawtooth_grooves(
            tex["count"], C, L, segments=tex["segments"],
            width_frac=0.3 if wf is None else wf,
            span_frac=tex["span_frac"],
            sweep_frac=0.5 if sf is None else sf, **common)

    def domain_spec(self) -> DomainSpec:
        msh = self.values["mesh"]
        return DomainSpec(
            radius=self.get("bearing", "radius"),
            length=self.get("bearing", "length"),
            clearance=self.get("bearing", "clearance"),
            n_x=msh["n_x"], n_y=msh["n_y"],
            element="QUAD4" if msh["element"] == "quad" else "TRI3",
            auto_refine=msh["auto_refine"])

    def sor_config(self) -> SorConfig:
        sol = self.values["solver"]
        return SorConfig(omega_p=sol["sor_omega_p"],
                         omega_theta=sol["sor_omega_theta"],
                         tol=sol["sor_tol"], max_iter=sol["sor_max_iter"],
                         p_scale=max(abs(self.get("operating",
                                                  "ambient_pressure")), 1e5))

    def external_load(self) -> np.ndarray:
        op = self.values["operating"]
        return np.array([op["load_x"], op["load_y"],
                         op["moment_x"], op["moment_y"]])

    @property
    def supply_pressure(self) -> float:
        sp = self.get("operating", "supply_pressure")
        if sp is None:
            return self.get("operating", "ambient_pressure")
        return sp

    @property
    def n_equilibrium_dofs(self) -> int:
        op = self.values["operating"]
        return 4 if (op["moment_x"] != 0.0 or op["moment_y"] != 0.0) else 2


def _parse_sections(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    """Raw parse: section -> key -> (value string, line number)."""
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if not current:
                raise ConfigError("empty section name", line_no=line_no)
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}",
                              line_no=line_no)
        if current is None:
            raise ConfigError(f"key {line.split('=')[0].strip()!r} appears "
                              "before any [section] header", line_no=line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]",
                              line_no=line_no)
        sections[current][key] = (value.strip(), line_no)
    return sections


def load_case(source) -> CaseConfig:
    """Parse and validate a case file (path, text, or file object).

    Unknown sections/keys, value parse failures, and range violations
    raise ``ConfigError`` with the offending line number; omitted keys
    take schema defaults and each defaulted symbol is logged.
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and ("\n" in source or "=" in source):
        text = source
    else:
        path = Path(str(source))
        if not path.exists():
            raise ConfigError(f"case file not found: {source}")
        text = path.read_text()
    raw = _parse_sections(text)

    for section in raw:
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
    for section in _REQUIRED_SECTIONS:
        if section not in raw:
            raise ConfigError(f"missing required section [{section}]")

    values: dict[str, dict[str, object]] = {}
    for section, keys in _SCHEMA.items():
        present = raw.get(section, {})
        for key in present:
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]",
                                  line_no=present[key][1])
        out: dict[str, object] = {}
        for key, (typ, default, validator) in keys.items():
            if key in present:
                raw_value, line_no = present[key]
                value = _parse_scalar(raw_value, typ, section, key, line_no)
                if validator is not None:
                    try:
                        validator(value)
                    except ValueError as exc:
                        raise ConfigError(f"[{section}] {key}: {exc}",
                                          line_no=line_no)
            else:
                if default is _REQUIRED:
                    raise ConfigError(
                        f"missing required key {key!r} in [{section}]")
                value = default
                log.info("config default: [%s] %s = %r", section, key, value)
            out[key] = value
        values[section] = out
    return CaseConfig(values=values)


def dump_case(config: CaseConfig) -> str:
    """Serialise a configuration with every default materialised."""
    out = io.StringIO()
    for section in _SCHEMA:
        out.write(f"[{section}]\n")
        for key in _SCHEMA[section]:
            value = config.values[section][key]
            if value is None:
                continue
            if isinstance(value, bool):
                text = "yes" if value else "no"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            out.write(f"{key} = {text}\n")
        out.write("\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# the coupled run
# ---------------------------------------------------------------------------

@dataclass
class Results:
    """Field and convergence output of a case run."""

    mesh: Mesh
    p: np.ndarray
    theta: np.ndarray
    h: np.ndarray
    t_mid: np.ndarray
    q: np.ndarray
    force: np.ndarray
    moment: np.ndarray
    converged: bool
    n_outer: int
    outer_history: list[tuple[int, float]]
    sor_result: SorResult
    newton_result: NewtonResult | None = None
    film3d: FilmMesh3D | None = None
    t3: np.ndarray | None = None


class _StageFailure(LubfvmError):
    """Wraps a stage error with the outer-loop position."""

    def __init__(self, stage: str, outer: int, cause: Exception):
        super().__init__(f"stage '{stage}' failed at outer iteration "
                         f"{outer}: {cause}")
        self.stage = stage
        self.outer = outer
        self.cause = cause


def _build_surface_mesh(config: CaseConfig,
                        texture: TextureSpec | None) -> Mesh:
    return generate_bearing_mesh(config.domain_spec(), texture)


def _profile_stations(n_layers: int) -> int:
    n = n_layers + 1
    return n if n % 2 == 1 else n + 1


def _column_property(surface_values: np.ndarray, t_columns: np.ndarray,
                     fn, model: LubricantModel) -> np.ndarray:
    """Evaluate a (p, T) property over per-column temperature profiles."""
    p = np.repeat(surface_values[:, None], t_columns.shape[1], axis=1)
    return fn(p, t_columns, model)


def _resample_columns(cols: np.ndarray, n_out: int) -> np.ndarray:
    n_in = cols.shape[1]
    if n_in == n_out:
        return cols
    s_in = np.linspace(0.0, 1.0, n_in)
    s_out = np.linspace(0.0, 1.0, n_out)
    out = np.empty((cols.shape[0], n_out))
    for i in range(cols.shape[0]):
        out[i] = np.interp(s_out, s_in, cols[i])
    return out


def run_case(config: CaseConfig, mesh: Mesh | None = None,
             isothermal: bool = False, equilibrium: bool = True) -> Results:
    """Run the coupled pressure/position/temperature fixed point.

    Each outer pass rebuilds the film from the current journal position,
    refreshes the property fields from the current pressure and
    temperature, relaxes the cavitating pressure equation, rebalances the
    journal against the external load, and (unless isothermal) solves the
    film energy equation with under-relaxed temperature updates.  The
    loop stops when pressure, temperature, and position all change by
    less than the outer tolerance, or returns flagged as non-converged at
    the iteration cap.
    """
    model = config.lubricant_model()
    texture = config.texture_spec()
    if mesh is None:
        mesh = _build_surface_mesh(config, texture)
    sor_cfg = config.sor_config()
    sol = config.values["solver"]
    op = config.values["operating"]
    c = config.get("bearing", "clearance")
    radius = config.get("bearing", "radius")
    half_len = config.get("bearing", "length") / 2.0
    n_layers = config.get("mesh", "n_layers")
    p_amb = op["ambient_pressure"]
    p_sup = config.supply_pressure
    t_sup = op["supply_temperature"]
    t_amb = op["ambient_temperature"]
    f_ext = config.external_load()
    n_dofs = config.n_equilibrium_dofs if equilibrium else 0

    x = mesh.nodes[:, 0]
    y = mesh.nodes[:, 1]
    n_nodes = mesh.n_nodes
    n_prof = _profile_stations(n_layers)

    q = np.array([op["x_r0"], op["y_r0"], op["a_r0"], op["b_r0"]])
    p = np.full(n_nodes, p_amb)
    theta = np.ones(n_nodes)
    t_cols = np.full((n_nodes, n_layers + 1), t_sup)   # column temperature
    film3d: FilmMesh3D | None = None
    t3: np.ndarray | None = None
    vel = None

    current_sor: list[SorResult] = []
    newton_result: NewtonResult | None = None
    outer_history: list[tuple[int, float]] = []
    converged = False
    n_outer = 0

    def pressure_solve(q_trial: np.ndarray, p_start: np.ndarray,
                       theta_start: np.ndarray, eta_prof, rho_prof):
        h_trial = film_thickness(x, y, q_trial, c, texture=texture,
                                 radius=radius)
        coeffs = gre_coefficients(h_trial, eta_prof, rho_prof, n_z=n_prof)
        kin = config.kinematics(q_trial)
        problem, bcs = build_gre_problem(
            mesh, coeffs, kin, model, p_supply=p_sup, p_ambient=p_amb)
        system = build_gre_system(mesh, problem, bcs, model)
        result = sor_p_theta(system, p_start, theta_start, sor_cfg)
        current_sor.append(result)
        if not result.converged:
            raise NonConvergedError(
                f"pressure sweep cap reached ({result.n_sweeps} sweeps, "
                f"last change {result.error_history[-1]:.3e})",
                diagnostics={"sor": result})
        return h_trial, result

    for outer in range(1, sol["outer_max_iter"] + 1):
        n_outer = outer
        p_old, t_cols_old, q_old = p.copy(), t_cols.copy(), q.copy()

        # property profiles from the current pressure and temperature
        t_prof = _resample_columns(t_cols, n_prof)
        eta_prof = _column_property(p, t_prof, viscosity, model)
        rho_prof = _column_property(p, t_prof, density, model)

        # pressure (and, if requested, position) update
        try:
            if n_dofs:
                def residual(q_trial):
                    q_full = q.copy()
                    q_full[:n_dofs] = q_trial
                    _, result = pressure_solve(q_full, p, theta,
                                               eta_prof, rho_prof)
                    w, m = hydrodynamic_loads(mesh, result.p, radius=radius)
                    return (np.concatenate([w, m]) + f_ext)[:n_dofs]

                scales = np.array([c, c, c / half_len, c / half_len])
                # the load residual carries sweep-tolerance noise, so the
                # difference step must be coarse enough to rise above it
                dyn = DynamicsProblem(
                    f_ext_norm=float(np.linalg.norm(f_ext[:n_dofs])),
                    scales=scales[:n_dofs], tol=sol["newton_tol"],
                    fd_rel=1e-4, max_iter=sol["newton_max_iter"])
                newton_result = newton_equilibrium(residual, q[:n_dofs], dyn)
                q[:n_dofs] = newton_result.q
            h, sor_result = pressure_solve(q, p, theta, eta_prof, rho_prof)
        except (ContactError, NonConvergedError):
            raise
        except LubfvmError as exc:
            raise _StageFailure("pressure", outer, exc) from exc
        p, theta = sor_result.p, sor_result.theta

        # energy update
        if not isothermal:
            try:
                film3d = extrude_film_mesh(mesh, h, n_layers)
                theta3 = film3d.spread_surface(theta)
                t3_state = np.empty(film3d.mesh.n_nodes)
                t3_state[film3d.columns.ravel()] = t_cols.ravel()
                p3 = film3d.spread_surface(p)
                eta3_liquid = viscosity(p3, t3_state, model)
                eta3_mix = theta3 * eta3_liquid
                rho3_mix = theta3 * density(p3, t3_state, model)
                vel = reconstruct_velocity(film3d, p, eta3_liquid,
                                           config.kinematics(q))
                q_t, sink = heat_source_split(film3d, p, t3_state, vel,
                                              eta3_mix, model)
                problem, bcs = build_energy_problem(
                    film3d, vel, q_t, rho3_mix, model, t_supply=t_sup,
                    t_ambient=t_amb,
                    wall_temperature=op["wall_temperature"],
                    reaction=sink)
                system = assemble_global(film3d.mesh, problem, bcs)
                t3_new = linear_solve(system)
                relax = sol["relax_temperature"]
                t3 = relax * t3_new + (1.0 - relax) * t3_state
                t_cols = film3d.column_field(t3)
            except (ContactError, NonConvergedError):
                raise
            except LubfvmError as exc:
                raise _StageFailure("thermal", outer, exc) from exc

        # fixed-point change measure
        e_p = np.abs(p - p_old).max() / max(np.abs(p).max(), sor_cfg.p_scale)
        t_range = max(float(np.abs(t_cols - t_sup).max()), 1.0)
        e_t = np.abs(t_cols - t_cols_old).max() / t_range
        e_q = np.abs(q - q_old).max() / c
        e_outer = max(e_p, e_t, e_q)
        outer_history.append((outer, e_outer))
        log.info("outer %d: change %.3e (p %.2e, T %.2e, q %.2e)",
                 outer, e_outer, e_p, e_t, e_q)
        if e_outer <= sol["outer_tol"]:
            converged = True
            break

    h = film_thickness(x, y, q, c, texture=texture, radius=radius)
    w, m = hydrodynamic_loads(mesh, p, radius=radius)
    if isothermal:
        t_mid = np.full(n_nodes, t_sup)
    else:
        t_mid = extract_midplane(film3d, t3)
    return Results(mesh=mesh, p=p, theta=theta, h=h, t_mid=t_mid, q=q,
                   force=w, moment=m, converged=converged, n_outer=n_outer,
                   outer_history=outer_history, sor_result=current_sor[-1],
                   newton_result=newton_result, film3d=film3d, t3=t3)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.17g}"


def write_fields(results: Results, out_dir, vtk: bool = True) -> list[Path]:
    """Write the surface CSV, temperature VTK, and convergence CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    surface = out / "surface.csv"
    with surface.open("w", newline="\n") as fh:
        fh.write("node_id,x,y,p,theta,h,T_mid\n")
        mesh = results.mesh
        for i in range(mesh.n_nodes):
            fh.write(",".join([
                str(i + 1), _fmt(mesh.nodes[i, 0]), _fmt(mesh.nodes[i, 1]),
                _fmt(results.p[i]), _fmt(results.theta[i]),
                _fmt(results.h[i]), _fmt(results.t_mid[i])]) + "\n")
    written.append(surface)

    if vtk and results.film3d is not None and results.t3 is not None:
        written.append(_write_vtk(results, out / "temperature.vtk"))

    sor = out / "sor_history.csv"
    with sor.open("w", newline="\n") as fh:
        fh.write("iter,e_sor,cavitated_node_count\n")
        hist = results.sor_result
        for i in range(hist.n_sweeps):
            fh.write(f"{i + 1},{_fmt(hist.error_history[i])},"
                     f"{hist.cavitated_history[i]}\n")
    written.append(sor)

    if results.newton_result is not None:
        newton = out / "newton_history.csv"
        with newton.open("w", newline="\n") as fh:
            fh.write("iter,resnorm,lambda\n")
            for it, resnorm, lam in results.newton_result.history:
                fh.write(f"{it},{_fmt(resnorm)},{_fmt(lam)}\n")
        written.append(newton)

    outer = out / "outer_history.csv"
    with outer.open("w", newline="\n") as fh:
        fh.write("iter,e_outer\n")
        for it, e in results.outer_history:
            fh.write(f"{it},{_fmt(e)}\n")
    written.append(outer)
    return written


_VTK_CELL_TYPES = {"HEX8": 12, "PRISM6": 13}


def _write_vtk(results: Results, path: Path) -> Path:
    """Legacy ASCII VTK unstructured grid carrying the temperature field."""
    mesh3 = results.film3d.mesh
    t3 = results.t3
    with path.open("w", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("film temperature\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh3.n_nodes} double\n")
        for row in mesh3.nodes:
            fh.write(f"{_fmt(row[0])} {_fmt(row[1])} {_fmt(row[2])}\n")
        n_cells = mesh3.n_elements
        n_ints = sum((1 + conn.shape[1]) * conn.shape[0]
                     for conn in mesh3.element_blocks.values())
        fh.write(f"CELLS {n_cells} {n_ints}\n")
        for kind, conn in mesh3.element_blocks.items():
            for elem in conn:
                fh.write(str(elem.shape[0]) + " "
                         + " ".join(str(int(n)) for n in elem) + "\n")
        fh.write(f"CELL_TYPES {n_cells}\n")
        for kind, conn in mesh3.element_blocks.items():
            code = _VTK_CELL_TYPES[kind]
            for _ in range(conn.shape[0]):
                fh.write(f"{code}\n")
        fh.write(f"POINT_DATA {mesh3.n_nodes}\n")
        fh.write("SCALARS temperature double\n")
        fh.write("LOOKUP_TABLE default\n")
        for value in t3:
            fh.write(f"{_fmt(value)}\n")
    return path


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

@click.group()
@click.version_option(__version__, prog_name="lubfvm")
@click.option("--verbose", "-v", is_flag=True, help="Log at INFO level.")
def main(verbose: bool) -> None:
    """Journal-bearing lubrication solver."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")


@main.group()
def mesh() -> None:
    """Mesh utilities."""


@mesh.command("gen")
@click.argument("case", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path(),
              help="Mesh file to write.")
def mesh_gen(case: str, output: str) -> None:
    """Generate the bearing surface mesh for CASE and write it."""
    try:
        config = load_case(case)
        surface = _build_surface_mesh(config, config.texture_spec())
    except ConfigError as exc:
        raise SystemExit(_fail(3, f"config error: {exc}"))
    except LubfvmError as exc:
        raise SystemExit(_fail(3, f"mesh generation failed: {exc}"))
    Path(output).write_text(write_mesh_file(surface))
    click.echo(f"wrote {surface.n_nodes} nodes, {surface.n_elements} "
               f"elements to {output}")


@main.command()
@click.argument("case", type=click.Path(exists=True))
@click.option("--mesh", "mesh_file", type=click.Path(exists=True),
              help="Use this mesh file instead of generating one.")
@click.option("--isothermal", is_flag=True,
              help="Skip the energy equation; temperature stays at supply.")
@click.option("--no-equilibrium", is_flag=True,
              help="Hold the journal at its initial position.")
@click.option("-o", "--output", required=True, type=click.Path(),
              help="Output directory.")
def run(case: str, mesh_file: str | None, isothermal: bool,
        no_equilibrium: bool, output: str) -> None:
    """Solve CASE and write fields to the output directory."""
    try:
        config = load_case(case)
    except ConfigError as exc:
        raise SystemExit(_fail(3, f"config error: {exc}"))
    surface = None
    if mesh_file is not None:
        try:
            surface = parse_mesh_file(Path(mesh_file).read_text())
        except LubfvmError as exc:
            raise SystemExit(_fail(3, f"mesh error: {exc}"))
    try:
        results = run_case(config, mesh=surface, isothermal=isothermal,
                           equilibrium=not no_equilibrium)
    except ContactError as exc:
        raise SystemExit(_fail(4, f"contact: {exc}"))
    except NonConvergedError as exc:
        raise SystemExit(_fail(2, f"non-convergence: {exc}"))
    except ConfigError as exc:
        raise SystemExit(_fail(3, f"config error: {exc}"))
    except LubfvmError as exc:
        raise SystemExit(_fail(2, f"solver failure: {exc}"))
    write_fields(results, output, vtk=config.get("output", "vtk"))
    click.echo(f"force [{_fmt(results.force[0])}, {_fmt(results.force[1])}] N, "
               f"moment [{_fmt(results.moment[0])}, "
               f"{_fmt(results.moment[1])}] N m")
    click.echo(f"outer iterations: {results.n_outer} "
               f"({'converged' if results.converged else 'NOT converged'})")
    if not results.converged:
        raise SystemExit(_fail(2, "outer loop hit the iteration cap"))


@main.command()
@click.argument("case", type=click.Path(exists=True))
def validate(case: str) -> None:
    """Parse and validate CASE, printing the materialised configuration."""
    try:
        config = load_case(case)
    except ConfigError as exc:
        raise SystemExit(_fail(3, f"config error: {exc}"))
    click.echo(dump_case(config), nl=False)
    click.echo("OK")


def _fail(code: int, message: str) -> int:
    click.echo(message, err=True)
    return code


if __name__ == "__main__":
    main()
