"""Case-file parsing, the run pipeline, and the command-line interface."""

import math
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from lubfvm.cli import (CaseConfig, dump_case, load_case, main, run_case,
                        write_fields)
from lubfvm.errors import ConfigError
from lubfvm.lubrication import film_thickness, gre_coefficients, \
    build_gre_problem, build_gre_system
from lubfvm.mesh import generate_bearing_mesh, parse_mesh_file
from lubfvm.solvers import sor_p_theta

CASE_TEXT = """\
# reference journal-bearing case
[bearing]
radius = 0.030
length = 0.080
clearance = 20e-6

[lubricant]
density = 810.0
viscosity = 0.1

[operating]
speed = 5000
load_y = -8000
moment_y = 800
supply_temperature = 353.15
ambient_temperature = 353.15
ambient_pressure = 1.0e5
wall_temperature = 353.15

[mesh]
n_x = 24
n_y = 12
n_layers = 4
feed_radius = 6e-3

[solver]
outer_max_iter = 40
"""

SMALL_CASE = """\
[bearing]
radius = 0.030
length = 0.080
clearance = 20e-6

[lubricant]
density = 810.0
viscosity = 0.1

[operating]
speed = 5000
load_y = -2000
wall_temperature = 353.15

[mesh]
n_x = 12
n_y = 6
n_layers = 4
feed_radius = 4e-3
"""


@pytest.fixture()
def case_file(tmp_path):
    path = tmp_path / "case.cfg"
    path.write_text(CASE_TEXT)
    return path


# ---------------------------------------------------------------------------
# parsing and validation
# ---------------------------------------------------------------------------

def test_load_case_reads_exact_values(case_file):
    config = load_case(case_file)
    assert config.get("bearing", "radius") == 0.030
    assert config.get("bearing", "clearance") == 20e-6
    assert config.get("lubricant", "viscosity") == 0.1
    assert config.get("operating", "speed") == 5000.0
    assert config.get("operating", "load_y") == -8000.0
    assert config.get("mesh", "n_x") == 24
    assert isinstance(config.get("mesh", "n_x"), int)


def test_defaults_are_materialised(case_file):
    config = load_case(case_file)
    assert config.get("solver", "sor_omega_p") > 0
    assert config.get("mesh", "element") in ("quad", "tri")
    assert config.get("texture", "pattern") == "none"
    assert config.get("output", "vtk") is True


def test_supply_pressure_falls_back_to_ambient(case_file):
    config = load_case(case_file)
    assert config.supply_pressure == 1.0e5


def test_moment_load_enables_four_dofs(case_file):
    config = load_case(case_file)
    assert config.n_equilibrium_dofs == 4
    no_moment = load_case(SMALL_CASE)
    assert no_moment.n_equilibrium_dofs == 2


def test_missing_required_section_is_named():
    text = CASE_TEXT.replace("[lubricant]\ndensity = 810.0\nviscosity = 0.1\n",
                             "")
    with pytest.raises(ConfigError, match="lubricant"):
        load_case(text)


def test_missing_required_key_is_named():
    with pytest.raises(ConfigError, match="clearance"):
        load_case(CASE_TEXT.replace("clearance = 20e-6\n", ""))


def test_negative_clearance_reports_line_number():
    bad = CASE_TEXT.replace("clearance = 20e-6", "clearance = -20e-6")
    with pytest.raises(ConfigError) as err:
        load_case(bad)
    assert "line 5" in str(err.value)
    assert "clearance" in str(err.value)


def test_unknown_key_reports_line_number():
    bad = CASE_TEXT.replace("viscosity = 0.1", "viscocity = 0.1")
    with pytest.raises(ConfigError) as err:
        load_case(bad)
    assert "viscocity" in str(err.value) and "line" in str(err.value)


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="journal"):
        load_case(CASE_TEXT + "\n[journal]\nmass = 1\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        load_case(CASE_TEXT + "\n[solver]\nouter_max_iter = 50\n")


def test_unparseable_number_reports_location():
    bad = CASE_TEXT.replace("speed = 5000", "speed = fast")
    with pytest.raises(ConfigError) as err:
        load_case(bad)
    assert "speed" in str(err.value) and "line" in str(err.value)


def test_dump_then_load_round_trips(case_file):
    config = load_case(case_file)
    again = load_case(dump_case(config))
    assert again.values == config.values
    assert dump_case(again) == dump_case(config)


# ---------------------------------------------------------------------------
# run pipeline
# ---------------------------------------------------------------------------

def test_fixed_position_run_matches_direct_solve():
    """With the journal held still and pressure-independent properties,
    the pipeline must agree with a hand assembly of the pressure problem
    to within the sweep tolerance."""
    config = load_case(SMALL_CASE.replace(
        "viscosity = 0.1",
        "viscosity = 0.1\nc1 = 0\nc2 = 0\nroelands_z = 0").replace(
        "load_y = -2000", "x_r0 = 8e-6\nload_y = -2000"))
    results = run_case(config, isothermal=True, equilibrium=False)

    texture = config.texture_spec()
    mesh = generate_bearing_mesh(config.domain_spec(), texture)
    model = config.lubricant_model()
    q = np.array([8e-6, 0.0, 0.0, 0.0])
    kin = config.kinematics(q)
    h = film_thickness(mesh.nodes[:, 0], mesh.nodes[:, 1], q,
                       config.get("bearing", "clearance"),
                       texture=texture,
                       radius=config.get("bearing", "radius"))
    coeffs = gre_coefficients(h, model.viscosity0, model.density0, n_z=5)
    problem, bcs = build_gre_problem(
        mesh, coeffs, kin, model,
        p_supply=config.supply_pressure,
        p_ambient=config.get("operating", "ambient_pressure"))
    system = build_gre_system(mesh, problem, bcs, model)
    direct = sor_p_theta(system, config=config.sor_config())

    p_scale = np.abs(direct.p).max()
    assert np.abs(results.p - direct.p).max() <= 5e-6 * p_scale
    assert np.abs(results.theta - direct.theta).max() <= 5e-6
    assert np.array_equal(results.h, h)
    assert results.n_outer <= 3


def test_equilibrium_run_balances_load():
    config = load_case(SMALL_CASE)
    results = run_case(config, isothermal=True)
    assert results.converged
    assert results.force[1] == pytest.approx(2000.0, abs=1e-4 * 2000.0)
    assert abs(results.q[0]) < config.get("bearing", "clearance")
    assert results.newton_result is not None


def test_thermal_run_heats_film(case_file):
    config = load_case(case_file)
    results = run_case(config)
    assert results.converged
    assert results.t3 is not None
    t_supply = config.get("operating", "supply_temperature")
    assert results.t_mid.max() > t_supply + 1.0
    assert results.force[1] == pytest.approx(8000.0, rel=1e-4)
    assert results.moment[1] == pytest.approx(-800.0, rel=1e-4)


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_results():
    config = load_case(SMALL_CASE)
    return config, run_case(config, isothermal=True, equilibrium=False)


def test_surface_csv_layout(tmp_path, small_results):
    _, results = small_results
    write_fields(results, tmp_path, vtk=False)
    lines = (tmp_path / "surface.csv").read_text().splitlines()
    assert lines[0] == "node_id,x,y,p,theta,h,T_mid"
    assert len(lines) == 1 + results.mesh.n_nodes
    first = lines[1].split(",")
    assert int(first[0]) == 1
    assert float(first[3]) == results.p[0]


def test_vtk_written_for_thermal_runs(tmp_path):
    config = load_case(SMALL_CASE)
    results = run_case(config, equilibrium=False)
    files = write_fields(results, tmp_path, vtk=True)
    vtk = tmp_path / "temperature.vtk"
    assert vtk in files
    text = vtk.read_text()
    assert "DATASET UNSTRUCTURED_GRID" in text
    assert "SCALARS temperature double" in text
    n3 = results.film3d.mesh.n_nodes
    assert f"POINTS {n3} double" in text


def test_history_files_written(tmp_path, small_results):
    _, results = small_results
    write_fields(results, tmp_path, vtk=False)
    sor = (tmp_path / "sor_history.csv").read_text().splitlines()
    assert sor[0] == "iter,e_sor,cavitated_node_count"
    assert len(sor) == 1 + len(results.sor_result.error_history)
    outer = (tmp_path / "outer_history.csv").read_text().splitlines()
    assert outer[0] == "iter,e_outer"


def test_reruns_are_byte_identical(tmp_path):
    config = load_case(SMALL_CASE)
    out = []
    for tag in ("a", "b"):
        results = run_case(config, isothermal=True, equilibrium=False)
        d = tmp_path / tag
        write_fields(results, d, vtk=False)
        out.append({f.name: f.read_bytes() for f in d.iterdir()})
    assert out[0] == out[1]


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def test_validate_command_accepts_good_case(case_file):
    result = CliRunner().invoke(main, ["validate", str(case_file)])
    assert result.exit_code == 0
    assert result.output.rstrip().endswith("OK")
    assert "radius = 0.03" in result.output


def test_validate_command_rejects_bad_case(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text(CASE_TEXT.replace("radius = 0.030", "radius = -1"))
    result = CliRunner().invoke(main, ["validate", str(bad)])
    assert result.exit_code == 3


def test_mesh_gen_writes_parseable_mesh(tmp_path, case_file):
    out = tmp_path / "surface.mesh"
    result = CliRunner().invoke(
        main, ["mesh", "gen", str(case_file), "-o", str(out)])
    assert result.exit_code == 0, result.output
    mesh = parse_mesh_file(out.read_text())
    assert mesh.n_nodes == 25 * 13          # seam nodes kept, tied by pairs
    assert mesh.periodic_pairs.shape == (13, 2)
    assert "feed_hole" in mesh.boundary_sets


def test_run_command_writes_outputs(tmp_path):
    case = tmp_path / "case.cfg"
    case.write_text(SMALL_CASE)
    out = tmp_path / "out"
    result = CliRunner().invoke(
        main, ["run", str(case), "--isothermal", "-o", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "surface.csv").exists()
    assert (out / "newton_history.csv").exists()
    assert "converged" in result.output


def test_run_command_fails_cleanly_on_bad_config(tmp_path):
    case = tmp_path / "case.cfg"
    case.write_text(SMALL_CASE.replace("n_layers = 4", "n_layers = 1"))
    out = tmp_path / "out"
    result = CliRunner().invoke(
        main, ["run", str(case), "-o", str(out)])
    assert result.exit_code == 3


def test_run_command_reports_nonconvergence(tmp_path):
    case = tmp_path / "case.cfg"
    case.write_text(SMALL_CASE
                    + "\n[solver]\nouter_tol = 1e-14\nouter_max_iter = 2\n")
    result = CliRunner().invoke(
        main, ["run", str(case), "--isothermal", "-o",
               str(tmp_path / "out")])
    assert result.exit_code == 2
    assert (tmp_path / "out" / "surface.csv").exists()
