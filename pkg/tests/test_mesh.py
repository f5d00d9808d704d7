"""Mesh construction, texture footprints, and the text file format."""

import math

import numpy as np
import pytest

from lubfvm.errors import MeshError, MeshParseError
from lubfvm.mesh import (DomainSpec, Mesh, RefineBand, TextureSpec,
                         dimple_row, evaluate_texture_depth,
                         generate_bearing_mesh, herringbone_grooves,
                         pair_periodic_boundaries, parse_mesh_file,
                         sawtooth_grooves, structured_rect_mesh,
                         validate_mesh, write_mesh_file)


# ---------------------------------------------------------------------------
# structured generation and periodic pairing
# ---------------------------------------------------------------------------

def test_structured_quad_counts():
    mesh = structured_rect_mesh(0, 1, 0, 0.5, 4, 2, "QUAD4")
    assert mesh.n_nodes == 15
    assert mesh.element_blocks["QUAD4"].shape == (8, 4)
    assert mesh.dim == 2


def test_structured_tri_splits_quads():
    mesh = structured_rect_mesh(0, 1, 0, 0.5, 4, 2, "TRI3")
    assert mesh.n_nodes == 15
    assert mesh.element_blocks["TRI3"].shape == (16, 3)


def test_periodic_pairing_counts_and_order():
    mesh = structured_rect_mesh(0, 1, 0, 0.5, 4, 2, "QUAD4")
    pair_periodic_boundaries(mesh, axis="x")
    assert mesh.periodic_pairs.shape == (3, 2)
    left = mesh.nodes[mesh.periodic_pairs[:, 0]]
    right = mesh.nodes[mesh.periodic_pairs[:, 1]]
    assert np.allclose(left[:, 1], right[:, 1], atol=0)
    assert np.allclose(right[:, 0] - left[:, 0], 1.0, atol=1e-15)


def test_periodic_pairing_tolerance_violation():
    mesh = structured_rect_mesh(0, 1, 0, 0.5, 4, 2, "QUAD4")
    mesh.nodes[mesh.set_nodes("x_max")[0], 1] += 1e-3
    with pytest.raises(MeshError):
        pair_periodic_boundaries(mesh, axis="x", tol=1e-9)


def test_validate_rejects_out_of_range_connectivity():
    mesh = structured_rect_mesh(0, 1, 0, 1, 2, 2, "QUAD4")
    mesh.element_blocks["QUAD4"][0, 0] = 99
    with pytest.raises(MeshError):
        validate_mesh(mesh)


# ---------------------------------------------------------------------------
# textures
# ---------------------------------------------------------------------------

def test_dimple_row_layout():
    C = 2 * math.pi * 0.03
    tex = dimple_row(6, 3e-3, C, depth=20e-6)
    assert len(tex.dimples) == 6
    xs = sorted(cx for cx, _, _ in tex.dimples)
    gaps = np.diff(xs)
    assert np.allclose(gaps, C / 6, atol=1e-12)
    assert xs[0] == pytest.approx(C / 12)


def test_dimple_depth_inside_and_outside():
    tex = dimple_row(1, 1e-3, 8e-3, depth=20e-6)
    cx, cy, r = tex.dimples[0]
    x = np.array([cx, cx + 0.5 * r, cx + 1.5 * r])
    y = np.array([cy, cy, cy])
    depth = evaluate_texture_depth(x, y, tex)
    assert depth[0] == 20e-6
    assert depth[1] == 20e-6
    assert depth[2] == 0.0


def test_no_texture_depth_is_zero():
    depth = evaluate_texture_depth(np.array([0.0]), np.array([0.0]), None)
    assert depth[0] == 0.0


def test_herringbone_groove_count_and_depth():
    C, L = 0.2, 0.08
    tex = herringbone_grooves(6, C, L, depth=20e-6)
    assert len(tex.grooves) == 6
    poly = tex.grooves[0]
    gx = np.linspace(poly[:, 0].min(), poly[:, 0].max(), 40)
    gy = np.linspace(poly[:, 1].min(), poly[:, 1].max(), 40)
    X, Y = np.meshgrid(gx, gy)
    depth = evaluate_texture_depth(X.ravel(), Y.ravel(), tex)
    assert depth.max() == 20e-6          # some sample falls in the groove
    far = evaluate_texture_depth(np.array([poly[:, 0].max() + 0.05]),
                                 np.array([0.0]), tex)
    assert far[0] == 0.0


def test_sawtooth_segments():
    C, L = 0.2, 0.08
    tex = sawtooth_grooves(4, C, L, segments=3, depth=20e-6)
    assert len(tex.grooves) == 4 * 3


# ---------------------------------------------------------------------------
# bearing mesh generation
# ---------------------------------------------------------------------------

def _domain(**kw):
    base = dict(radius=0.03, length=0.08, clearance=20e-6,
                n_x=16, n_y=8, element="QUAD4")
    base.update(kw)
    return DomainSpec(**base)


def test_generate_bearing_mesh_sets_and_pairs():
    mesh = generate_bearing_mesh(_domain(), None)
    for name in ("circ_start", "circ_end", "axial_left", "axial_right"):
        assert name in mesh.boundary_sets
    assert mesh.periodic_pairs.shape[0] == 9
    assert mesh.nodes[:, 0].max() == pytest.approx(2 * math.pi * 0.03)


def test_generate_bearing_mesh_tags_feed_hole():
    tex = TextureSpec(pattern="none", depth=0.0,
                      feed_center=(0.09, 0.0), feed_radius=8e-3)
    mesh = generate_bearing_mesh(_domain(n_x=48, n_y=24), tex)
    feed = mesh.set_nodes("feed_hole")
    assert feed.size > 0
    d = np.hypot(mesh.nodes[feed, 0] - 0.09, mesh.nodes[feed, 1])
    assert np.all(d <= 8e-3 + 1e-12)


def test_generate_bearing_mesh_rejects_outside_footprint():
    tex = dimple_row(1, 1e-3, 2 * math.pi * 0.03, y=0.1)   # beyond length/2
    with pytest.raises(MeshError):
        generate_bearing_mesh(_domain(), tex)


def test_refine_band_validation():
    with pytest.raises(MeshError):
        RefineBand(axis="z", lo=0.0, hi=1.0, factor=2)
    with pytest.raises(MeshError):
        RefineBand(axis="x", lo=1.0, hi=0.0, factor=2)
    with pytest.raises(MeshError):
        RefineBand(axis="x", lo=0.0, hi=1.0, factor=0)


def test_auto_refine_adds_cells_near_texture():
    tex = dimple_row(2, 2e-3, 2 * math.pi * 0.03)
    plain = generate_bearing_mesh(_domain(), None)
    fine = generate_bearing_mesh(_domain(auto_refine=2), tex)
    assert fine.n_elements > plain.n_elements


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def test_round_trip_identity():
    mesh = generate_bearing_mesh(_domain(element="TRI3"), None)
    text = write_mesh_file(mesh)
    back = parse_mesh_file(text)
    assert mesh.equals(back)
    assert write_mesh_file(back) == text


def test_parse_counts():
    text = """
# two quads
NODE 1 0.0 0.0 0.0
NODE 2 1.0 0.0 0.0
NODE 3 2.0 0.0 0.0
NODE 4 0.0 1.0 0.0
NODE 5 1.0 1.0 0.0
NODE 6 2.0 1.0 0.0
ELEM QUAD4 1 2 5 4
ELEM QUAD4 2 3 6 5
SET left 1 4
PAIR 1 3
PAIR 4 6
"""
    mesh = parse_mesh_file(text)
    assert mesh.n_nodes == 6
    assert mesh.element_blocks["QUAD4"].shape == (2, 4)
    assert np.array_equal(mesh.set_nodes("left"), [0, 3])
    assert mesh.periodic_pairs.shape == (2, 2)


@pytest.mark.parametrize("bad, line, fragment", [
    ("NODE 1 0 0 0\nNODE 1 1 0 0", 2, "duplicate"),
    ("NODE 1 0 0 0\nELEM BLOB 1", 2, "BLOB"),
    ("NODE 1 0 0 0\nELEM QUAD4 1 2 3", 2, "QUAD4"),
    ("NODE 1 0 0 0\nNODE 2 1 0 0\nNODE 3 0 1 0\nELEM TRI3 1 2 9", 4, "9"),
    ("NODE 2 0 0 0", 0, "contiguous"),
    ("NODE 1 0 0", 1, ""),
])
def test_parse_errors_carry_line_numbers(bad, line, fragment):
    with pytest.raises(MeshParseError) as err:
        parse_mesh_file(bad)
    if line:
        assert f"line {line}" in str(err.value)
    assert fragment in str(err.value)


def test_mesh_equality_is_bitwise():
    a = structured_rect_mesh(0, 1, 0, 1, 3, 3, "QUAD4")
    b = structured_rect_mesh(0, 1, 0, 1, 3, 3, "QUAD4")
    assert a.equals(b)
    b.nodes[0, 0] = 1e-16            # below any geometric tolerance
    assert not a.equals(b)
