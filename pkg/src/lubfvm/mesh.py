"""Surface meshes for the unwrapped bearing domain.

The bearing gap is modelled on the unwrapped cylinder surface: a periodic
rectangle ``[0, 2*pi*R_b] x [-L/2, L/2]`` with ``x`` the circumferential
arc length and ``y`` the axial coordinate.  This module builds structured
quadrilateral/triangle meshes of that rectangle (with optional graded
refinement bands around surface features), evaluates texture footprints
(dimples, chevron grooves) as sharp-edged depth fields, registers the
periodic node pairing between the two circumferential ends, and reads and
writes a small line-oriented mesh text format.

Mesh text format (one record per line, ``#`` starts a comment)::

    NODE <id> <x> <y> <z>
    ELEM <HEX8|PRISM6|QUAD4|TRI3> <node-id> ...
    SET <name> <node-id> ...
    PAIR <master-id> <slave-id>

Coordinates are metres; ids are 1-based and contiguous.  In-memory
indices are 0-based.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import numpy as np
import shapely

from .elements import REFERENCE_ELEMENTS, build_block
from .errors import MeshError, MeshParseError

__all__ = [
    "Mesh", "DomainSpec", "TextureSpec", "RefineBand",
    "generate_bearing_mesh", "structured_rect_mesh",
    "parse_mesh_file", "write_mesh_file",
    "evaluate_texture_depth", "pair_periodic_boundaries", "validate_mesh",
    "dimple_row", "herringbone_grooves", "sawtooth_grooves",
]

_KIND_ORDER = ("HEX8", "PRISM6", "QUAD4", "TRI3")


def _ordered_pairs(pairs: np.ndarray) -> np.ndarray:
    """Periodic pairs with rows sorted by (master, slave) for comparison."""
    if len(pairs) == 0:
        return pairs.reshape(0, 2)
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]


# ---------------------------------------------------------------------------
# Core container
# ---------------------------------------------------------------------------

@dataclass
class Mesh:
    """Nodes, elements, named node sets and periodic pairs.

    Attributes
    ----------
    nodes : ndarray, shape (N, 3)
        Coordinates in metres.  Surface meshes live in the z = 0 plane.
    element_blocks : dict[str, ndarray]
        Element kind -> 0-based connectivity array (nel, M), kinds stored
        in the fixed order HEX8, PRISM6, QUAD4, TRI3 for deterministic
        assembly.
    boundary_sets : dict[str, ndarray]
        Set name -> sorted unique 0-based node ids.
    periodic_pairs : ndarray, shape (n_pairs, 2)
        (master, slave) 0-based node ids; each slave appears once.
    """

    nodes: np.ndarray
    element_blocks: dict[str, np.ndarray] = field(default_factory=dict)
    boundary_sets: dict[str, np.ndarray] = field(default_factory=dict)
    periodic_pairs: np.ndarray = field(
        default_factory=lambda: np.empty((0, 2), dtype=np.int64))

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        if self.nodes.shape[1] == 2:
            self.nodes = np.hstack(
                [self.nodes, np.zeros((len(self.nodes), 1))])
        unknown = set(self.element_blocks) - set(_KIND_ORDER)
        if unknown:
            raise MeshError(f"unknown element kinds {sorted(unknown)}")
        self.element_blocks = {
            k: np.asarray(self.element_blocks[k], dtype=np.int64)
            for k in _KIND_ORDER if k in self.element_blocks}
        self.boundary_sets = {
            name: np.unique(np.asarray(ids, dtype=np.int64))
            for name, ids in self.boundary_sets.items()}
        self.periodic_pairs = np.asarray(
            self.periodic_pairs, dtype=np.int64).reshape(-1, 2)

    # -- basic queries ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return sum(len(c) for c in self.element_blocks.values())

    @property
    def dim(self) -> int:
        """2 for pure surface meshes, 3 once volume elements are present."""
        for kind in self.element_blocks:
            if REFERENCE_ELEMENTS[kind].dim == 3:
                return 3
        return 2

    @property
    def xy(self) -> np.ndarray:
        return self.nodes[:, :2]

    def coords(self) -> np.ndarray:
        """Node coordinates trimmed to the active dimension."""
        return self.nodes[:, : self.dim]

    def set_nodes(self, name: str) -> np.ndarray:
        try:
            return self.boundary_sets[name]
        except KeyError:
            raise MeshError(f"mesh has no node set named {name!r}") from None

    def equals(self, other: "Mesh") -> bool:
        """Exact structural equality (coordinates compared bitwise)."""
        if not np.array_equal(self.nodes, other.nodes):
            return False
        if set(self.element_blocks) != set(other.element_blocks):
            return False
        for kind, conn in self.element_blocks.items():
            if not np.array_equal(conn, other.element_blocks[kind]):
                return False
        if set(self.boundary_sets) != set(other.boundary_sets):
            return False
        for name, ids in self.boundary_sets.items():
            if not np.array_equal(ids, other.boundary_sets[name]):
                return False
        return np.array_equal(_ordered_pairs(self.periodic_pairs),
                              _ordered_pairs(other.periodic_pairs))


def validate_mesh(mesh: Mesh) -> None:
    """Check every structural invariant; raise :class:`MeshError` on failure.

    Verified: element/set/pair node ids exist; connectivity is
    non-degenerate (positive Jacobian determinant at every integration
    point and SCV centroid); each slave node appears in exactly one
    periodic pair.
    """
    n = mesh.n_nodes
    if n == 0:
        raise MeshError("mesh has no nodes")
    for kind, conn in mesh.element_blocks.items():
        ref = REFERENCE_ELEMENTS[kind]
        if conn.ndim != 2 or conn.shape[1] != ref.n_nodes:
            raise MeshError(
                f"{kind} connectivity must have {ref.n_nodes} columns")
        if conn.min(initial=0) < 0 or conn.max(initial=-1) >= n:
            raise MeshError(
                f"{kind} element references a node outside 0..{n - 1}")
        # Positive-Jacobian check comes free with the geometry build.
        build_block(kind, mesh.nodes[:, : ref.dim], conn)
    for name, ids in mesh.boundary_sets.items():
        if len(ids) and (ids.min() < 0 or ids.max() >= n):
            raise MeshError(f"set {name!r} references a node outside 0..{n - 1}")
    if len(mesh.periodic_pairs):
        pp = mesh.periodic_pairs
        if pp.min() < 0 or pp.max() >= n:
            raise MeshError("periodic pair references a nonexistent node")
        slaves = pp[:, 1]
        if len(np.unique(slaves)) != len(slaves):
            raise MeshError("a slave node appears in more than one periodic pair")
        if np.intersect1d(pp[:, 0], slaves).size:
            raise MeshError("a node is both master and slave of periodic pairs")


# ---------------------------------------------------------------------------
# Texture and domain descriptions
# ---------------------------------------------------------------------------

@dataclass
class TextureSpec:
    """Surface-feature description on the unwrapped rectangle.

    ``dimples`` holds ``(cx, cy, r)`` discs; ``grooves`` holds polygons as
    ``(n_vertices, 2)`` arrays.  A point lying inside any footprint has
    pocket depth ``depth``; everywhere else the depth is zero (sharp
    edges).  The feed hole is a separate disc used only for node tagging
    (supply boundary condition), not for depth.
    """

    pattern: str = "none"                       # none|dimples|herringbone|sawtooth
    depth: float = 0.0                          # pocket depth h_T [m]
    dimples: list = field(default_factory=list)     # (cx, cy, r) [m]
    grooves: list = field(default_factory=list)     # polygon vertex arrays [m]
    feed_center: tuple | None = None            # (x, y) [m]
    feed_radius: float = 0.0                    # R_h [m]

    def __post_init__(self):
        if self.depth < 0:
            raise MeshError("texture depth must be non-negative")
        self.grooves = [np.asarray(g, dtype=float) for g in self.grooves]

    def footprint_polygons(self):
        """All footprints as shapely geometries (discs buffered finely)."""
        geoms = [shapely.Point(cx, cy).buffer(r, quad_segs=64)
                 for cx, cy, r in self.dimples]
        geoms += [shapely.Polygon(g) for g in self.grooves]
        return geoms

    def bounding_boxes(self):
        """(xmin, ymin, xmax, ymax) per footprint, for refinement bands."""
        boxes = [(cx - r, cy - r, cx + r, cy + r)
                 for cx, cy, r in self.dimples]
        boxes += [(g[:, 0].min(), g[:, 1].min(), g[:, 0].max(), g[:, 1].max())
                  for g in self.grooves]
        return boxes


@dataclass
class RefineBand:
    """Interval of one axis whose base grid cells are subdivided ``factor`` times."""

    axis: str          # 'x' or 'y'
    lo: float          # [m]
    hi: float          # [m]
    factor: int = 2

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise MeshError(f"refinement band axis must be 'x' or 'y', got {self.axis!r}")
        if not self.hi > self.lo:
            raise MeshError(
                f"refinement band [{self.lo}, {self.hi}] has non-positive width")
        if self.factor < 2:
            raise MeshError("refinement factor must be >= 2")


@dataclass
class DomainSpec:
    """Unwrapped journal-bearing surface domain.

    ``radius`` is the bearing radius R_b, ``length`` the axial width L,
    ``clearance`` the radial clearance c.  The surface rectangle is
    ``[0, 2*pi*radius] x [-length/2, length/2]`` meshed with ``n_x`` x
    ``n_y`` base cells, plus optional refinement bands (and automatic
    bands of ``auto_refine`` around texture footprints when > 1).
    """

    radius: float          # R_b [m]
    length: float          # L [m]
    clearance: float       # c [m]
    n_x: int = 32
    n_y: int = 16
    element: str = "QUAD4"     # QUAD4 or TRI3 surface elements
    refine_bands: list = field(default_factory=list)
    auto_refine: int = 1

    def __post_init__(self):
        if self.radius <= 0 or self.length <= 0 or self.clearance <= 0:
            raise MeshError("radius, length and clearance must be positive")
        if self.n_x < 2 or self.n_y < 2:
            raise MeshError("n_x and n_y must both be >= 2")
        if self.element not in ("QUAD4", "TRI3"):
            raise MeshError(f"surface element must be QUAD4 or TRI3, got {self.element!r}")
        if self.clearance / self.radius > 0.01:
            warnings.warn(
                f"clearance/radius = {self.clearance / self.radius:.3g} > 0.01: "
                "the thin-film (unwrapped) approximation degrades", stacklevel=2)

    @property
    def circumference(self) -> float:
        return 2.0 * np.pi * self.radius


# ---------------------------------------------------------------------------
# Texture pattern constructors
# ---------------------------------------------------------------------------

def dimple_row(n: int, radius: float, circumference: float,
               y: float = 0.0, depth: float = 20e-6,
               feed_center=None, feed_radius: float = 0.0) -> TextureSpec:
    """Row of ``n`` equal circular pockets evenly spaced around the circumference.

    Centres sit at ``x = (i + 1/2) * circumference / n`` on the line
    ``y = const`` (mid-width by default).
    """
    centres = [((i + 0.5) * circumference / n, y, radius) for i in range(n)]
    return TextureSpec(pattern="dimples", depth=depth, dimples=centres,
                       feed_center=feed_center, feed_radius=feed_radius)


def _chevron_polygon(apex_x: float, base_x: float, half_span: float,
                     width: float) -> np.ndarray:
    """V-shaped band: two straight flanks meeting at ``(apex_x, 0)``.

    The flanks run from the apex to ``(base_x, +-half_span)``; ``width``
    is the in-plane band width measured along x.  Returns the closed
    polygon's vertices (CCW, 6 points).
    """
    return np.array([
        (base_x, -half_span),
        (base_x + width, -half_span),
        (apex_x + width, 0.0),
        (base_x + width, half_span),
        (base_x, half_span),
        (apex_x, 0.0),
    ])


def herringbone_grooves(n: int, circumference: float, length: float,
                        depth: float = 20e-6, width_frac: float = 0.35,
                        span_frac: float = 0.8, sweep_frac: float = 0.45,
                        feed_center=None, feed_radius: float = 0.0) -> TextureSpec:
    """``n`` chevron (V-shaped) groove bands evenly spaced circumferentially.

    Each groove spans ``span_frac`` of the axial width, its apex pointing
    downstream (+x); ``sweep_frac`` and ``width_frac`` size the sweep and
    band width as fractions of the circumferential pitch.
    """
    pitch = circumference / n
    sweep = sweep_frac * pitch
    width = width_frac * pitch
    half_span = 0.5 * span_frac * length
    grooves = []
    for i in range(n):
        base = (i + 0.1) * pitch
        grooves.append(_chevron_polygon(base + sweep, base, half_span, width))
    tex = TextureSpec(pattern="herringbone", depth=depth, grooves=grooves,
                      feed_center=feed_center, feed_radius=feed_radius)
    return tex


def sawtooth_grooves(n: int, circumference: float, length: float,
                     depth: float = 20e-6, segments: int = 3,
                     width_frac: float = 0.3, span_frac: float = 0.8,
                     sweep_frac: float = 0.5,
                     feed_center=None, feed_radius: float = 0.0) -> TextureSpec:
    """``n`` sawtooth grooves, each a stack of ``segments`` mini-chevrons.

    The mini-chevrons of one groove share the same circumferential
    position and partition the axial span, giving the jagged, direction-
    biased profile.
    """
    pitch = circumference / n
    sweep = sweep_frac * pitch
    width = width_frac * pitch
    span = span_frac * length
    seg_span = span / segments
    grooves = []
    for i in range(n):
        base = (i + 0.1) * pitch
        for s in range(segments):
            y_mid = -span / 2 + (s + 0.5) * seg_span
            poly = _chevron_polygon(base + sweep, base, seg_span / 2, width)
            poly = poly + np.array([0.0, y_mid])
            grooves.append(poly)
    return TextureSpec(pattern="sawtooth", depth=depth, grooves=grooves,
                       feed_center=feed_center, feed_radius=feed_radius)


# ---------------------------------------------------------------------------
# Depth evaluation
# ---------------------------------------------------------------------------

def evaluate_texture_depth(x, y, texture: TextureSpec | None) -> np.ndarray:
    """Pocket depth ``h_T(x, y)``: ``depth`` inside any footprint, else 0.

    Vectorised over ``x``/``y`` (broadcast together); returns an array of
    the broadcast shape (or a 0-d array for scalars).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    inside = np.zeros(x.shape, dtype=bool)
    if texture is None or texture.depth == 0.0:
        return np.zeros(x.shape)
    for cx, cy, r in texture.dimples:
        inside |= (x - cx) ** 2 + (y - cy) ** 2 <= r * r
    if texture.grooves:
        geom = shapely.union_all([shapely.Polygon(g) for g in texture.grooves])
        shapely.prepare(geom)
        inside |= shapely.contains_xy(geom, x.ravel(), y.ravel()).reshape(x.shape)
    return np.where(inside, texture.depth, 0.0)


# ---------------------------------------------------------------------------
# Structured generation
# ---------------------------------------------------------------------------

def _refined_axis(lo: float, hi: float, n: int, bands: list[RefineBand],
                  axis: str) -> np.ndarray:
    """Grid-line coordinates: ``n`` uniform base cells, each base cell
    intersecting a band subdivided by the band's factor."""
    base = np.linspace(lo, hi, n + 1)
    pts = [base[0]]
    for i in range(n):
        a, b = base[i], base[i + 1]
        factor = 1
        for band in bands:
            if band.axis == axis and a < band.hi and b > band.lo:
                factor = max(factor, band.factor)
        pts.extend(np.linspace(a, b, factor + 1)[1:])
    return np.array(pts)


def structured_rect_mesh(x0: float, x1: float, y0: float, y1: float,
                         n_x: int, n_y: int, element: str = "QUAD4",
                         xs=None, ys=None) -> Mesh:
    """Tensor-product mesh of ``[x0, x1] x [y0, y1]``.

    Explicit grid-line arrays ``xs``/``ys`` override the uniform counts.
    Boundary sets ``x_min``, ``x_max``, ``y_min``, ``y_max`` are tagged.
    Triangular meshes split each cell along the (lower-left -> upper-right)
    diagonal.
    """
    xs = np.linspace(x0, x1, n_x + 1) if xs is None else np.asarray(xs, float)
    ys = np.linspace(y0, y1, n_y + 1) if ys is None else np.asarray(ys, float)
    npx, npy = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys, indexing="xy")      # row-major over y then x
    nodes = np.column_stack([X.ravel(), Y.ravel(), np.zeros(npx * npy)])

    def nid(ix, iy):
        return iy * npx + ix

    cells = []
    for iy in range(npy - 1):
        for ix in range(npx - 1):
            n00 = nid(ix, iy)
            n10 = nid(ix + 1, iy)
            n11 = nid(ix + 1, iy + 1)
            n01 = nid(ix, iy + 1)
            if element == "QUAD4":
                cells.append((n00, n10, n11, n01))
            elif element == "TRI3":
                cells.append((n00, n10, n11))
                cells.append((n00, n11, n01))
            else:
                raise MeshError(f"unsupported surface element {element!r}")
    kind = "QUAD4" if element == "QUAD4" else "TRI3"
    sets = {
        "x_min": np.arange(npy) * npx,
        "x_max": np.arange(npy) * npx + (npx - 1),
        "y_min": np.arange(npx),
        "y_max": (npy - 1) * npx + np.arange(npx),
    }
    return Mesh(nodes=nodes,
                element_blocks={kind: np.array(cells, dtype=np.int64)},
                boundary_sets=sets)


def pair_periodic_boundaries(mesh: Mesh, axis: str = "x",
                             tol: float = 1e-9) -> Mesh:
    """Match the two boundary sets normal to ``axis`` into (master, slave) pairs.

    Masters sit on the low side (``circ_start``/``x_min`` for axis 'x'),
    slaves on the high side; nodes are matched by their off-axis
    coordinate within ``tol`` (``tol = 0`` demands bitwise equality).
    Raises :class:`MeshError` when the counts differ or a node has no
    partner.
    """
    names = {"x": (("circ_start", "x_min"), ("circ_end", "x_max")),
             "y": (("axial_left", "y_min"), ("axial_right", "y_max"))}
    if axis not in names:
        raise MeshError(f"periodic axis must be 'x' or 'y', got {axis!r}")

    def first_present(options):
        for name in options:
            if name in mesh.boundary_sets:
                return mesh.boundary_sets[name]
        raise MeshError(
            f"mesh lacks a boundary set for the {axis}-periodic ends "
            f"(expected one of {options})")

    lo = first_present(names[axis][0])
    hi = first_present(names[axis][1])
    if len(lo) != len(hi):
        raise MeshError(
            f"periodic boundary node counts differ: {len(lo)} vs {len(hi)}")
    off_axis = 1 if axis == "x" else 0
    lo_c = mesh.nodes[lo, off_axis]
    hi_c = mesh.nodes[hi, off_axis]
    order_lo = np.argsort(lo_c, kind="stable")
    order_hi = np.argsort(hi_c, kind="stable")
    pairs = []
    for i_lo, i_hi in zip(lo[order_lo], hi[order_hi]):
        d = abs(mesh.nodes[i_lo, off_axis] - mesh.nodes[i_hi, off_axis])
        if d > tol:
            raise MeshError(
                f"periodic node {int(i_lo) + 1} has no partner within "
                f"tol = {tol:g} (closest mismatch {d:.3e} m)")
        pairs.append((int(i_lo), int(i_hi)))
    mesh.periodic_pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return mesh


def generate_bearing_mesh(domain: DomainSpec,
                          texture: TextureSpec | None = None) -> Mesh:
    """Periodic surface mesh of the unwrapped bearing with tagged features.

    Applies the domain's refinement bands plus automatic bands around
    texture footprints (when ``domain.auto_refine`` > 1), tags the four
    boundary sets (``circ_start``, ``circ_end``, ``axial_left``,
    ``axial_right``), the ``feed_hole`` disc and ``texture`` footprints,
    and registers circumferential periodic pairs.
    """
    C, L = domain.circumference, domain.length
    bands = list(domain.refine_bands)
    if texture is not None:
        for (xmin, ymin, xmax, ymax) in texture.bounding_boxes():
            if xmin < -1e-12 or xmax > C + 1e-12 or \
               ymin < -L / 2 - 1e-12 or ymax > L / 2 + 1e-12:
                raise MeshError(
                    f"texture footprint [{xmin:.4g}, {xmax:.4g}] x "
                    f"[{ymin:.4g}, {ymax:.4g}] m extends outside the domain "
                    f"[0, {C:.4g}] x [{-L / 2:.4g}, {L / 2:.4g}] m")
            if domain.auto_refine > 1:
                bands.append(RefineBand("x", xmin, xmax, domain.auto_refine))
                bands.append(RefineBand("y", ymin, ymax, domain.auto_refine))
        if texture.feed_center is not None and texture.feed_radius > 0:
            fx, fy = texture.feed_center
            if domain.auto_refine > 1:
                bands.append(RefineBand(
                    "x", fx - texture.feed_radius, fx + texture.feed_radius,
                    domain.auto_refine))
                bands.append(RefineBand(
                    "y", fy - texture.feed_radius, fy + texture.feed_radius,
                    domain.auto_refine))

    xs = _refined_axis(0.0, C, domain.n_x, bands, "x")
    ys = _refined_axis(-L / 2, L / 2, domain.n_y, bands, "y")
    mesh = structured_rect_mesh(0, C, -L / 2, L / 2, domain.n_x, domain.n_y,
                                element=domain.element, xs=xs, ys=ys)
    sets = mesh.boundary_sets
    mesh.boundary_sets = {
        "circ_start": sets["x_min"],
        "circ_end": sets["x_max"],
        "axial_left": sets["y_min"],
        "axial_right": sets["y_max"],
    }
    if texture is not None:
        x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
        if texture.feed_center is not None and texture.feed_radius > 0:
            fx, fy = texture.feed_center
            inside = (x - fx) ** 2 + (y - fy) ** 2 <= texture.feed_radius ** 2
            mesh.boundary_sets["feed_hole"] = np.flatnonzero(inside)
        depth = evaluate_texture_depth(x, y, texture)
        tex_nodes = np.flatnonzero(depth > 0)
        if len(tex_nodes):
            mesh.boundary_sets["texture"] = tex_nodes
    pair_periodic_boundaries(mesh, axis="x", tol=1e-9 * max(C, L))
    validate_mesh(mesh)
    return mesh


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

def parse_mesh_file(source) -> Mesh:
    """Read the line-oriented mesh format from text, bytes or a file object.

    All structural invariants are validated; every parse failure carries
    the offending 1-based line number.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    else:
        raise TypeError(f"cannot parse mesh from {type(source)!r}")

    node_xyz: dict[int, tuple] = {}
    blocks: dict[str, list] = {}
    elem_lines: dict[str, list] = {}
    sets: dict[str, list] = {}
    pairs: list[tuple[int, int]] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        rec, args = tokens[0].upper(), tokens[1:]
        try:
            if rec == "NODE":
                if len(args) != 4:
                    raise ValueError("NODE requires <id> <x> <y> <z>")
                nid = int(args[0])
                if nid in node_xyz:
                    raise ValueError(f"duplicate node id {nid}")
                node_xyz[nid] = tuple(float(a) for a in args[1:])
            elif rec == "ELEM":
                kind = args[0].upper()
                if kind not in REFERENCE_ELEMENTS:
                    raise ValueError(f"unknown element kind {kind!r}")
                want = REFERENCE_ELEMENTS[kind].n_nodes
                ids = [int(a) for a in args[1:]]
                if len(ids) != want:
                    raise ValueError(f"{kind} requires {want} node ids, got {len(ids)}")
                blocks.setdefault(kind, []).append(ids)
                elem_lines.setdefault(kind, []).append(line_no)
            elif rec == "SET":
                if len(args) < 1:
                    raise ValueError("SET requires a name")
                sets.setdefault(args[0], []).extend(int(a) for a in args[1:])
            elif rec == "PAIR":
                if len(args) != 2:
                    raise ValueError("PAIR requires <master> <slave>")
                pairs.append((int(args[0]), int(args[1])))
            else:
                raise ValueError(f"unknown record type {rec!r}")
        except MeshParseError:
            raise
        except ValueError as exc:
            raise MeshParseError(line_no, str(exc)) from None

    if not node_xyz:
        raise MeshParseError(1, "mesh defines no nodes")
    n = len(node_xyz)
    if set(node_xyz) != set(range(1, n + 1)):
        missing = sorted(set(range(1, n + 1)) - set(node_xyz))[:3]
        raise MeshParseError(
            max(1, len(text.splitlines())),
            f"node ids must be contiguous 1..{n}; missing {missing}")
    nodes = np.array([node_xyz[i] for i in range(1, n + 1)], dtype=float)

    element_blocks = {}
    for kind, rows in blocks.items():
        conn = np.array(rows, dtype=np.int64)
        bad = (conn < 1) | (conn > n)
        if bad.any():
            row = int(np.argwhere(bad.any(axis=1))[0][0])
            raise MeshParseError(
                elem_lines[kind][row],
                f"{kind} element references node {int(conn[bad][0])} "
                f"of a {n}-node mesh")
        element_blocks[kind] = conn - 1

    boundary_sets = {}
    for name, ids in sets.items():
        arr = np.array(ids, dtype=np.int64)
        if len(arr) and (arr.min() < 1 or arr.max() > n):
            raise MeshParseError(1, f"set {name!r} references a nonexistent node")
        boundary_sets[name] = arr - 1

    mesh = Mesh(nodes=nodes, element_blocks=element_blocks,
                boundary_sets=boundary_sets,
                periodic_pairs=np.array(pairs, dtype=np.int64).reshape(-1, 2) - 1)
    validate_mesh(mesh)
    return mesh


def write_mesh_file(mesh: Mesh) -> str:
    """Serialise to the text format; ``parse_mesh_file`` round-trips exactly.

    Coordinates use Python's shortest round-trip float representation, so
    re-parsing reproduces the same bit patterns.
    """
    out = ["# lubfvm mesh"]
    for i, (x, y, z) in enumerate(mesh.nodes, start=1):
        out.append(f"NODE {i} {float(x)!r} {float(y)!r} {float(z)!r}")
    for kind in _KIND_ORDER:
        if kind not in mesh.element_blocks:
            continue
        for row in mesh.element_blocks[kind] + 1:
            out.append(f"ELEM {kind} " + " ".join(str(v) for v in row))
    for name in sorted(mesh.boundary_sets):
        ids = mesh.boundary_sets[name] + 1
        out.append(f"SET {name} " + " ".join(str(v) for v in ids))
    for m, s in _ordered_pairs(mesh.periodic_pairs) + 1:
        out.append(f"PAIR {m} {s}")
    return "\n".join(out) + "\n"
