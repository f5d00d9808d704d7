"""Reference elements and per-element geometry for a cell-vertex finite-volume scheme.

Each supported element (trilinear hexahedron, linear wedge/prism, bilinear
quadrilateral, linear triangle) is split into one sub-control volume (SCV)
per node by connecting edge midpoints, face centroids and the element
centroid.  The control volume of a mesh node is the union of the SCVs it
owns across all elements sharing it.  Fluxes between adjacent SCVs are
evaluated by the midpoint rule at one integration point per internal face
(the face centroid), using the isoparametric interpolation of the element.

This module holds

* the reference tables (node positions, shape functions and their
  gradients, integration-point positions, SCV centroids, internal-face
  corner lists and their donor/receiver SCV indices), and
* vectorised geometry kernels that map those tables through the
  isoparametric transformation of every element of a mesh at once
  (:class:`ElementBlock`), producing SCV volumes, oriented face areas and
  physical shape-function gradients ready for flux assembly.

Conventions
-----------
* Node, SCV and face indices are 0-based throughout the code; mesh files
  use 1-based ids and are converted on read.
* Each internal face stores one oriented area vector ``dS`` whose
  direction is fixed by the reference tables: it points from the face's
  *donor* SCV into its *receiver* SCV.  A positive flux ``q = F . dS``
  therefore leaves the donor and enters the receiver.
* Face area vectors are computed from the face's physical corner points
  with a single cross product ``(r2 - r1) x (r3 - r1)`` in 3-D (the two
  triangles of the possibly warped quadrilateral share this value in sum
  because the corners are isoparametric images of planar reference
  quadrilaterals -- the cross product of the diagonals' halves; we use the
  equivalent one-shot form) and with a -90 degree rotation
  ``(dy, -dx)`` of the segment vector in 2-D.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateElementError

__all__ = [
    "ReferenceElement",
    "ElementBlock",
    "REFERENCE_ELEMENTS",
    "shape_functions",
    "gradient_matrix",
    "jacobian",
    "gradient_tensor",
    "scv_volumes",
    "face_area_normals",
    "diffusion_tensor",
    "build_block",
]


# ---------------------------------------------------------------------------
# Reference tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReferenceElement:
    """Immutable reference-space description of one element type.

    Attributes
    ----------
    name : str
        Mesh-file keyword (``HEX8``, ``PRISM6``, ``QUAD4``, ``TRI3``).
    dim : int
        Spatial dimension (2 or 3).
    n_nodes : int
        Number of nodes ( = number of SCVs).
    n_faces : int
        Number of internal SCV faces ( = number of integration points).
    nodes : ndarray, shape (n_nodes, dim)
        Reference coordinates of the element nodes.
    ip_coords : ndarray, shape (n_faces, dim)
        Reference coordinates of the integration points (internal-face
        centroids).
    scv_centroids : ndarray, shape (n_nodes, dim)
        Reference evaluation point of each SCV for volume/average purposes
        (the vertex mean of the SCV's corner points).
    volume_fraction : float
        ``scv_volume = volume_fraction * det(J)`` evaluated at the SCV
        centroid.
    donor, receiver : ndarray of int, shape (n_faces,)
        SCV indices on either side of each internal face; the stored face
        orientation points donor -> receiver.
    face_corners : ndarray, shape (n_faces, corners_per_face, dim)
        Reference coordinates of each internal face's corner points,
        ordered so the construction rule for the area vector yields the
        donor -> receiver direction.  Quadrilateral faces in 3-D carry 4
        corners; segment faces in 2-D carry 2.
    """

    name: str
    dim: int
    n_nodes: int
    n_faces: int
    nodes: np.ndarray
    ip_coords: np.ndarray
    scv_centroids: np.ndarray
    volume_fraction: float
    donor: np.ndarray
    receiver: np.ndarray
    face_corners: np.ndarray
    # Caches of table values evaluated once at the fixed reference points.
    ip_shape: np.ndarray = field(init=False)       # (n_faces, n_nodes)
    ip_grad_ref: np.ndarray = field(init=False)    # (n_faces, n_nodes, dim)
    scv_grad_ref: np.ndarray = field(init=False)   # (n_nodes, n_nodes, dim)
    corner_shape: np.ndarray = field(init=False)   # (n_faces, corners, n_nodes)

    def __post_init__(self):
        object.__setattr__(self, "ip_shape", self.shape(self.ip_coords))
        object.__setattr__(self, "ip_grad_ref", self.grad(self.ip_coords))
        object.__setattr__(self, "scv_grad_ref", self.grad(self.scv_centroids))
        corner_pts = self.face_corners.reshape(-1, self.dim)
        corner_shape = self.shape(corner_pts).reshape(
            self.n_faces, self.face_corners.shape[1], self.n_nodes)
        object.__setattr__(self, "corner_shape", corner_shape)

    # -- closed-form shape functions -------------------------------------

    def shape(self, xi: np.ndarray) -> np.ndarray:
        """Shape-function values ``N_m`` at reference points ``xi``.

        Parameters
        ----------
        xi : ndarray, shape (..., dim)

        Returns
        -------
        ndarray, shape (..., n_nodes)
        """
        xi = np.asarray(xi, dtype=float)
        if self.name == "HEX8":
            x, y, z = xi[..., 0], xi[..., 1], xi[..., 2]
            return np.stack([
                (1 - x) * (1 - y) * (1 - z),
                x * (1 - y) * (1 - z),
                x * y * (1 - z),
                y * (1 - x) * (1 - z),
                z * (1 - x) * (1 - y),
                x * z * (1 - y),
                x * y * z,
                y * z * (1 - x),
            ], axis=-1)
        if self.name == "PRISM6":
            x, y, z = xi[..., 0], xi[..., 1], xi[..., 2]
            return np.stack([
                (1 - x - y) * (1 - z),
                x * (1 - z),
                y * (1 - z),
                (1 - x - y) * z,
                x * z,
                y * z,
            ], axis=-1)
        if self.name == "QUAD4":
            x, y = xi[..., 0], xi[..., 1]
            return np.stack([
                (1 - x) * (1 - y),
                x * (1 - y),
                x * y,
                y * (1 - x),
            ], axis=-1)
        if self.name == "TRI3":
            x, y = xi[..., 0], xi[..., 1]
            return np.stack([1 - x - y, x, y], axis=-1)
        raise ValueError(f"unknown element kind {self.name!r}")

    def grad(self, xi: np.ndarray) -> np.ndarray:
        """Reference gradients ``dN_m/dxi_j`` at points ``xi``.

        Returns
        -------
        ndarray, shape (..., n_nodes, dim)
            Row ``m`` holds the gradient of ``N_m``; the rows sum to the
            zero vector at every point (partition of unity).
        """
        xi = np.asarray(xi, dtype=float)
        o = np.ones_like(xi[..., 0])
        zz = np.zeros_like(o)
        if self.name == "HEX8":
            x, y, z = xi[..., 0], xi[..., 1], xi[..., 2]
            rows = [
                [-(1 - y) * (1 - z), -(1 - x) * (1 - z), -(1 - x) * (1 - y)],
                [(1 - y) * (1 - z), -x * (1 - z), -x * (1 - y)],
                [y * (1 - z), x * (1 - z), -x * y],
                [-y * (1 - z), (1 - x) * (1 - z), -y * (1 - x)],
                [-z * (1 - y), -z * (1 - x), (1 - x) * (1 - y)],
                [z * (1 - y), -x * z, x * (1 - y)],
                [y * z, x * z, x * y],
                [-y * z, z * (1 - x), y * (1 - x)],
            ]
        elif self.name == "PRISM6":
            x, y, z = xi[..., 0], xi[..., 1], xi[..., 2]
            rows = [
                [-(1 - z), -(1 - z), -(1 - x - y)],
                [(1 - z), zz, -x],
                [zz, (1 - z), -y],
                [-z, -z, (1 - x - y)],
                [z, zz, x],
                [zz, z, y],
            ]
        elif self.name == "QUAD4":
            x, y = xi[..., 0], xi[..., 1]
            rows = [
                [-(1 - y), -(1 - x)],
                [(1 - y), -x],
                [y, x],
                [-y, (1 - x)],
            ]
        elif self.name == "TRI3":
            rows = [[-o, -o], [o, zz], [zz, o]]
        else:
            raise ValueError(f"unknown element kind {self.name!r}")
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def _hex8() -> ReferenceElement:
    # Edge midpoints m, face centroids c, element centre O of the unit cube.
    m = {1: (.5, 0, 0), 2: (1, .5, 0), 3: (.5, 1, 0), 4: (0, .5, 0),
         5: (.5, 0, 1), 6: (1, .5, 1), 7: (.5, 1, 1), 8: (0, .5, 1),
         9: (0, 0, .5), 10: (1, 0, .5), 11: (1, 1, .5), 12: (0, 1, .5)}
    c = {1: (.5, 0, .5), 2: (1, .5, .5), 3: (.5, 1, .5),
         4: (0, .5, .5), 5: (.5, .5, 0), 6: (.5, .5, 1)}
    O = (.5, .5, .5)
    faces = [
        [m[1], c[5], O, c[1]],    # SCV1 -> SCV2
        [m[2], c[5], O, c[2]],    # SCV2 -> SCV3
        [m[3], c[5], O, c[3]],    # SCV3 -> SCV4
        [m[4], c[5], O, c[4]],    # SCV4 -> SCV1
        [c[1], O, c[6], m[5]],    # SCV5 -> SCV6
        [c[2], O, c[6], m[6]],    # SCV6 -> SCV7
        [c[3], O, c[6], m[7]],    # SCV7 -> SCV8
        [c[4], O, c[6], m[8]],    # SCV8 -> SCV5
        [m[9], c[1], O, c[4]],    # SCV1 -> SCV5
        [m[10], c[2], O, c[1]],   # SCV2 -> SCV6
        [m[11], c[3], O, c[2]],   # SCV3 -> SCV7
        [m[12], c[4], O, c[3]],   # SCV4 -> SCV8
    ]
    return ReferenceElement(
        name="HEX8", dim=3, n_nodes=8, n_faces=12,
        nodes=np.array([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
                        (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)], dtype=float),
        ip_coords=np.array([
            (1 / 2, 1 / 4, 1 / 4), (3 / 4, 1 / 2, 1 / 4),
            (1 / 2, 3 / 4, 1 / 4), (1 / 4, 1 / 2, 1 / 4),
            (1 / 2, 1 / 4, 3 / 4), (3 / 4, 1 / 2, 3 / 4),
            (1 / 2, 3 / 4, 3 / 4), (1 / 4, 1 / 2, 3 / 4),
            (1 / 4, 1 / 4, 1 / 2), (3 / 4, 1 / 4, 1 / 2),
            (3 / 4, 3 / 4, 1 / 2), (1 / 4, 3 / 4, 1 / 2)]),
        scv_centroids=np.array([
            (1 / 4, 1 / 4, 1 / 4), (3 / 4, 1 / 4, 1 / 4),
            (3 / 4, 3 / 4, 1 / 4), (1 / 4, 3 / 4, 1 / 4),
            (1 / 4, 1 / 4, 3 / 4), (3 / 4, 1 / 4, 3 / 4),
            (3 / 4, 3 / 4, 3 / 4), (1 / 4, 3 / 4, 3 / 4)]),
        volume_fraction=1 / 8,
        donor=np.array([0, 1, 2, 3, 4, 5, 6, 7, 0, 1, 2, 3]),
        receiver=np.array([1, 2, 3, 0, 5, 6, 7, 4, 4, 5, 6, 7]),
        face_corners=np.array(faces, dtype=float),
    )


def _prism6() -> ReferenceElement:
    # Construction points of the unit wedge 0<=xi, 0<=eta, xi+eta<=1, 0<=zeta<=1.
    t = 1 / 3
    m = {1: (.5, 0, 0), 2: (.5, .5, 0), 3: (0, .5, 0),
         4: (.5, 0, 1), 5: (.5, .5, 1), 6: (0, .5, 1),
         7: (0, 0, .5), 8: (1, 0, .5), 9: (0, 1, .5)}
    c = {1: (.5, 0, .5), 2: (.5, .5, .5), 3: (0, .5, .5),
         4: (t, t, 0), 5: (t, t, 1)}
    O = (t, t, .5)
    faces = [
        [m[1], c[4], O, c[1]],   # SCV1 -> SCV2
        [m[2], c[4], O, c[2]],   # SCV2 -> SCV3
        [m[3], c[4], O, c[3]],   # SCV3 -> SCV1
        [c[1], O, c[5], m[4]],   # SCV4 -> SCV5
        [c[2], O, c[5], m[5]],   # SCV5 -> SCV6
        [c[3], O, c[5], m[6]],   # SCV6 -> SCV4
        [m[7], c[1], O, c[3]],   # SCV1 -> SCV4
        [m[8], c[2], O, c[1]],   # SCV2 -> SCV5
        [m[9], c[3], O, c[2]],   # SCV3 -> SCV6
    ]
    return ReferenceElement(
        name="PRISM6", dim=3, n_nodes=6, n_faces=9,
        nodes=np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0),
                        (0, 0, 1), (1, 0, 1), (0, 1, 1)], dtype=float),
        ip_coords=np.array([
            (5 / 12, 1 / 6, 1 / 4), (5 / 12, 5 / 12, 1 / 4), (1 / 6, 5 / 12, 1 / 4),
            (5 / 12, 1 / 6, 3 / 4), (5 / 12, 5 / 12, 3 / 4), (1 / 6, 5 / 12, 3 / 4),
            (5 / 24, 5 / 24, 1 / 2), (7 / 12, 5 / 24, 1 / 2), (5 / 24, 7 / 12, 1 / 2)]),
        scv_centroids=np.array([
            (5 / 24, 5 / 24, 1 / 4), (7 / 12, 5 / 24, 1 / 4), (5 / 24, 7 / 12, 1 / 4),
            (5 / 24, 5 / 24, 3 / 4), (7 / 12, 5 / 24, 3 / 4), (5 / 24, 7 / 12, 3 / 4)]),
        volume_fraction=1 / 12,
        donor=np.array([0, 1, 2, 3, 4, 5, 0, 1, 2]),
        receiver=np.array([1, 2, 0, 4, 5, 3, 3, 4, 5]),
        face_corners=np.array(faces, dtype=float),
    )


def _quad4() -> ReferenceElement:
    m = {1: (.5, 0), 2: (1, .5), 3: (.5, 1), 4: (0, .5)}
    c = (.5, .5)
    faces = [[m[1], c], [m[2], c], [m[3], c], [m[4], c]]
    return ReferenceElement(
        name="QUAD4", dim=2, n_nodes=4, n_faces=4,
        nodes=np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float),
        ip_coords=np.array([(1 / 2, 1 / 4), (3 / 4, 1 / 2),
                            (1 / 2, 3 / 4), (1 / 4, 1 / 2)]),
        scv_centroids=np.array([(1 / 4, 1 / 4), (3 / 4, 1 / 4),
                                (3 / 4, 3 / 4), (1 / 4, 3 / 4)]),
        volume_fraction=1 / 4,
        donor=np.array([0, 1, 2, 3]),
        receiver=np.array([1, 2, 3, 0]),
        face_corners=np.array(faces, dtype=float),
    )


def _tri3() -> ReferenceElement:
    t = 1 / 3
    m = {1: (.5, 0), 2: (.5, .5), 3: (0, .5)}
    c = (t, t)
    faces = [[m[1], c], [m[2], c], [m[3], c]]
    return ReferenceElement(
        name="TRI3", dim=2, n_nodes=3, n_faces=3,
        nodes=np.array([(0, 0), (1, 0), (0, 1)], dtype=float),
        ip_coords=np.array([(5 / 12, 1 / 6), (5 / 12, 5 / 12), (1 / 6, 5 / 12)]),
        scv_centroids=np.array([(5 / 24, 5 / 24), (7 / 12, 5 / 24), (5 / 24, 7 / 12)]),
        volume_fraction=1 / 6,
        donor=np.array([0, 1, 2]),
        receiver=np.array([1, 2, 0]),
        face_corners=np.array(faces, dtype=float),
    )


REFERENCE_ELEMENTS: dict[str, ReferenceElement] = {
    e.name: e for e in (_hex8(), _prism6(), _quad4(), _tri3())
}


def _ref(kind: str) -> ReferenceElement:
    try:
        return REFERENCE_ELEMENTS[kind]
    except KeyError:
        raise ValueError(
            f"unknown element kind {kind!r}; expected one of "
            f"{sorted(REFERENCE_ELEMENTS)}") from None


# ---------------------------------------------------------------------------
# Single-element operations (thin wrappers; assembly uses the batched block)
# ---------------------------------------------------------------------------

def shape_functions(kind: str, xi) -> np.ndarray:
    """Shape-function values of element ``kind`` at reference point(s) ``xi``."""
    return _ref(kind).shape(np.asarray(xi, dtype=float))


def gradient_matrix(kind: str, xi) -> np.ndarray:
    """Reference-space gradients ``dN_m/dxi_j`` as rows, shape (..., M, dim)."""
    return _ref(kind).grad(np.asarray(xi, dtype=float))


def jacobian(kind: str, coords, xi) -> np.ndarray:
    """Jacobian ``J[d, j] = d x_d / d xi_j`` of the isoparametric map.

    Parameters
    ----------
    kind : str
    coords : ndarray, shape (M, dim)
        Physical node coordinates, rows ordered like the reference nodes.
    xi : ndarray, shape (dim,) or (..., dim)

    Raises
    ------
    DegenerateElementError
        If ``det J <= 0`` at any of the requested points.
    """
    ref = _ref(kind)
    coords = np.asarray(coords, dtype=float)
    B = ref.grad(np.asarray(xi, dtype=float))            # (..., M, dim)
    J = np.einsum("md,...mj->...dj", coords, B)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        raise DegenerateElementError(
            f"{kind} element has non-positive Jacobian determinant "
            f"(min det = {np.min(det):.3e})")
    return J


def gradient_tensor(kind: str, coords, xi) -> np.ndarray:
    """Physical shape-function gradients ``G[m, k] = dN_m/dx_k``.

    Exact for fields that are (bi/tri)linear in the reference coordinates,
    hence reproduces the gradient of any nodal sampling of an affine
    field on arbitrarily distorted (non-degenerate) elements.
    """
    ref = _ref(kind)
    coords = np.asarray(coords, dtype=float)
    B = ref.grad(np.asarray(xi, dtype=float))
    J = np.einsum("md,...mj->...dj", coords, B)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        raise DegenerateElementError(
            f"{kind} element has non-positive Jacobian determinant "
            f"(min det = {np.min(det):.3e})")
    return np.einsum("...mk,...kj->...mj", B, np.linalg.inv(J))


def scv_volumes(kind: str, coords) -> np.ndarray:
    """Sub-control-volume sizes, shape (M,).

    ``vol_s = fraction * det J`` at the SCV centroid, with the fraction
    from the reference tables (1/8 hexahedron, 1/12 wedge, 1/4
    quadrilateral, 1/6 triangle -- 2-D values are areas).
    """
    ref = _ref(kind)
    coords = np.asarray(coords, dtype=float)
    B = ref.scv_grad_ref                                  # (M, M, dim)
    J = np.einsum("md,smj->sdj", coords, B)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        raise DegenerateElementError(
            f"{kind} element has non-positive Jacobian determinant at an "
            f"SCV centroid (min det = {np.min(det):.3e})")
    return ref.volume_fraction * det


def face_area_normals(kind: str, coords) -> tuple[np.ndarray, np.ndarray]:
    """Oriented internal-face areas and their unit normals.

    Returns
    -------
    dS : ndarray, shape (n_faces, dim)
        Area vectors pointing donor -> receiver; the magnitude is the face
        area (length in 2-D).
    n_hat : ndarray, shape (n_faces, dim)
        ``dS`` normalised to unit length.
    """
    ref = _ref(kind)
    coords = np.asarray(coords, dtype=float)
    # Physical images of the reference face corners.
    pts = np.einsum("fcm,md->fcd", ref.corner_shape, coords)
    if ref.dim == 3:
        dS = np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
    else:
        seg = pts[:, 1] - pts[:, 0]
        dS = np.stack([seg[:, 1], -seg[:, 0]], axis=-1)
    return dS, dS / np.linalg.norm(dS, axis=-1, keepdims=True)


def diffusion_tensor(kind: str, coords) -> np.ndarray:
    """Signed geometric weights for diffusive fluxes through SCV faces.

    Returns
    -------
    ndarray ``Bt``, shape (M, M, dim, M, dim) indexed ``[s, m, j, k, i]``
        The net *outward* diffusive transport for SCV ``s`` of a flux
        ``Gamma grad(phi)`` with nodally interpolated coefficient is::

            out_s = sum_{m,j,k,i} Bt[s, m, j, k, i] * Gamma[m, i, j] * phi[k]

        i.e. each internal face contributes
        ``N_m * G[k, j] * dS_i`` evaluated at its integration point, with
        sign +1 on the donor SCV's slot and -1 on the receiver's.
    """
    ref = _ref(kind)
    coords = np.asarray(coords, dtype=float)
    G = gradient_tensor(kind, coords, ref.ip_coords)      # (F, M, dim)
    dS, _ = face_area_normals(kind, coords)               # (F, dim)
    # Per-face tensor H[f, m, j, k, i] = N_m G[k, j] dS_i.
    H = np.einsum("fm,fkj,fi->fmjki", ref.ip_shape, G, dS)
    M = ref.n_nodes
    Bt = np.zeros((M,) + H.shape[1:])
    np.add.at(Bt, ref.donor, H)
    np.subtract.at(Bt, ref.receiver, H)
    return Bt


# ---------------------------------------------------------------------------
# Batched geometry for all elements of one kind
# ---------------------------------------------------------------------------

@dataclass
class ElementBlock:
    """Precomputed per-element geometry for every element of one kind.

    Built once per mesh and reused by every assembly pass; all arrays are
    indexed by local element number within the block.

    Attributes
    ----------
    ref : ReferenceElement
    conn : ndarray of int, shape (nel, M)
        Global node ids (0-based) of each element.
    coords : ndarray, shape (nel, M, dim)
        Node coordinates gathered per element.
    scv_vol : ndarray, shape (nel, M)
        Sub-control-volume sizes.
    face_ds : ndarray, shape (nel, F, dim)
        Oriented face area vectors (donor -> receiver).
    ip_grad : ndarray, shape (nel, F, M, dim)
        Physical shape-function gradients at each integration point.
    scv_grad : ndarray, shape (nel, M, M, dim)
        Physical shape-function gradients at each SCV centroid (used for
        control-volume-averaged gradient reconstruction).
    """

    ref: ReferenceElement
    conn: np.ndarray
    coords: np.ndarray
    scv_vol: np.ndarray
    face_ds: np.ndarray
    ip_grad: np.ndarray
    scv_grad: np.ndarray

    @property
    def n_elements(self) -> int:
        return self.conn.shape[0]


def _batched_grad(ref: ReferenceElement, coords: np.ndarray,
                  B: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    """Physical gradients and determinants at fixed reference points.

    ``coords`` has shape (nel, M, dim); ``B`` has shape (P, M, dim) for P
    evaluation points.  Returns ``G`` (nel, P, M, dim) and ``det``
    (nel, P); raises if any determinant is non-positive, naming the
    offending element.
    """
    J = np.einsum("emd,pmj->epdj", coords, B)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        bad = int(np.argwhere(det <= 0)[0][0])
        raise DegenerateElementError(
            f"{ref.name} element {bad} has non-positive Jacobian "
            f"determinant at {what} (det = {det.min():.3e})")
    G = np.einsum("pmk,epkj->epmj", B, np.linalg.inv(J))
    return G, det


def build_block(kind: str, nodes: np.ndarray, conn: np.ndarray) -> ElementBlock:
    """Gather coordinates and precompute all per-element geometry.

    Parameters
    ----------
    kind : str
        Element keyword.
    nodes : ndarray, shape (n_nodes_mesh, dim)
        Global node coordinates (2 or 3 columns matching the kind).
    conn : ndarray of int, shape (nel, M)
        0-based connectivity.
    """
    ref = _ref(kind)
    conn = np.asarray(conn, dtype=np.int64)
    if conn.ndim != 2 or conn.shape[1] != ref.n_nodes:
        raise ValueError(
            f"{kind} connectivity must have {ref.n_nodes} columns, "
            f"got shape {conn.shape}")
    coords = np.asarray(nodes, dtype=float)[conn]          # (nel, M, dim)
    if coords.shape[-1] != ref.dim:
        raise ValueError(
            f"{kind} expects {ref.dim}-column coordinates, "
            f"got {coords.shape[-1]}")

    # SCV volumes from the Jacobian determinant at the SCV centroids.
    _, det_scv = _batched_grad(ref, coords, ref.scv_grad_ref, "an SCV centroid")
    scv_vol = ref.volume_fraction * det_scv                # (nel, M)

    # Gradients at the integration points.
    ip_grad, _ = _batched_grad(ref, coords, ref.ip_grad_ref, "an integration point")

    # Gradients at the SCV centroids (for nodal gradient reconstruction).
    scv_grad, _ = _batched_grad(ref, coords, ref.scv_grad_ref, "an SCV centroid")

    # Oriented face areas from the physical corner points.
    pts = np.einsum("fcm,emd->efcd", ref.corner_shape, coords)
    if ref.dim == 3:
        face_ds = np.cross(pts[:, :, 1] - pts[:, :, 0], pts[:, :, 2] - pts[:, :, 0])
    else:
        seg = pts[:, :, 1] - pts[:, :, 0]
        face_ds = np.stack([seg[..., 1], -seg[..., 0]], axis=-1)

    return ElementBlock(ref=ref, conn=conn, coords=coords, scv_vol=scv_vol,
                        face_ds=face_ds, ip_grad=ip_grad, scv_grad=scv_grad)
