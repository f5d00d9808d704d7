"""Discretisation of scalar transport laws on node-centred control volumes.

The continuous law

    d(rho*phi)/dt + div(rho*v*phi) = div(Gamma_d grad phi) + Q

is discretised with backward Euler in time and a cell-vertex finite-volume
scheme in space: every mesh node owns the control volume (CV) formed by
the sub-control volumes (SCVs) of the elements around it, and fluxes
through the internal SCV faces are evaluated at the face-centroid
integration points using the element's isoparametric interpolation.

Sign conventions
----------------
Element matrices are *outflow* operators: row ``s`` of the diffusion
matrix gives the net diffusive transport leaving SCV ``s`` (positive
outward), and likewise for convection.  The nodal balance therefore reads

    s1_P * phi_P + [C phi]_P - [D phi]_P = s3_P + prev_mass_P / dt * vol_P

and the global matrix is ``A = diag(s1) + C - D``.  Each internal face
contributes once with ``+`` to its donor SCV's row and once with ``-`` to
its receiver's, so fluxes cancel pairwise and constants lie in the null
space of interior rows.

Convection uses first-order donor-cell upwinding: the face mass flux
``q = dS . sum_m N_m (Gamma_c v)_m`` (coefficientwise nodal products,
interpolated afterwards) draws the transported value from the face's
upstream node -- the donor when ``q >= 0``, the receiver otherwise.

Boundary conditions: Dirichlet rows are replaced by ``x_P = value``;
periodic (master, slave) pairs are merged by folding every slave-row and
slave-column contribution into the master and keeping the equality
constraint ``x_slave - x_master = 0`` as the slave's row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elements import ElementBlock, build_block
from .errors import MeshError
from .mesh import Mesh

__all__ = [
    "TransportProblem", "BoundaryConditions", "SparseSystem", "RawSystem",
    "element_diffusion_matrix", "element_convection_matrix",
    "element_source_vectors", "assemble_global", "assemble_raw",
    "step_transient", "cv_volumes", "nodal_gradient", "get_geometry",
    "cv_balance_residual",
]


# ---------------------------------------------------------------------------
# Problem description
# ---------------------------------------------------------------------------

@dataclass
class TransportProblem:
    """Nodal coefficient fields of one transport equation.

    Attributes
    ----------
    gamma_d : array or None
        Diffusivity; scalar, per-node ``(N,)`` (isotropic) or full
        ``(N, dim, dim)`` tensor.  ``None`` disables diffusion.
    convection : list of (gamma_c, v)
        Convective streams.  Each stream's flux coefficient is the nodal
        product ``gamma_c * v`` (``gamma_c`` scalar/per-node/tensor,
        ``v`` per-node ``(N, dim)``); streams add.  Empty list disables
        convection.
    rho : array or None
        Nodal capacity density at the new time level (builds ``s1``); used
        only for transient problems.
    rho_prev : array or None
        Same at the previous level (builds ``s2``); defaults to ``rho``.
    prev_mass : array or None
        Nodal ``(rho * phi)`` at the previous level (history right-hand
        side).  Defaults to zero.
    source : array or None
        Nodal volumetric source ``Q``.
    reaction : array or None
        Nodal volumetric sink coefficient ``r >= 0`` adding ``r * phi``
        to the balance.  It joins the diagonal ``s1``, so a linear sink
        is treated implicitly (unconditionally stable) instead of being
        lagged through ``source``.
    monotone_diffusion : bool
        Clip wrong-signed diffusion couplings elementwise onto the
        diagonal (row sums are preserved, so constants stay in the
        kernel).  The consistent coupling loses its sign on elements
        stretched past an aspect ratio of about ``sqrt(2)``, which
        breaks the discrete maximum principle; with sharp localised
        sources the solution then under- and overshoots its boundary
        data.  On near-orthogonal elements the repair reduces to the
        two-point flux stencil, so it costs accuracy only where the
        mesh is genuinely distorted.
    dt : float or None
        Time-step size; ``None`` marks a steady problem (``s1 = s2 = 0``
        and no history term).
    """

    gamma_d: object = None
    convection: list = field(default_factory=list)
    rho: object = None
    rho_prev: object = None
    prev_mass: object = None
    source: object = None
    reaction: object = None
    monotone_diffusion: bool = False
    dt: float | None = None

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive or None, got {self.dt}")


@dataclass
class BoundaryConditions:
    """Dirichlet values plus periodic pairing for one transport solve.

    ``dirichlet`` maps node id -> value.  ``periodic`` is an ``(n, 2)``
    array of (master, slave) node ids; ``None`` means "use the mesh's own
    pairs", an empty array disables pairing.  Unlisted boundaries default
    to the natural (zero-flux) condition of the finite-volume scheme.

    ``flooded`` lists node ids that a cavitating film solve must keep at
    full film fraction (an oil source such as a supply hole) even when
    their prescribed pressure does not exceed the cavitation threshold.
    Pure transport assembly ignores it.
    """

    dirichlet: dict = field(default_factory=dict)
    periodic: object = None
    flooded: tuple = ()

    def resolved_pairs(self, mesh: Mesh) -> np.ndarray:
        if self.periodic is None:
            return mesh.periodic_pairs
        return np.asarray(self.periodic, dtype=np.int64).reshape(-1, 2)

    def normalised(self, mesh: Mesh) -> tuple[dict, np.ndarray]:
        """Dirichlet map with slave entries migrated to their masters.

        A Dirichlet value on a periodic slave is legal only when it can be
        carried by the master node (no master value, or the same value);
        conflicting prescriptions raise :class:`MeshError`.
        """
        pairs = self.resolved_pairs(mesh)
        diri = {int(k): float(v) for k, v in self.dirichlet.items()}
        if len(pairs) == 0:
            return diri, pairs
        master_of = {int(s): int(m) for m, s in pairs}
        for s, m in master_of.items():
            if s not in diri:
                continue
            vs = diri.pop(s)
            if m in diri:
                if abs(diri[m] - vs) > 1e-12 * max(1.0, abs(vs)):
                    raise MeshError(
                        f"Dirichlet value {vs!r} on periodic slave node "
                        f"{s + 1} conflicts with value {diri[m]!r} on its "
                        f"master {m + 1}")
            else:
                diri[m] = vs
        return diri, pairs


@dataclass
class SparseSystem:
    """Assembled linear system ``A x = b`` over all mesh nodes.

    ``dirichlet_nodes``/``dirichlet_values`` and the slave->master
    ``node_map`` record how boundary conditions were imposed, for solvers
    that want to treat constrained rows specially.
    """

    A: sp.csr_matrix
    b: np.ndarray
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray
    node_map: np.ndarray


@dataclass
class RawSystem:
    """Pre-boundary-condition assembly output on the full node space.

    Triplet arrays for the diffusion and convection operators (duplicate
    entries add), plus the nodal source/time vectors.  ``s2`` is stored
    with its defining negative sign.
    """

    n_nodes: int
    d_rows: np.ndarray
    d_cols: np.ndarray
    d_vals: np.ndarray
    c_rows: np.ndarray
    c_cols: np.ndarray
    c_vals: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    history: np.ndarray     # prev_mass / dt * cv_volume, ready for the rhs

    def diffusion_csr(self, node_map=None, n=None) -> sp.csr_matrix:
        rows, cols = self.d_rows, self.d_cols
        if node_map is not None:
            rows, cols = node_map[rows], node_map[cols]
        n = n or self.n_nodes
        return sp.coo_matrix((self.d_vals, (rows, cols)), shape=(n, n)).tocsr()

    def convection_csr(self, node_map=None, n=None) -> sp.csr_matrix:
        rows, cols = self.c_rows, self.c_cols
        if node_map is not None:
            rows, cols = node_map[rows], node_map[cols]
        n = n or self.n_nodes
        return sp.coo_matrix((self.c_vals, (rows, cols)), shape=(n, n)).tocsr()


# ---------------------------------------------------------------------------
# Geometry cache
# ---------------------------------------------------------------------------

def get_geometry(mesh: Mesh) -> dict[str, ElementBlock]:
    """Per-kind precomputed element geometry, cached on the mesh object."""
    cache = getattr(mesh, "_geometry_cache", None)
    if cache is None:
        coords = mesh.coords()
        cache = {kind: build_block(kind, coords, conn)
                 for kind, conn in mesh.element_blocks.items()}
        mesh._geometry_cache = cache
    return cache


def cv_volumes(mesh: Mesh) -> np.ndarray:
    """Control-volume size per node: SCV volumes summed over elements."""
    vol = np.zeros(mesh.n_nodes)
    for block in get_geometry(mesh).values():
        np.add.at(vol, block.conn, block.scv_vol)
    return vol


def nodal_gradient(mesh: Mesh, phi: np.ndarray,
                   periodic: bool = True) -> np.ndarray:
    """Volume-weighted nodal gradient reconstruction.

    Averages the element-interpolated gradient evaluated at each SCV
    centroid, weighted by SCV volume, over every SCV of the node's CV.
    Exact for affine fields.  With ``periodic`` the two halves of a split
    CV on a periodic seam are combined and the master value copied to the
    slave.
    """
    phi = np.asarray(phi, dtype=float)
    num = np.zeros((mesh.n_nodes, mesh.dim))
    den = np.zeros(mesh.n_nodes)
    for block in get_geometry(mesh).values():
        g = np.einsum("eskj,ek->esj", block.scv_grad, phi[block.conn])
        np.add.at(num, block.conn, g * block.scv_vol[..., None])
        np.add.at(den, block.conn, block.scv_vol)
    if periodic and len(mesh.periodic_pairs):
        m, s = mesh.periodic_pairs[:, 0], mesh.periodic_pairs[:, 1]
        np.add.at(num, m, num[s])
        np.add.at(den, m, den[s])
        num[s] = num[m]
        den[s] = den[m]
    return num / den[:, None]


# ---------------------------------------------------------------------------
# Nodal coefficient canonicalisation
# ---------------------------------------------------------------------------

def _nodal_scalar(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must be scalar or shape ({n},), got {arr.shape}")
    return arr


def _nodal_tensor(value, n: int, dim: int, name: str):
    """Return ('iso', (N,)) or ('full', (N, dim, dim))."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return "iso", np.full(n, float(arr))
    if arr.shape == (n,):
        return "iso", arr
    if arr.shape == (n, dim, dim):
        return "full", arr
    raise ValueError(
        f"{name} must be scalar, ({n},) or ({n},{dim},{dim}); got {arr.shape}")


def _flux_coefficient(problem: TransportProblem, n: int, dim: int) -> np.ndarray:
    """Combined nodal convective flux coefficient, shape (N, dim).

    Sum over streams of the *nodal* products ``gamma_c v`` (products are
    formed at nodes first, then interpolated by the assembly kernels).
    """
    c = np.zeros((n, dim))
    for gamma_c, v in problem.convection:
        v = np.asarray(v, dtype=float)
        if v.shape != (n, dim):
            raise ValueError(f"stream velocity must have shape ({n},{dim})")
        kind, g = _nodal_tensor(gamma_c, n, dim, "gamma_c")
        if kind == "iso":
            c += g[:, None] * v
        else:
            c += np.einsum("nij,nj->ni", g, v)
    return c


# ---------------------------------------------------------------------------
# Element kernels (batched over one geometry block)
# ---------------------------------------------------------------------------

def _diffusion_block(block: ElementBlock, gamma) -> np.ndarray:
    """Element diffusion matrices ``(nel, M, M)``; rows are SCV outflows."""
    ref = block.ref
    n_el = block.n_elements
    kind, g = gamma
    ge = np.asarray(g)[block.conn]         # (nel, M) or (nel, M, dim, dim)
    if kind == "iso":
        gip = np.einsum("fm,em->ef", ref.ip_shape, ge)
        t = gip[..., None] * block.face_ds                       # (nel,F,dim)
    else:
        gip = np.einsum("fm,emij->efij", ref.ip_shape, ge)
        t = np.einsum("efi,efij->efj", block.face_ds, gip)
    w = np.einsum("efkj,efj->efk", block.ip_grad, t)             # (nel,F,M)
    D = np.zeros((n_el, ref.n_nodes, ref.n_nodes))
    for f in range(ref.n_faces):
        D[:, ref.donor[f], :] += w[:, f, :]
        D[:, ref.receiver[f], :] -= w[:, f, :]
    return D


def _face_mass_flux(block: ElementBlock, cfield: np.ndarray) -> np.ndarray:
    """Per-face convective mass flux ``q`` (nel, F), positive donor->receiver."""
    ce = cfield[block.conn]                                      # (nel, M, dim)
    cip = np.einsum("fm,emi->efi", block.ref.ip_shape, ce)       # (nel, F, dim)
    return np.einsum("efi,efi->ef", block.face_ds, cip)


def _convection_block(block: ElementBlock, cfield: np.ndarray) -> np.ndarray:
    """Element convection matrices ``(nel, M, M)``; rows are SCV outflows."""
    ref = block.ref
    q = _face_mass_flux(block, cfield)
    up = np.where(q >= 0, ref.donor[None, :], ref.receiver[None, :])   # (nel,F)
    C = np.zeros((block.n_elements, ref.n_nodes, ref.n_nodes))
    el = np.arange(block.n_elements)
    for f in range(ref.n_faces):
        np.add.at(C, (el, np.full_like(el, ref.donor[f]), up[:, f]), q[:, f])
        np.subtract.at(C, (el, np.full_like(el, ref.receiver[f]), up[:, f]), q[:, f])
    return C


# ---------------------------------------------------------------------------
# Public single-element operations
# ---------------------------------------------------------------------------

def _single_block(kind: str, coords) -> ElementBlock:
    coords = np.asarray(coords, dtype=float)
    return build_block(kind, coords, np.arange(len(coords))[None, :])


def element_diffusion_matrix(kind: str, coords, gamma_nodal) -> np.ndarray:
    """Diffusion matrix of one element; row s = net outflow of SCV s.

    ``gamma_nodal`` may be a scalar, per-node values ``(M,)`` or per-node
    tensors ``(M, dim, dim)``.  Row sums vanish (constant fields produce
    no flux) and column sums vanish (internal fluxes cancel pairwise).
    """
    block = _single_block(kind, coords)
    gamma = _nodal_tensor(gamma_nodal, block.ref.n_nodes, block.ref.dim, "gamma")
    return _diffusion_block(block, gamma)[0]


def element_convection_matrix(kind: str, coords, gamma_c_nodal, v_nodal) -> np.ndarray:
    """Upwind convection matrix of one element; row s = net outflow of SCV s.

    The face flux is drawn from the upstream node of the face's
    donor/receiver pair, so each column belongs to an upwind node.
    Column sums vanish within the element.
    """
    block = _single_block(kind, coords)
    ref = block.ref
    prob = TransportProblem(convection=[(gamma_c_nodal, v_nodal)])
    cfield = _flux_coefficient(prob, ref.n_nodes, ref.dim)
    return _convection_block(block, cfield)[0]


def element_source_vectors(kind: str, coords, rho_n, rho_prev, dt,
                           q_n) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Node-local source/time vectors (s1, s2, s3) of one element.

    ``s1 = rho_n/dt * vol_s``, ``s2 = -rho_prev/dt * vol_s`` and
    ``s3 = q_n * vol_s``, each using the owning node's value (no
    interpolation) times its SCV volume.  ``dt = None`` zeroes s1 and s2.
    """
    block = _single_block(kind, coords)
    M = block.ref.n_nodes
    vol = block.scv_vol[0]
    q = _nodal_scalar(q_n if q_n is not None else 0.0, M, "q_n")
    s3 = q * vol
    if dt is None:
        return np.zeros(M), np.zeros(M), s3
    r1 = _nodal_scalar(rho_n if rho_n is not None else 0.0, M, "rho_n")
    r0 = _nodal_scalar(rho_prev if rho_prev is not None else rho_n, M, "rho_prev")
    return r1 / dt * vol, -r0 / dt * vol, s3


# ---------------------------------------------------------------------------
# Global assembly
# ---------------------------------------------------------------------------

def assemble_raw(mesh: Mesh, problem: TransportProblem) -> RawSystem:
    """Accumulate all element contributions on the full node space.

    No boundary conditions are applied here; the triplets keep one entry
    per element contribution in a fixed element order, so downstream
    folding and summation are bitwise deterministic.
    """
    n, dim = mesh.n_nodes, mesh.dim
    blocks = get_geometry(mesh)
    if not blocks:
        raise MeshError("mesh has no elements to assemble")

    gamma = None
    if problem.gamma_d is not None:
        gamma = _nodal_tensor(problem.gamma_d, n, dim, "gamma_d")
    cfield = None
    if problem.convection:
        cfield = _flux_coefficient(problem, n, dim)

    d_rows, d_cols, d_vals = [], [], []
    c_rows, c_cols, c_vals = [], [], []
    s1 = np.zeros(n)
    s2 = np.zeros(n)
    s3 = np.zeros(n)
    history = np.zeros(n)

    src = None if problem.source is None else _nodal_scalar(problem.source, n, "source")
    react = None
    if problem.reaction is not None:
        react = _nodal_scalar(problem.reaction, n, "reaction")
        if np.any(react < 0):
            raise ValueError(
                f"reaction coefficients must be non-negative (a negative "
                f"entry is a growth term and would destabilise the "
                f"diagonal); min = {react.min():.4e}")
    if problem.dt is not None:
        rho1 = _nodal_scalar(
            problem.rho if problem.rho is not None else 0.0, n, "rho")
        rho0 = _nodal_scalar(
            problem.rho_prev if problem.rho_prev is not None else rho1,
            n, "rho_prev")
        pmass = _nodal_scalar(
            problem.prev_mass if problem.prev_mass is not None else 0.0,
            n, "prev_mass")

    for kind, block in blocks.items():
        conn = block.conn
        M = block.ref.n_nodes
        if gamma is not None:
            De = _diffusion_block(block, gamma)
            d_rows.append(np.broadcast_to(conn[:, :, None], De.shape).ravel())
            d_cols.append(np.broadcast_to(conn[:, None, :], De.shape).ravel())
            d_vals.append(De.ravel())
        if cfield is not None:
            ref = block.ref
            q = _face_mass_flux(block, cfield)                   # (nel, F)
            up_local = np.where(q >= 0, ref.donor[None, :], ref.receiver[None, :])
            up = np.take_along_axis(conn, up_local, axis=1)      # (nel, F)
            dn = conn[:, ref.donor]
            rc = conn[:, ref.receiver]
            c_rows.append(np.concatenate([dn.ravel(), rc.ravel()]))
            c_cols.append(np.concatenate([up.ravel(), up.ravel()]))
            c_vals.append(np.concatenate([q.ravel(), -q.ravel()]))
        if src is not None:
            np.add.at(s3, conn, src[conn] * block.scv_vol)
        if react is not None:
            np.add.at(s1, conn, react[conn] * block.scv_vol)
        if problem.dt is not None:
            np.add.at(s1, conn, rho1[conn] / problem.dt * block.scv_vol)
            np.add.at(s2, conn, -rho0[conn] / problem.dt * block.scv_vol)
            np.add.at(history, conn, pmass[conn] / problem.dt * block.scv_vol)

    def cat(parts, dtype=float):
        if not parts:
            return np.empty(0, dtype=dtype)
        return np.concatenate(parts)

    return RawSystem(
        n_nodes=n,
        d_rows=cat(d_rows, np.int64), d_cols=cat(d_cols, np.int64),
        d_vals=cat(d_vals),
        c_rows=cat(c_rows, np.int64), c_cols=cat(c_cols, np.int64),
        c_vals=cat(c_vals),
        s1=s1, s2=s2, s3=s3, history=history)


def fold_map(n: int, pairs: np.ndarray) -> np.ndarray:
    """Identity map with each slave redirected to its master."""
    node_map = np.arange(n, dtype=np.int64)
    if len(pairs):
        node_map[pairs[:, 1]] = pairs[:, 0]
    return node_map


def assemble_global(mesh: Mesh, problem: TransportProblem,
                    bcs: BoundaryConditions | None = None) -> SparseSystem:
    """Full sparse system ``A x = b`` with boundary conditions imposed.

    ``A = diag(s1) + C - D`` on interior rows; Dirichlet rows become
    ``x = value``; periodic slaves fold their row/column contributions
    into the master and keep ``x_slave - x_master = 0``.
    """
    bcs = bcs or BoundaryConditions()
    diri, pairs = bcs.normalised(mesh)
    raw = assemble_raw(mesh, problem)
    n = raw.n_nodes
    node_map = fold_map(n, pairs)

    rows = node_map[np.concatenate([raw.c_rows, raw.d_rows])]
    cols = node_map[np.concatenate([raw.c_cols, raw.d_cols])]
    vals = np.concatenate([raw.c_vals, -raw.d_vals])

    s1 = np.zeros(n)
    np.add.at(s1, node_map, raw.s1)
    b = np.zeros(n)
    np.add.at(b, node_map, raw.s3 + raw.history)

    diag_rows = np.flatnonzero(s1)
    rows = np.concatenate([rows, diag_rows])
    cols = np.concatenate([cols, diag_rows])
    vals = np.concatenate([vals, s1[diag_rows]])

    d_nodes = np.array(sorted(diri), dtype=np.int64)
    d_vals_arr = np.array([diri[i] for i in d_nodes], dtype=float)
    replaced = np.zeros(n, dtype=bool)
    replaced[d_nodes] = True
    slaves = pairs[:, 1] if len(pairs) else np.empty(0, dtype=np.int64)
    replaced[slaves] = True

    keep = ~replaced[rows]
    rows, cols, vals = rows[keep], cols[keep], vals[keep]

    # Dirichlet rows: x = value.
    rows = np.concatenate([rows, d_nodes])
    cols = np.concatenate([cols, d_nodes])
    vals = np.concatenate([vals, np.ones(len(d_nodes))])
    b[d_nodes] = d_vals_arr
    # Slave rows: x_slave - x_master = 0.
    if len(slaves):
        masters = pairs[:, 0]
        rows = np.concatenate([rows, slaves, slaves])
        cols = np.concatenate([cols, slaves, masters])
        vals = np.concatenate([vals, np.ones(len(slaves)), -np.ones(len(slaves))])
        b[slaves] = 0.0

    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return SparseSystem(A=A, b=b, dirichlet_nodes=d_nodes,
                        dirichlet_values=d_vals_arr, node_map=node_map)


def step_transient(mesh: Mesh, problem: TransportProblem,
                   bcs: BoundaryConditions | None, phi_prev: np.ndarray,
                   dt: float) -> np.ndarray:
    """One backward-Euler step: assemble at the new level and solve.

    The history term uses ``rho_prev * phi_prev`` (or ``rho * phi_prev``
    when no separate old density is given).  Unconditionally stable: for
    pure decay the solution norm cannot grow for any ``dt > 0``.
    """
    phi_prev = np.asarray(phi_prev, dtype=float)
    n = mesh.n_nodes
    rho1 = problem.rho if problem.rho is not None else 1.0
    rho0 = problem.rho_prev if problem.rho_prev is not None else rho1
    stepped = TransportProblem(
        gamma_d=problem.gamma_d, convection=problem.convection,
        rho=rho1, rho_prev=rho0,
        prev_mass=_nodal_scalar(rho0, n, "rho_prev") * phi_prev,
        source=problem.source, dt=dt)
    system = assemble_global(mesh, stepped, bcs)
    from .solvers import linear_solve
    return linear_solve(system)


def cv_balance_residual(mesh: Mesh, problem: TransportProblem,
                        phi: np.ndarray,
                        bcs: BoundaryConditions | None = None,
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Re-evaluate the discrete balance of every (folded) control volume.

    Returns ``(residual, scale, free_mask)``: the per-CV imbalance
    ``s1*phi + [C phi] - [D phi] - s3 - history`` after periodic folding,
    a local flux magnitude scale (sum of absolute face fluxes and
    sources), and a mask of CVs whose value was *not* prescribed
    (Dirichlet CVs absorb boundary flux, so only free CVs must balance).
    """
    bcs = bcs or BoundaryConditions()
    diri, pairs = bcs.normalised(mesh)
    raw = assemble_raw(mesh, problem)
    n = raw.n_nodes
    node_map = fold_map(n, pairs)
    phi = np.asarray(phi, dtype=float)

    res = np.zeros(n)
    scale = np.zeros(n)
    flux_d = raw.d_vals * phi[raw.d_cols]
    np.subtract.at(res, node_map[raw.d_rows], flux_d)
    np.add.at(scale, node_map[raw.d_rows], np.abs(flux_d))
    flux_c = raw.c_vals * phi[raw.c_cols]
    np.add.at(res, node_map[raw.c_rows], flux_c)
    np.add.at(scale, node_map[raw.c_rows], np.abs(flux_c))

    s1 = np.zeros(n)
    np.add.at(s1, node_map, raw.s1)
    rhs = np.zeros(n)
    np.add.at(rhs, node_map, raw.s3 + raw.history)
    res += s1 * phi - rhs
    scale += np.abs(s1 * phi) + np.abs(rhs)

    free = np.ones(n, dtype=bool)
    free[list(diri)] = False
    if len(pairs):
        free[pairs[:, 1]] = False
    return res, scale, free
