"""Solvers: cavitation Gauss--Seidel, direct linear solve, film loads,
and the rigid-journal force-balance Newton iteration.

The pressure/film-fraction pair is relaxed node-by-node with a
successive-over-relaxation sweep that switches each node between the
pressurised state (full film, ``theta = 1``, pressure unknown) and the
cavitated state (``p = p_cav``, film fraction unknown) based on the local
solution, keeping the complementarity ``(p - p_cav) * (1 - theta) = 0``
exact at every visited node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from numba import njit

from .errors import ContactError, NonConvergedError, SolverError
from .lubrication import GreSystem
from .mesh import Mesh

__all__ = [
    "SorConfig", "SorResult", "sor_p_theta", "flooded_direct_solve",
    "linear_solve", "hydrodynamic_loads", "DynamicsProblem", "NewtonResult",
    "newton_equilibrium",
]


# ---------------------------------------------------------------------------
# cavitation SOR
# ---------------------------------------------------------------------------

@dataclass
class SorConfig:
    """Relaxation factors and stopping control for the p--theta sweep."""

    omega_p: float = 1.5
    omega_theta: float = 0.8
    tol: float = 1e-6
    max_iter: int = 100_000
    p_scale: float = 1e5

    def __post_init__(self) -> None:
        if not 0.0 < self.omega_p < 2.0:
            raise ValueError(f"omega_p must lie in (0, 2), got {self.omega_p}")
        if not 0.0 < self.omega_theta < 2.0:
            raise ValueError(
                f"omega_theta must lie in (0, 2), got {self.omega_theta}")
        if self.p_scale <= 0.0:
            raise ValueError("p_scale must be positive")


@dataclass
class SorResult:
    """Solution state and per-sweep convergence history."""

    p: np.ndarray
    theta: np.ndarray
    converged: bool
    n_sweeps: int
    error_history: np.ndarray       # max nodal change per sweep
    cavitated_history: np.ndarray   # nodes with theta < 1 per sweep


@njit(cache=True)
def _sor_sweeps(d_indptr, d_indices, d_data, c_indptr, c_indices, c_data,
                s1, rhs, p, theta, p_fixed, theta_fixed, sweep,
                p_cav, omega_p, omega_theta, tol, max_iter, p_scale,
                err_hist, cav_hist):
    n_sweeps = 0
    for it in range(max_iter):
        emax = 0.0
        for idx in range(sweep.shape[0]):
            P = sweep[idx]
            p_old = p[P]
            t_old = theta[P]

            dpp = 0.0
            d_off = 0.0
            for j in range(d_indptr[P], d_indptr[P + 1]):
                col = d_indices[j]
                if col == P:
                    dpp += d_data[j]
                else:
                    d_off += d_data[j] * p[col]
            cpp = 0.0
            c_off = 0.0
            for j in range(c_indptr[P], c_indptr[P + 1]):
                col = c_indices[j]
                if col == P:
                    cpp += c_data[j]
                else:
                    c_off += c_data[j] * theta[col]

            if p_fixed[P] == 0 and (p[P] > p_cav or theta[P] >= 1.0):
                if dpp != 0.0:
                    conv = c_off + cpp * theta[P]
                    p_gs = (s1[P] * theta[P] + conv - d_off - rhs[P]) / dpp
                    p_new = omega_p * p_gs + (1.0 - omega_p) * p[P]
                    if p_new >= p_cav:
                        p[P] = p_new
                        theta[P] = 1.0
                    else:
                        p[P] = p_cav
            if theta_fixed[P] == 0 and (p[P] <= p_cav or theta[P] < 1.0):
                denom = cpp + s1[P]
                if denom > 0.0:
                    dp_full = d_off + dpp * p[P]
                    t_gs = (rhs[P] + dp_full - c_off) / denom
                    t_new = omega_theta * t_gs + (1.0 - omega_theta) * theta[P]
                    if t_new < 0.0:
                        t_new = 0.0
                    if t_new < 1.0:
                        theta[P] = t_new
                        p[P] = p_cav
                    else:
                        theta[P] = 1.0

            e_p = abs(p[P] - p_old) / max(abs(p[P]), p_scale)
            e_t = abs(theta[P] - t_old)
            e = e_p if e_p > e_t else e_t
            if e > emax:
                emax = e

        ncav = 0
        for idx in range(sweep.shape[0]):
            if theta[sweep[idx]] < 1.0:
                ncav += 1
        err_hist[it] = emax
        cav_hist[it] = ncav
        n_sweeps = it + 1
        if emax <= tol:
            return n_sweeps, True
    return n_sweeps, False


def sor_p_theta(system: GreSystem, p0: np.ndarray | None = None,
                theta0: np.ndarray | None = None,
                config: SorConfig | None = None) -> SorResult:
    """Relax the cavitating pressure equation to the complementary state.

    Starts from ``p0``/``theta0`` (ambient-zero pressure and full film by
    default), runs Gauss--Seidel sweeps until the largest nodal change --
    relative for pressure, absolute for film fraction -- drops below the
    tolerance, and mirrors the periodic master values onto slave nodes.
    On hitting the sweep cap the result is returned with
    ``converged=False`` so callers can inspect the history.
    """
    cfg = config or SorConfig()
    n = system.n_nodes
    p = np.zeros(n) if p0 is None else np.array(p0, dtype=float)
    theta = np.ones(n) if theta0 is None else np.array(theta0, dtype=float)
    system.impose(p, theta)

    D = system.D.tocsr()
    C = system.C.tocsr()
    err_hist = np.empty(cfg.max_iter)
    cav_hist = np.empty(cfg.max_iter, dtype=np.int64)
    n_sweeps, converged = _sor_sweeps(
        D.indptr, D.indices, D.data, C.indptr, C.indices, C.data,
        system.s1, system.rhs, p, theta,
        system.p_fixed.astype(np.uint8), system.theta_fixed.astype(np.uint8),
        system.sweep_nodes.astype(np.int64),
        float(system.p_cav), cfg.omega_p, cfg.omega_theta,
        cfg.tol, cfg.max_iter, cfg.p_scale, err_hist, cav_hist)

    p = p[system.node_map]
    theta = theta[system.node_map]
    return SorResult(p=p, theta=theta, converged=bool(converged),
                     n_sweeps=int(n_sweeps),
                     error_history=err_hist[:n_sweeps].copy(),
                     cavitated_history=cav_hist[:n_sweeps].copy())


def flooded_direct_solve(system: GreSystem) -> np.ndarray:
    """Full-film pressure by one direct solve with the film fraction at one.

    Useful as a reference for uncavitated cases: pins ``theta = 1``
    everywhere, keeps the pressure constraints and periodic ties, and
    factorises the resulting linear system once.
    """
    import scipy.sparse as sp

    n = system.n_nodes
    idx = np.arange(n)
    slave = system.node_map != idx
    constrained = system.p_fixed | slave

    b = system.s1 + system.C @ np.ones(n) - system.rhs
    D = system.D.tocoo()
    keep = ~constrained[D.row]
    rows = [D.row[keep]]
    cols = [D.col[keep]]
    vals = [D.data[keep]]

    fixed = np.flatnonzero(system.p_fixed & ~slave)
    rows.append(fixed)
    cols.append(fixed)
    vals.append(np.ones(fixed.size))
    b[fixed] = system.p_values[fixed]

    slaves = np.flatnonzero(slave)
    rows.append(np.concatenate([slaves, slaves]))
    cols.append(np.concatenate([slaves, system.node_map[slaves]]))
    vals.append(np.concatenate([np.ones(slaves.size), -np.ones(slaves.size)]))
    b[slaves] = 0.0

    A = sp.coo_matrix(
        (np.concatenate(vals),
         (np.concatenate(rows).astype(np.int64),
          np.concatenate(cols).astype(np.int64))),
        shape=(n, n)).tocsc()
    p = spla.spsolve(A, b)
    if not np.all(np.isfinite(p)):
        raise SolverError("flooded pressure solve produced non-finite values")
    return p


# ---------------------------------------------------------------------------
# direct linear solve
# ---------------------------------------------------------------------------

def linear_solve(system, tol: float = 1e-10, max_refine: int = 3) -> np.ndarray:
    """Direct sparse solve with iterative refinement.

    Accepts the assembled global system, factorises once, refines the
    solution until the residual is small relative to the data, and raises
    ``SolverError`` if the factorisation breaks down or refinement stalls
    on a large residual.
    """
    A = system.A.tocsc()
    b = system.b
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorisation failed: {exc}") from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solve produced non-finite values "
                          "(singular or badly scaled matrix)")
    scale = np.linalg.norm(b) + spla.norm(A) * np.linalg.norm(x)
    if scale == 0.0:
        return x
    for _ in range(max_refine):
        r = b - A @ x
        if np.linalg.norm(r) <= tol * scale:
            return x
        dx = lu.solve(r)
        if not np.all(np.isfinite(dx)):
            break
        x = x + dx
    r = b - A @ x
    if np.linalg.norm(r) > 1e3 * tol * scale:
        raise SolverError(
            f"iterative refinement stalled: |r| = {np.linalg.norm(r):.3e} "
            f"vs scale {scale:.3e}")
    return x


# ---------------------------------------------------------------------------
# film forces and moments on the journal
# ---------------------------------------------------------------------------

def hydrodynamic_loads(mesh: Mesh, p: np.ndarray,
                       radius: float | None = None,
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Integrate nodal pressure into journal forces and tilt moments.

    Returns ``(W, M)`` with ``W = [W_X, W_Y]`` the film force resultant
    and ``M = [M_X, M_Y]`` the moment about the mid-plane ``y = 0``.  The
    unwrapped coordinate ``x`` maps to the attitude angle ``x / radius``
    (or is the angle itself when no radius is given); each node
    contributes with its control-volume area.
    """
    from .assembly import cv_volumes

    area = cv_volumes(mesh)
    x = mesh.nodes[:, 0]
    y = mesh.nodes[:, 1]
    ang = x / radius if radius is not None else x
    p = np.asarray(p, dtype=float)
    w_x = -np.sum(p * area * np.sin(ang))
    w_y = -np.sum(p * area * np.cos(ang))
    m_x = np.sum(y * p * area * np.cos(ang))
    m_y = np.sum(y * p * area * np.sin(ang))
    return np.array([w_x, w_y]), np.array([m_x, m_y])


# ---------------------------------------------------------------------------
# rigid-journal equilibrium
# ---------------------------------------------------------------------------

@dataclass
class DynamicsProblem:
    """Controls for the quasi-static journal position solve.

    ``scales`` sets both the finite-difference floor and the relative
    step size per component of the position vector
    ``q = (X_r, Y_r, A_r, B_r)``.
    """

    f_ext_norm: float
    scales: np.ndarray
    tol: float = 1e-6
    fd_rel: float = 1e-7
    armijo_c: float = 1e-4
    lambda_min: float = 2.0 ** -20
    max_iter: int = 50

    def __post_init__(self) -> None:
        self.scales = np.asarray(self.scales, dtype=float)
        if np.any(self.scales <= 0.0):
            raise ValueError("all position scales must be positive")
        if self.f_ext_norm < 0.0:
            raise ValueError("f_ext_norm must be non-negative")


@dataclass
class NewtonResult:
    """Converged position, final imbalance, and line-search history."""

    q: np.ndarray
    residual: np.ndarray
    converged: bool
    n_iter: int
    history: list[tuple[int, float, float]] = field(default_factory=list)
    contact_rejections: int = 0


def _fd_jacobian(residual, q, r0, problem):
    """Forward-difference Jacobian, stepping backward past contact."""
    n = q.size
    jac = np.empty((n, r0.size))
    for i in range(n):
        delta = problem.fd_rel * max(abs(q[i]), problem.scales[i])
        qp = q.copy()
        qp[i] += delta
        try:
            r_step = residual(qp)
            jac[i] = (np.asarray(r_step, float) - r0) / delta
        except ContactError:
            qp[i] = q[i] - delta
            r_step = residual(qp)
            jac[i] = (r0 - np.asarray(r_step, float)) / delta
    return jac.T


def newton_equilibrium(residual, q0: np.ndarray,
                       problem: DynamicsProblem) -> NewtonResult:
    """Drive the force/moment imbalance to zero over journal position.

    Newton steps use a forward finite-difference Jacobian with
    per-component steps scaled to the position magnitudes; each step is
    accepted through a backtracking line search that halves the step on
    insufficient residual decrease or on film contact, down to the
    minimum step fraction.  Convergence is declared when the imbalance
    norm falls below ``tol`` times the external load norm.
    """
    q = np.array(q0, dtype=float)
    r = np.asarray(residual(q), dtype=float)
    rnorm = np.linalg.norm(r)
    ref = problem.f_ext_norm if problem.f_ext_norm > 0.0 else 1.0
    history: list[tuple[int, float, float]] = [(0, rnorm, 1.0)]
    contact_rejections = 0

    if rnorm <= problem.tol * ref:
        return NewtonResult(q=q, residual=r, converged=True, n_iter=0,
                            history=history)

    for it in range(1, problem.max_iter + 1):
        jac = _fd_jacobian(residual, q, r, problem)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise SolverError(
                f"singular equilibrium Jacobian at iteration {it}") from exc

        lam = 1.0
        while True:
            try:
                r_try = np.asarray(residual(q + lam * step), dtype=float)
            except ContactError:
                contact_rejections += 1
                lam *= 0.5
                if lam < problem.lambda_min:
                    raise NonConvergedError(
                        "line search hit the minimum step while avoiding "
                        "film contact",
                        diagnostics={"history": history, "q": q.copy()})
                continue
            if np.linalg.norm(r_try) <= (1.0 - problem.armijo_c * lam) * rnorm:
                break
            lam *= 0.5
            if lam < problem.lambda_min:
                raise NonConvergedError(
                    f"line search failed to reduce the imbalance at "
                    f"iteration {it} (|r| = {rnorm:.3e})",
                    diagnostics={"history": history, "q": q.copy()})

        q = q + lam * step
        r = r_try
        rnorm = np.linalg.norm(r)
        history.append((it, rnorm, lam))
        if rnorm <= problem.tol * ref:
            return NewtonResult(q=q, residual=r, converged=True, n_iter=it,
                                history=history,
                                contact_rejections=contact_rejections)

    raise NonConvergedError(
        f"equilibrium iteration cap reached (|r| = {rnorm:.3e}, "
        f"target {problem.tol * ref:.3e})",
        diagnostics={"history": history, "q": q.copy()})
