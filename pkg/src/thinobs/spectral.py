"""Dirichlet eigenpairs of the spherical Laplacian on the slit wedge.

The fundamental domain is ``0 < theta < pi/m`` in the upper hemisphere.  The
azimuth is rescaled to ``x = m theta`` in ``[0, pi]`` and the latitude ``phi``
runs over ``[0, pi/2]``.  Boundary conditions:

* Dirichlet on the meridians ``x = 0`` and ``x = pi`` and at the pole,
* Dirichlet on the slit ``{phi = 0, x <= sigma pi}``,
* Neumann (even reflection) on the rest of the equator.

The stiffness matrix comes from the edge form of

    (1/m) * integral (m^2/cos(phi)) u_x w_x + cos(phi) u_phi w_phi  dx dphi

so it is symmetric and annihilates constants before boundary rows are removed.
The mass matrix is the lumped area element ``cos(phi) dx dphi / m``.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, NegativeCurvatureError

log = logging.getLogger(__name__)

MIN_NODES = 16
MAX_K = 12
SHIFT_FRACTION = 0.75
LOCK_FACTOR = 1e-2
STALL_WINDOW = 20


class Role(enum.IntEnum):
    INTERIOR = 0
    DIRICHLET_SIDE = 1
    DIRICHLET_SLIT = 2
    NEUMANN_EQUATOR = 3
    DIRICHLET_POLE = 4


class ClusterWarning(UserWarning):
    """Two consecutive computed eigenvalues are closer than the cluster tolerance."""


@dataclass(frozen=True, eq=False)
class WedgeGrid:
    m: int
    sigma: float
    sigma_requested: float
    Nx: int
    Nphi: int
    x_nodes: np.ndarray
    phi_nodes: np.ndarray
    slit_end_index: int
    node_roles: np.ndarray  # (Nphi, Nx) array of Role values

    @property
    def dx(self) -> float:
        return self.x_nodes[1] - self.x_nodes[0]

    @property
    def dphi(self) -> float:
        return self.phi_nodes[1] - self.phi_nodes[0]

    @property
    def theta_nodes(self) -> np.ndarray:
        return self.x_nodes / self.m

    @property
    def active(self) -> np.ndarray:
        return (self.node_roles == Role.INTERIOR) | (self.node_roles == Role.NEUMANN_EQUATOR)

    @property
    def shape(self):
        return (self.Nphi, self.Nx)


def snap_index(sigma: float, Nx: int) -> int:
    return int(round(sigma * (Nx - 1)))


def build_grid(m: int, sigma: float, Nx: int, Nphi: int) -> WedgeGrid:
    """Tensor grid on ``[0, pi] x [0, pi/2]`` with the slit endpoint snapped to a node."""
    if not (0.0 <= sigma <= 1.0) or not np.isfinite(sigma):
        raise ValueError(f"sigma must lie in [0, 1], got {sigma!r}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m!r}")
    if Nx < MIN_NODES or Nphi < MIN_NODES:
        raise ValueError(f"Nx and Nphi must be >= {MIN_NODES}")

    x = np.linspace(0.0, np.pi, Nx)
    phi = np.linspace(0.0, np.pi / 2, Nphi)
    i_slit = snap_index(sigma, Nx)

    roles = np.full((Nphi, Nx), Role.INTERIOR, dtype=np.int8)
    roles[:, 0] = Role.DIRICHLET_SIDE
    roles[:, -1] = Role.DIRICHLET_SIDE
    roles[0, :] = Role.NEUMANN_EQUATOR
    roles[0, : i_slit + 1] = Role.DIRICHLET_SLIT
    if i_slit < Nx - 1:
        # the far corner sits on the Dirichlet meridian
        roles[0, -1] = Role.DIRICHLET_SIDE
    roles[-1, :] = Role.DIRICHLET_POLE

    return WedgeGrid(
        m=int(m), sigma=i_slit / (Nx - 1), sigma_requested=float(sigma), Nx=int(Nx), Nphi=int(Nphi),
        x_nodes=x, phi_nodes=phi, slit_end_index=i_slit, node_roles=roles,
    )


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Stiffness ``A`` and lumped mass ``B`` restricted to the active nodes."""

    A: sp.csr_matrix
    mass_diag: np.ndarray
    full_A: sp.csr_matrix
    full_mass: np.ndarray
    active_index: np.ndarray  # flat grid indices of the active nodes
    grid: WedgeGrid

    @property
    def dimension(self) -> int:
        return self.A.shape[0]

    @property
    def B(self) -> sp.dia_matrix:
        return sp.diags(self.mass_diag)

    def to_grid(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.Nphi * self.grid.Nx)
        out[self.active_index] = values
        return out.reshape(self.grid.shape)

    def from_grid(self, field: np.ndarray) -> np.ndarray:
        return np.asarray(field).ravel()[self.active_index]


def _cell_widths(nodes: np.ndarray) -> np.ndarray:
    h = nodes[1] - nodes[0]
    w = np.full(nodes.size, h)
    w[0] = w[-1] = h / 2
    return w


def assemble(grid: WedgeGrid) -> SparseOperator:
    m = grid.m
    x, phi = grid.x_nodes, grid.phi_nodes
    dx, dphi = grid.dx, grid.dphi
    Nx, Nphi = grid.Nx, grid.Nphi
    wx = _cell_widths(x)
    wphi = _cell_widths(phi)
    idx = np.arange(Nx * Nphi).reshape(Nphi, Nx)

    # x-edges; the pole row is skipped because cos(pi/2) = 0 and it is Dirichlet
    rows = idx[:-1, :-1].ravel()
    cols = idx[:-1, 1:].ravel()
    wedge_x = (m / np.cos(phi[:-1]) * wphi[:-1] / dx)[:, None] * np.ones((1, Nx - 1))
    # phi-edges, weighted by cos at the edge midpoint
    cos_half = np.cos(0.5 * (phi[:-1] + phi[1:]))
    rows_p = idx[:-1, :].ravel()
    cols_p = idx[1:, :].ravel()
    wedge_p = (cos_half[:, None] * wx[None, :] / (dphi * m))

    a = np.concatenate([rows, rows_p])
    b = np.concatenate([cols, cols_p])
    w = np.concatenate([wedge_x.ravel(), wedge_p.ravel()])
    n = Nx * Nphi
    off = sp.coo_matrix((-w, (a, b)), shape=(n, n))
    off = off + off.T
    diag = -np.asarray(off.sum(axis=1)).ravel()
    full_A = (off + sp.diags(diag)).tocsr()
    full_mass = (np.cos(phi)[:, None] * wphi[:, None] * wx[None, :] / m).ravel()
    full_mass[idx[-1, :]] = 0.0  # cos(pi/2) rounds to 6e-17

    act = np.flatnonzero(grid.active.ravel())
    A = full_A[act][:, act].tocsr()
    A.sort_indices()
    return SparseOperator(A=A, mass_diag=full_mass[act], full_A=full_A, full_mass=full_mass,
                          active_index=act, grid=grid)


def mu_from_lambda(lam: float) -> float:
    """Positive root of ``mu (mu + 1) = lam``."""
    if not np.isfinite(lam) or lam < 0:
        raise ValueError(f"lambda must be finite and non-negative, got {lam!r}")
    # 2 lam / (1 + sqrt(1 + 4 lam)) avoids the cancellation in (-1 + sqrt(1 + 4 lam)) / 2
    return 2.0 * lam / (1.0 + math.sqrt(1.0 + 4.0 * lam))


def pcg(A, b, diag=None, x0=None, rtol=1e-10, maxiter=None):
    """Jacobi-preconditioned conjugate gradients for symmetric positive definite ``A``.

    Returns ``(x, iterations)``.  Raises ``NegativeCurvatureError`` when the
    matrix turns out not to be positive definite along a search direction and
    ``ConvergenceError`` when ``maxiter`` is exhausted.
    """
    n = b.shape[0]
    if diag is None:
        diag = A.diagonal()
    inv_d = 1.0 / diag
    maxiter = maxiter or 10 * n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0
    target = rtol * bnorm
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        if np.linalg.norm(r) <= target:
            return x, it - 1
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0.0:
            raise NegativeCurvatureError("non-positive curvature in CG", iterations=it)
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(r) / bnorm
    if res <= rtol:
        return x, maxiter
    raise ConvergenceError(f"CG did not converge in {maxiter} iterations", residual=res,
                           iterations=maxiter)


@dataclass(frozen=True, eq=False)
class EigenPair:
    k: int
    lam: float
    mu: float
    v: np.ndarray  # full grid values, shape (Nphi, Nx), zero on Dirichlet nodes
    residual: float
    iterations: int

    def active_values(self, op: SparseOperator) -> np.ndarray:
        return op.from_grid(self.v)


class _ShiftedSolver:
    """Solves ``(A - s B) y = r`` by sparse LU or by Jacobi-preconditioned CG."""

    def __init__(self, op: SparseOperator, shift: float, inner: str, inner_rtol: float):
        self.M = (op.A - shift * sp.diags(op.mass_diag)).tocsc()
        self.inner = inner
        self.rtol = inner_rtol
        self.cg_iterations = 0
        if inner == "direct":
            self._lu = spla.splu(self.M)
        elif inner == "cg":
            self.M = self.M.tocsr()
            self._diag = self.M.diagonal()
        else:
            raise ValueError(f"unknown inner solver {inner!r}")

    def __call__(self, rhs, guess=None):
        if self.inner == "direct":
            return self._lu.solve(rhs)
        y, its = pcg(self.M, rhs, self._diag, x0=guess, rtol=self.rtol)
        self.cg_iterations += its
        return y


def _b_orthogonalize(y, basis, mass):
    for q in basis:
        y = y - (q @ (mass * y)) * q
    return y


def _orient(v_grid: np.ndarray, grid: WedgeGrid) -> np.ndarray:
    band = grid.phi_nodes <= 1.0 / grid.m
    s = v_grid[band].sum()
    if s == 0.0:
        s = v_grid.sum()
    if s < 0:
        v_grid = -v_grid
    return v_grid / np.max(v_grid)


def _inverse_iteration(op, solver, shift, locked, tol, max_iter):
    mass = op.mass_diag
    A = op.A
    x = np.ones(op.dimension)
    x = _b_orthogonalize(x, locked, mass)
    x /= math.sqrt(x @ (mass * x))
    lam = x @ (A @ x)
    res = np.inf
    history = []
    for it in range(1, max_iter + 1):
        guess = x / (lam - shift) if lam > shift else None
        y = solver(mass * x, guess)
        y = _b_orthogonalize(y, locked, mass)
        y = _b_orthogonalize(y, locked, mass)
        x = y / math.sqrt(y @ (mass * y))
        Ax = A @ x
        lam = x @ Ax
        res = np.linalg.norm(Ax - lam * mass * x) / np.linalg.norm(mass * x)
        history.append(res)
        # aim below tol so later pairs are not polluted by inexact locked vectors;
        # settle for tol once the residual has hit its round-off floor
        if res <= LOCK_FACTOR * tol:
            return x, lam, res, it
        if res <= tol and len(history) > STALL_WINDOW and res > 0.99 * history[-1 - STALL_WINDOW]:
            return x, lam, res, it
    raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps "
                           f"(last residual {res:.3e})", residual=res, iterations=max_iter)


def default_shift(m: int) -> float:
    """A shift safely below the lowest eigenvalue ``m (m + 1)`` of the empty-slit wedge."""
    return SHIFT_FRACTION * m * (m + 1)


def eigenpairs(op: SparseOperator, k: int = 1, tol: float = 1e-9, shift: Optional[float] = None,
               inner: str = "direct", max_iter: int = 2000,
               cluster_tol: Optional[float] = None) -> List[EigenPair]:
    """The ``k`` lowest eigenpairs of ``A v = lambda B v`` by deflated shifted inverse iteration.

    Each pair is found by inverse iteration on ``(A - shift B)`` started from the
    all-ones vector and kept B-orthogonal to the pairs already found.
    """
    if not (0.0 < tol <= 1e-6):
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol!r}")
    if not (1 <= k <= MAX_K):
        raise ValueError(f"k must lie in [1, {MAX_K}], got {k!r}")
    if shift is None:
        shift = default_shift(op.grid.m)
    cluster_tol = cluster_tol if cluster_tol is not None else 1e3 * tol
    solver = _ShiftedSolver(op, shift, inner, inner_rtol=min(1e-3, tol) * 1e-3)
    locked: List[np.ndarray] = []
    pairs: List[EigenPair] = []
    for j in range(1, k + 1):
        x, lam, res, its = _inverse_iteration(op, solver, shift, locked, tol, max_iter)
        locked.append(x)
        if pairs and abs(lam - pairs[-1].lam) < cluster_tol * max(1.0, lam):
            warnings.warn(f"eigenvalues {j - 1} and {j} are nearly degenerate "
                          f"({pairs[-1].lam:.10g} vs {lam:.10g})", ClusterWarning, stacklevel=2)
        v = _orient(op.to_grid(x), op.grid)
        va = op.from_grid(v)
        Av = op.A @ va
        lam_v = (va @ Av) / (va @ (op.mass_diag * va))
        res = np.linalg.norm(Av - lam_v * op.mass_diag * va) / np.linalg.norm(op.mass_diag * va)
        pairs.append(EigenPair(k=j, lam=float(lam_v), mu=mu_from_lambda(float(lam_v)), v=v,
                               residual=float(res), iterations=its))
    if inner == "cg":
        log.debug("inner CG iterations: %d", solver.cg_iterations)
    order = np.argsort([p.lam for p in pairs], kind="stable")
    if np.any(order != np.arange(k)):
        log.warning("deflated iteration returned eigenvalues out of order; sorting")
        pairs = [EigenPair(k=i + 1, lam=pairs[o].lam, mu=pairs[o].mu, v=pairs[o].v,
                           residual=pairs[o].residual, iterations=pairs[o].iterations)
                 for i, o in enumerate(order)]
    return pairs


def lowest_eigenpair(op: SparseOperator, tol: float = 1e-9, **kwargs) -> EigenPair:
    return eigenpairs(op, 1, tol, **kwargs)[0]


def kth_eigenpair(op: SparseOperator, k: int, tol: float = 1e-9, **kwargs) -> EigenPair:
    return eigenpairs(op, k, tol, **kwargs)[-1]


def nodal_sign_check(pair: EigenPair, grid: WedgeGrid, rel_zero: float = 1e-10) -> bool:
    """True iff ``v`` keeps one sign on the band ``phi <= 1/m``."""
    band = pair.v[grid.phi_nodes <= 1.0 / grid.m]
    scale = np.max(np.abs(pair.v))
    thr = rel_zero * scale
    return not (np.any(band > thr) and np.any(band < -thr))


def probe_nodal_threshold(m: int, sigma: float, k_max: int, Nx: int = 129, Nphi: int = 129,
                          tol: float = 1e-8):
    """Scan ``k = 1..k_max`` and return ``(k, mu_k, nodal_ok)`` rows.

    The first failing ``k`` is logged; it bounds the constant ``gamma`` of the
    nodal-domain statement from above for this ``(m, sigma)``.
    """
    grid = build_grid(m, sigma, Nx, Nphi)
    op = assemble(grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClusterWarning)
        pairs = eigenpairs(op, k_max, tol)
    rows = [(p.k, p.mu, nodal_sign_check(p, grid)) for p in pairs]
    for k, mu, ok in rows:
        if not ok:
            log.info("nodal check first fails at k=%d (mu=%.4f, mu/m=%.3f) for m=%d sigma=%.3f",
                     k, mu, mu / m, m, grid.sigma)
            break
    return rows
