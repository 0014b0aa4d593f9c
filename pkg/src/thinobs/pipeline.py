"""One evaluation of the obstruction ``c`` at a slit fraction: grid, eigenpair, trace, Legendre data.

Results are memoized per process on the canonical key
``(m, k, slit index, Nx, Nphi, tol, method)``; an optional persistent store
(see :mod:`thinobs.store`) can back the memo across runs.
"""

from __future__ import annotations

import threading
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

from .construct import PHI_MAX, build_h, build_u, c_by_quantity, extract_trace
from .legendre import solve_p
from .spectral import assemble, build_grid, eigenpairs, nodal_sign_check, snap_index

DEFAULT_RESOLUTION = (129, 129)
EIG_TOL = 1e-9
LEG_TOL = 1e-10


@dataclass(frozen=True)
class CPoint:
    m: int
    k: int
    sigma: float
    index: int
    Nx: int
    Nphi: int
    c: float
    mu: float
    lam: float
    p0: float
    dp0: float
    nodal_ok: bool
    residual: float
    method: str

    def as_dict(self):
        return asdict(self)


_memo = {}
_memo_lock = threading.Lock()
_store = None


def set_store(store) -> None:
    """Attach a persistent record store (or ``None`` to detach)."""
    global _store
    _store = store


def clear_memo() -> None:
    with _memo_lock:
        _memo.clear()


def point_key(m, k, sigma, resolution, tol=EIG_TOL, method="flux"):
    Nx, Nphi = resolution
    return (int(m), int(k), snap_index(sigma, Nx), int(Nx), int(Nphi), float(tol), method)


def solve_eigen(m: int, sigma: float, k: int = 1, resolution: Tuple[int, int] = DEFAULT_RESOLUTION,
                tol: float = EIG_TOL, inner: str = "direct"):
    """Grid, operator and the ``k``-th eigenpair at ``(m, sigma)``."""
    grid = build_grid(m, sigma, *resolution)
    op = assemble(grid)
    pair = eigenpairs(op, k, tol, inner=inner)[-1]
    return grid, op, pair


def evaluate_c(m: int, sigma: float, k: int = 1, resolution: Tuple[int, int] = DEFAULT_RESOLUTION,
               tol: float = EIG_TOL, method: str = "flux") -> CPoint:
    key = point_key(m, k, sigma, resolution, tol, method)
    with _memo_lock:
        hit = _memo.get(key)
    if hit is not None:
        return hit
    if _store is not None:
        rec = _store.get("cpoint", key)
        if rec is not None:
            point = CPoint(**rec)
            with _memo_lock:
                _memo[key] = point
            return point

    grid, op, pair = solve_eigen(m, sigma, k, resolution, tol)
    trace = extract_trace(pair, grid, op)
    leg = solve_p(pair.mu, 3, LEG_TOL)
    point = CPoint(
        m=int(m), k=int(k), sigma=grid.sigma, index=grid.slit_end_index, Nx=grid.Nx, Nphi=grid.Nphi,
        c=float(c_by_quantity(trace, leg, method)), mu=pair.mu, lam=pair.lam, p0=leg.p0, dp0=leg.dp0,
        nodal_ok=bool(nodal_sign_check(pair, grid)), residual=pair.residual, method=method,
    )
    with _memo_lock:
        _memo[key] = point
    if _store is not None:
        _store.put("cpoint", key, point.as_dict())
    return point


def build_bundle(m: int, sigma: float, k: int = 1, resolution: Tuple[int, int] = DEFAULT_RESOLUTION,
                 tol: float = EIG_TOL, method: str = "flux", phi_max: float = PHI_MAX,
                 sign_tol: float = 1e-6, leg_tol: Optional[float] = None, parts_order: int = 4):
    """The full construction at one ``(m, sigma, k)``; returns ``(grid, pair, bundle)``."""
    grid, op, pair = solve_eigen(m, sigma, k, resolution, tol)
    trace = extract_trace(pair, grid, op)
    leg = solve_p(pair.mu, 3, leg_tol or LEG_TOL)
    h = build_h(pair, grid, trace, phi_max=phi_max, method=method)
    bundle = build_u(pair, h, grid, trace, leg, method=method, tol=sign_tol, parts_order=parts_order)
    return grid, pair, bundle
