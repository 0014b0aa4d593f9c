"""Locating the zero of ``c(sigma)`` and the large-``m`` trend diagnostics.

Bisection runs over snapped slit indices, so every evaluated ``sigma`` is a grid
value.  Once the bracket spans one cell the zero is placed by linear
interpolation of ``c``; the mesh is then doubled (``N -> 2N - 1`` keeps every old
node) and the bracket re-verified.  The interpolated zeros of the two finest
levels are combined by Richardson extrapolation.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline

from .errors import BracketError, ConvergenceError, ThinObsError
from .pipeline import DEFAULT_RESOLUTION, EIG_TOL, CPoint, _memo, _memo_lock, evaluate_c, point_key
from .spectral import EigenPair, WedgeGrid, snap_index

log = logging.getLogger(__name__)

RICHARDSON_ORDER = 2
MAX_NODES = 2049
DEFAULT_M_LIST = (3, 5, 9, 15)


@dataclass(frozen=True)
class ScanEntry:
    sigma: float
    c: float
    mu: float
    nodal_ok: bool = True
    error: Optional[str] = None


@dataclass
class MeshLevel:
    Nx: int
    Nphi: int
    i_lo: int
    i_hi: int
    sigma_lo: float
    sigma_hi: float
    c_lo: float
    c_hi: float
    mu_lo: float
    mu_hi: float
    sigma_star: float  # linear interpolation of the zero of c inside the cell
    mu_star: float
    evaluations: int


@dataclass
class RootResult:
    m: int
    k: int
    sigma_lo: float
    sigma_hi: float
    mu_lo: float
    mu_hi: float
    mesh_levels: List[MeshLevel] = field(default_factory=list)
    extrapolated_sigma: float = math.nan
    extrapolated_mu: float = math.nan
    method: str = "flux"
    nodal_ok: List[Tuple[float, bool]] = field(default_factory=list)

    @property
    def window(self) -> Tuple[int, int]:
        return self.m + 2 * self.k - 2, self.m + 2 * self.k - 1

    def in_window(self) -> bool:
        lo, hi = self.window
        return lo < self.extrapolated_mu < hi

    def as_dict(self):
        return asdict(self)


def sigma_grid(num: int, Nx: int) -> np.ndarray:
    """``num`` equally spaced fractions in ``[0, 1]`` snapped to the ``x`` nodes."""
    raw = np.linspace(0.0, 1.0, num)
    return np.unique([snap_index(s, Nx) for s in raw]) / (Nx - 1)


def _scan_one(args):
    m, k, sigma, resolution, tol, method = args
    try:
        pt = evaluate_c(m, sigma, k, resolution, tol, method)
        return pt, None
    except (ThinObsError, ValueError, ArithmeticError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def scan_c(m: int, k: int, sigma_list: Sequence[float], resolution: Tuple[int, int] = DEFAULT_RESOLUTION,
           tol: float = EIG_TOL, method: str = "flux", jobs: int = 1) -> List[ScanEntry]:
    """Evaluate ``c`` along ``sigma_list``; a failing entry is recorded, not raised."""
    sigmas = [float(s) for s in sigma_list]
    if any(s < 0 or s > 1 for s in sigmas) or sigmas != sorted(sigmas):
        raise ValueError("sigma_list must be sorted within [0, 1]")
    tasks = [(m, k, s, tuple(resolution), tol, method) for s in sigmas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_scan_one, tasks))
        with _memo_lock:
            for task, (pt, _) in zip(tasks, results):
                if pt is not None:
                    _memo[point_key(*task)] = pt
    else:
        results = [_scan_one(t) for t in tasks]

    entries = []
    for s, (pt, err) in zip(sigmas, results):
        if pt is None:
            log.warning("scan entry m=%d k=%d sigma=%.4f failed: %s", m, k, s, err)
            entries.append(ScanEntry(sigma=s, c=math.nan, mu=math.nan, nodal_ok=False, error=err))
        else:
            entries.append(ScanEntry(sigma=pt.sigma, c=pt.c, mu=pt.mu, nodal_ok=pt.nodal_ok))
    return entries


def sign_changes(entries: Sequence[ScanEntry]) -> List[Tuple[float, float]]:
    """Consecutive finite entries whose ``c`` values have strictly opposite signs."""
    finite = [e for e in entries if np.isfinite(e.c)]
    return [(a.sigma, b.sigma) for a, b in zip(finite, finite[1:]) if a.c * b.c < 0]


def _rebracket(m, k, i_lo, i_hi, Nx, res, tol, method, at):
    """Widen a lost bracket outward by doubling steps until ``c`` changes sign again."""
    step = 1
    while True:
        lo, hi = max(0, i_lo - step), min(Nx - 1, i_hi + step)
        p_lo, p_hi = at(lo), at(hi)
        if p_lo.c * p_hi.c < 0:
            # tighten back toward the old cell from whichever side still matches
            return lo, hi, p_lo, p_hi
        if lo == 0 and hi == Nx - 1:
            raise BracketError(f"bracket lost for m={m}, k={k} at Nx={Nx}", c_lo=p_lo.c, c_hi=p_hi.c)
        step *= 2


def bisect_root(m: int, k: int = 1, bracket: Tuple[float, float] = (0.0, 1.0), levels: int = 2,
                resolution: Tuple[int, int] = DEFAULT_RESOLUTION, tol: float = EIG_TOL,
                method: str = "flux", require_nodal: bool = False) -> RootResult:
    """Bisect ``c`` over snapped ``sigma`` on ``levels`` successively doubled meshes.

    Raises
    ------
    BracketError
        ``c`` has no sign change across the bracket at the coarsest level, or a
        bracket could not be re-established after refinement.
    ConvergenceError
        The requested levels would exceed ``MAX_NODES`` per direction.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    Nx, Nphi = resolution
    if (Nx - 1) * 2 ** (levels - 1) + 1 > MAX_NODES or (Nphi - 1) * 2 ** (levels - 1) + 1 > MAX_NODES:
        raise ConvergenceError(f"{levels} levels from {resolution} exceed {MAX_NODES} nodes")
    s_lo, s_hi = sorted(bracket)
    history: List[MeshLevel] = []
    visited = {}

    def at(i):
        pt = evaluate_c(m, i / (Nx - 1), k, (Nx, Nphi), tol, method)
        visited[pt.sigma] = pt.nodal_ok
        return pt

    i_lo, i_hi = snap_index(s_lo, Nx), snap_index(s_hi, Nx)
    if i_lo >= i_hi:
        raise ValueError("bracket collapses to a single node at this resolution")
    p_lo, p_hi = at(i_lo), at(i_hi)
    if not p_lo.c * p_hi.c < 0:
        raise BracketError(f"no sign change of c on [{p_lo.sigma}, {p_hi.sigma}] for m={m}, k={k}",
                           c_lo=p_lo.c, c_hi=p_hi.c)

    for level in range(levels):
        count = 0
        if level > 0:
            Nx, Nphi = 2 * Nx - 1, 2 * Nphi - 1
            i_lo, i_hi = 2 * i_lo, 2 * i_hi
            p_lo, p_hi = at(i_lo), at(i_hi)
            count += 2
            if not p_lo.c * p_hi.c < 0:
                log.info("bracket lost after refinement to Nx=%d; widening", Nx)
                try:
                    i_lo, i_hi, p_lo, p_hi = _rebracket(m, k, i_lo, i_hi, Nx, (Nx, Nphi), tol, method, at)
                except BracketError as exc:
                    exc.history = history
                    raise
        while i_hi - i_lo > 1:
            mid = (i_lo + i_hi) // 2
            p_mid = at(mid)
            count += 1
            if p_mid.c == 0.0:
                i_lo, p_lo = mid, p_mid
                i_hi, p_hi = mid + 1, at(mid + 1)
                break
            if p_lo.c * p_mid.c < 0:
                i_hi, p_hi = mid, p_mid
            else:
                i_lo, p_lo = mid, p_mid
        t = p_lo.c / (p_lo.c - p_hi.c)
        history.append(MeshLevel(
            Nx=Nx, Nphi=Nphi, i_lo=i_lo, i_hi=i_hi, sigma_lo=p_lo.sigma, sigma_hi=p_hi.sigma,
            c_lo=p_lo.c, c_hi=p_hi.c, mu_lo=p_lo.mu, mu_hi=p_hi.mu,
            sigma_star=p_lo.sigma + t * (p_hi.sigma - p_lo.sigma),
            mu_star=p_lo.mu + t * (p_hi.mu - p_lo.mu), evaluations=count,
        ))
        log.info("m=%d k=%d level %d (Nx=%d): sigma in [%.5f, %.5f], mu* = %.6f",
                 m, k, level, Nx, p_lo.sigma, p_hi.sigma, history[-1].mu_star)

    fine = history[-1]
    if len(history) >= 2:
        coarse = history[-2]
        factor = 2 ** RICHARDSON_ORDER - 1
        ext_sigma = fine.sigma_star + (fine.sigma_star - coarse.sigma_star) / factor
        ext_mu = fine.mu_star + (fine.mu_star - coarse.mu_star) / factor
    else:
        ext_sigma, ext_mu = fine.sigma_star, fine.mu_star

    nodal = sorted(visited.items())
    if require_nodal and not all(ok for _, ok in nodal):
        from .errors import NodalSignError
        raise NodalSignError(f"nodal check failed along the bisection for m={m}, k={k}: {nodal}")
    return RootResult(
        m=m, k=k, sigma_lo=fine.sigma_lo, sigma_hi=fine.sigma_hi, mu_lo=fine.mu_lo, mu_hi=fine.mu_hi,
        mesh_levels=history, extrapolated_sigma=float(ext_sigma), extrapolated_mu=float(ext_mu),
        method=method, nodal_ok=nodal,
    )


def find_roots(m: int, k: int = 1, num: int = 11, levels: int = 2,
               resolution: Tuple[int, int] = DEFAULT_RESOLUTION, tol: float = EIG_TOL,
               method: str = "flux", jobs: int = 1) -> List[RootResult]:
    """Scan ``num`` fractions and bisect every sign change found (uniqueness is not assumed)."""
    entries = scan_c(m, k, sigma_grid(num, resolution[0]), resolution, tol, method, jobs)
    crossings = sign_changes(entries)
    if len(crossings) > 1:
        log.warning("m=%d k=%d: %d sign changes of c found; bisecting each", m, k, len(crossings))
    return [bisect_root(m, k, br, levels, resolution, tol, method) for br in crossings]


@dataclass
class TrendReport:
    rows: List[dict]
    sigma_decreasing: bool
    gap_decreasing: bool
    sup_decreasing: Optional[bool] = None

    @property
    def passed(self) -> bool:
        return self.sigma_decreasing and self.gap_decreasing and self.sup_decreasing is not False


def _strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def trend_report(roots: Sequence[RootResult], sup_distances: Optional[Sequence[float]] = None) -> TrendReport:
    """Rows ``(m, sigma, mu, m + 1 - mu)`` with strict-monotonicity flags along increasing ``m``."""
    order = np.argsort([r.m for r in roots])
    roots = [roots[i] for i in order]
    rows = []
    for j, r in enumerate(roots):
        row = {"m": r.m, "sigma": r.extrapolated_sigma, "mu": r.extrapolated_mu,
               "gap": r.m + 1 - r.extrapolated_mu}
        if sup_distances is not None:
            row["sup_distance"] = float(sup_distances[order[j]])
        rows.append(row)
    sup_flag = None
    if sup_distances is not None:
        sup_flag = _strictly_decreasing([row["sup_distance"] for row in rows])
    return TrendReport(rows=rows, sigma_decreasing=_strictly_decreasing([r["sigma"] for r in rows]),
                       gap_decreasing=_strictly_decreasing([r["gap"] for r in rows]),
                       sup_decreasing=sup_flag)


@dataclass
class RescaledReport:
    m: int
    y_max: float
    alpha: float  # normalization factor applied to v
    sup_distance: float
    slabs: List[Tuple[float, float, float]]  # (y_start, y_end, sup |v~ - sin x|)
    normalization: float  # integral of v~(x, 1) sin x, equal to pi/2


def rescaled_trace_diagnostic(pair: EigenPair, grid: WedgeGrid, y_max: float = 2.0,
                              slab_width: float = 0.5, samples_per_slab: int = 41) -> RescaledReport:
    """Distance of the rescaled eigenfunction ``v(x, y/m)`` from ``sin x`` on ``[0, pi] x [0, y_max]``."""
    m = grid.m
    if y_max <= 0 or y_max / m >= np.pi / 2:
        raise ValueError(f"y_max/m must lie in (0, pi/2), got {y_max}/{m}")
    x = grid.x_nodes
    spline = CubicSpline(grid.phi_nodes, pair.v, axis=0)
    sin_x = np.sin(x)
    norm = trapezoid(spline(1.0 / m) * sin_x, x)
    if norm <= 0:
        raise ValueError("rescaled trace has non-positive projection on sin x at y = 1")
    alpha = (np.pi / 2) / norm

    edges = np.arange(0.0, y_max + 1e-12, slab_width)
    if edges[-1] < y_max:
        edges = np.append(edges, y_max)
    slabs = []
    for a, b in zip(edges, edges[1:]):
        y = np.linspace(a, b, samples_per_slab)
        vt = alpha * spline(y / m)
        slabs.append((float(a), float(b), float(np.max(np.abs(vt - sin_x)))))
    return RescaledReport(m=m, y_max=y_max, alpha=float(alpha), sup_distance=max(s[2] for s in slabs),
                          slabs=slabs, normalization=float(alpha * norm))


def sigma_zero_sup_distance(m: int, y_max: float = 2.0) -> float:
    """Closed form of the diagnostic for the ``sigma = 0`` eigenfunction ``cos^m(phi) sin x``."""
    c1 = math.cos(1.0 / m)
    return max(c1 ** -m - 1.0, 1.0 - (math.cos(y_max / m) / c1) ** m)


def default_jobs() -> int:
    return os.cpu_count() or 1
