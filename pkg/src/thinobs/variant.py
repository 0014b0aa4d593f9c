"""The construction with the ``k``-th eigenfunction of the slit wedge.

For odd ``m`` the ``k``-th frequency runs from ``m + 2k - 2`` (no slit) to
``m + 2k - 1`` (full slit) and the same endpoint sign flip of ``c_k`` yields a
root inside that window, provided the eigenfunction keeps one sign near the
equator.  The nodal check is asserted at every visited ``sigma``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from .construct import PHI_MAX, build_h, extract_trace, trace_integrals
from .continuation import RootResult, bisect_root
from .errors import NodalSignError
from .legendre import equator_signs, solve_p
from .pipeline import DEFAULT_RESOLUTION, EIG_TOL, build_bundle, solve_eigen
from .spectral import ClusterWarning, assemble, build_grid, eigenpairs, nodal_sign_check

log = logging.getLogger(__name__)

CAP_RATIO = 1.6
CLUSTER_RTOL = 1e-3
VANISH_RTOL = 1e-8
ANCHOR_RTOL = 1e-3


@dataclass
class VariantRoot:
    m: int
    k: int
    root: Optional[RootResult]
    nodal_ok: List[Tuple[float, bool]]
    parity_note: Dict[str, object]
    status: str = "ok"  # "ok" or "inconclusive"
    endpoint_signs: Tuple[int, int] = (0, 0)
    sign_report: Optional[dict] = None
    anchor: Optional[dict] = None

    def as_dict(self):
        return asdict(self)


def _check_mk(m: int, k: int, cap_ratio: float):
    if m < 3 or m % 2 == 0:
        raise ValueError(f"m must be odd and >= 3, got {m}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if m + 2 * k - 1 > cap_ratio * m:
        raise ValueError(f"m + 2k - 1 = {m + 2 * k - 1} exceeds the cap {cap_ratio} m = {cap_ratio * m:g}")


def cluster_gap(m: int, sigma: float, k: int, resolution=DEFAULT_RESOLUTION, tol: float = EIG_TOL) -> float:
    """Relative distance from ``lambda_k`` to its nearest computed neighbour (``k - 1`` or ``k + 1``)."""
    op = assemble(build_grid(m, sigma, *resolution))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClusterWarning)
        lams = [p.lam for p in eigenpairs(op, k + 1, tol)]
    gaps = [abs(lams[k] - lams[k - 1])]
    if k >= 2:
        gaps.append(abs(lams[k - 1] - lams[k - 2]))
    return min(gaps) / lams[k - 1]


def variant_endpoints(m: int, k: int, resolution=DEFAULT_RESOLUTION, tol: float = EIG_TOL,
                      cap_ratio: float = CAP_RATIO, method: str = "flux"):
    """Signs of ``c_k`` at ``sigma = 0`` and ``sigma = 1`` with the vanishing-integral pattern.

    Returns ``(sign c_k(0), sign c_k(1), note)``.
    """
    _check_mk(m, k, cap_ratio)
    note: Dict[str, object] = {}
    signs = []
    for sigma in (0.0, 1.0):
        grid, op, pair = solve_eigen(m, sigma, k, resolution, tol)
        if not nodal_sign_check(pair, grid):
            raise NodalSignError(f"k={k} eigenfunction changes sign near the equator at m={m}, sigma={sigma}")
        trace = extract_trace(pair, grid, op)
        leg = solve_p(pair.mu, 3)
        i_dv, i_v = trace_integrals(trace, method)
        s = trace.s_nodes
        scale = (trapezoid(np.abs(trace.derivative(method)), s) + trapezoid(np.abs(trace.v_eq), s)) * math.pi / m
        c = 2 * m * (leg.p0 * i_dv + leg.dp0 * i_v)
        tag = "sigma0" if sigma == 0.0 else "sigma1"
        note[tag] = {"mu": pair.mu, "int_dv_s": float(i_dv), "int_v": float(i_v), "c": float(c),
                     "dv_vanishes": bool(abs(i_dv) <= VANISH_RTOL * scale),
                     "v_vanishes": bool(abs(i_v) <= VANISH_RTOL * scale)}
        signs.append(int(np.sign(c)))
    if not (note["sigma0"]["dv_vanishes"] and note["sigma1"]["v_vanishes"]):
        raise AssertionError(f"unexpected endpoint vanishing pattern for m={m}, k={k}: {note}")

    # the parity flip read off directly from the sign law at the endpoint frequencies
    _, d_sign = equator_signs(note["sigma0"]["mu"])
    p_sign, _ = equator_signs(note["sigma1"]["mu"])
    note["parity_flip"] = bool(d_sign * p_sign < 0)
    return signs[0], signs[1], note


def anchor_readings(m: int, sigma: float, k: int, resolution=DEFAULT_RESOLUTION, tol: float = EIG_TOL,
                    method: str = "flux") -> dict:
    """Initial slopes of ``h`` under the two readings of the derivative anchor of ``u_k``.

    Reading A makes ``u_phi`` vanish at ``(theta, phi) = (pi/m, 0)``, which is
    the slope ``-int v_phi`` used for ``k = 1``.  Reading B makes ``u_phi``
    vanish at ``(theta, phi) = (0, pi/m)``, i.e. ``h'(pi/m) = 0``.
    """
    grid, op, pair = solve_eigen(m, sigma, k, resolution, tol)
    trace = extract_trace(pair, grid, op)
    anchor = math.pi / m
    if anchor > PHI_MAX:
        raise ValueError("reading B needs pi/m below phi_max")
    slope_a = -trapezoid(trace.derivative(method), trace.s_nodes)
    h0 = build_h(pair, grid, trace, method=method, dh0=0.0)
    h1 = build_h(pair, grid, trace, method=method, dh0=1.0)
    d0, d1 = h0(anchor)[1], h1(anchor)[1]
    slope_b = float(-d0 / (d1 - d0))
    hb = build_h(pair, grid, trace, method=method, dh0=slope_b)
    # off-slit u_phi under reading B is the constant slope_b - slope_a
    rel = abs(slope_a - slope_b) / max(abs(slope_a), abs(slope_b), 1e-300)
    return {"sigma": grid.sigma, "slope_a": float(slope_a), "slope_b": slope_b,
            "hprime_at_anchor_a": float(h0(anchor)[1] + slope_a * (d1 - d0)),
            "hprime_at_anchor_b": float(hb(anchor)[1]),
            "open_uphi_b": float(abs(slope_b - slope_a)), "relative_discrepancy": float(rel),
            "agree": bool(rel <= ANCHOR_RTOL)}


def variant_bisect(m: int, k: int, levels: int = 2, resolution=DEFAULT_RESOLUTION, tol: float = EIG_TOL,
                   cap_ratio: float = CAP_RATIO, method: str = "flux") -> VariantRoot:
    """Root of ``c_k`` in ``(m + 2k - 2, m + 2k - 1)`` with nodal checks at every visited ``sigma``.

    A ``k``-th eigenvalue within ``CLUSTER_RTOL`` of a neighbour at either
    endpoint marks the run inconclusive instead of picking a combination.
    """
    s0, s1, note = variant_endpoints(m, k, resolution, tol, cap_ratio, method)
    for sigma in (0.0, 1.0):
        gap = cluster_gap(m, sigma, k, resolution, tol)
        note[f"cluster_gap_sigma{int(sigma)}"] = gap
        if gap < CLUSTER_RTOL:
            log.warning("lambda_%d is clustered at m=%d sigma=%g (gap %.2e); inconclusive", k, m, sigma, gap)
            return VariantRoot(m=m, k=k, root=None, nodal_ok=[], parity_note=note, status="inconclusive",
                               endpoint_signs=(s0, s1))
    if s0 * s1 >= 0:
        raise AssertionError(f"endpoint signs of c_k are not opposite for m={m}, k={k}: {(s0, s1)}")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClusterWarning)
        root = bisect_root(m, k, (0.0, 1.0), levels, resolution, tol, method, require_nodal=True)
    status = "inconclusive" if any(issubclass(w.category, ClusterWarning) for w in caught) else "ok"

    fine = root.mesh_levels[-1]
    sigma = fine.sigma_lo if abs(fine.c_lo) <= abs(fine.c_hi) else fine.sigma_hi
    _, _, bundle = build_bundle(m, sigma, k, (fine.Nx, fine.Nphi), tol, method)
    anchor = anchor_readings(m, sigma, k, (fine.Nx, fine.Nphi), tol, method)
    return VariantRoot(m=m, k=k, root=root, nodal_ok=root.nodal_ok, parity_note=note, status=status,
                       endpoint_signs=(s0, s1), sign_report=bundle.sign_report.as_dict(), anchor=anchor)
