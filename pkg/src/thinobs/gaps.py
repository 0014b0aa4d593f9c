"""The gap intervals ``(2k, 2k+1)``: positivity of ``p_mu(0) p_mu'(0)``.

Any homogeneous solution of frequency ``mu`` satisfies the pairing identity
``p'(0) int u - p(0) int u_n = 0`` over the equator.  Its sign conditions make
both integrals one-signed, so a strictly positive product ``p(0) p'(0)`` forces
both to vanish and the solution to be trivial.  This module checks that product
on a Chebyshev sweep of each gap interval.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np
from scipy.integrate import trapezoid

from .legendre import LegendreEval, solve_p

ENDPOINT_MARGIN = 0.02
SUPPORTED_N = (2, 3, 4, 5)


@dataclass(frozen=True)
class GapRow:
    k: int
    mu_min_product: float  # smallest p0 * dp0 over the samples
    worst_mu: float
    min_abs_p0: float
    min_abs_dp0: float
    signs_ok: bool  # every sample matches (sign cos(mu pi/2), sign sin(mu pi/2))


@dataclass
class GapReport:
    n: int
    k_max: int
    samples_per_interval: int
    rows: List[GapRow] = field(default_factory=list)
    verdict: bool = False

    @property
    def margin(self) -> float:
        return min(r.mu_min_product for r in self.rows)

    def as_dict(self):
        out = asdict(self)
        out["margin"] = self.margin
        return out


def chebyshev_points(a: float, b: float, samples: int) -> np.ndarray:
    """Interior Chebyshev points of the first kind on ``(a, b)``, ascending."""
    j = np.arange(samples)
    x = np.cos((2 * j + 1) * np.pi / (2 * samples))[::-1]
    return 0.5 * (a + b) + 0.5 * (b - a) * x


def verify_gap(n: int = 3, k_max: int = 9, samples: int = 33, tol: float = 1e-10) -> GapReport:
    """Sample ``p_mu(0) p_mu'(0)`` on every ``(2k, 2k+1)``, ``k = 0..k_max``.

    The verdict holds iff every sampled product is strictly positive.
    """
    if n not in SUPPORTED_N:
        raise ValueError(f"n must be one of {SUPPORTED_N}, got {n}")
    if samples < 9:
        raise ValueError("samples must be >= 9")
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    report = GapReport(n=n, k_max=k_max, samples_per_interval=samples)
    for k in range(k_max + 1):
        mus = chebyshev_points(2 * k + ENDPOINT_MARGIN, 2 * k + 1 - ENDPOINT_MARGIN, samples)
        p0 = np.empty(samples)
        dp0 = np.empty(samples)
        for i, mu in enumerate(mus):
            leg = solve_p(mu, n, tol)
            p0[i], dp0[i] = leg.p0, leg.dp0
        prod = p0 * dp0
        worst = int(np.argmin(prod))
        signs_ok = bool(np.all(np.sign(p0) == np.sign(np.cos(mus * np.pi / 2)))
                        and np.all(np.sign(dp0) == np.sign(np.sin(mus * np.pi / 2))))
        report.rows.append(GapRow(k=k, mu_min_product=float(prod[worst]), worst_mu=float(mus[worst]),
                                  min_abs_p0=float(np.min(np.abs(p0))), min_abs_dp0=float(np.min(np.abs(dp0))),
                                  signs_ok=signs_ok))
    report.verdict = all(r.mu_min_product > 0 for r in report.rows)
    return report


def boundary_pairing(u_eq, uphi_eq, s, leg: LegendreEval) -> float:
    """``p'(0) int u - p(0) int u_phi`` over the equator samples ``s`` (trapezoid rule)."""
    return float(leg.dp0 * trapezoid(u_eq, s) - leg.p0 * trapezoid(uphi_eq, s))
