"""Legendre-type profiles on the sphere.

``p_mu`` is the rotation-invariant solution of

    p'' - (n-2) tan(phi) p' + mu (mu+n-2) p = 0,   p(pi/2) = 1, p'(pi/2) = 0,

with ``phi`` the latitude (equator at 0, north pole at pi/2).  The equation is
singular at the pole, so the integration runs in the colatitude ``t = pi/2 - phi``
and is launched a short distance from the pole on the regular series branch.

``solve_h`` integrates the same operator forward from the equator with a
bounded source, which is how the correction profile of the construction is
built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import GrowthBoundError, IntegrationError, NearZeroError

T_LAUNCH = 1e-4
ZERO_FACTOR = 1e3
POLE_MARGIN = 1e-3
DELTA_CAP = 0.1
DEFAULT_NODES = 513
METHOD = "DOP853"


def frequency_to_lambda(mu: float, n: int) -> float:
    return mu * (mu + n - 2)


@dataclass(frozen=True, eq=False)
class LegendreEval:
    """One solved profile ``p_mu`` sampled on ``phi_nodes``."""

    mu: float
    n: int
    lam: float
    phi_nodes: np.ndarray
    p_values: np.ndarray
    dp_values: np.ndarray
    p0: float
    dp0: float
    tol: float
    _dense: Callable = field(repr=False, default=None)

    @property
    def sup_norm(self) -> float:
        # p(pi/2) = 1 is part of the profile even though the pole is not a node
        return max(1.0, float(np.max(np.abs(self.p_values))))

    @property
    def zero_threshold(self) -> float:
        return ZERO_FACTOR * self.tol * self.sup_norm

    def __call__(self, phi):
        """Evaluate ``(p, p')`` at arbitrary latitudes in ``[0, pi/2]``."""
        phi = np.asarray(phi, dtype=float)
        t = np.pi / 2 - phi
        p = np.empty_like(t)
        dp = np.empty_like(t)
        near = t < T_LAUNCH
        if np.any(near):
            p[near], pt = _pole_series(t[near], self.lam, self.n)
            dp[near] = -pt
        if np.any(~near):
            y = self._dense(t[~near])
            p[~near] = y[0]
            dp[~near] = -y[1]
        return p, dp

    def pole_extrapolation(self):
        """Value and derivative extrapolated from the series to ``phi = pi/2``."""
        p, pt = _pole_series(np.array([0.0]), self.lam, self.n)
        return float(p[0]), float(-pt[0])


def _pole_series(t, lam, n):
    p = 1.0 - lam * t**2 / (2.0 * (n - 1))
    pt = -lam * t / (n - 1)
    return p, pt


def _check_tol(tol):
    if not (0.0 < tol <= 1e-3):
        raise ValueError(f"tol must lie in (0, 1e-3], got {tol!r}")


def solve_p(mu: float, n: int = 3, tol: float = 1e-10, phi_nodes=None) -> LegendreEval:
    """Integrate ``p_mu`` from the pole down to the equator.

    Parameters
    ----------
    mu : float
        Frequency, strictly positive.
    n : int
        Ambient dimension (2 to 5 are supported).
    tol : float
        Relative and absolute tolerance of the adaptive Runge-Kutta scheme.
    phi_nodes : array_like, optional
        Latitudes at which to store the profile.  Defaults to a uniform grid on
        ``[0, pi/2)`` that starts at the equator.

    Returns
    -------
    LegendreEval
    """
    if not np.isfinite(mu) or mu <= 0:
        raise ValueError(f"mu must be finite and positive, got {mu!r}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n!r}")
    _check_tol(tol)
    mu = float(mu)
    lam = frequency_to_lambda(mu, n)

    if phi_nodes is None:
        phi_nodes = np.linspace(0.0, np.pi / 2, DEFAULT_NODES)[:-1]
    phi_nodes = np.asarray(phi_nodes, dtype=float)
    if phi_nodes.size == 0 or phi_nodes[0] != 0.0:
        phi_nodes = np.concatenate([[0.0], phi_nodes[phi_nodes > 0]])

    def rhs(t, y):
        return (y[1], -(n - 2) * y[1] / math.tan(t) - lam * y[0])

    p_start, pt_start = _pole_series(T_LAUNCH, lam, n)
    sol = solve_ivp(
        rhs,
        (T_LAUNCH, np.pi / 2),
        (p_start, pt_start),
        method=METHOD,
        rtol=tol,
        atol=tol,
        dense_output=True,
    )
    if sol.status != 0:
        raise IntegrationError(f"p_mu integration failed for mu={mu}, n={n}: {sol.message}")

    end = sol.y[:, -1]
    if not np.all(np.isfinite(end)):
        raise IntegrationError(f"non-finite p_mu for mu={mu}, n={n}")

    leg = LegendreEval(
        mu=mu, n=n, lam=lam, phi_nodes=phi_nodes,
        p_values=np.empty(0), dp_values=np.empty(0),
        p0=float(end[0]), dp0=float(-end[1]), tol=tol, _dense=sol.sol,
    )
    p, dp = leg(phi_nodes)
    # the node at the equator must agree exactly with the stored end state
    p[0], dp[0] = leg.p0, leg.dp0
    object.__setattr__(leg, "p_values", p)
    object.__setattr__(leg, "dp_values", dp)
    return leg


def _sign(value: float, threshold: float) -> int:
    if abs(value) < threshold:
        return 0
    return 1 if value > 0 else -1


def equator_signs(mu: float, n: int = 3, tol: float = 1e-10):
    """Signs of ``p_mu(0)`` and ``p_mu'(0)``; values under the zero threshold count as 0."""
    if not np.isfinite(mu) or mu < 0:
        raise ValueError(f"mu must be finite and non-negative, got {mu!r}")
    if mu == 0:
        return 1, 0  # p_0 is identically 1
    leg = solve_p(mu, n, tol)
    thr = leg.zero_threshold
    return _sign(leg.p0, thr), _sign(leg.dp0, thr)


def equator_ratio(mu: float, n: int = 3, tol: float = 1e-10, leg: Optional[LegendreEval] = None) -> float:
    """Return ``-p_mu'(0) / p_mu(0)``.

    Raises
    ------
    NearZeroError
        If ``|p_mu(0)|`` is below the zero threshold (``mu`` too close to an odd
        integer for the requested tolerance).
    """
    if leg is None:
        leg = solve_p(mu, n, tol)
    if abs(leg.p0) < leg.zero_threshold:
        raise NearZeroError(f"p_mu(0) = {leg.p0:.3e} is below the zero threshold at mu={leg.mu}")
    return -leg.dp0 / leg.p0


@dataclass(frozen=True, eq=False)
class ForcedProfile:
    """Solution of ``L_mu h = (n-2) g / cos(phi)`` launched from the equator."""

    mu: float
    n: int
    phi_nodes: np.ndarray
    h_values: np.ndarray
    dh_values: np.ndarray
    h0: float
    dh0: float
    source_kind: str
    growth_constant: float
    sup_source: float
    phi_max: float
    _dense: Callable = field(repr=False, default=None)

    def __call__(self, phi):
        y = self._dense(np.asarray(phi, dtype=float))
        return y[0], y[1]


def growth_constant(mu: float, n: int, h0: float, dh0: float, sup_g: float, phi_max: float) -> float:
    """Constant ``C`` with ``|h'(phi)| <= C cos(phi)^(2-n)`` on ``[0, phi_max]``.

    Variation of constants against ``cos(omega phi)`` followed by Gronwall gives
    ``|h'| <= [omega|h0| + |dh0| + (n-2) sup|g| log(sec + tan)] cos^(2-n)``; the
    logarithm is evaluated at ``phi_max`` where it is largest.
    """
    omega = math.sqrt(frequency_to_lambda(mu, n))
    log_sec = math.log(1.0 / math.cos(phi_max) + math.tan(phi_max))
    return omega * abs(h0) + abs(dh0) + (n - 2) * sup_g * log_sec


def capbound_constant(n: int, delta: float) -> float:
    """Analytic constant for ``|h' - h'(0) cos(omega phi)| <= C delta^2 |h'(0)|`` on ``[0, delta]``.

    Valid for the homogeneous equation with ``h(0) = 0``.
    """
    if not 0 < delta < np.pi / 2:
        raise ValueError("delta must lie in (0, pi/2)")
    return (n - 2) * (-math.log(math.cos(delta))) * math.cos(delta) ** (2 - n) / delta**2


def solve_h(mu: float, n: int, g, h0: float, dh0: float, phi_max: float,
            tol: float = 1e-10, phi_nodes=None, source_kind: Optional[str] = None,
            check_growth: bool = True) -> ForcedProfile:
    """Integrate ``h'' - (n-2) tan(phi) h' + lambda h = (n-2) g(phi) / cos(phi)`` forward from ``phi = 0``.

    ``g`` may be ``None`` (zero source) or a callable bounded on ``[0, phi_max]``.
    The growth bound ``|h'| <= C cos^(2-n)`` is checked on the stored nodes
    unless ``check_growth`` is false.
    """
    if not np.isfinite(mu) or mu <= 0:
        raise ValueError(f"mu must be finite and positive, got {mu!r}")
    _check_tol(tol)
    if not (0 < phi_max <= np.pi / 2 - POLE_MARGIN):
        raise ValueError(f"phi_max must lie in (0, pi/2 - {POLE_MARGIN}], got {phi_max!r}")
    lam = frequency_to_lambda(mu, n)

    probe = np.linspace(0.0, phi_max, 4097)
    if g is None:
        kind = source_kind or "zero"
        sup_g = 0.0

        def source(phi):
            return 0.0
    else:
        kind = source_kind or "callable"
        gv = np.asarray(g(probe), dtype=float)
        if not np.all(np.isfinite(gv)):
            raise IntegrationError("non-finite source term")
        sup_g = float(np.max(np.abs(gv)))

        def source(phi):
            return float(g(phi))

    def rhs(phi, y):
        return (y[1], (n - 2) * (math.tan(phi) * y[1] + source(phi) / math.cos(phi)) - lam * y[0])

    sol = solve_ivp(rhs, (0.0, phi_max), (h0, dh0), method=METHOD, rtol=tol, atol=tol,
                    dense_output=True)
    if sol.status != 0:
        raise IntegrationError(f"forced profile integration failed: {sol.message}")

    if phi_nodes is None:
        phi_nodes = np.linspace(0.0, phi_max, DEFAULT_NODES)
    phi_nodes = np.asarray(phi_nodes, dtype=float)
    if np.any(phi_nodes > phi_max + 1e-14) or np.any(phi_nodes < 0):
        raise ValueError("phi_nodes must lie in [0, phi_max]")
    y = sol.sol(phi_nodes)
    h_vals, dh_vals = y[0].copy(), y[1].copy()
    if phi_nodes[0] == 0.0:
        h_vals[0], dh_vals[0] = h0, dh0
    if not np.all(np.isfinite(h_vals)):
        raise IntegrationError("non-finite forced profile")

    const = growth_constant(mu, n, h0, dh0, sup_g, phi_max)
    if check_growth:
        bound = const * np.cos(phi_nodes) ** (2 - n)
        slack = 1e-6 * const + 10 * tol * (1 + np.max(np.abs(dh_vals)))
        worst = np.max(np.abs(dh_vals) - bound)
        if worst > slack:
            raise GrowthBoundError(
                f"|h'| exceeds C cos^(2-n) by {worst:.3e} (C={const:.6g}, mu={mu}, n={n})")

    return ForcedProfile(
        mu=float(mu), n=n, phi_nodes=phi_nodes, h_values=h_vals, dh_values=dh_vals,
        h0=float(h0), dh0=float(dh0), source_kind=kind, growth_constant=const,
        sup_source=sup_g, phi_max=float(phi_max), _dense=sol.sol,
    )
