"""From an eigenfunction on the slit wedge to the candidate solution ``u``.

Given ``v`` (vanishing on the slit and on both meridians, even across the rest
of the equator) the candidate is

    u(theta, phi) = integral_0^theta v(s, phi) ds + h(phi),

with ``h`` solving a forced Legendre equation launched at the equator.  The
number ``c`` measures the point mass that ``L_mu u`` carries at the north pole;
``u`` is a genuine homogeneous solution of the thin obstacle problem exactly
when ``c = 0``.

The equator flux ``v_phi(s, 0+)`` on the slit is available two ways:

``"stencil"``
    second-order one-sided three-point difference in ``phi``;
``"flux"``
    the variationally consistent flux, i.e. minus the residual of the discrete
    operator on the slit nodes divided by the trapezoid weight.  It is exact for
    the discrete Green identity and is not degraded by the square-root
    singularity at the slit tip, so it is the default for locating roots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline

from .legendre import LegendreEval, ForcedProfile, solve_h
from .spectral import EigenPair, SparseOperator, WedgeGrid

PHI_MAX = np.pi / 2 - 0.02
FLUX_METHODS = ("flux", "stencil")


def one_sided(f0, f1, f2, h):
    """Second-order forward difference at the first of three equally spaced samples."""
    return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)


def one_sided4(f, h):
    """Fourth-order forward difference at ``f[0]`` from the first five rows of ``f``."""
    return (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)


def equator_derivative(rows, h, order: int = 4):
    """``d/dphi`` at the first row, by the three-point (order 2) or five-point (order 4) stencil."""
    if order == 2:
        return one_sided(rows[0], rows[1], rows[2], h)
    if order == 4:
        return one_sided4(rows, h)
    raise ValueError(f"stencil order must be 2 or 4, got {order}")


@dataclass(frozen=True, eq=False)
class EquatorTrace:
    m: int
    sigma: float
    s_nodes: np.ndarray  # theta values on [0, pi/m]
    v_eq: np.ndarray
    dv_eq: np.ndarray  # one-sided stencil on the slit, zero on the Neumann part
    dv_raw: np.ndarray  # the same stencil on every equator node
    flux_eq: np.ndarray  # consistent flux density on the slit, zero elsewhere
    slit_end_index: int

    @property
    def on_slit(self) -> np.ndarray:
        return np.arange(self.s_nodes.size) <= self.slit_end_index

    def derivative(self, method: str = "flux") -> np.ndarray:
        if method == "flux":
            return self.flux_eq
        if method == "stencil":
            return self.dv_eq
        raise ValueError(f"unknown flux method {method!r}; expected one of {FLUX_METHODS}")


def extract_trace(pair: EigenPair, grid: WedgeGrid, op: Optional[SparseOperator] = None) -> EquatorTrace:
    """Sample ``v(s, 0)`` and ``v_phi(s, 0+)`` on the equator nodes.

    ``op`` supplies the assembled operator for the consistent flux; it is
    rebuilt from ``grid`` when omitted.
    """
    from .spectral import assemble

    if op is None:
        op = assemble(grid)
    v = pair.v
    s = grid.theta_nodes
    dv_raw = one_sided(v[0], v[1], v[2], grid.dphi)
    on_slit = np.arange(grid.Nx) <= grid.slit_end_index
    dv = np.where(on_slit, dv_raw, 0.0)

    # discrete Green identity: sum_i R_i w_i = -integral v_phi w dtheta for w on the slit
    resid = (op.full_A @ v.ravel() - pair.lam * op.full_mass * v.ravel()).reshape(grid.shape)[0]
    weights = np.full(grid.Nx, s[1] - s[0])
    weights[0] = weights[-1] = 0.5 * (s[1] - s[0])
    flux = np.where(on_slit, -resid / weights, 0.0)

    return EquatorTrace(m=grid.m, sigma=grid.sigma, s_nodes=s, v_eq=v[0].copy(), dv_eq=dv,
                        dv_raw=dv_raw, flux_eq=flux, slit_end_index=grid.slit_end_index)


def trace_integrals(trace: EquatorTrace, method: str = "flux"):
    """``(integral v_phi s ds, integral v (pi/m - s) ds)`` by the composite trapezoid rule."""
    s = trace.s_nodes
    length = np.pi / trace.m
    dv = trace.derivative(method)
    return trapezoid(dv * s, s), trapezoid(trace.v_eq * (length - s), s)


def c_by_quantity(trace: EquatorTrace, leg: LegendreEval, method: str = "flux") -> float:
    """``c = 2m [p(0) int v_phi s ds + p'(0) int v (pi/m - s) ds]``."""
    i_dv, i_v = trace_integrals(trace, method)
    return 2 * trace.m * (leg.p0 * i_dv + leg.dp0 * i_v)


def meridian_derivative(pair: EigenPair, grid: WedgeGrid) -> np.ndarray:
    """``v_theta(0, phi)`` on every latitude node by the one-sided stencil in ``x``."""
    v = pair.v
    return grid.m * one_sided(v[:, 0], v[:, 1], v[:, 2], grid.dx)


def build_h(pair: EigenPair, grid: WedgeGrid, trace: EquatorTrace, phi_max: float = PHI_MAX,
            tol: float = 1e-10, method: str = "flux", dh0: Optional[float] = None) -> ForcedProfile:
    """Solve for ``h`` with ``h(0) = 0`` and ``h'(0) = -int v_phi(s, 0+) ds``.

    The source ``-v_theta(0, phi) / cos(phi)`` is interpolated by a cubic spline
    through the meridian samples.  ``dh0`` overrides the initial slope.
    """
    phi = grid.phi_nodes
    vth = meridian_derivative(pair, grid)
    keep = phi < np.pi / 2  # drop the pole node where cos vanishes
    keep[-1] = False
    g_samples = -vth[keep] / np.cos(phi[keep])
    spline = CubicSpline(phi[keep], g_samples)
    if dh0 is None:
        dh0 = -trapezoid(trace.derivative(method), trace.s_nodes)
    nodes = phi[phi <= phi_max]
    return solve_h(pair.mu, 3, spline, 0.0, dh0, phi_max, tol=tol, phi_nodes=nodes,
                   source_kind="interpolated")


@dataclass(frozen=True, eq=False)
class SignReport:
    slit_u_max: float  # max |u| on the slit
    slit_uphi_max: float  # max u_phi on the slit (should be <= 0)
    open_u_min: float  # min u off the slit (should be >= 0)
    open_uphi_max: float  # max |u_phi| off the slit
    complementarity: float  # max |u * u_phi| on the equator
    side_u_theta: float  # max |u_theta| on the two meridians
    stencil_open_uphi_max: float  # off-slit |u_phi| from the stencil, a discretization diagnostic
    tolerance: float
    passed: bool

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True, eq=False)
class SolutionBundle:
    m: int
    sigma: float
    mu: float
    k: int
    v: np.ndarray
    h: ForcedProfile
    u: np.ndarray  # rows phi_j <= phi_max, columns theta_i
    theta_nodes: np.ndarray
    phi_nodes: np.ndarray
    trace: EquatorTrace
    uphi_eq: np.ndarray  # u_phi(theta, 0+) from the trace
    uphi_stencil: np.ndarray  # u_phi(theta, 0+) from the stencil applied to u
    c_quantity: float
    c_parts: float
    method: str
    sign_report: SignReport
    p0: float = 0.0
    dp0: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def u_eq(self) -> np.ndarray:
        return self.u[0]


def sign_report(u_eq, uphi_eq, uphi_stencil, on_slit, v, tol=1e-6) -> SignReport:
    """The three equator conditions and the side condition, with ``tol`` scaled to ``max|u_phi|``."""
    scale = max(1.0, float(np.max(np.abs(uphi_eq))), float(np.max(np.abs(u_eq))))
    off = ~on_slit
    slit_u = float(np.max(np.abs(u_eq[on_slit]))) if on_slit.any() else 0.0
    slit_uphi = float(np.max(uphi_eq[on_slit])) if on_slit.any() else 0.0
    open_u = float(np.min(u_eq[off])) if off.any() else 0.0
    open_uphi = float(np.max(np.abs(uphi_eq[off]))) if off.any() else 0.0
    stencil_open = float(np.max(np.abs(uphi_stencil[off]))) if off.any() else 0.0
    comp = float(np.max(np.abs(u_eq * uphi_eq)))
    side = float(max(np.max(np.abs(v[:, 0])), np.max(np.abs(v[:, -1]))))
    thr = tol * scale
    passed = (slit_u <= thr and slit_uphi <= thr and open_u >= -thr and open_uphi <= thr
              and comp <= thr * scale and side <= thr)
    return SignReport(slit_u, slit_uphi, open_u, open_uphi, comp, side, stencil_open, thr, passed)


def build_u(pair: EigenPair, h: ForcedProfile, grid: WedgeGrid, trace: EquatorTrace,
            leg: LegendreEval, method: str = "flux", tol: float = 1e-6, parts_order: int = 4) -> SolutionBundle:
    """Assemble ``u`` on the rows ``phi <= phi_max`` and evaluate ``c`` both ways.

    ``parts_order`` selects the one-sided stencil for ``u_phi`` in ``c_parts``.
    The latitude is not rescaled with ``m`` while ``v`` decays like ``cos^m``, so
    the three-point stencil loses accuracy as ``(m dphi)^2``; the five-point one
    keeps ``c_parts`` usable at ``m = 15``.
    """
    theta = grid.theta_nodes
    nrows = h.phi_nodes.size
    if nrows < 5:
        raise ValueError("need at least five latitude rows below phi_max")
    rows = pair.v[:nrows]
    u = cumulative_trapezoid(rows, theta, axis=1, initial=0.0) + h.h_values[:, None]

    dv = trace.derivative(method)
    uphi_eq = h.dh0 + cumulative_trapezoid(dv, theta, initial=0.0)
    uphi_st = equator_derivative(u, grid.dphi, parts_order)

    report = sign_report(u[0], uphi_eq, uphi_st, trace.on_slit, pair.v, tol)
    bundle = SolutionBundle(
        m=grid.m, sigma=grid.sigma, mu=pair.mu, k=pair.k, v=pair.v, h=h, u=u,
        theta_nodes=theta, phi_nodes=h.phi_nodes, trace=trace, uphi_eq=uphi_eq,
        uphi_stencil=uphi_st, c_quantity=c_by_quantity(trace, leg, method), c_parts=np.nan,
        method=method, sign_report=report, p0=leg.p0, dp0=leg.dp0,
    )
    object.__setattr__(bundle, "c_parts", c_by_parts(bundle, leg))
    return bundle


def c_by_parts(bundle: SolutionBundle, leg: LegendreEval) -> float:
    """``c = 2m [-p(0) int u_phi(t, 0+) dt + p'(0) int u(t, 0) dt]`` with the one-sided stencil ``u_phi``."""
    t = bundle.theta_nodes
    return 2 * bundle.m * (-leg.p0 * trapezoid(bundle.uphi_stencil, t)
                           + leg.dp0 * trapezoid(bundle.u_eq, t))


def magnitude_scale(trace: EquatorTrace, leg: LegendreEval, method: str = "flux") -> float:
    """``|p0| ||dv||_1 pi/m + |p0'| ||v||_1 pi/m``, the yardstick for comparing the two ``c`` values."""
    s = trace.s_nodes
    length = np.pi / trace.m
    dv = trace.derivative(method)
    return (abs(leg.p0) * trapezoid(np.abs(dv), s) * length
            + abs(leg.dp0) * trapezoid(np.abs(trace.v_eq), s) * length)
