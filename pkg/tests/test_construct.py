import math

import numpy as np
import pytest

from thinobs.construct import (build_h, c_by_quantity, equator_derivative, extract_trace, magnitude_scale,
                               sign_report, trace_integrals)
from thinobs.gaps import boundary_pairing
from thinobs.legendre import solve_p
from thinobs.pipeline import build_bundle, evaluate_c, solve_eigen

RES = (129, 129)
# max of cos^3(phi) sin(phi), the sup-normalization of the sigma = 1 mode
SIGMA1_PEAK = (math.sqrt(3) / 2) ** 3 / 2


@pytest.fixture(scope="module")
def ends():
    return {s: build_bundle(3, s, 1, RES) for s in (0.0, 1.0)}


def test_sigma0_trace(ends):
    _, pair, b = ends[0.0]
    s = b.trace.s_nodes
    assert np.max(np.abs(b.trace.v_eq - np.sin(3 * s))) < 1e-12
    i_dv, i_v = trace_integrals(b.trace)
    assert i_dv == 0.0
    assert i_v == pytest.approx(math.pi / 9, rel=1e-3)


def test_sigma1_trace(ends):
    _, pair, b = ends[1.0]
    s = b.trace.s_nodes
    assert np.all(b.trace.v_eq == 0.0)
    assert np.max(np.abs(b.trace.flux_eq * SIGMA1_PEAK - np.sin(3 * s))) < 1e-3
    assert b.trace.derivative("stencil") == pytest.approx(b.trace.flux_eq, abs=5e-3)
    assert b.h.dh0 == pytest.approx(-(2 / 3) / SIGMA1_PEAK, rel=1e-3)


def test_endpoint_c_closed_forms(ends):
    # sigma = 0: 2m p'(0) pi/m^2 with p = P_3; sigma = 1: 2m p(0) int v_phi s ds with p = P_4
    assert ends[0.0][2].c_quantity == pytest.approx(-math.pi, rel=1e-3)
    assert ends[1.0][2].c_quantity == pytest.approx(6 * 0.375 * (math.pi / 9) / SIGMA1_PEAK, rel=1e-3)


def test_u_at_sigma0(ends):
    b = ends[0.0][2]
    s = b.theta_nodes
    assert np.max(np.abs(b.u_eq - (1 - np.cos(3 * s)) / 3)) < 1e-3


def test_odd_m_endpoint_signs_differ():
    assert evaluate_c(3, 0.0, 1, RES).c < 0 < evaluate_c(3, 1.0, 1, RES).c


@pytest.mark.parametrize("alpha", [0.5, 2.0])
def test_c_is_linear_in_v(alpha):
    grid, op, pair = solve_eigen(3, 0.5, 1, (65, 65))
    leg = solve_p(pair.mu)
    base = c_by_quantity(extract_trace(pair, grid, op), leg)
    scaled = type(pair)(k=1, lam=pair.lam, mu=pair.mu, v=alpha * pair.v, residual=0.0, iterations=0)
    assert c_by_quantity(extract_trace(scaled, grid, op), leg) == pytest.approx(alpha * base, rel=1e-12)


def test_h_override_slope():
    grid, op, pair = solve_eigen(3, 0.5, 1, (65, 65))
    h = build_h(pair, grid, extract_trace(pair, grid, op), dh0=0.25)
    assert h.dh0 == 0.25 and h.h_values[0] == 0.0


def test_sign_report_interior_sigma():
    _, _, b = build_bundle(3, 0.42, 1, RES)
    rep = b.sign_report
    assert rep.passed
    assert rep.slit_u_max == 0.0
    assert rep.open_u_min >= -rep.tolerance


def test_sign_report_flags_violation():
    on = np.array([True, True, False, False])
    rep = sign_report(np.array([0.0, 0.0, -0.5, 0.1]), np.array([-1.0, -0.5, 0.0, 0.0]), np.zeros(4), on,
                      np.zeros((3, 3)))
    assert not rep.passed and rep.open_u_min == -0.5


def test_dual_formula_agrees():
    _, pair, b = build_bundle(5, 0.5, 1, RES)
    leg = solve_p(pair.mu)
    assert abs(b.c_quantity - b.c_parts) <= 0.02 * magnitude_scale(b.trace, leg)


def test_boundary_pairing_is_c_over_2m():
    _, pair, b = build_bundle(3, 0.5, 1, RES)
    leg = solve_p(pair.mu)
    assert boundary_pairing(b.u_eq, b.uphi_stencil, b.theta_nodes, leg) == pytest.approx(b.c_parts / 6, rel=1e-12)
    assert boundary_pairing(b.u_eq, b.uphi_eq, b.theta_nodes, leg) == pytest.approx(b.c_quantity / 6, rel=2e-2)


@pytest.mark.parametrize("order,degree", [(2, 2), (4, 4)])
def test_equator_derivative_exact_on_polynomials(order, degree):
    h = 0.1
    phi = h * np.arange(5)
    rows = np.stack([phi**degree + 2 * phi, phi**degree + 2 * phi])
    assert equator_derivative(rows.T, h, order) == pytest.approx([2.0, 2.0], rel=1e-10)


def test_equator_derivative_rejects_order():
    with pytest.raises(ValueError):
        equator_derivative(np.zeros((5, 3)), 0.1, 3)


def test_unknown_flux_method():
    grid, op, pair = solve_eigen(3, 0.5, 1, (33, 33))
    with pytest.raises(ValueError):
        extract_trace(pair, grid, op).derivative("spectral")
