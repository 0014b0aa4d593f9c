import math
import warnings

import numpy as np
import pytest

import scipy.sparse as sp

from thinobs.errors import ConvergenceError, NegativeCurvatureError
from thinobs.spectral import (ClusterWarning, Role, assemble, build_grid, eigenpairs, kth_eigenpair,
                              lowest_eigenpair, mu_from_lambda, nodal_sign_check, pcg, snap_index)


def test_grid_roles():
    g = build_grid(3, 0.25, 33, 17)
    r = g.node_roles
    assert g.slit_end_index == 8 and g.sigma == 0.25
    assert np.all(r[0, :9] == Role.DIRICHLET_SLIT)
    assert np.all(r[0, 9:-1] == Role.NEUMANN_EQUATOR)
    assert r[0, -1] == Role.DIRICHLET_SIDE
    assert np.all(r[1:-1, 0] == Role.DIRICHLET_SIDE) and np.all(r[1:-1, -1] == Role.DIRICHLET_SIDE)
    assert np.all(r[-1] == Role.DIRICHLET_POLE)


def test_snapping_reports_requested_and_snapped():
    g = build_grid(5, 0.4, 33, 33)
    assert g.sigma_requested == 0.4
    assert g.sigma == snap_index(0.4, 33) / 32


@pytest.mark.parametrize("kwargs", [dict(m=3, sigma=-0.1, Nx=33, Nphi=33), dict(m=3, sigma=1.5, Nx=33, Nphi=33),
                                    dict(m=0, sigma=0.5, Nx=33, Nphi=33), dict(m=3, sigma=0.5, Nx=8, Nphi=33),
                                    dict(m=3, sigma=math.nan, Nx=33, Nphi=33)])
def test_grid_rejects_bad_input(kwargs):
    with pytest.raises(ValueError):
        build_grid(**kwargs)


def test_operator_symmetric_and_annihilates_constants():
    op = assemble(build_grid(3, 0.5, 33, 33))
    assert abs(op.full_A - op.full_A.T).max() == 0
    assert np.max(np.abs(op.full_A @ np.ones(op.full_A.shape[0]))) < 1e-12
    assert np.all(op.mass_diag > 0)


def test_rayleigh_quotient_of_exact_mode():
    g = build_grid(3, 0.0, 129, 129)
    op = assemble(g)
    f = op.from_grid(np.cos(g.phi_nodes)[:, None] ** 3 * np.sin(g.x_nodes)[None, :])
    rq = f @ (op.A @ f) / (f @ (op.mass_diag * f))
    assert rq == pytest.approx(12.0, rel=2e-3)


def test_mesh_convergence_order():
    errs = [abs(lowest_eigenpair(assemble(build_grid(3, 0.0, n, n))).mu - 3.0) for n in (33, 65, 129)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 1.9


def test_mu_increases_with_sigma():
    mus = [lowest_eigenpair(assemble(build_grid(3, s, 49, 49))).mu for s in (0.0, 0.25, 0.5, 0.75, 1.0)]
    assert all(a < b for a, b in zip(mus, mus[1:]))


@pytest.mark.parametrize("sigma,target", [(0.0, 7.0), (1.0, 8.0)])
def test_second_eigenpair(sigma, target):
    pair = kth_eigenpair(assemble(build_grid(5, sigma, 129, 129)), 2)
    assert pair.k == 2
    assert pair.mu == pytest.approx(target, abs=5e-3)


def test_pairs_are_b_orthogonal_and_normalized():
    op = assemble(build_grid(3, 0.5, 49, 49))
    pairs = eigenpairs(op, 3)
    vs = [p.active_values(op) for p in pairs]
    for i in range(3):
        for j in range(i):
            cos = vs[i] @ (op.mass_diag * vs[j]) / math.sqrt((vs[i] @ (op.mass_diag * vs[i])) *
                                                             (vs[j] @ (op.mass_diag * vs[j])))
            assert abs(cos) < 1e-7
    assert all(p.residual < 1e-9 for p in pairs)
    assert all(np.max(p.v) == 1.0 for p in pairs)
    assert [p.lam for p in pairs] == sorted(p.lam for p in pairs)


def test_dirichlet_nodes_are_zero():
    g = build_grid(3, 0.5, 33, 33)
    pair = lowest_eigenpair(assemble(g))
    assert np.all(pair.v[~g.active] == 0.0)


def test_cg_matches_direct():
    op = assemble(build_grid(3, 0.5, 33, 33))
    a = lowest_eigenpair(op, 1e-9, inner="direct")
    b = lowest_eigenpair(op, 1e-9, inner="cg")
    assert b.lam == pytest.approx(a.lam, rel=1e-8)
    assert np.max(np.abs(a.v - b.v)) < 1e-6


def test_pcg_solves_spd_system():
    op = assemble(build_grid(3, 0.5, 33, 33))
    rhs = np.ones(op.dimension)
    x, its = pcg(op.A, rhs, op.A.diagonal(), rtol=1e-12)
    assert np.linalg.norm(op.A @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)
    with pytest.raises(ConvergenceError):
        pcg(op.A, rhs, op.A.diagonal(), rtol=1e-14, maxiter=2)


def test_pcg_detects_indefinite_matrix():
    A = sp.diags([1.0, -1.0]).tocsr()
    with pytest.raises(NegativeCurvatureError):
        pcg(A, np.array([0.0, 1.0]), np.ones(2))


def test_cluster_warning():
    op = assemble(build_grid(3, 0.5, 33, 33))
    with pytest.warns(ClusterWarning):
        eigenpairs(op, 2, cluster_tol=10.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", ClusterWarning)
        eigenpairs(op, 2)


@pytest.mark.parametrize("kwargs", [dict(k=0), dict(k=13), dict(tol=0.0), dict(tol=1e-3), dict(inner="qr")])
def test_eigenpairs_rejects_bad_input(kwargs):
    op = assemble(build_grid(3, 0.5, 33, 33))
    with pytest.raises(ValueError):
        eigenpairs(op, **kwargs)


def test_nodal_sign_check():
    g = build_grid(3, 0.5, 49, 49)
    pair = lowest_eigenpair(assemble(g))
    assert nodal_sign_check(pair, g)
    flipped = type(pair)(k=1, lam=pair.lam, mu=pair.mu, v=pair.v * np.sign(g.x_nodes - 1.5)[None, :],
                         residual=0.0, iterations=0)
    assert not nodal_sign_check(flipped, g)


def test_mu_from_lambda():
    assert mu_from_lambda(12.0) == 3.0
    assert mu_from_lambda(0.0) == 0.0
    with pytest.raises(ValueError):
        mu_from_lambda(-1.0)
