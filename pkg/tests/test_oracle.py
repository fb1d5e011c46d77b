import numpy as np
import pytest

from mbpcn.grid import laplacian
from mbpcn.mobility import constant_mobility, degenerate_mobility, s2_lower_bound, tau_max_conditional
from mbpcn.oracle import (
    OracleDimensionError,
    SingularMatrixError,
    assemble_dh,
    assemble_gh,
    check_q_matrix,
    dense_step,
    lu_solve,
    q_matrix,
    verify_all,
)
from mbpcn.scheme import SchemeParams


def test_gh_smallest_case():
    np.testing.assert_array_equal(assemble_gh(2, 1.0), [[-1, 1], [1, -1]])


@pytest.mark.parametrize("m", [2, 3, 4, 9, 16])
def test_gh_and_dh_structure(m):
    h = 0.3
    for a in (assemble_gh(m, h), assemble_dh(m, h)):
        np.testing.assert_allclose(a.sum(axis=1), 0, atol=1e-12)
        np.testing.assert_array_equal(a, a.T)
        assert np.linalg.eigvalsh(a).max() <= 1e-10


def test_gh_diagonal():
    np.testing.assert_array_equal(np.diag(assemble_gh(5, 0.5)), np.array([-1, -2, -2, -2, -1]) / 0.25)


@pytest.mark.parametrize("m", [1, 65])
def test_dimension_cap(m):
    with pytest.raises(OracleDimensionError):
        assemble_dh(m, 1.0)


@pytest.mark.parametrize("m", range(2, 9))
def test_dh_matches_stencil(m):
    rng = np.random.default_rng(m)
    d = assemble_dh(m, 1 / m)
    for _ in range(20):
        u = rng.standard_normal((m, m))
        ref = d @ u.ravel()
        assert np.abs(laplacian(u, 1 / m).ravel() - ref).max() <= 1e-13 * np.abs(ref).max()


def test_lu_solve():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((12, 12))
    b = rng.standard_normal(12)
    np.testing.assert_allclose(a @ lu_solve(a, b), b, atol=1e-10)
    # zero leading entry needs a row exchange
    np.testing.assert_allclose(lu_solve(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([2.0, 3.0])), [3.0, 2.0])
    with pytest.raises(SingularMatrixError):
        lu_solve(np.ones((3, 3)), np.ones(3))


def test_q_matrix_regimes():
    m, s1 = 6, 0.8
    h = 1 / m
    eps = h
    lam = np.random.default_rng(1).uniform(0, 1, (m, m))
    params = SchemeParams(eps, s1, s2_lower_bound(s1, 1.0, eps, h))
    for tau in (1e-4, 0.3, 7.0, 1e4):
        chk = check_q_matrix(q_matrix(tau, params, lam, h), tau, params)
        assert chk.nonnegative and chk.row_sums_ok

    cond = SchemeParams(eps, s1, 0.0)
    tau = tau_max_conditional(s1, 1.0, eps, h)
    assert check_q_matrix(q_matrix(tau, cond, lam, h), tau, cond).nonnegative

    # past the bound the diagonal 1/tau - S1/2 - 2 L eps^2/h^2 turns negative
    q = q_matrix(10 * tau, cond, np.ones((m, m)), h)
    assert q.min() < 0
    assert np.diag(q).min() == pytest.approx(1 / (10 * tau) - s1 / 2 - 2 * eps**2 / h**2)


def test_q_matrix_rejects_negative_mobility():
    with pytest.raises(ValueError):
        q_matrix(0.1, SchemeParams(0.1, 1.0), -np.ones((3, 3)), 0.3)


@pytest.mark.parametrize("which", ["bdf1", "cn"])
@pytest.mark.parametrize("value", [-1.0, 0.0, 1.0])
def test_dense_step_fixed_points(which, value):
    out = dense_step(np.full((4, 4), value), 0.5, 0.25, SchemeParams(0.1, 2.0, 1.0), degenerate_mobility(), which)
    final = out if which == "bdf1" else out[1]
    np.testing.assert_allclose(final, value, atol=1e-14)


def test_dense_step_unknown_kind():
    with pytest.raises(ValueError):
        dense_step(np.zeros((3, 3)), 0.1, 0.3, SchemeParams(0.1, 2.0), constant_mobility(), "rk4")


def test_verify_all_passes():
    results = verify_all(trials=50, seed=3)
    failed = [r for r in results if not r.passed]
    assert not failed, failed
    assert len({r.name for r in results}) == len(results)
