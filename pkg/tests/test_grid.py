import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mbpcn.grid import (
    Domain2D,
    div,
    grad,
    inner_edge,
    inner_l2,
    laplacian,
    norm_h1,
    norm_l2,
    norm_sup,
    seminorm_h1,
)


def test_domain_geometry():
    d = Domain2D(1.0, 4)
    assert d.spacing == 0.25
    np.testing.assert_allclose(d.centers(), [0.125, 0.375, 0.625, 0.875])
    c = Domain2D(1.0, 4, centered=True)
    np.testing.assert_allclose(c.centers(), [-0.375, -0.125, 0.125, 0.375])
    x, y = d.mesh()
    assert x[1, 0] == 0.375 and y[0, 1] == 0.375  # ij indexing: row i follows x


@pytest.mark.parametrize("m", [0, 1])
def test_domain_rejects_tiny_grids(m):
    with pytest.raises(ValueError):
        Domain2D(1.0, m)


def test_laplacian_of_constant_vanishes():
    u = np.full((7, 7), 3.25)
    np.testing.assert_array_equal(laplacian(u, 0.1), 0.0)


@pytest.mark.parametrize("k,l", [(1, 0), (2, 3), (5, 5)])
def test_laplacian_cosine_eigenpairs(k, l):
    # cos(k pi x / L) sampled at cell centres is a discrete Neumann eigenvector
    # with eigenvalue -(4/h^2) sin^2(k pi h / 2L)
    m, side = 32, 2.0
    d = Domain2D(side, m)
    h = d.spacing
    x, y = d.mesh()
    u = np.cos(k * np.pi * x / side) * np.cos(l * np.pi * y / side)
    lam = -4 / h**2 * (np.sin(k * np.pi * h / (2 * side)) ** 2 + np.sin(l * np.pi * h / (2 * side)) ** 2)
    np.testing.assert_allclose(laplacian(u, h), lam * u, atol=1e-10 * abs(lam) + 1e-12)


def test_div_grad_is_laplacian():
    rng = np.random.default_rng(1)
    u = rng.standard_normal((9, 9))
    np.testing.assert_allclose(div(*grad(u, 0.3), 0.3), laplacian(u, 0.3), rtol=1e-12, atol=1e-10)


def test_boundary_faces_carry_no_flux():
    gx, gy = grad(np.random.default_rng(2).standard_normal((5, 5)), 1.0)
    assert gx.shape == (6, 5) and gy.shape == (5, 6)
    assert not gx[0].any() and not gx[-1].any()
    assert not gy[:, 0].any() and not gy[:, -1].any()


fields = st.integers(2, 10).flatmap(
    lambda m: st.tuples(
        arrays(np.float64, (m, m), elements=st.floats(-10, 10)),
        arrays(np.float64, (m, m), elements=st.floats(-10, 10)),
    )
)


@settings(max_examples=60, deadline=None)
@given(fields, st.floats(0.01, 2.0))
def test_summation_by_parts(uv, h):
    u, v = uv
    lhs = -inner_l2(laplacian(u, h), v, h)
    rhs = inner_edge(grad(u, h), grad(v, h), h)
    scale = 1 + norm_h1(u, h) * norm_h1(v, h)
    assert abs(lhs - rhs) <= 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(fields, st.floats(0.01, 2.0))
def test_laplacian_symmetric_and_nonpositive(uv, h):
    u, v = uv
    a = inner_l2(laplacian(u, h), v, h)
    b = inner_l2(u, laplacian(v, h), h)
    assert abs(a - b) <= 1e-9 * (1 + abs(a))
    assert inner_l2(laplacian(u, h), u, h) <= 1e-9 * (1 + norm_h1(u, h) ** 2)


def test_norms():
    u = np.array([[1.0, -2.0], [0.5, 0.0]])
    h = 0.5
    assert norm_sup(u) == 2.0
    assert norm_l2(u, h) == pytest.approx(np.sqrt(0.25 * 5.25))
    assert seminorm_h1(np.ones((3, 3)), h) == 0.0
    assert norm_h1(u, h) ** 2 == pytest.approx(norm_l2(u, h) ** 2 + seminorm_h1(u, h) ** 2)
