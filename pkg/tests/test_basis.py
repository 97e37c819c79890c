import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vsdg.basis import NodalBasis1D, gauss_legendre, lagrange_tables
from vsdg.grid import ConfigurationError


def test_gauss_legendre_small_rules():
    x, w = gauss_legendre(1)
    np.testing.assert_allclose(x, [0.0], atol=0)
    np.testing.assert_allclose(w, [2.0])
    x, w = gauss_legendre(2)
    np.testing.assert_allclose(x, [-1 / math.sqrt(3), 1 / math.sqrt(3)], rtol=1e-15)
    np.testing.assert_allclose(w, [1.0, 1.0], rtol=1e-15)
    x, w = gauss_legendre(3)
    np.testing.assert_allclose(x, [-math.sqrt(3 / 5), 0.0, math.sqrt(3 / 5)], rtol=1e-15, atol=1e-16)
    np.testing.assert_allclose(w, [5 / 9, 8 / 9, 5 / 9], rtol=1e-15)


@pytest.mark.parametrize("n", [0, 33, -1])
def test_gauss_legendre_range(n):
    with pytest.raises(ConfigurationError):
        gauss_legendre(n)


@pytest.mark.parametrize("n", range(1, 33))
def test_gauss_legendre_symmetric_positive(n):
    x, w = gauss_legendre(n)
    np.testing.assert_array_equal(x, -x[::-1])
    assert np.all(w > 0)
    assert abs(w.sum() - 2.0) <= 1e-13


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**31 - 1))
def test_quadrature_degree_exactness(n, seed):
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal(2 * n)  # degree 2n - 1
    x, w = gauss_legendre(n)
    approx = np.sum(w * np.polynomial.polynomial.polyval(x, coef))
    anti = np.polynomial.polynomial.polyint(coef)
    exact = np.polynomial.polynomial.polyval(1.0, anti) - np.polynomial.polynomial.polyval(-1.0, anti)
    assert abs(approx - exact) <= 1e-12 * max(1.0, np.abs(coef).sum())


def test_lagrange_linear():
    V, D = lagrange_tables([-1.0, 1.0], [0.0])
    np.testing.assert_allclose(V, [[0.5, 0.5]])
    np.testing.assert_allclose(D, [[-0.5, 0.5]])


@pytest.mark.parametrize("k", range(0, 6))
def test_lagrange_cardinality_and_partition_of_unity(k):
    nodes, _ = gauss_legendre(k + 1)
    V, _ = lagrange_tables(nodes, nodes)
    np.testing.assert_allclose(V, np.eye(k + 1), atol=1e-13)
    xs = np.linspace(-1.5, 1.5, 31)
    V, D = lagrange_tables(nodes, xs)
    np.testing.assert_allclose(V.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(D.sum(axis=1), 0.0, atol=1e-11)


def test_lagrange_reproduces_quadratic():
    nodes, _ = gauss_legendre(3)
    V, D = lagrange_tables(nodes, [-1.0, 1.0])
    np.testing.assert_allclose(V @ nodes**2, [1.0, 1.0], atol=1e-13)
    np.testing.assert_allclose(D @ nodes**2, [-2.0, 2.0], atol=1e-12)


def test_lagrange_duplicate_nodes():
    with pytest.raises(ConfigurationError):
        lagrange_tables([0.0, 0.5, 0.5], [0.1])


@pytest.mark.parametrize("k", range(0, 5))
def test_derivative_matches_finite_differences(k):
    nodes, _ = gauss_legendre(k + 1)
    xs = np.linspace(-0.9, 0.9, 7)
    step = 1e-6
    _, D = lagrange_tables(nodes, xs)
    Vp, _ = lagrange_tables(nodes, xs + step)
    Vm, _ = lagrange_tables(nodes, xs - step)
    fd = (Vp - Vm) / (2 * step)
    scale = np.maximum(np.abs(D), 1.0)
    assert np.all(np.abs(fd - D) <= 1e-6 * scale)


@pytest.mark.parametrize("k", range(0, 5))
def test_nodal_basis_traces(k):
    b = NodalBasis1D(k)
    assert b.n_nodes == k + 1 and b.n_quad == k + 2
    rng = np.random.default_rng(k)
    c = rng.standard_normal(k + 1)
    direct = np.polynomial.polynomial.polyval(b.nodes, c)
    np.testing.assert_allclose(b.left @ direct, np.polynomial.polynomial.polyval(-1.0, c), atol=1e-12)
    np.testing.assert_allclose(b.right @ direct, np.polynomial.polynomial.polyval(1.0, c), atol=1e-12)
    dc = np.polynomial.polynomial.polyder(c)
    np.testing.assert_allclose(b.dright @ direct, np.polynomial.polynomial.polyval(1.0, dc), atol=1e-11)


@pytest.mark.parametrize("k", range(0, 5))
def test_projection_reproduces_polynomials(k):
    b = NodalBasis1D(k)
    c = np.arange(1.0, k + 2)
    at_quad = np.polynomial.polynomial.polyval(b.quad_points, c)
    at_nodes = np.polynomial.polynomial.polyval(b.nodes, c)
    np.testing.assert_allclose(b.projection_matrix() @ at_quad, at_nodes, atol=1e-12)


def test_negative_degree_rejected():
    with pytest.raises(ConfigurationError):
        NodalBasis1D(-1)
