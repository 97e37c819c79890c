"""Nodal Lagrange basis at Gauss-Legendre points on the reference cell [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from vsdg.grid import ConfigurationError

MAX_GAUSS_POINTS = 32


@lru_cache(maxsize=None)
def _gauss_legendre_cached(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(n)
    # symmetrize to remove rounding asymmetry of the eigenvalue solver
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1], exact to degree ``2n - 1``."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_GAUSS_POINTS:
        raise ConfigurationError(f"number of Gauss points must be in [1, {MAX_GAUSS_POINTS}], got {n!r}")
    return _gauss_legendre_cached(int(n))


def lagrange_tables(nodes, eval_points) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the Lagrange polynomials on ``nodes``.

    Returns ``(V, D)`` with ``V[i, j] = L_j(eval_points[i])`` and
    ``D[i, j] = L_j'(eval_points[i])``.
    """
    nodes = np.asarray(nodes, dtype=float).ravel()
    x = np.asarray(eval_points, dtype=float).ravel()
    p = nodes.size
    if p == 0:
        raise ConfigurationError("need at least one node")
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0.0):
        raise ConfigurationError("Lagrange nodes must be pairwise distinct")
    denom = np.prod(diff, axis=1)

    dx = x[:, None] - nodes[None, :]  # (m, p)
    V = np.empty((x.size, p))
    D = np.zeros((x.size, p))
    idx = np.arange(p)
    for j in range(p):
        others = idx[idx != j]
        V[:, j] = np.prod(dx[:, others], axis=1) / denom[j]
        for m in others:
            rest = others[others != m]
            D[:, j] += np.prod(dx[:, rest], axis=1)
        D[:, j] /= denom[j]
    return V, D


@dataclass(frozen=True)
class NodalBasis1D:
    """Degree-``k`` Lagrange basis at the ``k + 1`` Gauss-Legendre points.

    Volume and face integrals use ``k + 2`` Gauss points; error norms use
    ``k + 3``. All derivative tables are with respect to the reference
    coordinate; divide by ``h / 2`` for physical derivatives.
    """

    degree: int
    nodes: np.ndarray = field(init=False, repr=False)
    node_weights: np.ndarray = field(init=False, repr=False)
    quad_points: np.ndarray = field(init=False, repr=False)
    quad_weights: np.ndarray = field(init=False, repr=False)
    V: np.ndarray = field(init=False, repr=False)
    D: np.ndarray = field(init=False, repr=False)
    left: np.ndarray = field(init=False, repr=False)
    right: np.ndarray = field(init=False, repr=False)
    dleft: np.ndarray = field(init=False, repr=False)
    dright: np.ndarray = field(init=False, repr=False)
    node_derivative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        k = self.degree
        if not isinstance(k, (int, np.integer)) or k < 0 or k + 3 > MAX_GAUSS_POINTS:
            raise ConfigurationError(f"invalid polynomial degree {k!r}")
        nodes, node_w = gauss_legendre(k + 1)
        qp, qw = gauss_legendre(k + 2)
        V, D = lagrange_tables(nodes, qp)
        ends, dends = lagrange_tables(nodes, [-1.0, 1.0])
        _, Dn = lagrange_tables(nodes, nodes)
        put = object.__setattr__
        put(self, "nodes", nodes)
        put(self, "node_weights", node_w)
        put(self, "quad_points", qp)
        put(self, "quad_weights", qw)
        put(self, "V", V)
        put(self, "D", D)
        put(self, "left", ends[0])
        put(self, "right", ends[1])
        put(self, "dleft", dends[0])
        put(self, "dright", dends[1])
        put(self, "node_derivative", Dn)

    @property
    def n_nodes(self) -> int:
        return self.degree + 1

    @property
    def n_quad(self) -> int:
        return self.degree + 2

    def tables(self, points) -> tuple[np.ndarray, np.ndarray]:
        return lagrange_tables(self.nodes, points)

    def error_rule(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Over-integration rule for error norms: points, weights, value table."""
        xq, wq = gauss_legendre(self.degree + 3)
        V, _ = self.tables(xq)
        return xq, wq, V

    def projection_matrix(self) -> np.ndarray:
        """Maps values at the ``k + 2`` quadrature points to the L2-projection's nodal values.

        The nodal mass matrix is diagonal with entries ``node_weights``.
        """
        return (self.V * self.quad_weights[:, None]).T / self.node_weights[:, None]

    def interpolate(self, values, points) -> np.ndarray:
        V, _ = self.tables(points)
        return V @ np.asarray(values)
