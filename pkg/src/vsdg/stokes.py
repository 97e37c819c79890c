"""Symmetric interior penalty dG discretization of the unsteady Stokes step.

Scalar spatial fields are 2D arrays of nodal values ``(N1, N2)`` with
``N = n_cells * (k + 1)`` per axis (cell-major); vector fields stack two of
them, ``(2, N1, N2)``. The global index of a scalar unknown is its flat
C-order position.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from vsdg.basis import NodalBasis1D
from vsdg.grid import ConfigurationError, IntervalMesh, build_interval_mesh
from vsdg.linalg import SolveInfo, SolverConfig, solve
from vsdg.tensor import apply_all_axes

logger = logging.getLogger(__name__)


class SpatialSpace:
    """Broken degree-k tensor polynomials on a periodic 2D Cartesian mesh."""

    def __init__(self, mesh_x1: IntervalMesh, mesh_x2: IntervalMesh, basis: NodalBasis1D):
        if not (mesh_x1.periodic and mesh_x2.periodic):
            raise ConfigurationError("spatial meshes must be periodic")
        self.mesh_x1 = mesh_x1
        self.mesh_x2 = mesh_x2
        self.meshes = (mesh_x1, mesh_x2)
        self.basis = basis

    @classmethod
    def build(cls, n: int, k: int, a: float = 0.0, b: float = 1.0) -> "SpatialSpace":
        return cls(build_interval_mesh(a, b, n, True), build_interval_mesh(a, b, n, True), NodalBasis1D(k))

    @property
    def p(self) -> int:
        return self.basis.n_nodes

    @property
    def shape(self) -> tuple[int, int]:
        return (self.mesh_x1.n_cells * self.p, self.mesh_x2.n_cells * self.p)

    @property
    def n_scalar(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def h(self) -> float:
        return max(self.mesh_x1.h, self.mesh_x2.h)

    @property
    def area(self) -> float:
        return self.mesh_x1.length * self.mesh_x2.length

    @cached_property
    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(m.physical_points(self.basis.nodes).ravel() for m in self.meshes)

    @cached_property
    def quad_points(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(m.physical_points(self.basis.quad_points).ravel() for m in self.meshes)

    @cached_property
    def weights(self) -> np.ndarray:
        """Nodal quadrature weights as a ``(N1, N2)`` array (the diagonal mass matrix)."""
        w = [np.tile(0.5 * m.h * self.basis.node_weights, m.n_cells) for m in self.meshes]
        return w[0][:, None] * w[1][None, :]

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        """Global scalar indices of each cell's unknowns, ``(n_cells, p * p)``, cells ordered ``c1 * n2 + c2``."""
        n1, n2, p = self.mesh_x1.n_cells, self.mesh_x2.n_cells, self.p
        N2 = n2 * p
        i1 = (np.arange(n1)[:, None] * p + np.arange(p)[None, :])  # (n1, p)
        i2 = (np.arange(n2)[:, None] * p + np.arange(p)[None, :])  # (n2, p)
        dofs = i1[:, None, :, None] * N2 + i2[None, :, None, :]
        return dofs.reshape(n1 * n2, p * p)

    def interpolate(self, fn: Callable, t: float = 0.0) -> np.ndarray:
        x1, x2 = self.nodes
        return np.asarray(fn(t, x1[:, None], x2[None, :]), dtype=float)

    def at_quad_points(self, values: np.ndarray) -> np.ndarray:
        """Evaluate nodal field(s) at the ``k + 2``-point tensor quadrature grid (last two axes)."""
        V = self.basis.V
        lead = values.shape[:-2]
        flat = values.reshape((-1,) + values.shape[-2:])
        out = np.stack([apply_all_axes(v, (V, V)) for v in flat])
        return out.reshape(lead + out.shape[-2:])

    def load_vector(self, quad_values: np.ndarray) -> np.ndarray:
        """``(g, phi_i)`` for data sampled on the quadrature grid; returns a ``(N1, N2)`` array."""
        mats = [(self.basis.V * self.basis.quad_weights[:, None]).T * (0.5 * m.h) for m in self.meshes]
        return apply_all_axes(quad_values, mats)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values * self.weights))

    def mean(self, values: np.ndarray) -> float:
        return self.integrate(values) / self.area


# ---------------------------------------------------------------- assembly


def _coo(rows, cols, vals, shape) -> sp.csr_matrix:
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


class _Tables:
    """2D reference tables on one cell and on x1-/x2-normal faces."""

    def __init__(self, space: SpatialSpace):
        b = space.basis
        h1, h2 = space.mesh_x1.h, space.mesh_x2.h
        V, D, w = b.V, b.D, b.quad_weights
        self.p = b.n_nodes
        # volume: quadrature index (q1, q2) -> flat; basis (a, b) -> flat
        self.phi = np.einsum("ia,jb->ijab", V, V).reshape(w.size**2, self.p**2)
        self.d1 = np.einsum("ia,jb->ijab", D, V).reshape(w.size**2, self.p**2) * (2.0 / h1)
        self.d2 = np.einsum("ia,jb->ijab", V, D).reshape(w.size**2, self.p**2) * (2.0 / h2)
        self.wvol = np.outer(w, w).ravel() * (0.25 * h1 * h2)
        # faces normal to x1: quadrature along x2; side 0 = left cell (its right end)
        self.face = {}
        for axis, (hn, ht) in enumerate(((h1, h2), (h2, h1))):
            sides = []
            for end, dend in ((b.right, b.dright), (b.left, b.dleft)):
                if axis == 0:
                    val = np.einsum("a,qb->qab", end, V).reshape(w.size, -1)
                    dn = np.einsum("a,qb->qab", dend, V).reshape(w.size, -1) * (2.0 / hn)
                else:
                    val = np.einsum("qa,b->qab", V, end).reshape(w.size, -1)
                    dn = np.einsum("qa,b->qab", V, dend).reshape(w.size, -1) * (2.0 / hn)
                sides.append((val, dn))
            self.face[axis] = (sides, w * 0.5 * ht)


def _face_pairs(space: SpatialSpace, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell indices (left, right) across every face normal to ``axis``."""
    n1, n2 = space.mesh_x1.n_cells, space.mesh_x2.n_cells
    c1, c2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    left = (c1 * n2 + c2).ravel()
    if axis == 0:
        right = (((c1 + 1) % n1) * n2 + c2).ravel()
    else:
        right = (c1 * n2 + (c2 + 1) % n2).ravel()
    return left, right


def _scatter_local(space, local, cells_row, cells_col, rows, cols, vals, row_offset=0, col_offset=0):
    """Add the same ``local`` block (test x trial) for each cell pair."""
    dofs = space.cell_dofs
    r = dofs[cells_row][:, :, None]
    c = dofs[cells_col][:, None, :]
    r, c = np.broadcast_arrays(r, c)
    rows.append(r.ravel() + row_offset)
    cols.append(c.ravel() + col_offset)
    vals.append(np.broadcast_to(local, r.shape).ravel())


def assemble_mass(space: SpatialSpace) -> sp.csr_matrix:
    return sp.diags(space.weights.ravel()).tocsr()


def assemble_sip(space: SpatialSpace, penalty: float) -> sp.csr_matrix:
    """Symmetric interior penalty matrix for one scalar component on the periodic mesh."""
    if not penalty > 0:
        raise ConfigurationError(f"penalty must be positive, got {penalty}")
    T = _Tables(space)
    n = space.n_scalar
    ncell = space.cell_dofs.shape[0]
    cells = np.arange(ncell)
    rows, cols, vals = [], [], []
    K = T.d1.T @ (T.wvol[:, None] * T.d1) + T.d2.T @ (T.wvol[:, None] * T.d2)
    _scatter_local(space, K, cells, cells, rows, cols, vals)

    sigma = penalty / space.h
    jump_sign = (1.0, -1.0)
    for axis in (0, 1):
        left, right = _face_pairs(space, axis)
        sides, wf = T.face[axis]
        for s, cs in enumerate((left, right)):  # test side
            for r, cr in enumerate((left, right)):  # trial side
                vs, ds = sides[s]
                vr, dr = sides[r]
                js, jr = jump_sign[s], jump_sign[r]
                local = (
                    sigma * js * jr * (vs.T * wf) @ vr
                    - 0.5 * js * (vs.T * wf) @ dr
                    - 0.5 * jr * (ds.T * wf) @ vr
                )
                _scatter_local(space, local, cs, cr, rows, cols, vals)
    return _coo(rows, cols, vals, (n, n))


def assemble_divergence(space: SpatialSpace, form: str = "primal") -> sp.csr_matrix:
    """Matrix of ``b_h(u, w)``: rows are pressure test functions, columns ``(u1, u2)``.

    ``form="primal"`` assembles ``-sum int w div u + sum_F int [[u]] {w}``;
    ``form="ibp"`` assembles the equivalent ``sum int u . grad w - sum_F int {u}.n [[w]]``.
    """
    if form not in ("primal", "ibp"):
        raise ConfigurationError(f"unknown form {form!r}")
    T = _Tables(space)
    n = space.n_scalar
    cells = np.arange(space.cell_dofs.shape[0])
    rows, cols, vals = [], [], []
    jump_sign = (1.0, -1.0)
    for comp, dq in ((0, T.d1), (1, T.d2)):
        off = comp * n
        if form == "primal":
            local = -(T.phi.T * T.wvol) @ dq
        else:
            local = (dq.T * T.wvol) @ T.phi
        _scatter_local(space, local, cells, cells, rows, cols, vals, col_offset=off)

        left, right = _face_pairs(space, comp)
        sides, wf = T.face[comp]
        for s, cs in enumerate((left, right)):
            for r, cr in enumerate((left, right)):
                vs, vr = sides[s][0], sides[r][0]
                if form == "primal":
                    local = 0.5 * jump_sign[r] * (vs.T * wf) @ vr
                else:
                    local = -0.5 * jump_sign[s] * (vs.T * wf) @ vr
                _scatter_local(space, local, cs, cr, rows, cols, vals, col_offset=off)
    return _coo(rows, cols, vals, (n, 2 * n))


def assemble_pressure_stab(space: SpatialSpace) -> sp.csr_matrix:
    """``s_h(p, w) = sum_F h int [[p]] . [[w]]`` over all (periodic) faces."""
    T = _Tables(space)
    n = space.n_scalar
    rows, cols, vals = [], [], []
    jump_sign = (1.0, -1.0)
    for axis in (0, 1):
        left, right = _face_pairs(space, axis)
        sides, wf = T.face[axis]
        for s, cs in enumerate((left, right)):
            for r, cr in enumerate((left, right)):
                vs, vr = sides[s][0], sides[r][0]
                local = space.h * jump_sign[s] * jump_sign[r] * (vs.T * wf) @ vr
                _scatter_local(space, local, cs, cr, rows, cols, vals)
    if not rows:
        return sp.csr_matrix((n, n))
    return _coo(rows, cols, vals, (n, n))


def assemble_weighted_mass(space: SpatialSpace, rho: np.ndarray) -> sp.csr_matrix:
    """``(rho u, psi)`` with ``rho`` given by nodal values, integrated with ``k + 2`` points."""
    T = _Tables(space)
    dofs = space.cell_dofs
    rho_cell = np.asarray(rho, dtype=float).ravel()[dofs]  # (ncell, nb)
    rho_q = rho_cell @ T.phi.T  # (ncell, nq)
    local = np.einsum("cq,qi,qj->cij", rho_q * T.wvol, T.phi, T.phi)
    r = np.broadcast_to(dofs[:, :, None], local.shape)
    c = np.broadcast_to(dofs[:, None, :], local.shape)
    n = space.n_scalar
    return _coo([r.ravel()], [c.ravel()], [local.ravel()], (n, n))


# ---------------------------------------------------------------- time step


@dataclass
class StokesResult:
    u: np.ndarray
    p: np.ndarray
    info: SolveInfo
    constraint_residual: float


class StokesOperator:
    """Assembled forms and the backward-Euler saddle-point step.

    The unknown vector is ``(U1, U2, P, lam)``; ``lam`` multiplies the pressure
    mean constraint and vanishes for compatible data.
    """

    def __init__(self, space: SpatialSpace, penalty: float = 10.0, solver: Optional[SolverConfig] = None):
        self.space = space
        self.penalty = penalty
        self.solver = solver or SolverConfig()
        self.M = assemble_mass(space)
        self.A = assemble_sip(space, penalty)
        self.B = assemble_divergence(space)
        self.S = assemble_pressure_stab(space)
        n = space.n_scalar
        self.n = n
        self.mean_weights = space.weights.ravel()

    @cached_property
    def blocks(self) -> list[np.ndarray]:
        """Unknowns grouped per cell (both velocity components and pressure) for block Jacobi."""
        d = self.space.cell_dofs
        n = self.n
        per_cell = np.concatenate([d, d + n, d + 2 * n], axis=1)
        return [row for row in per_cell] + [np.array([3 * n])]

    def system_matrix(self, rho: np.ndarray, dt: float) -> sp.csr_matrix:
        n = self.n
        Avel = self.M / dt + self.A + assemble_weighted_mass(self.space, rho)
        B1, B2 = self.B[:, :n], self.B[:, n:]
        m = sp.csr_matrix(self.mean_weights[:, None])
        K = sp.bmat(
            [
                [Avel, None, B1.T, None],
                [None, Avel, B2.T, None],
                [-B1, -B2, self.S, m],
                [None, None, m.T, None],
            ],
            format="csr",
        )
        K.sum_duplicates()
        K.sort_indices()
        return K

    def rhs_vector(self, U_prev: np.ndarray, rhs_quad: np.ndarray, dt: float) -> np.ndarray:
        sp_ = self.space
        w = sp_.weights
        f1 = w * U_prev[0] / dt + sp_.load_vector(rhs_quad[0])
        f2 = w * U_prev[1] / dt + sp_.load_vector(rhs_quad[1])
        return np.concatenate([f1.ravel(), f2.ravel(), np.zeros(self.n + 1)])

    def step(self, U_prev: np.ndarray, rho: np.ndarray, rhs_quad: np.ndarray, dt: float) -> StokesResult:
        """One backward-Euler step; ``rhs_quad`` holds ``rho V + G`` on the quadrature grid."""
        if not dt > 0:
            raise ConfigurationError(f"dt must be positive, got {dt}")
        sp_ = self.space
        K = self.system_matrix(rho, dt)
        b = self.rhs_vector(np.asarray(U_prev, dtype=float), np.asarray(rhs_quad, dtype=float), dt)
        x, info = solve(K, b, self.solver, blocks=self.blocks, return_info=True)
        n = self.n
        U = x[: 2 * n].reshape((2,) + sp_.shape)
        P = x[2 * n: 3 * n].reshape(sp_.shape)
        P = P - sp_.mean(P)
        res = self.constraint_residual(U, P)
        return StokesResult(U, P, info, res)

    def constraint_residual(self, U: np.ndarray, P: np.ndarray) -> float:
        """``max_w |-b_h(U, w) + s_h(P, w)| / ||w||`` over nodal basis functions ``w``."""
        r = -(self.B @ U.reshape(-1)) + self.S @ P.reshape(-1)
        norms = np.sqrt(self.space.weights.ravel())
        return float(np.max(np.abs(r) / norms))


def stokes_step(op: StokesOperator, U_prev, rho, rhs_momentum, dt):
    """Functional form of :meth:`StokesOperator.step` returning ``(U, P)``."""
    res = op.step(U_prev, rho, rhs_momentum, dt)
    return res.u, res.p
