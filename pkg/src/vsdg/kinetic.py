"""Upwind dG operators for the split Vlasov equation and the discrete velocity moments.

A phase-space field is stored as a 4D array of nodal values with axes
``(x1, x2, v1, v2)``; each axis holds ``n_cells * (k + 1)`` Gauss-Legendre
nodal values, cell-major. Transport along one axis is applied as a batch of
independent 1D dG operators, one per nodal point of the remaining axes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from vsdg.basis import NodalBasis1D
from vsdg.grid import IntervalMesh, ProductGrid
from vsdg.tensor import apply_all_axes, apply_blockwise

logger = logging.getLogger(__name__)

# f(t, x1, x2, v1, v2) with broadcastable array arguments
PhaseFunction = Callable[..., np.ndarray]

_CHUNK_POINTS = 2_000_000


class CFLViolation(RuntimeError):
    """Explicit sub-step rejected because the time step exceeds the CFL bound."""


class PhaseSpace:
    """Discretization data shared by all fields on one grid."""

    def __init__(self, grid: ProductGrid, basis_x: NodalBasis1D, basis_v: NodalBasis1D):
        self.grid = grid
        self.basis_x = basis_x
        self.basis_v = basis_v
        self.bases = (basis_x, basis_x, basis_v, basis_v)
        self.meshes = grid.meshes

    @classmethod
    def build(cls, nx: int, nv: int, kx: int, kv: int, L: float = 1.0) -> "PhaseSpace":
        return cls(ProductGrid.build(nx, nv, L), NodalBasis1D(kx), NodalBasis1D(kv))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(m.n_cells * b.n_nodes for m, b in zip(self.meshes, self.bases))

    @property
    def n_dofs(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.shape[:2]

    def nodes(self, axis: int) -> np.ndarray:
        return self._nodes[axis]

    def weights(self, axis: int) -> np.ndarray:
        """Nodal quadrature weights along one axis (diagonal of the 1D mass matrix)."""
        return self._weights[axis]

    def quad_points(self, axis: int) -> np.ndarray:
        """Physical ``k + 2``-point quadrature coordinates along one axis, shape ``(n_cells, k + 2)``."""
        return self._quad[axis]

    @cached_property
    def _nodes(self):
        return [m.physical_points(b.nodes).ravel() for m, b in zip(self.meshes, self.bases)]

    @cached_property
    def _weights(self):
        return [np.tile(0.5 * m.h * b.node_weights, m.n_cells) for m, b in zip(self.meshes, self.bases)]

    @cached_property
    def _quad(self):
        return [m.physical_points(b.quad_points) for m, b in zip(self.meshes, self.bases)]

    @cached_property
    def weight_tensor(self) -> np.ndarray:
        w = self._weights
        return w[0][:, None, None, None] * w[1][None, :, None, None] * w[2][None, None, :, None] * w[3][None, None, None, :]

    def node_grid(self):
        """Nodal coordinates as four broadcastable arrays."""
        x1, x2, v1, v2 = self._nodes
        return x1[:, None, None, None], x2[None, :, None, None], v1[None, None, :, None], v2[None, None, None, :]

    def interpolate(self, fn: PhaseFunction, t: float = 0.0) -> "PhaseField":
        vals = np.broadcast_to(fn(t, *self.node_grid()), self.shape)
        return PhaseField(np.array(vals, dtype=float), self)

    def zeros(self) -> "PhaseField":
        return PhaseField(np.zeros(self.shape), self)

    def project(self, fn: PhaseFunction, t: float = 0.0) -> np.ndarray:
        """Nodal values of the L2 projection of ``fn(t, .)``, integrals by ``k + 2``-point Gauss rules."""
        mats = [b.projection_matrix() for b in self.bases]
        out = np.empty(self.shape)
        for cells, pts in self._quadrature_chunks([b.n_quad for b in self.bases], [m.physical_points(b.quad_points) for m, b in zip(self.meshes, self.bases)]):
            vals = np.broadcast_to(fn(t, *pts), tuple(len(np.ravel(p)) for p in pts))
            p0 = self.bases[0].n_nodes
            out[cells.start * p0:cells.stop * p0] = apply_all_axes(vals, mats)
        return out

    def _quadrature_chunks(self, n_points, coords):
        """Yield (cell slice along x1, broadcastable point arrays) covering the phase space."""
        per_cell = n_points[0] * int(np.prod([c.size for c in coords[1:]]))
        step = max(1, _CHUNK_POINTS // per_cell)
        n0 = self.meshes[0].n_cells
        rest = [c.ravel() for c in coords[1:]]
        for start in range(0, n0, step):
            cells = slice(start, min(n0, start + step))
            x1 = coords[0][cells].ravel()
            yield cells, (
                x1[:, None, None, None],
                rest[0][None, :, None, None],
                rest[1][None, None, :, None],
                rest[2][None, None, None, :],
            )

    def integrate(self, values: np.ndarray) -> float:
        """Exact integral of a field over the phase domain (nodal Gauss rule)."""
        return float(np.einsum("ijkl,ijkl->", values, self.weight_tensor))

    def l2_norm(self, values: np.ndarray) -> float:
        return float(np.sqrt(np.einsum("ijkl,ijkl,ijkl->", values, values, self.weight_tensor)))


@dataclass
class PhaseField:
    """Nodal coefficients of a discrete distribution function."""

    values: np.ndarray
    space: PhaseSpace

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.space.shape:
            raise ValueError(f"field shape {self.values.shape} does not match space {self.space.shape}")

    def cells_view(self) -> np.ndarray:
        """View indexed ``(c_x1, c_x2, c_v1, c_v2, i_x1, i_x2, i_v1, i_v2)``."""
        sp = self.space
        ns = [m.n_cells for m in sp.meshes]
        ps = [b.n_nodes for b in sp.bases]
        split = self.values.reshape(ns[0], ps[0], ns[1], ps[1], ns[2], ps[2], ns[3], ps[3])
        return split.transpose(0, 2, 4, 6, 1, 3, 5, 7)

    def copy(self) -> "PhaseField":
        return PhaseField(self.values.copy(), self.space)

    def mass(self) -> float:
        return self.space.integrate(self.values)

    def l2_norm(self) -> float:
        return self.space.l2_norm(self.values)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass
class MomentFields:
    """Discrete density and momentum density at the spatial nodes."""

    rho: np.ndarray
    momentum: np.ndarray


def upwind_flux(speed_normal, f_minus, f_plus):
    """Upwind value of ``a f`` on a face; ``a`` is the speed along the minus side's outward normal."""
    a = np.asarray(speed_normal, dtype=float)
    fm = np.asarray(f_minus, dtype=float)
    fp = np.asarray(f_plus, dtype=float)
    out = np.where(a > 0, a * fm, np.where(a < 0, a * fp, 0.5 * a * (fm + fp)))
    return out[()] if out.ndim == 0 else out


def flux_divergence(
    g: np.ndarray,
    axis: int,
    mesh: IntervalMesh,
    basis: NodalBasis1D,
    speed_q: np.ndarray,
    speed_f: np.ndarray,
    boundary_traces: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> np.ndarray:
    """``M^{-1} B(g)`` for the 1D dG discretization of ``d(a g)/ds`` along ``axis``.

    ``B(g)_i = -int a g phi_i' + [a g]^ phi_i |_faces`` with upwind face values.
    ``speed_q`` must broadcast to ``other + (n_cells, k + 2)`` and ``speed_f``
    to ``other + (n_faces,)``, where ``other`` is the shape of ``g`` with
    ``axis`` removed.

    On a non-periodic mesh the boundary flux is zero. On a periodic mesh
    ``boundary_traces = (at_a, at_b)`` replaces the wrap-around neighbour at the
    domain ends with the given exterior traces.
    """
    n, p = mesh.n_cells, basis.n_nodes
    G = np.moveaxis(g, axis, -1)
    other = G.shape[:-1]
    G = G.reshape(other + (n, p))

    gq = G @ basis.V.T
    B = -(speed_q * gq * basis.quad_weights) @ basis.D
    g_right = G @ basis.right
    g_left = G @ basis.left

    if mesh.periodic:
        flux = upwind_flux(speed_f, g_right, np.roll(g_left, -1, axis=-1))
        flux = np.broadcast_to(flux, other + (n,))
        out_right = flux
        out_left = np.roll(flux, 1, axis=-1)
        if boundary_traces is not None:
            at_a, at_b = boundary_traces
            a_end = np.broadcast_to(speed_f, other + (n,))[..., -1]
            out_right = out_right.copy()
            out_left = out_left.copy()
            out_right[..., -1] = upwind_flux(a_end, g_right[..., -1], at_b)
            out_left[..., 0] = upwind_flux(a_end, at_a, g_left[..., 0])
    else:
        speed_f = np.broadcast_to(speed_f, other + (n + 1,))
        flux = np.zeros(other + (n + 1,))
        flux[..., 1:-1] = upwind_flux(speed_f[..., 1:-1], g_right[..., :-1], g_left[..., 1:])
        out_right = flux[..., 1:]
        out_left = flux[..., :-1]

    B += out_right[..., None] * basis.right - out_left[..., None] * basis.left
    B /= 0.5 * mesh.h * basis.node_weights
    return np.moveaxis(B.reshape(other + (n * p,)), -1, axis)


def _check_cfl(dt: float, speed_max: float, mesh: IntervalMesh, basis: NodalBasis1D, limit: float, what: str):
    cfl = dt * speed_max * (2 * basis.degree + 1) / mesh.h
    if cfl > limit:
        raise CFLViolation(f"{what}: CFL number {cfl:.3f} exceeds limit {limit:.3f} (dt={dt:.3e})")


def spatial_transport_operator(f: PhaseField, boundary_traces=None) -> np.ndarray:
    """``M^{-1} B^v_h(f)``: upwind dG discretization of ``v . grad_x f``.

    ``boundary_traces`` is an optional pair (one per spatial axis) of
    ``(at_a, at_b)`` exterior traces, replacing the periodic wrap.
    """
    sp = f.space
    v1, v2 = sp.nodes(2), sp.nodes(3)
    bt = boundary_traces or (None, None)
    # other axes for x1: (x2, v1, v2); for x2: (x1, v1, v2)
    s1 = v1[None, :, None, None, None]
    s2 = v2[None, None, :, None, None]
    out = flux_divergence(f.values, 0, sp.meshes[0], sp.basis_x, s1, s1[..., 0], bt[0])
    out += flux_divergence(f.values, 1, sp.meshes[1], sp.basis_x, s2, s2[..., 0], bt[1])
    return out


def velocity_transport_operator(f: PhaseField, u: np.ndarray) -> np.ndarray:
    """``M^{-1} B^x_h(u; f)``: upwind dG discretization of ``div_v((u - v) f)`` at every spatial node."""
    sp = f.space
    u = np.asarray(u, dtype=float)
    out = None
    for axis, comp in ((2, 0), (3, 1)):
        mesh = sp.meshes[axis]
        vq = sp.quad_points(axis)
        vf = mesh.boundaries
        uc = u[comp]
        # other axes: (x1, x2, v_other)
        speed_q = uc[:, :, None, None, None] - vq[None, None, None, :, :]
        speed_f = uc[:, :, None, None] - vf[None, None, None, :]
        term = flux_divergence(f.values, axis, mesh, sp.basis_v, speed_q, speed_f)
        out = term if out is None else out + term
    return out


def spatial_transport_substep(
    f: PhaseField, dt: float, boundary_traces=None, cfl_limit: float = 1.0
) -> PhaseField:
    """One forward-Euler step of ``f_t + v . grad_x f = 0`` at every velocity node."""
    sp = f.space
    vmax = max(np.max(np.abs(sp.nodes(2))), np.max(np.abs(sp.nodes(3))))
    for axis in (0, 1):
        _check_cfl(dt, vmax, sp.meshes[axis], sp.basis_x, cfl_limit, "spatial transport")
    return PhaseField(f.values - dt * spatial_transport_operator(f, boundary_traces), sp)


def velocity_transport_substep(
    f: PhaseField,
    u: np.ndarray,
    source: Optional[PhaseFunction],
    t: float,
    dt: float,
    cfl_limit: float = 1.0,
) -> PhaseField:
    """One forward-Euler step of ``f_t + div_v((u - v) f) = source`` at every spatial node.

    ``u`` holds the fluid velocity at the spatial nodes, shape ``(2, N1, N2)``;
    the source is L2-projected at time ``t``.
    """
    sp = f.space
    u = np.asarray(u, dtype=float)
    if u.shape != (2,) + sp.spatial_shape:
        raise ValueError(f"velocity field has shape {u.shape}, expected {(2,) + sp.spatial_shape}")
    for axis, comp in ((2, 0), (3, 1)):
        vb = sp.meshes[axis].boundaries
        smax = max(np.max(np.abs(u[comp] - vb[0])), np.max(np.abs(u[comp] - vb[-1])))
        _check_cfl(dt, smax, sp.meshes[axis], sp.basis_v, cfl_limit, "velocity transport")
    new = f.values - dt * velocity_transport_operator(f, u)
    if source is not None:
        new += dt * sp.project(source, t)
    return PhaseField(new, sp)


def compute_moments(f: PhaseField) -> MomentFields:
    """Density and momentum density ``sum_v int f dv``, ``sum_v int v f dv`` at the spatial nodes.

    The nodal ``k_v + 1``-point rule integrates ``v f`` exactly.
    """
    sp = f.space
    w1, w2 = sp.weights(2), sp.weights(3)
    v1, v2 = sp.nodes(2), sp.nodes(3)
    rho = np.einsum("ijkl,k,l->ij", f.values, w1, w2)
    m1 = np.einsum("ijkl,k,l->ij", f.values, w1 * v1, w2)
    m2 = np.einsum("ijkl,k,l->ij", f.values, w1, w2 * v2)
    return MomentFields(rho, np.stack([m1, m2]))
