"""Uniform Cartesian meshes for the periodic space torus and the velocity box."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class ConfigurationError(ValueError):
    """Raised for invalid mesh, basis, or run parameters."""


BOUNDARY = -1


class Face(NamedTuple):
    """An axis-aligned face point of a 1D mesh.

    ``left`` is the cell whose outward normal at this face is +1, ``right`` the
    cell whose outward normal is -1. Either may be ``BOUNDARY`` on a
    non-periodic mesh.
    """

    index: int
    left: int
    right: int
    position: float

    @property
    def is_boundary(self) -> bool:
        return self.left == BOUNDARY or self.right == BOUNDARY

    @property
    def normal_of_left(self) -> int:
        return 1

    @property
    def normal_of_right(self) -> int:
        return -1


@dataclass(frozen=True)
class IntervalMesh:
    a: float
    b: float
    n_cells: int
    periodic: bool

    def __post_init__(self):
        if not isinstance(self.n_cells, (int, np.integer)) or self.n_cells < 1:
            raise ConfigurationError(f"n_cells must be a positive integer, got {self.n_cells!r}")
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.b <= self.a:
            raise ConfigurationError(f"need a < b, got a={self.a}, b={self.b}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def boundaries(self) -> np.ndarray:
        """Cell boundary coordinates, ``n_cells + 1`` values."""
        return self.a + self.h * np.arange(self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.a + self.h * (np.arange(self.n_cells) + 0.5)

    @property
    def widths(self) -> np.ndarray:
        return np.full(self.n_cells, self.h)

    def left_neighbor(self, cell: int) -> int:
        if cell > 0:
            return cell - 1
        return self.n_cells - 1 if self.periodic else BOUNDARY

    def right_neighbor(self, cell: int) -> int:
        if cell < self.n_cells - 1:
            return cell + 1
        return 0 if self.periodic else BOUNDARY

    @property
    def n_faces(self) -> int:
        return self.n_cells if self.periodic else self.n_cells + 1

    def face_list(self) -> list[Face]:
        return faces(self)

    def left_face(self, cell: int) -> int:
        """Index of the face on the left side of ``cell``."""
        if self.periodic:
            return (cell - 1) % self.n_cells
        return cell

    def right_face(self, cell: int) -> int:
        return cell if self.periodic else cell + 1

    def physical_points(self, ref_points: np.ndarray) -> np.ndarray:
        """Map reference points in [-1, 1] to every cell, shape ``(n_cells, len(ref_points))``."""
        ref_points = np.asarray(ref_points, dtype=float)
        return self.centers[:, None] + 0.5 * self.h * ref_points[None, :]


def build_interval_mesh(a: float, b: float, n: int, periodic: bool) -> IntervalMesh:
    return IntervalMesh(float(a), float(b), n, bool(periodic))


def faces(mesh: IntervalMesh) -> list[Face]:
    """Faces of a 1D mesh, ordered left to right.

    On a periodic mesh face ``i`` sits at the right end of cell ``i`` (the last
    one wraps onto cell 0). On a non-periodic mesh face ``i`` sits at the left
    end of cell ``i``, with two boundary faces at the ends.
    """
    n = mesh.n_cells
    xb = mesh.boundaries
    if mesh.periodic:
        return [Face(i, i, (i + 1) % n, float(xb[i + 1])) for i in range(n)]
    out = [Face(0, BOUNDARY, 0, float(xb[0]))]
    out += [Face(i, i - 1, i, float(xb[i])) for i in range(1, n)]
    out.append(Face(n, n - 1, BOUNDARY, float(xb[n])))
    return out


@dataclass(frozen=True)
class ProductGrid:
    """Phase-space grid: periodic x1, x2 meshes times non-periodic v1, v2 meshes."""

    mesh_x1: IntervalMesh
    mesh_x2: IntervalMesh
    mesh_v1: IntervalMesh
    mesh_v2: IntervalMesh
    _faces: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.mesh_x1.periodic and self.mesh_x2.periodic):
            raise ConfigurationError("spatial meshes must be periodic")
        if self.mesh_v1.periodic or self.mesh_v2.periodic:
            raise ConfigurationError("velocity meshes must be non-periodic")

    @classmethod
    def build(cls, nx: int, nv: int, L: float = 1.0, x_range=(0.0, 1.0)) -> "ProductGrid":
        if L <= 0:
            raise ConfigurationError(f"velocity half-width must be positive, got {L}")
        a, b = x_range
        return cls(
            build_interval_mesh(a, b, nx, True),
            build_interval_mesh(a, b, nx, True),
            build_interval_mesh(-L, L, nv, False),
            build_interval_mesh(-L, L, nv, False),
        )

    @property
    def meshes(self) -> tuple[IntervalMesh, IntervalMesh, IntervalMesh, IntervalMesh]:
        return (self.mesh_x1, self.mesh_x2, self.mesh_v1, self.mesh_v2)

    @property
    def L(self) -> float:
        return self.mesh_v1.b

    @property
    def h_x(self) -> float:
        return max(self.mesh_x1.h, self.mesh_x2.h)

    @property
    def h_v(self) -> float:
        return max(self.mesh_v1.h, self.mesh_v2.h)

    @property
    def h(self) -> float:
        return max(self.h_x, self.h_v)

    @property
    def volume_x(self) -> float:
        return self.mesh_x1.length * self.mesh_x2.length

    @property
    def volume_v(self) -> float:
        return self.mesh_v1.length * self.mesh_v2.length

    def faces(self, dim: int) -> list[Face]:
        if dim not in self._faces:
            self._faces[dim] = faces(self.meshes[dim])
        return self._faces[dim]

    def velocity_mesh_avoids_zero(self) -> bool:
        """True when no velocity cell has v = 0 strictly inside it."""
        for m in (self.mesh_v1, self.mesh_v2):
            xb = m.boundaries
            if np.any((xb[:-1] < 0) & (xb[1:] > 0) & ~np.isclose(xb[:-1], 0) & ~np.isclose(xb[1:], 0)):
                return False
        return True
