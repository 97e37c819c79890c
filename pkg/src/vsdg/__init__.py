"""Discontinuous Galerkin solver for the 2D-2V Vlasov / unsteady Stokes system."""

from vsdg.basis import NodalBasis1D, gauss_legendre, lagrange_tables
from vsdg.grid import ConfigurationError, IntervalMesh, ProductGrid, build_interval_mesh, faces

__all__ = [
    "ConfigurationError",
    "IntervalMesh",
    "NodalBasis1D",
    "ProductGrid",
    "build_interval_mesh",
    "faces",
    "gauss_legendre",
    "lagrange_tables",
]

__version__ = "0.1.0"
