"""High-order B-Spline Galerkin discretization of the compressible Euler
equations with flux-corrected transport stabilization."""

from .euler import GasModel, InadmissibleStateError, Primitive
from .geometry import GeometryMap, make_interval, make_ubend, make_unit_square
from .splines import KnotVector, TensorBasis, open_uniform_knots

__all__ = [
    "GasModel",
    "InadmissibleStateError",
    "Primitive",
    "GeometryMap",
    "KnotVector",
    "TensorBasis",
    "make_interval",
    "make_ubend",
    "make_unit_square",
    "open_uniform_knots",
]

__version__ = "0.1.0"
