"""Light ray transforms, gauge handling and DN-map experiments on the unit disc."""

from .exceptions import (ConditioningError, ConfigurationError, DomainError, GridFormatError,
                         InstabilityError, LightrayError, MemoryCapError, TrappedRayError)
from .fields import ScalarFieldM, SpaceTimeGrid, SpaceTimeOneForm, SpaceTimeScalar
from .manifold import (BoundaryRay, Geodesic, MetricField, boundary_ray_grid, check_simplicity,
                       trace_geodesics)
from .transforms import LightSinogram, Sinogram, light_sinogram, ray_transform
from .estimators import GeodesicRayInverter, LightRayInverter
from .gridfile import GridFile, load_grid, save_grid

__version__ = "0.1.0"

__all__ = [
    "BoundaryRay", "ConditioningError", "ConfigurationError", "DomainError", "Geodesic",
    "GeodesicRayInverter", "GridFile", "GridFormatError", "InstabilityError", "LightRayInverter",
    "LightSinogram", "LightrayError", "MemoryCapError", "MetricField", "ScalarFieldM", "Sinogram",
    "SpaceTimeGrid", "SpaceTimeOneForm", "SpaceTimeScalar", "TrappedRayError",
    "boundary_ray_grid", "check_simplicity", "light_sinogram", "load_grid", "ray_transform",
    "save_grid", "trace_geodesics",
]
