"""Numerical laboratory for smooth ergodic theory."""

from .errors import ErgolabError, InvalidParameter, NumericFailure, Unsupported
from .maps import (PrecisionPolicy, System, apply, apply_inverse, jacobian_at, make_system, orbit,
                   preimages, tangent)
from .phase import (AtomicMeasure, CirclePoint, EmpiricalMeasure, IntervalPartition, Observable,
                    PlanePoint, ProductGrid, TorusPoint, density_ratio, measure_push_grid,
                    observable_mean)

__version__ = "0.1.0"

__all__ = [
    "AtomicMeasure", "CirclePoint", "EmpiricalMeasure", "ErgolabError", "IntervalPartition",
    "InvalidParameter", "NumericFailure", "Observable", "PlanePoint", "PrecisionPolicy", "ProductGrid",
    "System", "TorusPoint", "Unsupported", "apply", "apply_inverse", "density_ratio", "jacobian_at",
    "make_system", "measure_push_grid", "observable_mean", "orbit", "preimages", "tangent",
]
