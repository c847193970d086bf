"""Controlled two-phase Stefan problem: flattening transform, dual control and fixed-point coupling."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    CorridorEscapeError,
    DegenerateObservabilityError,
    DomainError,
    IterationError,
    NumericalError,
    OptimizationError,
    StefanControlError,
)
from .geometry import GeometryConfig, MollifierSpec, Transform, TransformSample  # noqa: E402
from .grid import InterfacePath, RefGrid  # noqa: E402

__all__ = [
    "ConfigError",
    "CorridorEscapeError",
    "DegenerateObservabilityError",
    "DomainError",
    "GeometryConfig",
    "InterfacePath",
    "IterationError",
    "MollifierSpec",
    "NumericalError",
    "OptimizationError",
    "RefGrid",
    "StefanControlError",
    "Transform",
    "TransformSample",
]
