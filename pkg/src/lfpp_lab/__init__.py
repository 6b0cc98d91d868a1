"""Liouville first passage percolation on a lattice: fields, metrics, and experiments."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    SQRT_8_3,
    ConsistencyError,
    DomainError,
    GeometryError,
    GridSpec,
    LFPPError,
    Parameters,
    derive_params,
    watabiki_dimension,
)
from .field import CircleAverageZero, FieldSample, circle_average, sample_field, spectral_point_variance  # noqa: E402
from .lfpp import (  # noqa: E402
    DistanceField,
    Geodesic,
    MetricGraph,
    build_graph,
    distance_field,
    internal_distance,
    point_distance,
    trace_geodesic,
    weyl_shift,
)
from .mollify import MollifiedField, mollify  # noqa: E402

__all__ = [
    "SQRT_8_3", "ConsistencyError", "DomainError", "GeometryError", "GridSpec", "LFPPError",
    "Parameters", "derive_params", "watabiki_dimension", "CircleAverageZero", "FieldSample",
    "circle_average", "sample_field", "spectral_point_variance", "DistanceField", "Geodesic",
    "MetricGraph", "build_graph", "distance_field", "internal_distance", "point_distance",
    "trace_geodesic", "weyl_shift", "MollifiedField", "mollify",
]
