"""Locally refined splines: LR B-splines, (truncated) hierarchical B-splines and T-splines."""

from . import diagnostics, formats, geometry, hbsplines, lrmesh, lrsplines, splinecore, tsplines
from .collection import Independence, ScaledBSpline, SplineCollection, SplineType
from .errors import (
    FixpointError,
    FormatError,
    InconsistencyError,
    InvalidInputError,
    LRKitError,
    MalformedMeshError,
    IndependenceWarning,
    NoSplitError,
    NotAKnotError,
    NotNestedError,
    OutOfDomainError,
    ParseError,
    ValidationError,
)
from .splinecore import KnotVector, LocalKnots, TensorBSpline, eval_bspline

__version__ = "0.1.0"

__all__ = [
    "diagnostics",
    "formats",
    "geometry",
    "hbsplines",
    "lrmesh",
    "lrsplines",
    "splinecore",
    "tsplines",
    "Independence",
    "ScaledBSpline",
    "SplineCollection",
    "SplineType",
    "KnotVector",
    "LocalKnots",
    "TensorBSpline",
    "eval_bspline",
    "LRKitError",
    "InvalidInputError",
    "NotAKnotError",
    "NotNestedError",
    "OutOfDomainError",
    "IndependenceWarning",
    "NoSplitError",
    "MalformedMeshError",
    "FixpointError",
    "InconsistencyError",
    "FormatError",
    "ParseError",
    "ValidationError",
]
