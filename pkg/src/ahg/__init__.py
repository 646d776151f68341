"""Numerical geometry of almost Hermitian manifolds with the canonical connection."""

from .manifold import (
    ChartTransitionError,
    ClassificationError,
    CutLocusError,
    DomainError,
    GeometryError,
    ManifoldSpec,
    OutOfChartError,
    PointRef,
)
from .models import ModelId, build_model, default_origin, random_points

__all__ = [
    "ChartTransitionError",
    "ClassificationError",
    "CutLocusError",
    "DomainError",
    "GeometryError",
    "ManifoldSpec",
    "ModelId",
    "OutOfChartError",
    "PointRef",
    "build_model",
    "default_origin",
    "random_points",
]
