"""Characteristic points of surfaces in the Heisenberg group and local integrability
of the inverse horizontal gradient and the horizontal mean curvature."""

from __future__ import annotations

__version__ = "0.1.0"

from .charlocus import classify, find_characteristic_points, hessian_at  # noqa: E402
from .expr import parse_expression, parse_surface  # noqa: E402
from .geometry import FrameModel, horizontal_data, mean_curvature, mean_curvature_implicit  # noqa: E402
from .quadrature import IntegrandSpec, integrability_scan, integrate_annulus  # noqa: E402

__all__ = [
    "FrameModel",
    "IntegrandSpec",
    "classify",
    "find_characteristic_points",
    "hessian_at",
    "horizontal_data",
    "integrability_scan",
    "integrate_annulus",
    "mean_curvature",
    "mean_curvature_implicit",
    "parse_expression",
    "parse_surface",
]
