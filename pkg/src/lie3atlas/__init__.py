"""Geometry and large-scale classification of three-dimensional Lie groups."""

from .catalog import GroupSpec, parse_spec, format_spec, normalize_spec
from .metric import FrameMetric

__version__ = "0.1.0"

__all__ = ["GroupSpec", "parse_spec", "format_spec", "normalize_spec", "FrameMetric"]
