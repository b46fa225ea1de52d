"""Toolkit for hierarchical furniture-assembly plans: graph representation
and validation, order enumeration, equivalence-aware plan scoring, SE(3)
pose metrics and losses, object-centric assembly simulation, and a
VLM-driven plan-generation pipeline."""

from .geometry import Pose, PointCloud
from .graph import HierarchicalAssemblyGraph, parse_nested_list, to_nested_list

__version__ = "0.1.0"

__all__ = [
    "Pose",
    "PointCloud",
    "HierarchicalAssemblyGraph",
    "parse_nested_list",
    "to_nested_list",
    "__version__",
]
