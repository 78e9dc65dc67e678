"""Adaptive fast Gauss transform in two dimensions."""
from .quadtree import Domain, Tree, build_uniform_tree, refine_adaptive
from .engine import FGT, TransformRequest, TransformResult, discrete_transform, run, volume_transform
from .boundary import BoundaryDensity, BoundarySegment, run_boundary

__all__ = [
    "Domain", "Tree", "build_uniform_tree", "refine_adaptive",
    "FGT", "TransformRequest", "TransformResult", "discrete_transform", "run", "volume_transform",
    "BoundaryDensity", "BoundarySegment", "run_boundary",
]
