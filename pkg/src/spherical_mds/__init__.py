"""Stress-based graph embedding on the sphere, with Euclidean and hyperbolic baselines."""

from .embedder import (Embedding, LayoutConfig, OptTrace, Schedule, gd_layout, schedule_eta,
                       sgd_layout, sgd_layout_with_radius, stress, stress_gradient)
from .geometry import (EUCLIDEAN, HYPERBOLIC, SPHERICAL, EuclideanPoint, Geometry, HyperbolicPoint,
                       SphericalPoint, distance_matrix, pairwise_distances, sample_uniform)
from .graph_io import DistanceMatrix, Graph, apsp, generate, load_graph, subdivide
from .metrics import QualityReport, compare_geometries, distortion, evaluate
from .projection import ProjectionKind, project, render_svg, sample_geodesic

__version__ = "0.1.0"

__all__ = [
    "EUCLIDEAN", "HYPERBOLIC", "SPHERICAL", "DistanceMatrix", "Embedding", "EuclideanPoint",
    "Geometry", "Graph", "HyperbolicPoint", "LayoutConfig", "OptTrace", "ProjectionKind",
    "QualityReport", "Schedule", "SphericalPoint", "apsp", "compare_geometries", "distance_matrix",
    "distortion", "evaluate", "gd_layout", "generate", "load_graph", "pairwise_distances", "project",
    "render_svg", "sample_geodesic", "sample_uniform", "schedule_eta", "sgd_layout",
    "sgd_layout_with_radius", "stress", "stress_gradient", "subdivide",
]
