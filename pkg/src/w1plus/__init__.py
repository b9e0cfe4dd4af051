"""Interpolation of probability distributions on graphs along W1 geodesics.

The pipeline runs transport, support union, orientation, weights, entropy
scaling and finally the polynomial curve (f, g, h); :func:`verify` checks
the result.
"""

from .errors import W1PlusError
from .geodesic import GeodesicCurve, binomial_mixture, build_curve, build_geodesic, build_PQ, entropy_profile
from .graph_core import Graph, Measure, all_pairs_distances, geodesics_between, load_graph, load_measure
from .orientation import OrientedGraph, PartialOrder, orient
from .scaling import cost_kernel, minimize_J
from .serialization import curve_from_document, curve_to_document, load_curve
from .transport import solve_transport, support_union, w1
from .verification import Tolerances, VerificationReport, verify
from .weights import WeightSystem, default_weights, kernels, validate_custom_weights

__all__ = [
    "GeodesicCurve", "Graph", "Measure", "OrientedGraph", "PartialOrder", "Tolerances",
    "VerificationReport", "W1PlusError", "WeightSystem", "all_pairs_distances", "binomial_mixture",
    "build_PQ", "build_curve", "build_geodesic", "cost_kernel", "curve_from_document",
    "curve_to_document", "default_weights", "entropy_profile", "geodesics_between", "kernels",
    "load_curve", "load_graph", "load_measure", "minimize_J", "orient", "solve_transport",
    "support_union", "validate_custom_weights", "verify", "w1",
]
