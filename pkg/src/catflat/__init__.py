"""catflat: piecewise-Euclidean 2-complexes of curvature at most zero.

Tools for validating the link condition, computing geodesics and their
extensions, recognizing flat substructure around 2-cycles, and decomposing
neighborhoods in square complexes into half-planes.
"""

__version__ = "0.1.0"

from .complex_core import (Edge, Face, PEComplex, PointLocation, build_complex,
                           load_complex, save_complex, validate_cat0)
from .errors import (CatflatError, FrontierLink, GeodesicExitsTruncation,
                     InvalidComplex, InvalidLocation, NoAntipode,
                     NotSquareComplex, NotVerifiedCat0, TruncationTooSmall)
from .link_graphs import (AntipodalSet, GEdge, GraphPoint, Link, MetricGraph,
                          Subgraph, antipodal_set, girth,
                          isolated_suspension_modulus, link_at,
                          suspension_structure)
from .geodesics import (GeodesicPath, LocalGeodesicCertificate, PathSegment,
                        contract_toward, distance, extend_in_subcomplex,
                        geodesic, is_local_geodesic, refined_upper_bound)
from .support_sets import (Chain2, LinkCycle, SupportSet, boundary,
                           fixture_cycles, half_plane_subcomplex, link_cycle,
                           support, verify_extension_property)
from .flat_structure import (AreaEstimate, BranchCertificate, DensityProfile,
                             DistanceField, PointClass, ball_area,
                             classify_point, conicality, density_profile,
                             detect_branch, fiber_graph, flatness_test,
                             packing_number)
from .square_halfplanes import (Decomposition, HalfPlaneRegion,
                                HalfPlaneSubcomplex, Semicircle, decompose,
                                maximal_halfplane_subcomplex,
                                semicircle_centered, semicircle_halfplane)
from .errors import InvalidChain

__all__ = [
    "__version__",
    "Edge", "Face", "PEComplex", "PointLocation",
    "build_complex", "load_complex", "save_complex", "validate_cat0",
    "CatflatError", "FrontierLink", "GeodesicExitsTruncation",
    "InvalidComplex", "InvalidLocation", "NoAntipode", "NotSquareComplex",
    "NotVerifiedCat0", "TruncationTooSmall",
    "AntipodalSet", "GEdge", "GraphPoint", "Link", "MetricGraph", "Subgraph",
    "antipodal_set", "girth", "isolated_suspension_modulus", "link_at",
    "suspension_structure",
    "GeodesicPath", "LocalGeodesicCertificate", "PathSegment",
    "contract_toward", "distance", "extend_in_subcomplex", "geodesic",
    "is_local_geodesic", "refined_upper_bound",
    "Chain2", "InvalidChain", "LinkCycle", "SupportSet", "boundary",
    "fixture_cycles", "half_plane_subcomplex", "link_cycle", "support",
    "verify_extension_property",
    "AreaEstimate", "BranchCertificate", "DensityProfile", "DistanceField",
    "PointClass", "ball_area", "classify_point", "conicality",
    "density_profile", "detect_branch", "fiber_graph", "flatness_test",
    "packing_number",
    "Decomposition", "HalfPlaneRegion", "HalfPlaneSubcomplex", "Semicircle",
    "decompose", "maximal_halfplane_subcomplex", "semicircle_centered",
    "semicircle_halfplane",
]
