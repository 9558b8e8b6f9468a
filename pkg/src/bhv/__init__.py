"""Geodesics, log maps and Fréchet means in BHV treespace."""
from .conditions import (
    ConditionsReport,
    closure_ssd,
    must_include,
    prune_orthants,
    split_sum,
    square_sum_difference,
)
from .core import (
    AmbientVector,
    Split,
    TaxonSet,
    Tree,
    are_compatible,
    canonical_split,
    compatible_set,
    crossing_set,
    embed,
    project,
)
from .frechet import (
    MeanCertificate,
    MeanOptions,
    NumericalError,
    decompose_common,
    frechet_value,
    iterative_mean,
    mean,
    recombine,
    verify_mean,
)
from .geodesic import GeodesicPath, Support, check_properties, distance, geodesic, point_along
from .newick import NewickError, parse_newick, parse_tree, write_newick
from .tangent import Direction, TangentVector, directional_limit, log_map, project_tangent

__version__ = "0.1.0"

__all__ = [
    "AmbientVector",
    "ConditionsReport",
    "Direction",
    "GeodesicPath",
    "MeanCertificate",
    "MeanOptions",
    "NewickError",
    "NumericalError",
    "Split",
    "Support",
    "TangentVector",
    "TaxonSet",
    "Tree",
    "are_compatible",
    "canonical_split",
    "check_properties",
    "closure_ssd",
    "compatible_set",
    "crossing_set",
    "decompose_common",
    "directional_limit",
    "distance",
    "embed",
    "frechet_value",
    "geodesic",
    "iterative_mean",
    "log_map",
    "mean",
    "must_include",
    "parse_newick",
    "parse_tree",
    "point_along",
    "project",
    "project_tangent",
    "prune_orthants",
    "recombine",
    "split_sum",
    "square_sum_difference",
    "verify_mean",
    "write_newick",
]
