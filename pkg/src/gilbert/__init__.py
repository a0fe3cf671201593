"""Minimum Gilbert arborescences: solver and local optimality certificates.

n sources with positive flows drain into one sink through a tree with
Steiner points; an edge carrying flow t costs (d + h t) times its length in
an L_p plane.
"""

from .certify import Certificate, certify, check_balancing, check_collapsing, local_star, split_improve
from .errors import GilbertError
from .minkowski import NormSpace, validate_space
from .model import EmbeddedArborescence, Instance, Source, WeightFunction, total_cost, validate_weight
from .optimizer import OptimizerConfig, Solution, optimize_fixed_topology, solve
from .serialize import emit_result, parse_instance
from .topology import SteinerTopology, canonicalize, collapse_degenerate, enumerate_full

__all__ = [
    "Certificate",
    "EmbeddedArborescence",
    "GilbertError",
    "Instance",
    "NormSpace",
    "OptimizerConfig",
    "Solution",
    "Source",
    "SteinerTopology",
    "WeightFunction",
    "canonicalize",
    "certify",
    "check_balancing",
    "check_collapsing",
    "collapse_degenerate",
    "emit_result",
    "enumerate_full",
    "local_star",
    "optimize_fixed_topology",
    "parse_instance",
    "solve",
    "split_improve",
    "total_cost",
    "validate_space",
    "validate_weight",
]
