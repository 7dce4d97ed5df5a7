"""Exact counterfactual explanations for tree ensembles.

Finite-domain branch-and-bound over split-induced interval domains, an
alternative weighted MaxSAT encoding, isolation-forest plausibility and an
exhaustive oracle for certification.
"""

from .cpmodel import attach_plausibility, build_model
from .ensemble import (Ensemble, Leaf, Node, Tree, dump_ensemble,
                       load_ensemble, load_ensemble_file, predict_scores,
                       route_leaf)
from .features import (FeaturePartition, FeatureSpace, FeatureSpec,
                       build_partition, displacement_cost, interval_of,
                       realize_value)
from .oracle import brute_force_optimum
from .plausibility import (IsolationModel, correction_c, decision_function,
                           h_min_threshold, leaf_path_length)
from .solver import Solution, solve
from .wcnf import WcnfInstance, decode_model, encode_pb_geq, encode_wcnf

__all__ = [
    "Ensemble", "Tree", "Node", "Leaf", "FeatureSpec", "FeatureSpace",
    "FeaturePartition", "IsolationModel", "Solution", "WcnfInstance",
    "load_ensemble", "load_ensemble_file", "dump_ensemble", "route_leaf",
    "predict_scores", "build_partition", "interval_of", "displacement_cost",
    "realize_value", "build_model", "attach_plausibility", "solve",
    "brute_force_optimum", "encode_wcnf", "encode_pb_geq", "decode_model",
    "correction_c", "leaf_path_length", "h_min_threshold",
    "decision_function",
]

__version__ = "0.1.0"
