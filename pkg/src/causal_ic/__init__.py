"""Causal independent-cascade models with hidden confounders."""

from .chain import ChainParams, PriorKnowledge, identify_chain, min_known_bound, witness_pair
from .engine import (
    Cascade,
    ObservedDistribution,
    activation_probability,
    conditional,
    empirical_distribution,
    exact_joint,
    live_edge_exact,
    marginal,
    sample_cascade,
)
from .model import (
    CausalICModel,
    HiddenNode,
    ModelClass,
    UVEdge,
    ValidationReport,
    VVEdge,
    chain_model,
    classify,
    global_model,
    markovian_model,
    mixed_model,
    parse_model,
    serialize_model,
    topological_order,
    validate,
)

from .global_hidden import identify_global, identify_mixed
from .markovian import identify_markovian
from .unroll import check_unroll_equivalence, unroll

__version__ = "0.1.0"
