"""Exact conditioning and sampling of multi-type, level-dependent Galton-Watson trees."""

from .core import (
    ExplicitOffspring,
    LevelRanges,
    OffspringModel,
    PoissonThinning,
    Tree,
    enumerate_trees,
    format_tree,
    gw_probability,
    parse_tree,
)
from .events import (
    BUILDERS,
    Event,
    ImpossibleEventError,
    NotAPartitionError,
    RecursivePartition,
    exact_height,
    generation_size,
    mutant_at_generation_k,
    root_lineage_mutant,
    spontaneous_mutation_4class,
    survival_event,
    trivial_event,
)
from .predicates import parse_predicate
from .probs import ClassProbTable, ConditionalOffspringTable, build_tables, extinction_probability
from .rng import RngStream
from .sampler import SamplerContext, sample_conditioned_class, sample_tilde, sample_unconditioned

__version__ = "0.1.0"

__all__ = [
    "ClassProbTable",
    "ConditionalOffspringTable",
    "build_tables",
    "extinction_probability",
    "RngStream",
    "SamplerContext",
    "sample_conditioned_class",
    "sample_tilde",
    "sample_unconditioned",
    "BUILDERS",
    "Event",
    "ExplicitOffspring",
    "ImpossibleEventError",
    "LevelRanges",
    "NotAPartitionError",
    "OffspringModel",
    "PoissonThinning",
    "RecursivePartition",
    "Tree",
    "enumerate_trees",
    "exact_height",
    "format_tree",
    "generation_size",
    "gw_probability",
    "mutant_at_generation_k",
    "parse_predicate",
    "parse_tree",
    "root_lineage_mutant",
    "spontaneous_mutation_4class",
    "survival_event",
    "trivial_event",
]
