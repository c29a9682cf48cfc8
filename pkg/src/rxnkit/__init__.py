"""rxnkit: reaction-diagram parse toolkit.

Data model and strict/total parsers, soft- and hybrid-criterion set
matching with corpus P/R/F1, a permutation-invariant verifiable reward
(library + HTTP service), identifier-box maps, ink-aware identifier
rendering, textual-record refinement, cross-modal joining, and
serialization-order analysis.
"""

from .model import (
    Box,
    Component,
    DiagramAnnotation,
    ParsedPrediction,
    ParseFailure,
    Reaction,
    parse_ground_truth,
    parse_prediction,
    canonical_serialize,
)
from .matching import MatchConfig, PRF1, evaluate_corpus, iou, match_sets, normalized_edit_distance
from .reward import RewardResult, RewardSpec, sample_reward
from .idmap import IdentifierMap, assign_virtual_ids, load_map, resolve

__version__ = "0.1.0"

__all__ = [
    "Box",
    "Component",
    "Reaction",
    "DiagramAnnotation",
    "ParsedPrediction",
    "ParseFailure",
    "parse_ground_truth",
    "parse_prediction",
    "canonical_serialize",
    "MatchConfig",
    "PRF1",
    "iou",
    "normalized_edit_distance",
    "match_sets",
    "evaluate_corpus",
    "RewardSpec",
    "RewardResult",
    "sample_reward",
    "IdentifierMap",
    "load_map",
    "assign_virtual_ids",
    "resolve",
    "__version__",
]
