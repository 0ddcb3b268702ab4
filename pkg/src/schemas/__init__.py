from .fragment.models import CleavageRule, CleavageTable, Fragment, FragmentKind, Pattern, PatternAtom, PatternBond, RecipeNode
from .molgraph.models import AdjacencyView, BondType, Chirality, Edge, EdgeAttr, GraphBatch, MolGraph, NodeAttr
from .pretrain.models import Checkpoint, CheckpointMeta, EpochMetrics, MaskPlan, TrainResult
from .tokenize.models import (
    AtomVocabulary,
    ContinuousToken,
    DiscreteToken,
    FrozenGinLayer,
    FrozenGnnTokenizer,
    MotifVocabulary,
    Token,
    TokenSet,
)

__all__ = [
    "AdjacencyView",
    "AtomVocabulary",
    "BondType",
    "Checkpoint",
    "CheckpointMeta",
    "Chirality",
    "CleavageRule",
    "CleavageTable",
    "ContinuousToken",
    "DiscreteToken",
    "Edge",
    "EdgeAttr",
    "EpochMetrics",
    "Fragment",
    "FragmentKind",
    "FrozenGinLayer",
    "FrozenGnnTokenizer",
    "GraphBatch",
    "MaskPlan",
    "MolGraph",
    "MotifVocabulary",
    "NodeAttr",
    "Pattern",
    "PatternAtom",
    "PatternBond",
    "RecipeNode",
    "Token",
    "TokenSet",
    "TrainResult",
]
