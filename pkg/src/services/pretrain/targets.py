import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Sequence, Tuple

import numpy as np
from src.schemas.fragment.models import Fragment
from src.schemas.molgraph.models import GraphBatch, MolGraph
from src.schemas.sgt.models import SgtConfig
from src.schemas.tokenize.models import AtomVocabulary, FrozenGnnTokenizer, MotifVocabulary, TokenSet
from src.services.fragment.recipe import Fragmenter
from src.services.molgraph.graph_ops import subtree_key
from src.services.nets.parameters import ParameterSet
from src.services.sgt.tokenizer import embedding_snapshot, sgt_tokenize
from src.services.tokenize.canonical import MAX_CANONICAL_NODES
from src.services.tokenize.frozen_gnn import frozen_gnn_vectors
from src.services.tokenize.tokenizers import tok_motif

logger = logging.getLogger(__name__)


class TargetTokenizer(ABC):
    """Produces the reconstruction targets of a clean batch, outside any gradient tape."""

    kind: str
    level: str = "node"
    is_discrete: bool = False

    @property
    @abstractmethod
    def output_dim(self) -> int:
        """Decoder output width: token width or class count."""

    @abstractmethod
    def targets(self, graphs: Sequence[MolGraph], batch: GraphBatch, params: ParameterSet) -> TokenSet:
        """Targets of ``batch`` (the union of ``graphs``) under the current parameters."""


def _subtree_keys(graph: MolGraph) -> Tuple[str, ...]:
    return tuple(subtree_key(graph, index) for index in range(graph.num_nodes))


class NodeTargets(TargetTokenizer):
    """Atom-type ids of every node."""

    kind = "node"
    is_discrete = True

    def __init__(self, atom_vocab: AtomVocabulary):
        self.atom_vocab = atom_vocab

    @property
    def output_dim(self) -> int:
        return self.atom_vocab.num_classes

    def targets(self, graphs, batch, params) -> TokenSet:
        return TokenSet(
            level="node",
            ids=self.atom_vocab.indices(batch.graph.atomic_numbers),
            num_classes=self.atom_vocab.num_classes,
            subtree_keys=_subtree_keys(batch.graph),
        )


class SgtTargets(TargetTokenizer):
    """Simple GNN tokenizer on the encoder's current embedding table."""

    kind = "sgt"

    def __init__(self, cfg: SgtConfig, atom_vocab: AtomVocabulary):
        self.cfg = cfg
        self.atom_vocab = atom_vocab

    @property
    def output_dim(self) -> int:
        return self.cfg.layers * self.cfg.embedding_dim

    def targets(self, graphs, batch, params) -> TokenSet:
        snapshot = embedding_snapshot(params["encoder.embed"].value, self.atom_vocab)
        tokens = sgt_tokenize(batch.graph, snapshot, self.cfg)
        return TokenSet(level="node", vectors=tokens.values, subtree_keys=_subtree_keys(batch.graph))


class FrozenGnnTargets(TargetTokenizer):
    """Final hidden states of a frozen, previously trained GIN."""

    kind = "frozen_gnn"

    def __init__(self, tokenizer: FrozenGnnTokenizer):
        self.tokenizer = tokenizer

    @property
    def output_dim(self) -> int:
        return self.tokenizer.dim

    def targets(self, graphs, batch, params) -> TokenSet:
        return TokenSet(
            level="node",
            vectors=frozen_gnn_vectors(batch.graph, self.tokenizer),
            subtree_keys=_subtree_keys(batch.graph),
        )


def shift_fragment(fragment: Fragment, node_offset: int, edge_offset: int, parent: str) -> Fragment:
    """The same fragment addressed in batch coordinates."""
    return fragment.model_copy(
        update={
            "node_ids": frozenset(node + node_offset for node in fragment.node_ids),
            "edge_ids": frozenset(edge + edge_offset for edge in fragment.edge_ids),
            "parent": parent,
        }
    )


class MotifTargets(TargetTokenizer):
    """Vocabulary ids of the recipe's fragments; per-molecule tokens are computed once and reused."""

    kind = "motif"
    level = "fragment"
    is_discrete = True

    def __init__(self, fragmenter: Fragmenter, vocab: MotifVocabulary, max_nodes: int = MAX_CANONICAL_NODES):
        self.fragmenter = fragmenter
        self.vocab = vocab
        self.max_nodes = max_nodes
        self._cache: Dict[str, List[Tuple[int, Fragment]]] = {}

    @property
    def output_dim(self) -> int:
        return self.vocab.size

    def molecule_tokens(self, graph: MolGraph) -> List[Tuple[int, Fragment]]:
        key = graph.fingerprint
        if key not in self._cache:
            self._cache[key] = [(token.id, token.fragment) for token in tok_motif(graph, self.fragmenter, self.vocab, self.max_nodes)]
        return self._cache[key]

    def targets(self, graphs, batch, params) -> TokenSet:
        parent = batch.graph.fingerprint
        ids: List[int] = []
        fragments: List[Fragment] = []
        edge_offset = 0
        for graph, node_offset in zip(graphs, batch.offsets):
            for token_id, fragment in self.molecule_tokens(graph):
                ids.append(token_id)
                fragments.append(shift_fragment(fragment, node_offset, edge_offset, parent))
            edge_offset += graph.num_edges
        return TokenSet(
            level="fragment",
            ids=np.array(ids, dtype=np.int64),
            num_classes=self.vocab.size,
            fragments=tuple(fragments),
        )


def compute_targets(graphs: Sequence[MolGraph], batch: GraphBatch, tokenizer: TargetTokenizer, params: ParameterSet) -> TokenSet:
    """
    Reconstruction targets of the clean batch.

    Every tokenizer works on plain arrays (the SGT on a copy of the embedding table), so targets are
    constants for the optimizer.
    """
    targets = tokenizer.targets(graphs, batch, params)
    logger.debug(f"{tokenizer.kind} targets: {len(targets)} tokens of width {targets.dim}")
    return targets
