import logging
from pathlib import Path
from typing import List, Mapping, Sequence, Union

import numpy as np
from src.exceptions import TokenizationException
from src.repositories.checkpoint import load_checkpoint
from src.schemas.molgraph.models import MolGraph
from src.schemas.tokenize.models import AtomVocabulary, ContinuousToken, FrozenGinLayer, FrozenGnnTokenizer
from src.services.molgraph.graph_ops import adjacency

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    value = np.array(array, dtype=np.float64, copy=True)
    value.flags.writeable = False
    return value


def make_frozen_tokenizer(
    embedding: np.ndarray,
    atom_vocab: AtomVocabulary,
    layers: Sequence[FrozenGinLayer],
    eps: float = 0.0,
) -> FrozenGnnTokenizer:
    """
    Assemble a frozen GIN tokenizer after checking that the weight shapes chain together.

    Raises:
        TokenizationException: on any shape mismatch
    """
    if embedding.ndim != 2 or embedding.shape[0] < atom_vocab.num_classes:
        raise TokenizationException(
            f"embedding of shape {embedding.shape} does not cover the {atom_vocab.num_classes} atom classes"
        )
    if not layers:
        raise TokenizationException("a frozen GNN tokenizer needs at least one layer")

    width = embedding.shape[1]
    checked = []
    for k, layer in enumerate(layers):
        hidden = layer.w1.shape[1] if layer.w1.ndim == 2 else -1
        shapes_ok = (
            layer.w1.ndim == 2
            and layer.w1.shape[0] == width
            and layer.b1.shape == (hidden,)
            and layer.w2.ndim == 2
            and layer.w2.shape[0] == hidden
            and layer.b2.shape == (layer.w2.shape[1],)
        )
        if not shapes_ok:
            raise TokenizationException(
                f"layer {k} shapes w1={layer.w1.shape} b1={layer.b1.shape} w2={layer.w2.shape} b2={layer.b2.shape} "
                f"do not accept inputs of width {width}"
            )
        checked.append(FrozenGinLayer(w1=_frozen(layer.w1), b1=_frozen(layer.b1), w2=_frozen(layer.w2), b2=_frozen(layer.b2)))
        width = layer.w2.shape[1]
    return FrozenGnnTokenizer(embedding=_frozen(embedding), atom_vocab=atom_vocab, layers=tuple(checked), eps=eps)


def frozen_tokenizer_from_parameters(
    params: Mapping[str, np.ndarray],
    atom_vocab: AtomVocabulary,
    prefix: str = "encoder",
) -> FrozenGnnTokenizer:
    """Take the embedding and GIN combine weights of a trained stack; batch-norm and edge tables are not used."""
    if f"{prefix}.embed" not in params:
        raise TokenizationException(f"parameters hold no '{prefix}.embed' table")
    layers = []
    while f"{prefix}.gin{len(layers)}.w1" in params:
        base = f"{prefix}.gin{len(layers)}"
        layers.append(
            FrozenGinLayer(w1=params[f"{base}.w1"], b1=params[f"{base}.b1"], w2=params[f"{base}.w2"], b2=params[f"{base}.b2"])
        )
    return make_frozen_tokenizer(params[f"{prefix}.embed"], atom_vocab, layers)


def load_frozen_tokenizer(path: Union[str, Path]) -> FrozenGnnTokenizer:
    """Load a frozen tokenizer from a pretraining checkpoint."""
    checkpoint = load_checkpoint(path)
    atom_vocab = AtomVocabulary(atomic_numbers=checkpoint.meta.atom_vocab)
    tokenizer = frozen_tokenizer_from_parameters(checkpoint.params, atom_vocab)
    logger.info(f"Loaded a {len(tokenizer.layers)}-layer frozen tokenizer of width {tokenizer.dim} from {path}")
    return tokenizer


def frozen_gnn_vectors(graph: MolGraph, tokenizer: FrozenGnnTokenizer) -> np.ndarray:
    """Final-layer hidden states (n x dim) of the frozen network, computed with plain arrays."""
    h = tokenizer.embedding[tokenizer.atom_vocab.indices(graph.atomic_numbers)]
    a = adjacency(graph).a
    for k, layer in enumerate(tokenizer.layers):
        combined = (1.0 + tokenizer.eps) * h + a @ h
        h = np.maximum(combined @ layer.w1 + layer.b1, 0.0) @ layer.w2 + layer.b2
        if k < len(tokenizer.layers) - 1:
            h = np.maximum(h, 0.0)
    return h


def frozen_gnn_tokenize(graph: MolGraph, tokenizer: FrozenGnnTokenizer) -> List[ContinuousToken]:
    """One continuous token per node: the frozen network's final hidden state."""
    vectors = frozen_gnn_vectors(graph, tokenizer)
    return [ContinuousToken(vec=tuple(float(v) for v in row), node=index) for index, row in enumerate(vectors)]
