import logging
from typing import Mapping

import numpy as np
from src.exceptions import TokenizationException
from src.schemas.molgraph.models import MolGraph
from src.schemas.sgt.models import SgtConfig, SgtTokens
from src.schemas.tokenize.models import AtomVocabulary
from src.services.molgraph.graph_ops import adjacency

from .operator import build_operator

logger = logging.getLogger(__name__)


def batch_normalize(matrix: np.ndarray, bn_epsilon: float = 1e-5) -> np.ndarray:
    """Standardize each column by its population mean and variance: (x - mu) / sqrt(var + eps); no affine."""
    if matrix.shape[0] < 1:
        raise TokenizationException("batch normalization needs at least one row")
    mean = matrix.mean(axis=0)
    variance = matrix.var(axis=0)
    return (matrix - mean) / np.sqrt(variance + bn_epsilon)


def embedding_snapshot(table: np.ndarray, atom_vocab: AtomVocabulary) -> dict:
    """Copy of the embedding rows of every vocabulary atom type, keyed by atomic number."""
    return {z: np.array(table[k], dtype=np.float64, copy=True) for k, z in enumerate(atom_vocab.atomic_numbers)}


def sgt_tokenize(batch: MolGraph, embedding: Mapping[int, np.ndarray], cfg: SgtConfig) -> SgtTokens:
    """
    Tokens of the simple GNN tokenizer on a clean (unmasked) batch.

    H0 holds the embedding rows; each layer propagates with the linear operator and normalizes the
    columns over the whole batch. The output concatenates H1..Hk. Plain arrays only, so no gradient
    ever reaches the embedding through the targets.

    Args:
        batch: Unmasked graph (a disjoint union for a batch)
        embedding: Atomic number -> vector of length ``cfg.embedding_dim``
        cfg: Tokenizer config

    Returns:
        SgtTokens of shape n x (k * d)
    """
    missing = sorted({int(z) for z in batch.atomic_numbers} - set(embedding))
    if missing:
        raise TokenizationException(f"embedding has no row for atomic numbers {missing}")

    types = sorted({int(z) for z in batch.atomic_numbers})
    table = np.stack([np.asarray(embedding[z], dtype=np.float64) for z in types])
    if table.shape[1] != cfg.embedding_dim:
        raise TokenizationException(f"embedding rows have width {table.shape[1]}, config expects {cfg.embedding_dim}")

    operator = build_operator(adjacency(batch), cfg.kind)
    onehot = (np.asarray(batch.atomic_numbers)[:, None] == np.array(types)[None, :]).astype(np.float64)
    # Nodes with equal operator-weighted neighbor type counts share one row, so equal one-hop
    # subtrees get bit-identical first-layer tokens.
    counts, inverse = np.unique(operator @ onehot, axis=0, return_inverse=True)
    h = (counts @ table)[inverse.reshape(-1)]

    outputs = []
    for layer in range(cfg.layers):
        if layer:
            h = operator @ h
        if cfg.batch_norm:
            h = batch_normalize(h, cfg.bn_epsilon)
        outputs.append(h)
    return SgtTokens(values=np.concatenate(outputs, axis=1), layers=cfg.layers, embedding_dim=cfg.embedding_dim)
