from typing import Dict, List, Tuple

import numpy as np
from src.exceptions import VocabularyError
from src.schemas.tokenize.models import TokenSet


def token_vocabulary(targets: TokenSet) -> Tuple[np.ndarray, np.ndarray]:
    """
    Deduplicate continuous node tokens by value; all nodes of one one-hop subtree share an entry.

    Returns:
        The K x d vocabulary in first-occurrence order and the vocabulary index of every node
    """
    positions: Dict[bytes, int] = {}
    rows: List[int] = []
    index = np.empty(len(targets), dtype=np.int64)
    for node, row in enumerate(targets.vectors):
        key = row.tobytes()
        if key not in positions:
            positions[key] = len(rows)
            rows.append(node)
        index[node] = positions[key]
    return targets.vectors[rows], index


def nearest_token(predictions: np.ndarray, vocab: np.ndarray) -> np.ndarray:
    """Index of the Euclidean-nearest vocabulary row per prediction; ties go to the lowest index."""
    if vocab.shape[0] == 0:
        raise VocabularyError("token vocabulary is empty")
    distances = ((predictions[:, None, :] - vocab[None, :, :]) ** 2).sum(axis=2)
    return distances.argmin(axis=1)


def token_prediction_accuracy(predictions: np.ndarray, true_index: np.ndarray, vocab: np.ndarray) -> float:
    """Fraction of predictions whose nearest vocabulary token is their own token."""
    if len(true_index) == 0:
        return 0.0
    return float(np.mean(nearest_token(np.atleast_2d(predictions), vocab) == np.asarray(true_index)))


def prediction_counts(predictions: np.ndarray, targets: TokenSet, rows: List[int]) -> Tuple[int, int]:
    """
    (correct, total) of one batch: argmax against the ids for discrete targets, nearest vocabulary token
    for continuous ones.

    Args:
        predictions: One row per scored token (decoder rows of masked nodes, or pooled fragment rows)
        targets: Targets of the batch
        rows: Token index of each prediction
    """
    if targets.is_discrete:
        guessed = predictions.argmax(axis=1)
        return int(np.sum(guessed == targets.ids[rows])), len(rows)
    vocab, token_index = token_vocabulary(targets)
    guessed = nearest_token(predictions, vocab)
    return int(np.sum(guessed == token_index[rows])), len(rows)
