from typing import Sequence

import numpy as np
from src.exceptions import ShapeError

from .tensor import Tensor, as_tensor, emit

# Added under the square root of every norm in the cosine loss.
NORM_GUARD = 1e-12


def _rows(pred: Tensor, target: np.ndarray, op: str) -> None:
    if pred.value.ndim != 2 or pred.shape[0] == 0:
        raise ShapeError(f"{op} needs a non-empty m x d prediction, got {pred.shape}")
    if target.shape != pred.shape:
        raise ShapeError(f"{op}: prediction {pred.shape} and target {target.shape} differ")


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean over all entries of the squared difference; the target is a constant."""
    pred = as_tensor(pred)
    target = np.asarray(target.value if isinstance(target, Tensor) else target, dtype=np.float64)
    _rows(pred, target, "mse_loss")
    diff = pred.value - target
    count = diff.size
    return emit("mse_loss", np.array((diff**2).sum() / count), (pred,), lambda g: (float(g) * 2.0 * diff / count,))


def cross_entropy(logits: Tensor, ids: Sequence[int]) -> Tensor:
    """Mean over rows of -log softmax(logits)[id]."""
    logits = as_tensor(logits)
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if logits.value.ndim != 2 or logits.shape[0] == 0:
        raise ShapeError(f"cross_entropy needs non-empty m x K logits, got {logits.shape}")
    if ids.size != logits.shape[0]:
        raise ShapeError(f"cross_entropy: {ids.size} ids for {logits.shape[0]} rows")
    if ids.min() < 0 or ids.max() >= logits.shape[1]:
        raise ShapeError(f"cross_entropy: id outside 0..{logits.shape[1] - 1}")

    rows = np.arange(ids.size)
    shifted = logits.value - logits.value.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    value = (log_norm - shifted[rows, ids]).mean()
    probs = np.exp(shifted - log_norm[:, None])

    def backward(g):
        grad = probs.copy()
        grad[rows, ids] -= 1.0
        return (float(g) * grad / ids.size,)

    return emit("cross_entropy", np.array(value), (logits,), backward)


def sce_loss(pred: Tensor, target, gamma: float = 1.0) -> Tensor:
    """
    Scaled cosine error: mean over rows of (1 - cos(pred_i, target_i)) ** gamma.

    Norms are smoothed as sqrt(|x|^2 + 1e-12), so a zero row has cosine 0.
    """
    pred = as_tensor(pred)
    target = np.asarray(target.value if isinstance(target, Tensor) else target, dtype=np.float64)
    _rows(pred, target, "sce_loss")
    if gamma < 1.0:
        raise ShapeError(f"sce_loss needs gamma >= 1, got {gamma}")

    m = pred.shape[0]
    p = pred.value
    p_norm = np.sqrt((p**2).sum(axis=1, keepdims=True) + NORM_GUARD)
    t_unit = target / np.sqrt((target**2).sum(axis=1, keepdims=True) + NORM_GUARD)
    cosine = (p * t_unit).sum(axis=1, keepdims=True) / p_norm
    gap = np.maximum(1.0 - cosine, 0.0)
    value = (gap**gamma).mean()

    def backward(g):
        d_cos = -gamma * gap ** (gamma - 1.0) / m
        d_pred = t_unit / p_norm - cosine * p / p_norm**2
        return (float(g) * d_cos * d_pred,)

    return emit("sce_loss", np.array(value), (pred,), backward)
