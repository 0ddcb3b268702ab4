"""Differentiable operations on 2-D float64 tensors.

Broadcasting is limited to a row vector (shape ``(d,)`` or ``(1, d)``) against an ``n x d`` matrix;
anything else is a ShapeError.
"""

from typing import Optional, Sequence

import numpy as np
from src.exceptions import ShapeError

from .tensor import Tensor, as_tensor, emit


def _matrix(x: Tensor, op: str) -> None:
    if x.value.ndim != 2:
        raise ShapeError(f"{op} expects a 2-D tensor, got shape {x.shape}")


def _row_broadcast(a: Tensor, b: Tensor, op: str) -> bool:
    """True when b is a row vector broadcast over a's rows; False when shapes match exactly."""
    if a.shape == b.shape:
        return False
    if a.value.ndim == 2 and b.shape in ((a.shape[1],), (1, a.shape[1])):
        return True
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are incompatible")


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    return grad.sum(axis=0).reshape(shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _matrix(a, "matmul")
    _matrix(b, "matmul")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    return emit("matmul", a.value @ b.value, (a, b), lambda g: (g @ b.value.T, a.value.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    broadcast = _row_broadcast(a, b, "add")
    return emit("add", a.value + b.value, (a, b), lambda g: (g, _unbroadcast(g, b.shape) if broadcast else g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    broadcast = _row_broadcast(a, b, "sub")
    return emit("sub", a.value - b.value, (a, b), lambda g: (g, -(_unbroadcast(g, b.shape) if broadcast else g)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product."""
    a, b = as_tensor(a), as_tensor(b)
    broadcast = _row_broadcast(a, b, "mul")
    bv = b.value.reshape(1, -1) if broadcast else b.value

    def backward(g):
        gb = g * a.value
        return g * bv, _unbroadcast(gb, b.shape) if broadcast else gb

    return emit("mul", a.value * bv, (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    a = as_tensor(a)
    factor = float(factor)
    return emit("scale", a.value * factor, (a,), lambda g: (g * factor,))


def transpose(a: Tensor) -> Tensor:
    a = as_tensor(a)
    _matrix(a, "transpose")
    return emit("transpose", a.value.T.copy(), (a,), lambda g: (g.T,))


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    active = a.value > 0
    return emit("relu", np.where(active, a.value, 0.0), (a,), lambda g: (g * active,))


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    for p in parts:
        _matrix(p, "concat_cols")
    if len({p.shape[0] for p in parts}) != 1:
        raise ShapeError(f"concat_cols: row counts differ {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])
    return emit(
        "concat_cols",
        np.concatenate([p.value for p in parts], axis=1),
        parts,
        lambda g: [g[:, bounds[k] : bounds[k + 1]] for k in range(len(parts))],
    )


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    for p in parts:
        _matrix(p, "concat_rows")
    if len({p.shape[1] for p in parts}) != 1:
        raise ShapeError(f"concat_rows: column counts differ {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])
    return emit(
        "concat_rows",
        np.concatenate([p.value for p in parts], axis=0),
        parts,
        lambda g: [g[bounds[k] : bounds[k + 1]] for k in range(len(parts))],
    )


def _indices(index, limit: int, op: str) -> np.ndarray:
    index = np.asarray(index, dtype=np.int64).reshape(-1)
    if index.size and (index.min() < 0 or index.max() >= limit):
        raise ShapeError(f"{op}: index outside 0..{limit - 1}")
    return index


def row_select(a: Tensor, index) -> Tensor:
    """Rows ``a[index]``; repeated indices are allowed and their adjoints add up."""
    a = as_tensor(a)
    _matrix(a, "row_select")
    index = _indices(index, a.shape[0], "row_select")

    def backward(g):
        grad = np.zeros_like(a.value)
        np.add.at(grad, index, g)
        return (grad,)

    return emit("row_select", a.value[index], (a,), backward)


def replace_rows(a: Tensor, index, rows: Tensor) -> Tensor:
    """Copy of ``a`` with the rows at ``index`` replaced by ``rows`` (a matrix, or one row vector for all)."""
    a, rows = as_tensor(a), as_tensor(rows)
    _matrix(a, "replace_rows")
    index = _indices(index, a.shape[0], "replace_rows")
    if len(set(index.tolist())) != index.size:
        raise ShapeError("replace_rows: duplicate indices")
    single = rows.shape in ((a.shape[1],), (1, a.shape[1]))
    if not single and rows.shape != (index.size, a.shape[1]):
        raise ShapeError(f"replace_rows: {rows.shape} cannot fill {index.size} rows of width {a.shape[1]}")

    value = a.value.copy()
    value[index] = rows.value.reshape(1, -1) if single else rows.value

    def backward(g):
        ga = g.copy()
        ga[index] = 0.0
        gr = g[index]
        return ga, gr.sum(axis=0).reshape(rows.shape) if single else gr

    return emit("replace_rows", value, (a, rows), backward)


def pad_rows(a: Tensor, keep, total: int, fill: Tensor) -> Tensor:
    """``total`` rows: rows of ``a`` at positions ``keep`` and the row vector ``fill`` everywhere else."""
    a, fill = as_tensor(a), as_tensor(fill)
    _matrix(a, "pad_rows")
    keep = _indices(keep, total, "pad_rows")
    if keep.size != a.shape[0]:
        raise ShapeError(f"pad_rows: {a.shape[0]} rows for {keep.size} positions")
    if fill.shape not in ((a.shape[1],), (1, a.shape[1])):
        raise ShapeError(f"pad_rows: fill of shape {fill.shape} for width {a.shape[1]}")
    others = np.setdiff1d(np.arange(total), keep)
    value = np.empty((total, a.shape[1]))
    value[keep] = a.value
    value[others] = fill.value.reshape(1, -1)
    return emit("pad_rows", value, (a, fill), lambda g: (g[keep], g[others].sum(axis=0).reshape(fill.shape)))


def sum_rows(a: Tensor) -> Tensor:
    """Column sums as a 1 x d row."""
    a = as_tensor(a)
    _matrix(a, "sum_rows")
    return emit("sum_rows", a.value.sum(axis=0, keepdims=True), (a,), lambda g: (np.repeat(g, a.shape[0], axis=0),))


def mean_rows(a: Tensor) -> Tensor:
    a = as_tensor(a)
    _matrix(a, "mean_rows")
    if a.shape[0] == 0:
        raise ShapeError("mean_rows of an empty tensor")
    n = a.shape[0]
    return emit("mean_rows", a.value.mean(axis=0, keepdims=True), (a,), lambda g: (np.repeat(g / n, n, axis=0),))


def max_rows(a: Tensor) -> Tensor:
    """Column maxima as a 1 x d row; the adjoint goes to the first maximal row."""
    a = as_tensor(a)
    _matrix(a, "max_rows")
    if a.shape[0] == 0:
        raise ShapeError("max_rows of an empty tensor")
    winners = a.value.argmax(axis=0)
    columns = np.arange(a.shape[1])

    def backward(g):
        grad = np.zeros_like(a.value)
        grad[winners, columns] = g.reshape(-1)
        return (grad,)

    return emit("max_rows", a.value[winners, columns].reshape(1, -1), (a,), backward)


def total(a: Tensor) -> Tensor:
    """Sum of every entry (scalar)."""
    a = as_tensor(a)
    return emit("sum", np.array(a.value.sum()), (a,), lambda g: (np.full(a.shape, float(g)),))


def mean(a: Tensor) -> Tensor:
    a = as_tensor(a)
    if a.value.size == 0:
        raise ShapeError("mean of an empty tensor")
    n = a.value.size
    return emit("mean", np.array(a.value.mean()), (a,), lambda g: (np.full(a.shape, float(g) / n),))


def softmax_rows(a: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Row-wise softmax; entries where ``mask`` is False get probability 0.

    Every row must keep at least one entry.
    """
    a = as_tensor(a)
    _matrix(a, "softmax_rows")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape:
            raise ShapeError(f"softmax_rows: mask {mask.shape} for logits {a.shape}")
        if not mask.any(axis=1).all():
            raise ShapeError("softmax_rows: a row has every entry masked")
        logits = np.where(mask, a.value, -np.inf)
    else:
        logits = a.value
    shifted = logits - logits.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    probs = weights / weights.sum(axis=1, keepdims=True)

    def backward(g):
        return (probs * (g - (g * probs).sum(axis=1, keepdims=True)),)

    return emit("softmax_rows", probs, (a,), backward)


def embedding_lookup(table: Tensor, ids, mask_id: Optional[int] = None) -> Tensor:
    """
    Gather table rows by id; adjoints scatter back into the table.

    Args:
        table: K x d embedding table
        ids: Row ids, each < K
        mask_id: Reserved mask row, validated to lie inside the table when given
    """
    table = as_tensor(table)
    _matrix(table, "embedding_lookup")
    if mask_id is not None and not 0 <= mask_id < table.shape[0]:
        raise ShapeError(f"embedding_lookup: mask id {mask_id} outside a table of {table.shape[0]} rows")
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"embedding_lookup: id outside 0..{table.shape[0] - 1}")
    return row_select(table, ids)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-column standardization over the rows with a learned affine, differentiable through mean and variance."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    _matrix(x, "batch_norm")
    d = x.shape[1]
    if gamma.shape not in ((d,), (1, d)) or beta.shape not in ((d,), (1, d)):
        raise ShapeError(f"batch_norm: gamma {gamma.shape} / beta {beta.shape} for width {d}")
    centered = x.value - x.value.mean(axis=0, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=0, keepdims=True) + eps)
    normalized = centered * inv_std
    g_row = gamma.value.reshape(1, -1)

    def backward(g):
        g_norm = g * g_row
        gx = inv_std * (g_norm - g_norm.mean(axis=0, keepdims=True) - normalized * (g_norm * normalized).mean(axis=0, keepdims=True))
        return gx, (g * normalized).sum(axis=0).reshape(gamma.shape), g.sum(axis=0).reshape(beta.shape)

    return emit("batch_norm", normalized * g_row + beta.value.reshape(1, -1), (x, gamma, beta), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row standardization with a learned affine."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    _matrix(x, "layer_norm")
    d = x.shape[1]
    if gamma.shape not in ((d,), (1, d)) or beta.shape not in ((d,), (1, d)):
        raise ShapeError(f"layer_norm: gamma {gamma.shape} / beta {beta.shape} for width {d}")
    centered = x.value - x.value.mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=1, keepdims=True) + eps)
    normalized = centered * inv_std
    g_row = gamma.value.reshape(1, -1)

    def backward(g):
        g_norm = g * g_row
        gx = inv_std * (g_norm - g_norm.mean(axis=1, keepdims=True) - normalized * (g_norm * normalized).mean(axis=1, keepdims=True))
        return gx, (g * normalized).sum(axis=0).reshape(gamma.shape), g.sum(axis=0).reshape(beta.shape)

    return emit("layer_norm", normalized * g_row + beta.value.reshape(1, -1), (x, gamma, beta), backward)
