import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from src.exceptions import EmptyKeepSetError, ShapeError
from src.services.tensorcore import (
    Parameter,
    Tensor,
    add,
    constant,
    layer_norm,
    matmul,
    relu,
    row_select,
    scale,
    softmax_rows,
    transpose,
)

from .parameters import ParameterSet


@dataclass(frozen=True)
class GinLayer:
    """Combine MLP of one message-passing layer, with an optional edge-type table added into messages."""

    w1: Parameter
    b1: Parameter
    w2: Parameter
    b2: Parameter
    edge_embed: Optional[Parameter] = None
    eps: float = 0.0

    @classmethod
    def from_params(cls, params: ParameterSet, prefix: str, eps: float = 0.0) -> "GinLayer":
        edge_name = f"{prefix}.edge_embed"
        return cls(
            w1=params[f"{prefix}.w1"],
            b1=params[f"{prefix}.b1"],
            w2=params[f"{prefix}.w2"],
            b2=params[f"{prefix}.b2"],
            edge_embed=params[edge_name] if edge_name in params else None,
            eps=eps,
        )


@dataclass(frozen=True)
class AttnLayer:
    """Pre-norm single-head self-attention block with a position-wise feed-forward."""

    ln1_gamma: Parameter
    ln1_beta: Parameter
    wq: Parameter
    wk: Parameter
    wv: Parameter
    wo: Parameter
    ln2_gamma: Parameter
    ln2_beta: Parameter
    ff1_w: Parameter
    ff1_b: Parameter
    ff2_w: Parameter
    ff2_b: Parameter

    @classmethod
    def from_params(cls, params: ParameterSet, prefix: str) -> "AttnLayer":
        return cls(
            ln1_gamma=params[f"{prefix}.ln1.gamma"],
            ln1_beta=params[f"{prefix}.ln1.beta"],
            wq=params[f"{prefix}.wq"],
            wk=params[f"{prefix}.wk"],
            wv=params[f"{prefix}.wv"],
            wo=params[f"{prefix}.wo"],
            ln2_gamma=params[f"{prefix}.ln2.gamma"],
            ln2_beta=params[f"{prefix}.ln2.beta"],
            ff1_w=params[f"{prefix}.ff1.w"],
            ff1_b=params[f"{prefix}.ff1.b"],
            ff2_w=params[f"{prefix}.ff2.w"],
            ff2_b=params[f"{prefix}.ff2.b"],
        )


def linear(x: Tensor, w: Parameter, b: Parameter) -> Tensor:
    return add(matmul(x, w), b)


def gin_forward(h: Tensor, adj: np.ndarray, layer: GinLayer, edge_counts: Optional[np.ndarray] = None) -> Tensor:
    """
    One GIN layer: MLP((1 + eps) * h_i + sum over neighbors j of (h_j + edge_embed(e_ij))).

    Args:
        h: n x d node states
        adj: n x n 0/1 adjacency
        layer: Layer weights
        edge_counts: n x 4 per-node counts of incident bond types; required when the layer has an edge table

    Returns:
        n x d_out node states
    """
    if adj.shape != (h.shape[0], h.shape[0]):
        raise ShapeError(f"gin_forward: adjacency {adj.shape} for {h.shape[0]} nodes")
    aggregate = matmul(constant(adj), h)
    if layer.edge_embed is not None:
        if edge_counts is None:
            raise ShapeError("gin_forward: the layer embeds edge types but no edge counts were given")
        aggregate = add(aggregate, matmul(constant(edge_counts), layer.edge_embed))
    combined = add(scale(h, 1.0 + layer.eps), aggregate)
    hidden = relu(linear(combined, layer.w1, layer.b1))
    return linear(hidden, layer.w2, layer.b2)


def _check_keep(node_graph: np.ndarray, keep: np.ndarray) -> None:
    present = set(np.unique(node_graph).tolist())
    kept = set(np.unique(node_graph[keep]).tolist())
    emptied = sorted(present - kept)
    if emptied:
        raise EmptyKeepSetError(
            f"every node of batch graph(s) {emptied} is masked before the attention layers; lower the mask ratio"
        )


def attn_forward(h: Tensor, layer: AttnLayer, node_graph: np.ndarray, keep: Optional[Sequence[int]] = None) -> Tensor:
    """
    Attention block over the rows of ``h``; nodes attend only within their own graph.

    Args:
        h: n x d node states
        layer: Block weights
        node_graph: Owning graph of each of the n rows
        keep: When given, only these rows take part and the result has ``len(keep)`` rows

    Raises:
        EmptyKeepSetError: when ``keep`` removes every node of some graph
    """
    node_graph = np.asarray(node_graph)
    if node_graph.shape != (h.shape[0],):
        raise ShapeError(f"attn_forward: {node_graph.shape[0]} graph ids for {h.shape[0]} rows")
    if keep is not None:
        keep = np.asarray(keep, dtype=np.int64)
        _check_keep(node_graph, keep)
        h = row_select(h, keep)
        node_graph = node_graph[keep]

    block = node_graph[:, None] == node_graph[None, :]
    dim = h.shape[1]
    y = layer_norm(h, layer.ln1_gamma, layer.ln1_beta)
    q, k, v = matmul(y, layer.wq), matmul(y, layer.wk), matmul(y, layer.wv)
    weights = softmax_rows(scale(matmul(q, transpose(k)), 1.0 / math.sqrt(dim)), block)
    h = add(h, matmul(matmul(weights, v), layer.wo))

    y = layer_norm(h, layer.ln2_gamma, layer.ln2_beta)
    return add(h, linear(relu(linear(y, layer.ff1_w, layer.ff1_b)), layer.ff2_w, layer.ff2_b))


def attention_weights(h: Tensor, layer: AttnLayer, node_graph: np.ndarray) -> np.ndarray:
    """Softmax attention matrix of the block (no tape); rows sum to 1 within each graph."""
    node_graph = np.asarray(node_graph)
    block = node_graph[:, None] == node_graph[None, :]
    y = layer_norm(h, layer.ln1_gamma, layer.ln1_beta)
    scores = scale(matmul(matmul(y, layer.wq), transpose(matmul(y, layer.wk))), 1.0 / math.sqrt(h.shape[1]))
    return softmax_rows(scores, block).numpy()
