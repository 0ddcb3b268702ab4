import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np
from src.exceptions import ModelException
from src.schemas.fragment.models import Fragment
from src.schemas.molgraph.models import GraphBatch
from src.schemas.nets.models import AutoencoderConfig, RemaskMode
from src.schemas.pretrain.models import MaskPlan
from src.services.molgraph.graph_ops import adjacency, edge_type_counts
from src.services.tensorcore import (
    Tensor,
    batch_norm,
    embedding_lookup,
    max_rows,
    mean_rows,
    pad_rows,
    relu,
    replace_rows,
    row_select,
    sum_rows,
)

from .layers import AttnLayer, GinLayer, attn_forward, gin_forward, linear
from .parameters import ParameterSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BatchContext:
    """Constant structure of a batch shared by every layer: adjacency, incident bond counts and node owners."""

    adjacency: np.ndarray
    edge_counts: np.ndarray
    node_graph: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_batch(cls, batch: GraphBatch) -> "BatchContext":
        return cls(
            adjacency=adjacency(batch.graph).a,
            edge_counts=edge_type_counts(batch.graph),
            node_graph=np.asarray(batch.node_graph),
        )


def _masked(plan: Optional[MaskPlan]) -> np.ndarray:
    return np.asarray(plan.masked if plan is not None else (), dtype=np.int64)


def encode(
    ids: np.ndarray,
    context: BatchContext,
    plan: Optional[MaskPlan],
    params: ParameterSet,
    cfg: AutoencoderConfig,
    remask: RemaskMode = "none",
) -> Tensor:
    """
    Encoder hidden states of a (masked) batch.

    Message passing runs on all nodes. With ``remask="v2"`` the masked rows are dropped before the
    attention layers and the remask token m1 is padded at their positions afterwards; with ``"v1"`` the
    encoder output rows of masked nodes are replaced by m1; ``"none"`` passes the output through.

    Args:
        ids: Embedding row per node, masked nodes already set to the m0 row
        context: Batch structure
        plan: Masked node set (None or empty for an unmasked pass)
        params: Model weights
        cfg: Stack configuration
        remask: Remask mode

    Returns:
        n x d hidden states
    """
    stack = cfg.encoder
    h = embedding_lookup(params["encoder.embed"], ids, mask_id=cfg.mask_id)
    if stack.is_linear:
        h = linear(h, params["encoder.linear.w"], params["encoder.linear.b"])

    edge_counts = context.edge_counts if stack.edge_features else None
    for layer in range(stack.gin_layers):
        h = gin_forward(h, context.adjacency, GinLayer.from_params(params, f"encoder.gin{layer}", cfg.gin_eps), edge_counts)
        h = batch_norm(h, params[f"encoder.bn{layer}.gamma"], params[f"encoder.bn{layer}.beta"], cfg.bn_epsilon)
        if layer < stack.gin_layers - 1:
            h = relu(h)

    masked = _masked(plan)
    m1 = params["remask.m1"]
    attn_layers = [AttnLayer.from_params(params, f"encoder.attn{layer}") for layer in range(stack.attn_layers)]
    if attn_layers and remask == "v2" and masked.size:
        keep = np.setdiff1d(np.arange(context.num_nodes), masked)
        h = attn_forward(h, attn_layers[0], context.node_graph, keep=keep)
        for layer in attn_layers[1:]:
            h = attn_forward(h, layer, context.node_graph[keep])
        return pad_rows(h, keep, context.num_nodes, m1)

    for layer in attn_layers:
        h = attn_forward(h, layer, context.node_graph)
    if remask != "none" and masked.size:
        h = replace_rows(h, masked, m1)
    return h


def decode(hidden: Tensor, context: BatchContext, params: ParameterSet, cfg: AutoencoderConfig) -> Tensor:
    """Per-node outputs of the decoder stack: token vectors or class logits (n x output_dim)."""
    stack = cfg.decoder
    h = hidden
    if not stack.is_linear:
        edge_counts = context.edge_counts if stack.edge_features else None
        for layer in range(stack.gin_layers):
            h = gin_forward(h, context.adjacency, GinLayer.from_params(params, f"decoder.gin{layer}", cfg.gin_eps), edge_counts)
            if layer < stack.gin_layers - 1:
                h = relu(h)
        for layer in range(stack.attn_layers):
            h = attn_forward(h, AttnLayer.from_params(params, f"decoder.attn{layer}"), context.node_graph)
    return linear(h, params["decoder.out.w"], params["decoder.out.b"])


def pool_subgraph(z: Tensor, nodes: Union[Fragment, Iterable[int]], mode: str = "mean") -> Tensor:
    """
    Pool the rows of ``z`` at a fragment's nodes into one 1 x d prediction.

    Raises:
        ModelException: for an empty node set or an unknown mode
    """
    index = list(nodes.sorted_nodes) if isinstance(nodes, Fragment) else sorted(nodes)
    if not index:
        raise ModelException("cannot pool an empty fragment")
    rows = row_select(z, index)
    if mode == "mean":
        return mean_rows(rows)
    if mode == "sum":
        return sum_rows(rows)
    if mode == "max":
        return max_rows(rows)
    raise ModelException(f"unknown pooling mode {mode!r}; use mean, sum or max")
