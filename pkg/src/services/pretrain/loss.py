from typing import List, Tuple

import numpy as np
from src.exceptions import TrainingException
from src.schemas.fragment.models import Fragment
from src.schemas.pretrain.models import MaskPlan
from src.schemas.tokenize.models import TokenSet
from src.services.nets.autoencoder import pool_subgraph
from src.services.tensorcore import Tensor, concat_rows, cross_entropy, mse_loss, row_select, sce_loss


def contributing_fragments(targets: TokenSet, plan: MaskPlan) -> List[Tuple[int, Fragment]]:
    """Fragment tokens whose node set meets the masked set, with their token index."""
    masked = set(plan.masked)
    return [(k, fragment) for k, fragment in enumerate(targets.fragments) if fragment.node_ids & masked]


def _distance(pred: Tensor, target: np.ndarray, loss: str, gamma: float) -> Tensor:
    if loss == "sce":
        return sce_loss(pred, target, gamma)
    return mse_loss(pred, target)


def reconstruction_loss(
    z: Tensor,
    targets: TokenSet,
    plan: MaskPlan,
    loss: str = "mse",
    sce_gamma: float = 1.0,
    pool: str = "mean",
) -> Tensor:
    """
    Reconstruction loss accumulated on the tokens that carry masked information.

    Node-level targets use the decoder rows of the masked nodes. Fragment-level targets pool the decoder
    rows of every fragment that meets the masked set and average over those fragments. Discrete
    targets use cross-entropy, continuous ones mse (or the scaled cosine error when ``loss="sce"``).

    Args:
        z: n x output_dim decoder output
        targets: Targets of the clean batch
        plan: Masked node set
        loss: ``mse`` or ``sce`` for continuous targets
        sce_gamma: Exponent of the scaled cosine error
        pool: Fragment pooling mode

    Raises:
        TrainingException: when no token meets the masked set
    """
    if targets.level == "node":
        if not plan.masked:
            raise TrainingException("no masked node to reconstruct")
        index = list(plan.masked)
        pred = row_select(z, index)
        if targets.is_discrete:
            return cross_entropy(pred, targets.ids[index])
        return _distance(pred, targets.vectors[index], loss, sce_gamma)

    contributing = contributing_fragments(targets, plan)
    if not contributing:
        raise TrainingException("no fragment token meets the masked node set")
    pooled = concat_rows([pool_subgraph(z, fragment, pool) for _, fragment in contributing])
    index = [k for k, _ in contributing]
    if targets.is_discrete:
        return cross_entropy(pooled, targets.ids[index])
    return _distance(pooled, targets.vectors[index], loss, sce_gamma)
