import logging
from typing import Mapping, Sequence

import numpy as np
from src.schemas.analyze.models import BnAblationReport, ColumnSpread
from src.schemas.molgraph.models import MolGraph
from src.schemas.sgt.models import SgtConfig
from src.services.molgraph.graph_ops import make_batch
from src.services.sgt.tokenizer import sgt_tokenize

logger = logging.getLogger(__name__)


def column_spread(values: np.ndarray) -> ColumnSpread:
    std = values.std(axis=0)
    return ColumnSpread(min_std=float(std.min()), mean_std=float(std.mean()), max_std=float(std.max()))


def bn_ablation(corpus: Sequence[MolGraph], embedding: Mapping[int, np.ndarray], cfg: SgtConfig) -> BnAblationReport:
    """
    Per-column std of the SGT tokens of one batch with and without batch normalization.

    Without normalization the columns keep the scale of the embedding, which shrinks as the embedding
    shrinks; with it every non-constant column has std close to one.
    """
    batch = make_batch(corpus).graph
    normalized = sgt_tokenize(batch, embedding, cfg.model_copy(update={"batch_norm": True})).values
    raw = sgt_tokenize(batch, embedding, cfg.model_copy(update={"batch_norm": False})).values
    report = BnAblationReport(num_nodes=batch.num_nodes, with_bn=column_spread(normalized), without_bn=column_spread(raw))
    logger.info(
        f"BN ablation on {batch.num_nodes} nodes: mean column std {report.with_bn.mean_std:.4f} with BN, "
        f"{report.without_bn.mean_std:.4f} without"
    )
    return report
