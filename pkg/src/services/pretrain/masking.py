import math
from typing import Optional, Tuple

import numpy as np
from src.exceptions import ConfigurationError
from src.schemas.molgraph.models import GraphBatch
from src.schemas.pretrain.models import MaskPlan
from src.schemas.tokenize.models import AtomVocabulary
from src.services.seeding import MASK_STREAM, stream_generator


def mask_count(num_nodes: int, ratio: float) -> int:
    """max(1, round(ratio * n)) with halves rounded up."""
    return max(1, math.floor(ratio * num_nodes + 0.5))


def mask_nodes(
    batch: GraphBatch,
    atom_vocab: AtomVocabulary,
    ratio: float,
    seed: int,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, MaskPlan]:
    """
    Sample the masked node set of every member graph and substitute the m0 row for them.

    Args:
        batch: Clean batch
        atom_vocab: Vocabulary giving the embedding row of each atom and the m0 row
        ratio: Mask ratio in (0, 1)
        seed: Run seed; draws come from its masking stream unless ``rng`` is given
        rng: Generator to draw from (the training loop passes its running masking stream)

    Returns:
        Embedding row per node with masked nodes set to m0, and the MaskPlan
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigurationError(f"mask ratio must lie in (0, 1), got {ratio}")
    rng = rng if rng is not None else stream_generator(seed, MASK_STREAM)

    masked = []
    for k, size in enumerate(batch.sizes):
        chosen = rng.choice(size, size=min(size, mask_count(size, ratio)), replace=False)
        masked.extend(int(batch.offsets[k] + node) for node in chosen)

    ids = atom_vocab.indices(batch.graph.atomic_numbers)
    plan = MaskPlan(masked=tuple(sorted(masked)), ratio=ratio, seed=seed)
    ids[list(plan.masked)] = atom_vocab.mask_id
    return ids, plan
