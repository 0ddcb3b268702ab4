from typing import Optional

from src.config import SgtSettings, get_settings
from src.schemas.sgt.models import GraphOperatorKind, SgtConfig


def make_sgt_config(embedding_dim: int, settings: Optional[SgtSettings] = None) -> SgtConfig:
    """
    Build the tokenizer config from the ``[sgt]`` section.

    Args:
        embedding_dim: Width of the shared encoder embedding
        settings: SGT section (defaults to the global settings)

    Returns:
        SgtConfig
    """
    settings = settings or get_settings().sgt
    return SgtConfig(
        kind=GraphOperatorKind(name=settings.operator, eps=settings.eps),
        layers=settings.layers,
        embedding_dim=embedding_dim,
        bn_epsilon=settings.bn_epsilon,
        batch_norm=settings.batch_norm,
    )
