from typing import Optional

from src.config import RunConfig, StackSettings, get_settings
from src.exceptions import StackConfigError
from src.schemas.nets.models import PRESET_LAYERS, AutoencoderConfig, StackConfig
from src.schemas.tokenize.models import AtomVocabulary
from src.services.seeding import INIT_STREAM, stream_generator

from .init import init_autoencoder
from .parameters import ParameterSet


def make_stack_config(settings: StackSettings) -> StackConfig:
    if settings.preset not in PRESET_LAYERS:
        raise StackConfigError(f"unknown stack preset {settings.preset!r}; choose one of {sorted(PRESET_LAYERS)}")
    gin_layers, attn_layers = PRESET_LAYERS[settings.preset]
    return StackConfig(
        preset=settings.preset,
        gin_layers=gin_layers,
        attn_layers=attn_layers,
        model_dim=settings.model_dim,
        edge_features=settings.edge_features,
    )


def make_autoencoder_config(
    atom_vocab: AtomVocabulary,
    output_dim: int,
    settings: Optional[RunConfig] = None,
) -> AutoencoderConfig:
    """
    Autoencoder configuration for the configured stacks.

    Args:
        atom_vocab: Vocabulary sizing the embedding table (atoms, UNK and the m0 row)
        output_dim: Decoder output width: token width or class count
        settings: Run configuration (defaults when omitted)
    """
    settings = settings or get_settings()
    return AutoencoderConfig(
        encoder=make_stack_config(settings.encoder),
        decoder=make_stack_config(settings.decoder),
        num_embeddings=atom_vocab.num_rows,
        mask_id=atom_vocab.mask_id,
        output_dim=output_dim,
    )


def make_autoencoder(cfg: AutoencoderConfig, seed: int) -> ParameterSet:
    """Initial weights drawn from the run's init stream."""
    return init_autoencoder(cfg, stream_generator(seed, INIT_STREAM))
