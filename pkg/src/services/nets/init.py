import logging

import numpy as np
from src.exceptions import StackConfigError
from src.schemas.nets.models import AutoencoderConfig, StackConfig
from src.services.molgraph.graph_ops import NUM_BOND_TYPES

from .parameters import ParameterSet

logger = logging.getLogger(__name__)


def _dense(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))


def _add_gin(params: ParameterSet, rng, prefix: str, d_in: int, d_out: int, edge_features: bool) -> None:
    params.add(f"{prefix}.w1", _dense(rng, d_in, d_out))
    params.add(f"{prefix}.b1", np.zeros(d_out))
    params.add(f"{prefix}.w2", _dense(rng, d_out, d_out))
    params.add(f"{prefix}.b2", np.zeros(d_out))
    if edge_features:
        params.add(f"{prefix}.edge_embed", rng.normal(0.0, 0.1, size=(NUM_BOND_TYPES, d_in)))


def _add_attn(params: ParameterSet, rng, prefix: str, dim: int) -> None:
    for norm in ("ln1", "ln2"):
        params.add(f"{prefix}.{norm}.gamma", np.ones(dim))
        params.add(f"{prefix}.{norm}.beta", np.zeros(dim))
    for name in ("wq", "wk", "wv", "wo"):
        params.add(f"{prefix}.{name}", _dense(rng, dim, dim))
    params.add(f"{prefix}.ff1.w", _dense(rng, dim, dim))
    params.add(f"{prefix}.ff1.b", np.zeros(dim))
    params.add(f"{prefix}.ff2.w", _dense(rng, dim, dim))
    params.add(f"{prefix}.ff2.b", np.zeros(dim))


def decoder_width(cfg: AutoencoderConfig) -> int:
    """Width of the decoder's hidden states (the encoder width when the decoder has no message passing)."""
    decoder = cfg.decoder
    if decoder.is_linear or decoder.gin_layers == 0:
        return cfg.encoder.model_dim
    return decoder.model_dim


def check_stacks(cfg: AutoencoderConfig) -> None:
    """
    Raises:
        StackConfigError: when the decoder's attention layers cannot take the encoder width
    """
    decoder = cfg.decoder
    if decoder.attn_layers and not decoder.gin_layers and decoder.model_dim != cfg.encoder.model_dim:
        raise StackConfigError(
            f"decoder preset {decoder.preset!r} has attention but no message passing; "
            f"its width {decoder.model_dim} must equal the encoder width {cfg.encoder.model_dim}"
        )
    if cfg.mask_id >= cfg.num_embeddings:
        raise StackConfigError(f"mask row {cfg.mask_id} is outside an embedding table of {cfg.num_embeddings} rows")


def _add_encoder(params: ParameterSet, rng, cfg: AutoencoderConfig) -> None:
    stack: StackConfig = cfg.encoder
    dim = stack.model_dim
    params.add("encoder.embed", rng.normal(0.0, 1.0, size=(cfg.num_embeddings, dim)))
    if stack.is_linear:
        params.add("encoder.linear.w", _dense(rng, dim, dim))
        params.add("encoder.linear.b", np.zeros(dim))
    for layer in range(stack.gin_layers):
        _add_gin(params, rng, f"encoder.gin{layer}", dim, dim, stack.edge_features)
        params.add(f"encoder.bn{layer}.gamma", np.ones(dim))
        params.add(f"encoder.bn{layer}.beta", np.zeros(dim))
    for layer in range(stack.attn_layers):
        _add_attn(params, rng, f"encoder.attn{layer}", dim)
    params.add("remask.m1", rng.normal(0.0, 1.0 / np.sqrt(dim), size=dim))


def _add_decoder(params: ParameterSet, rng, cfg: AutoencoderConfig) -> None:
    stack: StackConfig = cfg.decoder
    width = decoder_width(cfg)
    if not stack.is_linear:
        d_in = cfg.encoder.model_dim
        for layer in range(stack.gin_layers):
            _add_gin(params, rng, f"decoder.gin{layer}", d_in, width, stack.edge_features)
            d_in = width
        for layer in range(stack.attn_layers):
            _add_attn(params, rng, f"decoder.attn{layer}", width)
    params.add("decoder.out.w", _dense(rng, width, cfg.output_dim))
    params.add("decoder.out.b", np.zeros(cfg.output_dim))


def init_autoencoder(cfg: AutoencoderConfig, rng: np.random.Generator) -> ParameterSet:
    """
    Draw the initial weights of the encoder, the remask token and the decoder.

    Every array is drawn from ``rng`` in a fixed order, so one seed gives one initialization.
    """
    check_stacks(cfg)
    params = ParameterSet()
    _add_encoder(params, rng, cfg)
    _add_decoder(params, rng, cfg)
    logger.info(
        f"Initialized {cfg.encoder.preset} encoder and {cfg.decoder.preset} decoder: "
        f"{len(params)} arrays, {params.size} weights"
    )
    return params
