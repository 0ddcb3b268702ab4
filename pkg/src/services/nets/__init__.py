from .autoencoder import BatchContext, decode, encode, pool_subgraph
from .factory import make_autoencoder, make_autoencoder_config, make_stack_config
from .gradcheck import check_pipeline, run_pipeline_suite
from .init import check_stacks, decoder_width, init_autoencoder
from .layers import AttnLayer, GinLayer, attention_weights, attn_forward, gin_forward, linear
from .parameters import ParameterSet

__all__ = [
    "AttnLayer",
    "BatchContext",
    "GinLayer",
    "ParameterSet",
    "attention_weights",
    "attn_forward",
    "check_pipeline",
    "check_stacks",
    "decode",
    "decoder_width",
    "encode",
    "gin_forward",
    "init_autoencoder",
    "linear",
    "make_autoencoder",
    "make_autoencoder_config",
    "make_stack_config",
    "pool_subgraph",
    "run_pipeline_suite",
]
