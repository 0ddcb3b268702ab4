from .factory import make_sgt_config
from .operator import build_operator
from .tokenizer import batch_normalize, embedding_snapshot, sgt_tokenize

__all__ = ["batch_normalize", "build_operator", "embedding_snapshot", "make_sgt_config", "sgt_tokenize"]
