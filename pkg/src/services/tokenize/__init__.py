from .canonical import canonical_key, local_graph
from .frozen_gnn import (
    frozen_gnn_tokenize,
    frozen_gnn_vectors,
    frozen_tokenizer_from_parameters,
    load_frozen_tokenizer,
    make_frozen_tokenizer,
)
from .tokenizers import build_atom_vocab, build_motif_vocab, fragment_keys, tok_edge, tok_motif, tok_node

__all__ = [
    "build_atom_vocab",
    "build_motif_vocab",
    "canonical_key",
    "fragment_keys",
    "frozen_gnn_tokenize",
    "frozen_gnn_vectors",
    "frozen_tokenizer_from_parameters",
    "load_frozen_tokenizer",
    "local_graph",
    "make_frozen_tokenizer",
    "tok_edge",
    "tok_motif",
    "tok_node",
]
