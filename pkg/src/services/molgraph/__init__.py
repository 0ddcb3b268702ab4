from .graph_ops import (
    adjacency,
    batch_graphs,
    connected_components,
    edge_type_counts,
    induced_subgraph,
    make_batch,
    subtree_key,
    to_networkx,
)
from .io import load_graph_file, render_graphs, write_graph_file
from .smiles import SmilesParser, parse_smiles

__all__ = [
    "SmilesParser",
    "adjacency",
    "batch_graphs",
    "connected_components",
    "edge_type_counts",
    "induced_subgraph",
    "load_graph_file",
    "make_batch",
    "parse_smiles",
    "render_graphs",
    "subtree_key",
    "to_networkx",
    "write_graph_file",
]
