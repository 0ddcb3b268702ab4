import numpy as np
from src.schemas.molgraph.models import AdjacencyView
from src.schemas.sgt.models import GraphOperatorKind


def build_operator(adj: AdjacencyView, kind: GraphOperatorKind) -> np.ndarray:
    """
    Dense linear graph operator.

    gin: A + (1 + eps) I; gcn: D^-1/2 (A + I) D^-1/2; sage: D^-1 (A + I), with D the degree of A + I.

    Args:
        adj: Adjacency view of the (batched) graph
        kind: Operator family

    Returns:
        n x n operator matrix
    """
    if kind.name == "gin":
        return adj.a + (1.0 + kind.eps) * np.eye(adj.num_nodes)
    if kind.name == "gcn":
        scale = 1.0 / np.sqrt(adj.degree)
        return scale[:, None] * adj.a_tilde * scale[None, :]
    return adj.a_tilde / adj.degree[:, None]
