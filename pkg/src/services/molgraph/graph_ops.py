import logging
from typing import Iterable, List, Sequence, Tuple

import networkx as nx
import numpy as np
from src.exceptions import GraphValidationError
from src.schemas.fragment.models import Fragment, FragmentKind
from src.schemas.molgraph.models import AdjacencyView, Edge, GraphBatch, MolGraph

logger = logging.getLogger(__name__)

NUM_BOND_TYPES = 4


def adjacency(graph: MolGraph) -> AdjacencyView:
    """Dense A, A + I and the degree vector of A + I."""
    n = graph.num_nodes
    a = np.zeros((n, n), dtype=np.float64)
    for edge in graph.edges:
        a[edge.i, edge.j] = 1.0
        a[edge.j, edge.i] = 1.0
    a_tilde = a + np.eye(n)
    return AdjacencyView(a=a, a_tilde=a_tilde, degree=a_tilde.sum(axis=1))


def edge_type_counts(graph: MolGraph) -> np.ndarray:
    """n x 4 matrix: number of incident edges of each bond type per node."""
    counts = np.zeros((graph.num_nodes, NUM_BOND_TYPES), dtype=np.float64)
    for edge in graph.edges:
        bond = int(edge.attr.bond_type)
        counts[edge.i, bond] += 1.0
        counts[edge.j, bond] += 1.0
    return counts


def induced_subgraph(graph: MolGraph, nodes: Iterable[int]) -> Fragment:
    """
    Fragment holding exactly the requested nodes and every edge of the graph with both ends inside.

    Args:
        graph: Parent graph
        nodes: Parent node indices (nonempty)

    Returns:
        Fragment whose node_ids/edge_ids are parent indices
    """
    node_set = frozenset(nodes)
    if not node_set:
        raise GraphValidationError("induced subgraph needs a nonempty node set")
    out_of_range = [index for index in node_set if index < 0 or index >= graph.num_nodes]
    if out_of_range:
        raise GraphValidationError(f"node indices {sorted(out_of_range)} outside 0..{graph.num_nodes - 1}")
    edge_ids = frozenset(k for k, edge in enumerate(graph.edges) if edge.i in node_set and edge.j in node_set)
    return Fragment(node_ids=node_set, edge_ids=edge_ids, kind=FragmentKind.INDUCED, parent=graph.fingerprint)


def batch_graphs(graphs: Sequence[MolGraph]) -> Tuple[MolGraph, Tuple[int, ...]]:
    """
    Disjoint union with block-diagonal adjacency.

    Returns:
        The union graph and the node offset of each member
    """
    if not graphs:
        raise GraphValidationError("cannot batch an empty sequence of graphs")
    if len(graphs) == 1:
        return graphs[0], (0,)

    nodes = []
    edges: List[Edge] = []
    offsets = []
    offset = 0
    for graph in graphs:
        offsets.append(offset)
        nodes.extend(graph.nodes)
        edges.extend(Edge(i=edge.i + offset, j=edge.j + offset, attr=edge.attr) for edge in graph.edges)
        offset += graph.num_nodes
    # members are already validated; the union may exceed the per-molecule node cap
    return MolGraph.model_construct(nodes=tuple(nodes), edges=tuple(edges)), tuple(offsets)


def make_batch(graphs: Sequence[MolGraph]) -> GraphBatch:
    graph, offsets = batch_graphs(graphs)
    return GraphBatch(graph=graph, offsets=offsets)


def to_networkx(graph: MolGraph, skip_edges: Iterable[int] = ()) -> nx.Graph:
    """networkx view with node attributes and edge index/bond attributes."""
    skipped = set(skip_edges)
    view = nx.Graph()
    for index, node in enumerate(graph.nodes):
        view.add_node(index, z=node.atomic_number, aromatic=node.is_aromatic)
    for k, edge in enumerate(graph.edges):
        if k not in skipped:
            view.add_edge(edge.i, edge.j, index=k, bond=int(edge.attr.bond_type))
    return view


def connected_components(graph: MolGraph, skip_edges: Iterable[int] = ()) -> List[Tuple[int, ...]]:
    """Components as sorted node tuples, ordered by smallest node."""
    components = nx.connected_components(to_networkx(graph, skip_edges))
    return sorted((tuple(sorted(component)) for component in components), key=lambda c: c[0])


def subtree_key(graph: MolGraph, index: int) -> str:
    """One-hop rooted subtree key ``CENTER:NEIGHBORS`` with neighbor symbols sorted ascending."""
    neighbors = sorted(graph.nodes[j].symbol for j in graph.neighbors[index])
    return f"{graph.nodes[index].symbol}:{''.join(neighbors)}"
