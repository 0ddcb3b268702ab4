import logging
from typing import FrozenSet, List, Sequence, Set, Tuple

import networkx as nx
from src.schemas.fragment.models import Fragment, FragmentKind
from src.schemas.molgraph.models import MolGraph
from src.services.molgraph.graph_ops import to_networkx

logger = logging.getLogger(__name__)


def ring_members(graph: MolGraph) -> Tuple[FrozenSet[int], FrozenSet[int]]:
    """Nodes and edges lying on at least one cycle (edges that are not bridges)."""
    view = to_networkx(graph)
    bridges = {(min(u, v), max(u, v)) for u, v in nx.bridges(view)}
    ring_edges = frozenset(k for k, edge in enumerate(graph.edges) if edge.pair not in bridges)
    ring_nodes = frozenset(node for k in ring_edges for node in graph.edges[k].pair)
    return ring_nodes, ring_edges


def _pieces(graph: MolGraph, nodes: Set[int], edge_ids: FrozenSet[int]) -> List[Tuple[FrozenSet[int], FrozenSet[int]]]:
    """Connected pieces of a node subset using only the given edges."""
    view = nx.Graph()
    view.add_nodes_from(sorted(nodes))
    inner = [k for k in sorted(edge_ids) if graph.edges[k].i in nodes and graph.edges[k].j in nodes]
    view.add_edges_from(graph.edges[k].pair for k in inner)
    pieces = []
    for component in nx.connected_components(view):
        members = frozenset(component)
        edges = frozenset(k for k in inner if graph.edges[k].i in members)
        pieces.append((members, edges))
    return pieces


def mgssl_refine(graph: MolGraph, fragments: Sequence[Fragment]) -> List[Fragment]:
    """
    Separate cycle content from non-cycle content inside each fragment.

    A fragment that mixes ring atoms with chain atoms is split: its ring part becomes one fragment per
    connected piece, each single atom hanging off a ring becomes a singleton, and each larger connected
    chain piece becomes its own fragment. Pure-ring and pure-chain fragments pass through unchanged.

    Args:
        graph: Molecule the fragments belong to
        fragments: Fragments covering the molecule

    Returns:
        Refined fragments in fragment order
    """
    ring_nodes, _ = ring_members(graph)
    refined: List[Fragment] = []
    for fragment in fragments:
        in_ring = fragment.node_ids & ring_nodes
        if not in_ring or in_ring == fragment.node_ids:
            refined.append(fragment)
            continue

        chain = set(fragment.node_ids - in_ring)
        for members, edges in _pieces(graph, set(in_ring), fragment.edge_ids):
            refined.append(Fragment(node_ids=members, edge_ids=edges, kind=FragmentKind.REFINED, parent=fragment.parent))
        for members, edges in _pieces(graph, chain, fragment.edge_ids):
            kind = FragmentKind.SINGLETON_NODE if len(members) == 1 else FragmentKind.REFINED
            refined.append(Fragment(node_ids=members, edge_ids=edges, kind=kind, parent=fragment.parent))

    return sorted(refined, key=Fragment.sort_key)
