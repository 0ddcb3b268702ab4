from typing import List, Sequence

from src.schemas.fragment.models import Fragment, FragmentKind
from src.schemas.molgraph.models import BondType, MolGraph

CARBON = 6


def remaining_nodes(graph: MolGraph, covered: Sequence[Fragment]) -> List[Fragment]:
    """Every node outside all covered fragments, as a singleton."""
    seen = set().union(*(fragment.node_ids for fragment in covered)) if covered else set()
    return [
        Fragment(node_ids=frozenset({index}), kind=FragmentKind.SINGLETON_NODE, parent=graph.fingerprint)
        for index in range(graph.num_nodes)
        if index not in seen
    ]


def is_cc_single(graph: MolGraph, edge_index: int) -> bool:
    """Single bond between two aliphatic carbons; aromatic atoms and bonds never count."""
    edge = graph.edges[edge_index]
    if edge.attr.bond_type != BondType.SINGLE:
        return False
    return all(graph.nodes[k].atomic_number == CARBON and not graph.nodes[k].is_aromatic for k in (edge.i, edge.j))


def remaining_edges(graph: MolGraph, covered: Sequence[Fragment], cc_single_only: bool = False) -> List[Fragment]:
    """
    Every edge outside all covered fragments, as a two-node fragment.

    Args:
        graph: Molecule
        covered: Fragments already extracted
        cc_single_only: Keep only aliphatic carbon-carbon single bonds

    Returns:
        ``single_edge`` fragments ordered by edge index
    """
    seen = set().union(*(fragment.edge_ids for fragment in covered)) if covered else set()
    fragments = []
    for index, edge in enumerate(graph.edges):
        if index in seen or (cc_single_only and not is_cc_single(graph, index)):
            continue
        fragments.append(
            Fragment(
                node_ids=frozenset({edge.i, edge.j}),
                edge_ids=frozenset({index}),
                kind=FragmentKind.SINGLE_EDGE,
                parent=graph.fingerprint,
            )
        )
    return sorted(fragments, key=Fragment.sort_key)
