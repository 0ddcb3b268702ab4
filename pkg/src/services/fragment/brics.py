import logging
from typing import List

from src.schemas.fragment.models import CleavageTable, Fragment, FragmentKind
from src.schemas.molgraph.models import MolGraph
from src.services.molgraph.graph_ops import connected_components

from .matcher import anchored_match_exists

logger = logging.getLogger(__name__)


def cleavage_sites(graph: MolGraph, table: CleavageTable) -> List[int]:
    """Edge indices whose two sides match some (left, right) environment pair, in either direction."""
    sites = []
    for index, edge in enumerate(graph.edges):
        for rule in table.rules:
            forward = anchored_match_exists(graph, rule.left, edge.i, edge.j) and anchored_match_exists(graph, rule.right, edge.j, edge.i)
            backward = anchored_match_exists(graph, rule.left, edge.j, edge.i) and anchored_match_exists(graph, rule.right, edge.i, edge.j)
            if forward or backward:
                sites.append(index)
                break
    return sites


def brics_cleave(graph: MolGraph, table: CleavageTable) -> List[Fragment]:
    """
    Remove every cleavable bond and return the connected pieces.

    Args:
        graph: Molecule (disconnected inputs are handled per component)
        table: Environment pairs defining cleavable bonds

    Returns:
        Pieces partitioning the nodes; no piece keeps a cleaved bond
    """
    sites = set(cleavage_sites(graph, table))
    pieces = []
    for component in connected_components(graph, skip_edges=sites):
        members = set(component)
        edge_ids = frozenset(
            k for k, edge in enumerate(graph.edges) if k not in sites and edge.i in members and edge.j in members
        )
        pieces.append(
            Fragment(node_ids=frozenset(component), edge_ids=edge_ids, kind=FragmentKind.BRICS_PIECE, parent=graph.fingerprint)
        )
    logger.debug(f"Cleaved {len(sites)} bonds into {len(pieces)} pieces")
    return sorted(pieces, key=Fragment.sort_key)
