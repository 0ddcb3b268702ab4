import itertools
import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
from src.exceptions import FragmentationException
from src.schemas.fragment.models import Fragment, FragmentKind
from src.schemas.molgraph.models import MolGraph
from src.services.molgraph.graph_ops import to_networkx

logger = logging.getLogger(__name__)

# Cap on tied shortest paths inspected per edge.
MAX_TIED_PATHS = 64

_Cycle = Tuple[Tuple[int, ...], int]  # (sorted nodes, edge bitmask)


def cycle_rank(graph: MolGraph) -> int:
    """Dimension of the cycle space: |E| - |V| + number of components."""
    return graph.num_edges - graph.num_nodes + nx.number_connected_components(to_networkx(graph))


def _path_cycle(graph: MolGraph, path: Sequence[int], closing_edge: int) -> Optional[_Cycle]:
    if len(path) < 3 or len(set(path)) != len(path):
        return None
    mask = 1 << closing_edge
    for u, v in zip(path, path[1:]):
        mask |= 1 << graph.edge_lookup[(min(u, v), max(u, v))]
    return tuple(sorted(path)), mask


def _edge_candidates(graph: MolGraph, view: nx.Graph) -> Iterable[_Cycle]:
    """Shortest cycle through each edge; ties go to the lexicographically smallest node set."""
    for index, edge in enumerate(graph.edges):
        view.remove_edge(edge.i, edge.j)
        try:
            paths = list(itertools.islice(nx.all_shortest_paths(view, edge.i, edge.j), MAX_TIED_PATHS))
        except nx.NetworkXNoPath:
            paths = []
        finally:
            view.add_edge(edge.i, edge.j)
        cycles = [cycle for cycle in (_path_cycle(graph, path, index) for path in paths) if cycle is not None]
        if cycles:
            yield min(cycles)


def _horton_candidates(graph: MolGraph, view: nx.Graph) -> Iterable[_Cycle]:
    """Cycles P(v, x) + (x, y) + P(y, v) over every vertex v and edge (x, y)."""
    for root in range(graph.num_nodes):
        paths = nx.single_source_shortest_path(view, root)
        for index, edge in enumerate(graph.edges):
            if edge.i not in paths or edge.j not in paths:
                continue
            left, right = paths[edge.i], paths[edge.j]
            if set(left) & set(right) != {root}:
                continue
            cycle = _path_cycle(graph, list(reversed(left)) + right[1:], index)
            if cycle is not None:
                yield cycle


def _reduce(vector: int, basis: Dict[int, int]) -> int:
    """Reduce a GF(2) edge vector against the basis keyed by leading bit."""
    while vector:
        pivot = vector.bit_length() - 1
        if pivot not in basis:
            return vector
        vector ^= basis[pivot]
    return 0


def _select_basis(candidates: Iterable[_Cycle], rank: int) -> List[_Cycle]:
    basis: Dict[int, int] = {}
    chosen = []
    for nodes, mask in sorted(set(candidates), key=lambda cycle: (len(cycle[0]), cycle[0], cycle[1])):
        reduced = _reduce(mask, basis)
        if reduced:
            basis[reduced.bit_length() - 1] = reduced
            chosen.append((nodes, mask))
            if len(chosen) == rank:
                break
    return chosen


def extract_cycles(graph: MolGraph) -> List[Fragment]:
    """
    Minimum cycle basis of the graph (smallest set of smallest rings).

    Args:
        graph: Molecule

    Returns:
        |E| - |V| + c cycle fragments, in fragment order
    """
    rank = cycle_rank(graph)
    if rank == 0:
        return []

    view = to_networkx(graph)
    chosen = _select_basis(_edge_candidates(graph, view), rank)
    if len(chosen) < rank:
        logger.debug(f"Shortest edge cycles span {len(chosen)} of {rank} dimensions; adding vertex-pair cycles")
        chosen = _select_basis(itertools.chain(_edge_candidates(graph, view), _horton_candidates(graph, view)), rank)
    if len(chosen) < rank:
        raise FragmentationException(f"cycle basis search found {len(chosen)} of {rank} independent cycles")

    fragments = []
    for nodes, mask in chosen:
        edge_ids = frozenset(k for k in range(graph.num_edges) if mask >> k & 1)
        fragments.append(Fragment(node_ids=frozenset(nodes), edge_ids=edge_ids, kind=FragmentKind.CYCLE, parent=graph.fingerprint))
    return sorted(fragments, key=Fragment.sort_key)


def merge_cycles(cycles: Sequence[Fragment]) -> List[Fragment]:
    """
    Union any two cycles sharing more than two nodes, repeated until nothing changes.

    Cycles that never merge pass through unchanged; merged results are ``merged_cycle`` fragments.
    """
    parents = {fragment.parent for fragment in cycles}
    if len(parents) > 1:
        raise FragmentationException("merge_cycles received cycles from different graphs")
    for fragment in cycles:
        if fragment.kind not in (FragmentKind.CYCLE, FragmentKind.MERGED_CYCLE):
            raise FragmentationException(f"merge_cycles expects cycle fragments, got {fragment.kind.value}")

    current = sorted(cycles, key=Fragment.sort_key)
    merged = True
    while merged:
        merged = False
        for a, b in itertools.combinations(range(len(current)), 2):
            if len(current[a].node_ids & current[b].node_ids) > 2:
                union = Fragment(
                    node_ids=current[a].node_ids | current[b].node_ids,
                    edge_ids=current[a].edge_ids | current[b].edge_ids,
                    kind=FragmentKind.MERGED_CYCLE,
                    parent=current[a].parent,
                )
                current = sorted([f for k, f in enumerate(current) if k not in (a, b)] + [union], key=Fragment.sort_key)
                merged = True
                break
    return current
