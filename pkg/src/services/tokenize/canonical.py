import itertools
import logging
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

from src.exceptions import CanonicalizationError
from src.schemas.fragment.models import Fragment
from src.schemas.molgraph.models import MolGraph

logger = logging.getLogger(__name__)

MAX_CANONICAL_NODES = 12
BRUTE_FORCE_NODES = 8

# (node labels, ((local i, local j, bond code), ...)) with bond codes 1..4
LocalGraph = Tuple[Tuple[str, ...], Tuple[Tuple[int, int, int], ...]]


def local_graph(fragment: Fragment, graph: MolGraph) -> LocalGraph:
    """Relabel a fragment to local indices 0..k-1 in parent order."""
    mapping = {parent: k for k, parent in enumerate(fragment.sorted_nodes)}
    labels = tuple(graph.nodes[parent].symbol for parent in fragment.sorted_nodes)
    bonds = []
    for edge_id in sorted(fragment.edge_ids):
        edge = graph.edges[edge_id]
        i, j = sorted((mapping[edge.i], mapping[edge.j]))
        bonds.append((i, j, int(edge.attr.bond_type) + 1))
    return labels, tuple(bonds)


def _matrix(size: int, bonds: Sequence[Tuple[int, int, int]]) -> List[List[int]]:
    codes = [[0] * size for _ in range(size)]
    for i, j, code in bonds:
        codes[i][j] = code
        codes[j][i] = code
    return codes


def _serialize(order: Sequence[int], labels: Sequence[str], codes: List[List[int]]) -> str:
    atoms = ".".join(labels[v] for v in order)
    upper = "".join(str(codes[order[a]][order[b]]) for a in range(len(order)) for b in range(a + 1, len(order)))
    return f"{atoms}|{upper}"


def _label_classes(labels: Sequence[str]) -> List[List[int]]:
    classes: Dict[str, List[int]] = {}
    for v, label in enumerate(labels):
        classes.setdefault(label, []).append(v)
    return [classes[label] for label in sorted(classes)]


def _brute_force(labels: Sequence[str], codes: List[List[int]]) -> str:
    """Minimum serialization over every ordering that keeps the label sequence sorted."""
    classes = _label_classes(labels)
    best = None
    for parts in itertools.product(*(itertools.permutations(members) for members in classes)):
        key = _serialize([v for part in parts for v in part], labels, codes)
        if best is None or key < best:
            best = key
    return best


def _refine(cells: List[List[int]], codes: List[List[int]]) -> List[List[int]]:
    """Split ordered cells by the sorted multiset of (bond code, neighbor cell) until stable."""
    while True:
        cell_of = {v: c for c, cell in enumerate(cells) for v in cell}
        refined: List[List[int]] = []
        for cell in cells:
            signatures: Dict[Tuple, List[int]] = {}
            for v in cell:
                signature = tuple(sorted((codes[v][u], cell_of[u]) for u in range(len(codes)) if codes[v][u]))
                signatures.setdefault(signature, []).append(v)
            refined.extend(signatures[signature] for signature in sorted(signatures))
        if len(refined) == len(cells):
            return refined
        cells = refined


def _individualize(labels: Sequence[str], codes: List[List[int]]) -> str:
    """Minimum serialization over the leaves of an individualization-refinement search."""
    best = None

    def search(cells: List[List[int]]) -> None:
        nonlocal best
        cells = _refine(cells, codes)
        target = next((c for c, cell in enumerate(cells) if len(cell) > 1), None)
        if target is None:
            key = _serialize([cell[0] for cell in cells], labels, codes)
            if best is None or key < best:
                best = key
            return
        for v in cells[target]:
            rest = [u for u in cells[target] if u != v]
            search(cells[:target] + [[v], rest] + cells[target + 1 :])

    search(_label_classes(labels))
    return best


@lru_cache(maxsize=65536)
def _canonical(local: LocalGraph) -> str:
    labels, bonds = local
    codes = _matrix(len(labels), bonds)
    if len(labels) <= BRUTE_FORCE_NODES:
        return _brute_force(labels, codes)
    return _individualize(labels, codes)


def canonical_key(fragment: Fragment, graph: MolGraph, max_nodes: int = MAX_CANONICAL_NODES) -> str:
    """
    Relabeling-invariant key of a fragment: ``labels|bond-codes`` minimized over node orderings.

    Labels are element symbols (lowercase when aromatic) and the bond codes are the upper triangle of
    the bond-type matrix (0 none, 1 single, 2 double, 3 triple, 4 aromatic).

    Args:
        fragment: Fragment of ``graph``
        graph: Parent molecule
        max_nodes: Size guard

    Returns:
        Canonical key string

    Raises:
        CanonicalizationError: fragment larger than ``max_nodes``
    """
    limit = min(max_nodes, MAX_CANONICAL_NODES)
    if fragment.size > limit:
        raise CanonicalizationError(
            f"fragment of {fragment.size} nodes exceeds the canonicalization limit of {limit}; "
            "use a recipe with smaller fragments or raise tokenizer.vocab_threshold to drop rare large motifs"
        )
    return _canonical(local_graph(fragment, graph))
