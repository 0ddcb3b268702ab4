import logging
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

from src.exceptions import PatternError
from src.schemas.fragment.models import Fragment, FragmentKind, Pattern
from src.schemas.molgraph.models import MolGraph

from .patterns import MAX_PATTERN_ATOMS

logger = logging.getLogger(__name__)

# (pattern atom, already-placed pattern neighbor or None, bonds back to earlier atoms)
_Step = Tuple[int, Optional[int], Tuple[Tuple[int, int], ...]]


def _search_plan(pattern: Pattern) -> List[_Step]:
    """BFS order over pattern atoms from atom 0; every later atom is bonded to an earlier one."""
    links: Dict[int, List[Tuple[int, int]]] = {k: [] for k in range(len(pattern.atoms))}
    for bond_index, bond in enumerate(pattern.bonds):
        links[bond.a].append((bond.b, bond_index))
        links[bond.b].append((bond.a, bond_index))

    order = [0]
    seen = {0}
    cursor = 0
    while cursor < len(order):
        for other, _ in sorted(links[order[cursor]]):
            if other not in seen:
                seen.add(other)
                order.append(other)
        cursor += 1

    position = {atom: k for k, atom in enumerate(order)}
    plan = []
    for atom in order:
        back = tuple(sorted((other, bond_index) for other, bond_index in links[atom] if position[other] < position[atom]))
        parent = back[0][0] if back else None
        plan.append((atom, parent, back))
    return plan


def _embeddings(
    graph: MolGraph,
    pattern: Pattern,
    anchor: Optional[int] = None,
    forbidden: Optional[int] = None,
) -> Iterator[Tuple[Dict[int, int], Dict[int, int]]]:
    """Yield (atom map, bond map) for every injective embedding of the pattern into the graph."""
    plan = _search_plan(pattern)
    atom_map: Dict[int, int] = {}
    bond_map: Dict[int, int] = {}
    used: Set[int] = set()

    def candidates(step: _Step) -> Sequence[int]:
        atom, parent, _ = step
        if parent is None:
            return (anchor,) if anchor is not None else range(graph.num_nodes)
        return graph.neighbors[atom_map[parent]]

    def place(depth: int) -> Iterator[Tuple[Dict[int, int], Dict[int, int]]]:
        if depth == len(plan):
            yield dict(atom_map), dict(bond_map)
            return
        step = plan[depth]
        atom, _, back = step
        wanted = pattern.atoms[atom]
        for node in candidates(step):
            if node in used or node == forbidden:
                continue
            attr = graph.nodes[node]
            if not wanted.matches(attr.atomic_number, attr.is_aromatic):
                continue
            edges = []
            for other, bond_index in back:
                edge_index = graph.edge_lookup.get((min(node, atom_map[other]), max(node, atom_map[other])))
                bond_type = pattern.bonds[bond_index].bond_type
                if edge_index is None or (bond_type is not None and graph.edges[edge_index].attr.bond_type != bond_type):
                    break
                edges.append((bond_index, edge_index))
            else:
                atom_map[atom] = node
                used.add(node)
                bond_map.update(edges)
                yield from place(depth + 1)
                used.discard(node)
                del atom_map[atom]
                for bond_index, _ in edges:
                    del bond_map[bond_index]

    yield from place(0)


def _check_size(pattern: Pattern, max_atoms: int) -> None:
    if len(pattern.atoms) > max_atoms:
        raise PatternError(f"pattern {pattern.name!r} has {len(pattern.atoms)} atoms, more than the limit of {max_atoms}")


def match_pattern(graph: MolGraph, pattern: Pattern, max_atoms: int = MAX_PATTERN_ATOMS) -> List[Fragment]:
    """
    Every subgraph of the graph isomorphic to one pattern.

    Matches with the same node set are deduplicated; the lexicographically smallest edge set is kept.
    """
    _check_size(pattern, max_atoms)
    found: Dict[frozenset, Tuple[int, ...]] = {}
    for atom_map, bond_map in _embeddings(graph, pattern):
        nodes = frozenset(atom_map.values())
        edges = tuple(sorted(bond_map.values()))
        if nodes not in found or edges < found[nodes]:
            found[nodes] = edges

    fragments = [
        Fragment(node_ids=nodes, edge_ids=frozenset(edges), kind=FragmentKind.FG, parent=graph.fingerprint, label=pattern.name)
        for nodes, edges in found.items()
    ]
    return sorted(fragments, key=Fragment.sort_key)


def match_patterns(graph: MolGraph, patterns: Sequence[Pattern], max_atoms: int = MAX_PATTERN_ATOMS) -> List[Fragment]:
    """
    Union of the matches of every pattern (f_FG); overlapping matches of different patterns are all kept.

    Args:
        graph: Molecule to search
        patterns: Pattern library
        max_atoms: Patterns larger than this are rejected

    Returns:
        FG fragments labeled with their pattern name, in fragment order
    """
    fragments: List[Fragment] = []
    for pattern in patterns:
        fragments.extend(match_pattern(graph, pattern, max_atoms))
    return sorted(fragments, key=lambda fragment: (fragment.sort_key(), fragment.label or ""))


def anchored_match_exists(graph: MolGraph, pattern: Pattern, anchor: int, forbidden: Optional[int] = None) -> bool:
    """True when the pattern embeds with its atom 0 on ``anchor`` without touching ``forbidden``."""
    return next(_embeddings(graph, pattern, anchor=anchor, forbidden=forbidden), None) is not None
