import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError
from src.exceptions import GraphFileError, SmilesParseError
from src.repositories.base import atomic_write_text
from src.schemas.molgraph.models import BondType, Chirality, Edge, EdgeAttr, MolGraph, NodeAttr

from .smiles import SmilesParser

logger = logging.getLogger(__name__)

STRUCTURED_HEADER = "graph"


def _content_lines(text: str) -> List[Tuple[int, str]]:
    lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            lines.append((number, line))
    return lines


def load_graph_file(path: Union[str, Path], parser: Optional[SmilesParser] = None) -> List[MolGraph]:
    """
    Load a SMILES-lines corpus or a structured graph file.

    The format is sniffed from the first content line: ``graph <n> <m>`` means structured.

    Args:
        path: Corpus path
        parser: SMILES parser to use (default subset parser)

    Returns:
        List of MolGraph in file order (empty for an empty file)

    Raises:
        GraphFileError: naming the offending line
    """
    path = Path(path)
    lines = _content_lines(path.read_text(encoding="utf-8"))
    if not lines:
        logger.info(f"{path} holds no molecules")
        return []

    if lines[0][1].split()[0] == STRUCTURED_HEADER:
        graphs = _read_structured(lines)
    else:
        graphs = _read_smiles_lines(lines, parser or SmilesParser())
    logger.info(f"Loaded {len(graphs)} graphs from {path}")
    return graphs


def _read_smiles_lines(lines: Sequence[Tuple[int, str]], parser: SmilesParser) -> List[MolGraph]:
    graphs = []
    for number, line in lines:
        smiles = line.split()[0]
        try:
            graphs.append(parser.parse(smiles))
        except SmilesParseError as e:
            raise GraphFileError(f"cannot parse {smiles!r}: {e}", number) from e
    return graphs


def _ints(fields: Sequence[str], count: int, number: int, kind: str) -> List[int]:
    if len(fields) != count:
        raise GraphFileError(f"'{kind}' record needs {count} fields, got {len(fields)}", number)
    try:
        return [int(field) for field in fields]
    except ValueError as e:
        raise GraphFileError(f"non-integer field in '{kind}' record", number) from e


def _read_structured(lines: Sequence[Tuple[int, str]]) -> List[MolGraph]:
    graphs: List[MolGraph] = []
    cursor = 0
    while cursor < len(lines):
        number, line = lines[cursor]
        fields = line.split()
        if fields[0] != STRUCTURED_HEADER:
            raise GraphFileError(f"expected '{STRUCTURED_HEADER} <n_nodes> <n_edges>'", number)
        n_nodes, n_edges = _ints(fields[1:], 2, number, STRUCTURED_HEADER)
        header_line = number
        cursor += 1

        nodes = []
        for expected in range(n_nodes):
            if cursor >= len(lines):
                raise GraphFileError("file ends inside a graph block", number)
            number, line = lines[cursor]
            fields = line.split()
            if fields[0] != "node":
                raise GraphFileError(f"expected node record {expected}", number)
            index, atomic_number, chirality, aromatic = _ints(fields[1:], 4, number, "node")
            if index != expected:
                raise GraphFileError(f"node index {index} out of order (expected {expected})", number)
            try:
                nodes.append(NodeAttr(atomic_number=atomic_number, chirality_tag=Chirality(chirality), is_aromatic=bool(aromatic)))
            except (ValueError, ValidationError) as e:
                raise GraphFileError(f"invalid node attributes: {e}", number) from e
            cursor += 1

        edges = []
        for _ in range(n_edges):
            if cursor >= len(lines):
                raise GraphFileError("file ends inside a graph block", number)
            number, line = lines[cursor]
            fields = line.split()
            if fields[0] != "edge":
                raise GraphFileError("expected edge record", number)
            i, j, bond = _ints(fields[1:], 3, number, "edge")
            try:
                edges.append(Edge(i=i, j=j, attr=EdgeAttr(bond_type=BondType(bond))))
            except (ValueError, ValidationError) as e:
                raise GraphFileError(f"invalid edge attributes: {e}", number) from e
            cursor += 1

        try:
            graphs.append(MolGraph(nodes=tuple(nodes), edges=tuple(edges)))
        except ValidationError as e:
            raise GraphFileError(f"invalid graph: {e}", header_line) from e
    return graphs


def render_graphs(graphs: Iterable[MolGraph]) -> str:
    """Serialize graphs in the structured line format."""
    out = []
    for graph in graphs:
        out.append(f"{STRUCTURED_HEADER} {graph.num_nodes} {graph.num_edges}")
        for index, node in enumerate(graph.nodes):
            out.append(f"node {index} {node.atomic_number} {int(node.chirality_tag)} {int(node.is_aromatic)}")
        for edge in graph.edges:
            out.append(f"edge {edge.i} {edge.j} {int(edge.attr.bond_type)}")
    return "\n".join(out) + ("\n" if out else "")


def write_graph_file(graphs: Iterable[MolGraph], path: Union[str, Path]) -> Path:
    """Write graphs atomically in the structured line format."""
    graphs = list(graphs)
    target = atomic_write_text(path, render_graphs(graphs))
    logger.info(f"Wrote {len(graphs)} graphs to {target}")
    return target
