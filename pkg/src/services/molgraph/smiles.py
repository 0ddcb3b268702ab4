import logging
import re
from typing import Dict, List, Optional, Tuple

import networkx as nx
from pydantic import ValidationError
from src.exceptions import GraphValidationError, SmilesParseError
from src.schemas.molgraph.elements import ATOMIC_NUMBERS
from src.schemas.molgraph.models import MAX_NODES, BondType, Chirality, Edge, EdgeAttr, MolGraph, NodeAttr

logger = logging.getLogger(__name__)

ORGANIC_SUBSET = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_SUBSET = ("b", "c", "n", "o", "p", "s")
AROMATIC_BRACKET = ("se", "as", "b", "c", "n", "o", "p", "s")
BOND_SYMBOLS = {"-": BondType.SINGLE, "=": BondType.DOUBLE, "#": BondType.TRIPLE, ":": BondType.AROMATIC}

_BRACKET_BODY = re.compile(r"^(?P<symbol>[A-Z][a-z]?|[a-z]{1,2})(?P<chirality>@@|@)?$")


class SmilesParser:
    """Parser for the supported SMILES subset; returns the heavy-atom graph."""

    def __init__(self, max_nodes: int = MAX_NODES):
        """
        Args:
            max_nodes: Node cap for a single molecule (at most 1024)
        """
        self.max_nodes = min(max_nodes, MAX_NODES)

    def parse(self, text: str) -> MolGraph:
        """
        Parse a SMILES string.

        Args:
            text: SMILES in the supported subset (organic/bracket atoms, bonds ``- = # :``,
                branches, ring closures 1-9 and %nn)

        Returns:
            MolGraph with aromatic flags set for lowercase atoms

        Raises:
            SmilesParseError: with the byte offset of the offending character
        """
        return _SmilesRun(text, self.max_nodes).run()


class _SmilesRun:
    def __init__(self, text: str, max_nodes: int):
        self.text = text
        self.max_nodes = max_nodes
        self.pos = 0
        self.nodes: List[NodeAttr] = []
        self.edges: List[Tuple[int, int, BondType]] = []
        self.pairs: set = set()
        self.implied_aromatic: List[int] = []  # edge indices typed aromatic without a bond symbol
        self.prev: Optional[int] = None
        self.pending: Optional[Tuple[str, int]] = None
        self.branches: List[Tuple[int, int]] = []  # (atom, offset of "(")
        self.rings: Dict[int, Tuple[int, Optional[str], int]] = {}  # label -> (atom, bond symbol, offset)

    def offset(self, pos: int) -> int:
        return len(self.text[:pos].encode("utf-8"))

    def fail(self, message: str, pos: int) -> SmilesParseError:
        return SmilesParseError(message, self.offset(pos))

    def run(self) -> MolGraph:
        if not self.text:
            raise SmilesParseError("empty SMILES", 0)

        while self.pos < len(self.text):
            char = self.text[self.pos]
            if char.isalpha() or char == "[":
                self.read_atom()
            elif char in BOND_SYMBOLS:
                self.read_bond(char)
            elif char == "(":
                self.open_branch()
            elif char == ")":
                self.close_branch()
            elif char in "0123456789%":
                self.read_ring_label()
            else:
                raise self.fail(f"unknown atom symbol {char!r}", self.pos)

        if self.pending is not None:
            raise self.fail(f"dangling bond symbol {self.pending[0]!r}", self.pending[1])
        if self.branches:
            raise self.fail("unbalanced parenthesis", self.branches[-1][1])
        if self.rings:
            label = min(self.rings, key=lambda key: self.rings[key][2])
            raise self.fail(f"unclosed ring digit {label}", self.rings[label][2])
        self.demote_chain_bonds()

        try:
            return MolGraph(
                nodes=tuple(self.nodes),
                edges=tuple(Edge(i=i, j=j, attr=EdgeAttr(bond_type=bond)) for i, j, bond in self.edges),
            )
        except ValidationError as e:
            raise GraphValidationError(f"Invalid graph from SMILES {self.text!r}: {e}") from e

    def read_atom(self) -> None:
        start = self.pos
        if self.text[self.pos] == "[":
            node = self.read_bracket_atom()
        else:
            node = self.read_organic_atom()

        if len(self.nodes) >= self.max_nodes:
            raise self.fail(f"molecule exceeds the cap of {self.max_nodes} atoms", start)
        index = len(self.nodes)
        self.nodes.append(node)

        if self.prev is not None:
            self.add_bond(self.prev, index, self.pending[0] if self.pending else None, start)
        elif self.pending is not None:
            raise self.fail(f"dangling bond symbol {self.pending[0]!r}", self.pending[1])
        self.pending = None
        self.prev = index

    def read_organic_atom(self) -> NodeAttr:
        for symbol in ORGANIC_SUBSET:
            if self.text.startswith(symbol, self.pos):
                self.pos += len(symbol)
                return NodeAttr(atomic_number=ATOMIC_NUMBERS[symbol])
        char = self.text[self.pos]
        if char in AROMATIC_SUBSET:
            self.pos += 1
            return NodeAttr(atomic_number=ATOMIC_NUMBERS[char.upper()], is_aromatic=True)
        raise self.fail(f"unknown atom symbol {char!r}", self.pos)

    def read_bracket_atom(self) -> NodeAttr:
        start = self.pos
        end = self.text.find("]", start)
        if end < 0:
            raise self.fail("unterminated bracket atom", start)
        body = self.text[start + 1 : end]
        match = _BRACKET_BODY.match(body)
        if not match:
            raise self.fail(f"unsupported bracket atom [{body}] (element symbol only)", start)

        symbol = match.group("symbol")
        aromatic = symbol.islower()
        if aromatic and symbol not in AROMATIC_BRACKET:
            raise self.fail(f"unknown atom symbol {symbol!r}", start + 1)
        atomic_number = ATOMIC_NUMBERS.get(symbol.capitalize())
        if atomic_number is None:
            raise self.fail(f"unknown atom symbol {symbol!r}", start + 1)

        chirality = {"@": Chirality.TET_CCW, "@@": Chirality.TET_CW}.get(match.group("chirality") or "", Chirality.UNSPECIFIED)
        self.pos = end + 1
        return NodeAttr(atomic_number=atomic_number, chirality_tag=chirality, is_aromatic=aromatic)

    def read_bond(self, char: str) -> None:
        if self.pending is not None or self.prev is None:
            raise self.fail(f"dangling bond symbol {char!r}", self.pos)
        self.pending = (char, self.pos)
        self.pos += 1

    def open_branch(self) -> None:
        if self.prev is None:
            raise self.fail("unbalanced parenthesis", self.pos)
        if self.pending is not None:
            raise self.fail(f"dangling bond symbol {self.pending[0]!r}", self.pending[1])
        self.branches.append((self.prev, self.pos))
        self.pos += 1

    def close_branch(self) -> None:
        if not self.branches:
            raise self.fail("unbalanced parenthesis", self.pos)
        if self.pending is not None:
            raise self.fail(f"dangling bond symbol {self.pending[0]!r}", self.pending[1])
        self.prev, _ = self.branches.pop()
        self.pos += 1

    def read_ring_label(self) -> None:
        start = self.pos
        if self.text[self.pos] == "%":
            digits = self.text[self.pos + 1 : self.pos + 3]
            if len(digits) != 2 or not digits.isdigit():
                raise self.fail("ring label after '%' needs two digits", start)
            label = int(digits)
            self.pos += 3
        else:
            label = int(self.text[self.pos])
            if label == 0:
                raise self.fail("ring closure digit 0 is not supported", start)
            self.pos += 1

        if self.prev is None:
            raise self.fail(f"ring closure {label} without a preceding atom", start)

        bond_symbol = self.pending[0] if self.pending else None
        if label in self.rings:
            atom, open_symbol, _ = self.rings.pop(label)
            if open_symbol and bond_symbol and open_symbol != bond_symbol:
                raise self.fail(f"conflicting bond symbols for ring closure {label}", start)
            self.add_bond(atom, self.prev, bond_symbol or open_symbol, start)
        else:
            self.rings[label] = (self.prev, bond_symbol, start)
        self.pending = None

    def demote_chain_bonds(self) -> None:
        """Implicit bonds between aromatic atoms are aromatic only inside a ring."""
        if not self.implied_aromatic:
            return
        view = nx.Graph()
        view.add_nodes_from(range(len(self.nodes)))
        view.add_edges_from((i, j) for i, j, _ in self.edges)
        bridges = {frozenset(pair) for pair in nx.bridges(view)}
        for k in self.implied_aromatic:
            i, j, _ = self.edges[k]
            if frozenset((i, j)) in bridges:
                self.edges[k] = (i, j, BondType.SINGLE)

    def add_bond(self, i: int, j: int, symbol: Optional[str], pos: int) -> None:
        pair = (min(i, j), max(i, j))
        if i == j or pair in self.pairs:
            raise self.fail(f"ring closure would duplicate the bond {pair}", pos)
        if symbol is not None:
            bond = BOND_SYMBOLS[symbol]
        elif self.nodes[i].is_aromatic and self.nodes[j].is_aromatic:
            bond = BondType.AROMATIC
            self.implied_aromatic.append(len(self.edges))
        else:
            bond = BondType.SINGLE
        self.pairs.add(pair)
        self.edges.append((i, j, bond))


def parse_smiles(text: str, max_nodes: int = MAX_NODES) -> MolGraph:
    """Parse one SMILES string into a MolGraph."""
    return SmilesParser(max_nodes=max_nodes).parse(text)
