import hashlib
from enum import IntEnum
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .elements import element_symbol

MAX_NODES = 1024


class Chirality(IntEnum):
    """Chirality tag of an atom."""

    UNSPECIFIED = 0
    TET_CW = 1
    TET_CCW = 2
    OTHER = 3


class BondType(IntEnum):
    """Bond type of an edge."""

    SINGLE = 0
    DOUBLE = 1
    TRIPLE = 2
    AROMATIC = 3


class NodeAttr(BaseModel):
    """Atom features: atomic number, chirality tag and aromatic flag."""

    model_config = ConfigDict(frozen=True)

    atomic_number: int = Field(..., ge=1, le=118, description="Atomic number (1-118)")
    chirality_tag: Chirality = Field(default=Chirality.UNSPECIFIED, description="Chirality tag")
    is_aromatic: bool = Field(default=False, description="Aromatic flag")

    @property
    def symbol(self) -> str:
        """Element symbol, lowercase when aromatic."""
        return element_symbol(self.atomic_number, self.is_aromatic)


class EdgeAttr(BaseModel):
    """Bond features."""

    model_config = ConfigDict(frozen=True)

    bond_type: BondType = Field(..., description="Bond type")


class Edge(BaseModel):
    """An undirected edge between node indices i and j."""

    model_config = ConfigDict(frozen=True)

    i: int = Field(..., ge=0)
    j: int = Field(..., ge=0)
    attr: EdgeAttr

    @property
    def pair(self) -> Tuple[int, int]:
        return (self.i, self.j) if self.i < self.j else (self.j, self.i)


class MolGraph(BaseModel):
    """Attributed undirected molecular graph without self-loops or multi-edges."""

    model_config = ConfigDict(frozen=True)

    nodes: Tuple[NodeAttr, ...] = Field(..., description="Atom attributes in node-index order")
    edges: Tuple[Edge, ...] = Field(default=(), description="Bonds")

    @model_validator(mode="after")
    def _check_structure(self) -> "MolGraph":
        n = len(self.nodes)
        if n < 1:
            raise ValueError("a molecular graph needs at least one node")
        if n > MAX_NODES:
            raise ValueError(f"graph has {n} nodes, more than the cap of {MAX_NODES}")
        seen = set()
        for edge in self.edges:
            if edge.i >= n or edge.j >= n:
                raise ValueError(f"edge ({edge.i}, {edge.j}) references a node outside 0..{n - 1}")
            if edge.i == edge.j:
                raise ValueError(f"self-loop on node {edge.i}")
            if edge.pair in seen:
                raise ValueError(f"duplicate edge {edge.pair}")
            seen.add(edge.pair)
        return self

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def atomic_numbers(self) -> np.ndarray:
        values = np.array([node.atomic_number for node in self.nodes], dtype=np.int64)
        values.flags.writeable = False
        return values

    @cached_property
    def bond_types(self) -> np.ndarray:
        values = np.array([int(edge.attr.bond_type) for edge in self.edges], dtype=np.int64)
        values.flags.writeable = False
        return values

    @cached_property
    def neighbors(self) -> Tuple[Tuple[int, ...], ...]:
        """Sorted neighbor indices of every node."""
        adjacency: List[List[int]] = [[] for _ in self.nodes]
        for edge in self.edges:
            adjacency[edge.i].append(edge.j)
            adjacency[edge.j].append(edge.i)
        return tuple(tuple(sorted(row)) for row in adjacency)

    @cached_property
    def edge_lookup(self) -> Dict[Tuple[int, int], int]:
        """Maps a sorted node pair to its edge index."""
        return {edge.pair: index for index, edge in enumerate(self.edges)}

    @cached_property
    def fingerprint(self) -> str:
        """Content hash identifying this graph (used to tie fragments to their parent)."""
        digest = hashlib.sha1()
        for node in self.nodes:
            digest.update(f"n{node.atomic_number},{int(node.chirality_tag)},{int(node.is_aromatic)};".encode())
        for edge in self.edges:
            digest.update(f"e{edge.i},{edge.j},{int(edge.attr.bond_type)};".encode())
        return digest.hexdigest()

    def symbols(self) -> List[str]:
        return [node.symbol for node in self.nodes]

    def bond_between(self, i: int, j: int) -> BondType:
        pair = (i, j) if i < j else (j, i)
        return self.edges[self.edge_lookup[pair]].attr.bond_type


class AdjacencyView(BaseModel):
    """Dense adjacency A, self-looped A + I, and the degree vector of A + I."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    a: np.ndarray = Field(..., description="n x n 0/1 adjacency matrix")
    a_tilde: np.ndarray = Field(..., description="A + I")
    degree: np.ndarray = Field(..., description="Diagonal of D~ (row sums of A + I)")

    @property
    def d_tilde(self) -> np.ndarray:
        return np.diag(self.degree)

    @property
    def num_nodes(self) -> int:
        return self.a.shape[0]


class GraphBatch(BaseModel):
    """Disjoint union of several graphs with the node offset of each member."""

    model_config = ConfigDict(frozen=True)

    graph: MolGraph
    offsets: Tuple[int, ...]

    @property
    def num_graphs(self) -> int:
        return len(self.offsets)

    @cached_property
    def sizes(self) -> Tuple[int, ...]:
        bounds = list(self.offsets) + [self.graph.num_nodes]
        return tuple(bounds[k + 1] - bounds[k] for k in range(len(self.offsets)))

    @cached_property
    def node_graph(self) -> np.ndarray:
        """Index of the member graph owning each node."""
        values = np.repeat(np.arange(self.num_graphs), self.sizes)
        values.flags.writeable = False
        return values

    def node_range(self, k: int) -> range:
        return range(self.offsets[k], self.offsets[k] + self.sizes[k])
