from enum import Enum
from typing import FrozenSet, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator
from src.schemas.molgraph.models import BondType


class FragmentKind(str, Enum):
    """How a fragment was produced."""

    FG = "fg"
    CYCLE = "cycle"
    MERGED_CYCLE = "merged_cycle"
    BRICS_PIECE = "brics_piece"
    SINGLETON_NODE = "singleton_node"
    SINGLE_EDGE = "single_edge"
    REFINED = "refined"
    INDUCED = "induced"


class Fragment(BaseModel):
    """A subgraph t = (V_t, E_t) of a parent graph, addressed by parent node and edge indices."""

    model_config = ConfigDict(frozen=True)

    node_ids: FrozenSet[int] = Field(..., description="Parent node indices")
    edge_ids: FrozenSet[int] = Field(default=frozenset(), description="Parent edge indices")
    kind: FragmentKind
    parent: str = Field(..., description="Fingerprint of the parent graph")
    label: Optional[str] = Field(default=None, description="Pattern name for FG matches")

    @model_validator(mode="after")
    def _check_nonempty(self) -> "Fragment":
        if not self.node_ids:
            raise ValueError("a fragment needs at least one node")
        return self

    @property
    def size(self) -> int:
        return len(self.node_ids)

    @property
    def sorted_nodes(self) -> Tuple[int, ...]:
        return tuple(sorted(self.node_ids))

    def sort_key(self) -> Tuple:
        """(min node id, size), then node and edge lists for a total order."""
        return (min(self.node_ids), self.size, self.sorted_nodes, tuple(sorted(self.edge_ids)), self.kind.value)


class PatternAtom(BaseModel):
    """One pattern atom: allowed elements (None = any) and aromatic flag (None = either)."""

    model_config = ConfigDict(frozen=True)

    elements: Optional[FrozenSet[int]] = None
    aromatic: Optional[bool] = None

    def matches(self, atomic_number: int, is_aromatic: bool) -> bool:
        if self.elements is not None and atomic_number not in self.elements:
            return False
        return self.aromatic is None or self.aromatic == is_aromatic


class PatternBond(BaseModel):
    """A pattern bond between pattern atom indices a and b (bond_type None = any)."""

    model_config = ConfigDict(frozen=True)

    a: int = Field(..., ge=0)
    b: int = Field(..., ge=0)
    bond_type: Optional[BondType] = None


class Pattern(BaseModel):
    """Connected substructure pattern in the simplified grammar."""

    model_config = ConfigDict(frozen=True)

    name: str
    atoms: Tuple[PatternAtom, ...]
    bonds: Tuple[PatternBond, ...] = ()
    source: str = Field(default="", description="Pattern text it was parsed from")

    @model_validator(mode="after")
    def _check_connected(self) -> "Pattern":
        n = len(self.atoms)
        if n == 0:
            raise ValueError(f"pattern {self.name!r} has no atoms")
        reached = {0}
        frontier = [0]
        links = {k: set() for k in range(n)}
        for bond in self.bonds:
            if bond.a >= n or bond.b >= n or bond.a == bond.b:
                raise ValueError(f"pattern {self.name!r} has an invalid bond ({bond.a}, {bond.b})")
            links[bond.a].add(bond.b)
            links[bond.b].add(bond.a)
        while frontier:
            current = frontier.pop()
            for other in links[current]:
                if other not in reached:
                    reached.add(other)
                    frontier.append(other)
        if len(reached) != n:
            raise ValueError(f"pattern {self.name!r} is not connected")
        return self


class CleavageRule(BaseModel):
    """A (left, right) environment pair; each side is anchored at its pattern atom 0."""

    model_config = ConfigDict(frozen=True)

    left: Pattern
    right: Pattern


class CleavageTable(BaseModel):
    """Environment pairs defining cleavable bonds."""

    model_config = ConfigDict(frozen=True)

    rules: Tuple[CleavageRule, ...] = Field(..., min_length=1)


class RecipeNode(BaseModel):
    """One node of a fragmentation recipe tree."""

    model_config = ConfigDict(frozen=True)

    op: str
    children: Tuple["RecipeNode", ...] = ()

    def render(self) -> str:
        if not self.children:
            return self.op
        return f"{self.op}({', '.join(child.render() for child in self.children)})"
