import hashlib
import logging
import re
from typing import Callable, Dict, List, Optional, Sequence

from src.exceptions import FragmentationException, RecipeError
from src.schemas.fragment.models import CleavageTable, Fragment, FragmentKind, Pattern, RecipeNode
from src.schemas.molgraph.models import MolGraph

from .brics import brics_cleave
from .cycles import extract_cycles, merge_cycles
from .matcher import match_patterns
from .patterns import MAX_PATTERN_ATOMS
from .refine import mgssl_refine
from .remaining import remaining_edges, remaining_nodes

logger = logging.getLogger(__name__)

PRESETS: Dict[str, str] = {
    "mgssl": "mgssl_refine(brics)",
    "relmole": "remaining_nodes(remaining_cc_single(union(cycles, fgs)))",
}

LEAF_OPS = ("cycles", "fgs", "brics", "nodes", "edges")
UNARY_OPS = ("merge_cycles", "mgssl_refine", "remaining_nodes", "remaining_edges", "remaining_cc_single")
NARY_OPS = ("union",)

_TOKEN = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[(),]))")


def parse_recipe(text: str) -> RecipeNode:
    """
    Parse a recipe expression such as ``remaining_nodes(union(cycles, fgs))`` or a preset name.

    Raises:
        RecipeError: empty text, unknown operation, wrong arity or trailing input
    """
    if text is None or not text.strip():
        raise RecipeError("recipe is empty")
    text = PRESETS.get(text.strip(), text)

    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN.match(text, pos)
        if not match:
            raise RecipeError(f"unexpected character {text[pos:].strip()[0]!r} in recipe {text!r}")
        tokens.append(match.group("ident") or match.group("punct"))
        pos = match.end()

    cursor = 0

    def expression() -> RecipeNode:
        nonlocal cursor
        if cursor >= len(tokens) or tokens[cursor] in "(),":
            raise RecipeError(f"expected an operation name in recipe {text!r}")
        op = tokens[cursor]
        cursor += 1
        children: List[RecipeNode] = []
        if cursor < len(tokens) and tokens[cursor] == "(":
            cursor += 1
            children.append(expression())
            while cursor < len(tokens) and tokens[cursor] == ",":
                cursor += 1
                children.append(expression())
            if cursor >= len(tokens) or tokens[cursor] != ")":
                raise RecipeError(f"missing ')' in recipe {text!r}")
            cursor += 1
        return _checked(RecipeNode(op=op, children=tuple(children)))

    node = expression()
    if cursor != len(tokens):
        raise RecipeError(f"trailing input after {node.render()!r} in recipe {text!r}")
    return node


def _checked(node: RecipeNode) -> RecipeNode:
    arity = len(node.children)
    if node.op in LEAF_OPS and arity != 0:
        raise RecipeError(f"'{node.op}' takes no arguments")
    if node.op in UNARY_OPS and arity != 1:
        raise RecipeError(f"'{node.op}' takes exactly one argument")
    if node.op in NARY_OPS and arity < 1:
        raise RecipeError(f"'{node.op}' needs at least one argument")
    if node.op not in LEAF_OPS + UNARY_OPS + NARY_OPS:
        raise RecipeError(f"unknown recipe operation {node.op!r}")
    return node


def _ordered(fragments: Sequence[Fragment]) -> List[Fragment]:
    unique = list(dict.fromkeys(fragments))
    return sorted(unique, key=lambda fragment: (fragment.sort_key(), fragment.label or ""))


def _all_nodes(graph: MolGraph) -> List[Fragment]:
    return remaining_nodes(graph, [])


def _merge_cycle_members(fragments: List[Fragment]) -> List[Fragment]:
    cycles = [f for f in fragments if f.kind in (FragmentKind.CYCLE, FragmentKind.MERGED_CYCLE)]
    others = [f for f in fragments if f.kind not in (FragmentKind.CYCLE, FragmentKind.MERGED_CYCLE)]
    return others + merge_cycles(cycles)


class Fragmenter:
    """Evaluates a fragmentation recipe against a fixed pattern library and cleavage table."""

    def __init__(
        self,
        recipe: str,
        patterns: Sequence[Pattern],
        table: CleavageTable,
        max_pattern_atoms: int = MAX_PATTERN_ATOMS,
    ):
        self.recipe = parse_recipe(recipe)
        self.patterns = tuple(patterns)
        self.table = table
        self.max_pattern_atoms = max_pattern_atoms
        self._fingerprint: Optional[str] = None

    @property
    def fingerprint(self) -> str:
        """Identifies the recipe together with the pattern and cleavage content it depends on."""
        if self._fingerprint is None:
            digest = hashlib.sha256(self.recipe.render().encode("utf-8"))
            for pattern in self.patterns:
                digest.update(f"\npattern {pattern.name} := {pattern.source}".encode("utf-8"))
            for rule in self.table.rules:
                digest.update(f"\nrule {rule.left.source} | {rule.right.source}".encode("utf-8"))
            self._fingerprint = digest.hexdigest()[:16]
        return self._fingerprint

    def fragment(self, graph: MolGraph) -> List[Fragment]:
        """Deterministic fragment sequence of one molecule."""
        try:
            return _ordered(self._evaluate(self.recipe, graph))
        except (FragmentationException, RecipeError):
            raise
        except Exception as e:
            logger.error(f"Fragmentation failed for recipe {self.recipe.render()}: {e}")
            raise FragmentationException(f"Fragmentation failed: {e}") from e

    def _evaluate(self, node: RecipeNode, graph: MolGraph) -> List[Fragment]:
        leaves: Dict[str, Callable[[], List[Fragment]]] = {
            "cycles": lambda: extract_cycles(graph),
            "fgs": lambda: match_patterns(graph, self.patterns, self.max_pattern_atoms),
            "brics": lambda: brics_cleave(graph, self.table),
            "nodes": lambda: _all_nodes(graph),
            "edges": lambda: remaining_edges(graph, []),
        }
        if node.op in leaves:
            return leaves[node.op]()

        if node.op == "union":
            combined: List[Fragment] = []
            for child in node.children:
                combined.extend(self._evaluate(child, graph))
            return _ordered(combined)

        inner = self._evaluate(node.children[0], graph)
        if node.op == "merge_cycles":
            return _ordered(_merge_cycle_members(inner))
        if node.op == "mgssl_refine":
            return mgssl_refine(graph, inner)
        if node.op == "remaining_nodes":
            return _ordered(inner + remaining_nodes(graph, inner))
        if node.op == "remaining_edges":
            return _ordered(inner + remaining_edges(graph, inner))
        if node.op == "remaining_cc_single":
            return _ordered(inner + remaining_edges(graph, inner, cc_single_only=True))
        raise RecipeError(f"unknown recipe operation {node.op!r}")


def compose(
    graph: MolGraph,
    recipe: str,
    patterns: Sequence[Pattern],
    table: CleavageTable,
    max_pattern_atoms: int = MAX_PATTERN_ATOMS,
) -> List[Fragment]:
    """
    Fragment one molecule with a recipe built from unions and compositions of the primitives.

    Args:
        graph: Molecule
        recipe: Preset name (``mgssl``, ``relmole``) or recipe expression
        patterns: Functional-group library for ``fgs``
        table: Cleavage table for ``brics``
        max_pattern_atoms: Pattern size guard

    Returns:
        Fragments sorted by (min node id, size)
    """
    return Fragmenter(recipe, patterns, table, max_pattern_atoms).fragment(graph)
