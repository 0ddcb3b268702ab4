import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Sequence

from src.exceptions import RecipeMismatchError, VocabularyError
from src.schemas.molgraph.models import MolGraph
from src.schemas.tokenize.models import AtomVocabulary, DiscreteToken, MotifVocabulary
from src.services.fragment.recipe import Fragmenter

from .canonical import MAX_CANONICAL_NODES, canonical_key

logger = logging.getLogger(__name__)


def build_atom_vocab(corpus: Iterable[MolGraph]) -> AtomVocabulary:
    """Distinct atomic numbers of the corpus, ascending."""
    atomic_numbers = sorted({node.atomic_number for graph in corpus for node in graph.nodes})
    if not atomic_numbers:
        raise VocabularyError("cannot build an atom vocabulary from an empty corpus")
    return AtomVocabulary(atomic_numbers=tuple(atomic_numbers))


def tok_node(graph: MolGraph, atom_vocab: AtomVocabulary) -> List[DiscreteToken]:
    """One token per node: the index of its atomic number in the atom vocabulary (UNK when absent)."""
    return [DiscreteToken(id=atom_vocab.index(node.atomic_number), node=index) for index, node in enumerate(graph.nodes)]


def tok_edge(graph: MolGraph) -> List[DiscreteToken]:
    """One token per edge over the four bond types."""
    return [DiscreteToken(id=int(edge.attr.bond_type), edge=index) for index, edge in enumerate(graph.edges)]


def fragment_keys(graph: MolGraph, fragmenter: Fragmenter, max_nodes: int = MAX_CANONICAL_NODES) -> List[str]:
    """Canonical key of every fragment of one molecule, in fragment order."""
    return [canonical_key(fragment, graph, max_nodes) for fragment in fragmenter.fragment(graph)]


def build_motif_vocab(
    corpus: Sequence[MolGraph],
    fragmenter: Fragmenter,
    threshold: int,
    max_nodes: int = MAX_CANONICAL_NODES,
    threads: int = 1,
) -> MotifVocabulary:
    """
    Count canonical fragment keys over a corpus and keep the frequent ones.

    Args:
        corpus: Molecules
        fragmenter: Recipe evaluator
        threshold: Minimum count for a key to enter the vocabulary
        max_nodes: Canonicalization size guard
        threads: Worker threads for the per-molecule count

    Returns:
        MotifVocabulary ordered by (count desc, key asc), UNK at the end
    """
    if not corpus:
        raise VocabularyError("cannot build a motif vocabulary from an empty corpus")
    if threshold < 1:
        raise VocabularyError(f"vocabulary threshold must be at least 1, got {threshold}")

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        per_molecule = list(pool.map(lambda graph: fragment_keys(graph, fragmenter, max_nodes), corpus))

    counts: Counter = Counter()
    for keys in per_molecule:
        counts.update(keys)

    kept = sorted(((key, count) for key, count in counts.items() if count >= threshold), key=lambda item: (-item[1], item[0]))
    dropped = sum(count for count in counts.values() if count < threshold)
    logger.info(f"Motif vocabulary: {len(kept)} of {len(counts)} keys at threshold {threshold}")
    return MotifVocabulary(
        keys=tuple(key for key, _ in kept),
        counts=tuple(count for _, count in kept),
        threshold=threshold,
        recipe_fingerprint=fragmenter.fingerprint,
        recipe=fragmenter.recipe.render(),
        unk_count=dropped,
    )


def tok_motif(
    graph: MolGraph,
    fragmenter: Fragmenter,
    vocab: MotifVocabulary,
    max_nodes: int = MAX_CANONICAL_NODES,
) -> List[DiscreteToken]:
    """
    One token per fragment of the recipe; unseen keys map to UNK.

    Raises:
        RecipeMismatchError: the vocabulary was built with a different recipe
    """
    if vocab.recipe_fingerprint != fragmenter.fingerprint:
        raise RecipeMismatchError(
            f"vocabulary was built with recipe {vocab.recipe!r} ({vocab.recipe_fingerprint}), "
            f"not {fragmenter.recipe.render()!r} ({fragmenter.fingerprint})"
        )
    return [
        DiscreteToken(id=vocab.index(canonical_key(fragment, graph, max_nodes)), fragment=fragment)
        for fragment in fragmenter.fragment(graph)
    ]
