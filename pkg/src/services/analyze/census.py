import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from typing import Mapping, Sequence, Tuple

import numpy as np
from scipy.stats import entropy
from src.schemas.analyze.models import BalanceReport, CensusReport, VocabularySizeReport
from src.schemas.molgraph.elements import element_symbol
from src.schemas.molgraph.models import MolGraph
from src.schemas.sgt.models import SgtConfig
from src.services.molgraph.graph_ops import make_batch, subtree_key
from src.services.sgt.tokenizer import sgt_tokenize

logger = logging.getLogger(__name__)


def _molecule_counts(graph: MolGraph) -> Tuple[Counter, Counter]:
    subtrees = Counter(subtree_key(graph, index) for index in range(graph.num_nodes))
    atoms = Counter(element_symbol(node.atomic_number) for node in graph.nodes)
    return subtrees, atoms


def _ranked(counts: Counter) -> Tuple[Tuple[str, int], ...]:
    return tuple(sorted(counts.items(), key=lambda item: (-item[1], item[0])))


def subtree_census(corpus: Sequence[MolGraph], threads: int = 1) -> CensusReport:
    """
    Count every node's one-hop rooted subtree key and every atom type across a corpus.

    Molecules are counted in parallel and the per-molecule counters are summed, so the result does
    not depend on corpus order or thread count.

    Args:
        corpus: Molecules
        threads: Worker threads for the per-molecule counts

    Returns:
        CensusReport with both distributions sorted by count descending
    """
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        per_molecule = list(pool.map(_molecule_counts, corpus))

    subtrees: Counter = Counter()
    atoms: Counter = Counter()
    for molecule_subtrees, molecule_atoms in per_molecule:
        subtrees.update(molecule_subtrees)
        atoms.update(molecule_atoms)

    num_nodes = sum(graph.num_nodes for graph in corpus)
    logger.info(f"Census over {len(corpus)} molecules: {len(subtrees)} subtree types, {len(atoms)} atom types")
    return CensusReport(subtrees=_ranked(subtrees), atoms=_ranked(atoms), num_molecules=len(corpus), num_nodes=num_nodes)


def distribution_balance(counts: Sequence[Tuple[str, int]], name: str) -> BalanceReport:
    """
    Top-3 share and normalized entropy of a (key, count) distribution.

    A single-type distribution has normalized entropy 0.
    """
    values = np.array(sorted((count for _, count in counts), reverse=True), dtype=np.float64)
    total = float(values.sum())
    if total == 0:
        return BalanceReport(name=name, types=0, total=0, top3_share=0.0, normalized_entropy=0.0)
    normalized = float(entropy(values) / np.log(len(values))) if len(values) > 1 else 0.0
    return BalanceReport(
        name=name,
        types=len(values),
        total=int(total),
        top3_share=float(values[:3].sum() / total),
        normalized_entropy=min(1.0, max(0.0, normalized)),
    )


def sgt_vocabulary_size(corpus: Sequence[MolGraph], embedding: Mapping[int, np.ndarray], cfg: SgtConfig) -> VocabularySizeReport:
    """
    Number of distinct first-layer SGT tokens when the whole corpus is tokenized as one batch.

    Args:
        corpus: Molecules
        embedding: Atomic number -> embedding row
        cfg: Tokenizer config

    Returns:
        VocabularySizeReport with the atom and subtree type counts of the same corpus
    """
    batch = make_batch(corpus)
    first_layer = sgt_tokenize(batch.graph, embedding, cfg).layer(1)
    sgt_tokens = len({row.tobytes() for row in first_layer})
    census = subtree_census(corpus)
    logger.info(f"SGT vocabulary: {sgt_tokens} tokens against {census.atom_types} atom types")
    return VocabularySizeReport(atom_types=census.atom_types, subtree_types=census.subtree_types, sgt_tokens=sgt_tokens)
