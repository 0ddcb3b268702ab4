from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest
from src.config import DATA_DIR, RunConfig, load_config
from src.schemas.molgraph.models import BondType, Edge, EdgeAttr, MolGraph, NodeAttr
from src.services.molgraph import load_graph_file, parse_smiles

TOY_CORPUS = DATA_DIR / "toy_corpus.smi"
TOY_CONFIG = Path(__file__).parent.parent / "configs" / "toy.cfg"

ACETAMINOPHEN = "CC(=O)Nc1ccc(O)cc1"
NAPHTHALENE = "c1ccc2ccccc2c1"


@pytest.fixture
def smiles() -> Callable[[str], MolGraph]:
    return parse_smiles


@pytest.fixture(scope="session")
def toy_corpus() -> List[MolGraph]:
    return load_graph_file(TOY_CORPUS)


@pytest.fixture
def default_settings() -> RunConfig:
    return load_config()


def random_graph(rng: np.random.Generator, max_nodes: int = 12, elements=(6, 7, 8)) -> MolGraph:
    """Connected random graph: a random spanning tree plus a few extra edges."""
    n = int(rng.integers(1, max_nodes + 1))
    nodes = tuple(NodeAttr(atomic_number=int(rng.choice(elements))) for _ in range(n))
    pairs = {(int(rng.integers(0, k)), k) for k in range(1, n)}
    for _ in range(int(rng.integers(0, 3))):
        i, j = sorted(int(v) for v in rng.choice(n, size=2, replace=False)) if n > 1 else (0, 0)
        if i != j:
            pairs.add((i, j))
    edges = tuple(Edge(i=i, j=j, attr=EdgeAttr(bond_type=BondType(int(rng.integers(0, 4))))) for i, j in sorted(pairs))
    return MolGraph(nodes=nodes, edges=edges)


@pytest.fixture
def graph_factory() -> Callable[..., MolGraph]:
    return random_graph


def permute_graph(graph: MolGraph, perm: np.ndarray) -> MolGraph:
    """The same molecule with node k moved to position perm[k]."""
    nodes: List[NodeAttr] = [graph.nodes[0]] * graph.num_nodes
    for old, new in enumerate(perm):
        nodes[int(new)] = graph.nodes[old]
    edges = sorted(
        (min(int(perm[edge.i]), int(perm[edge.j])), max(int(perm[edge.i]), int(perm[edge.j])), edge.attr) for edge in graph.edges
    )
    return MolGraph(nodes=tuple(nodes), edges=tuple(Edge(i=i, j=j, attr=attr) for i, j, attr in edges))
