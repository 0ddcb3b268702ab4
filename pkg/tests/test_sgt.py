from collections import defaultdict

import numpy as np
import pytest
from src.config import SgtSettings
from src.exceptions import TokenizationException
from src.schemas.sgt.models import GraphOperatorKind, SgtConfig
from src.schemas.tokenize.models import AtomVocabulary
from src.services.molgraph import adjacency, make_batch, parse_smiles, subtree_key
from src.services.sgt import batch_normalize, build_operator, embedding_snapshot, make_sgt_config, sgt_tokenize

from tests.conftest import permute_graph, random_graph

GIN = GraphOperatorKind(name="gin", eps=0.5)
GCN = GraphOperatorKind(name="gcn")
SAGE = GraphOperatorKind(name="sage")


def _embedding(rng, dim, elements=(6, 7, 8)):
    return {z: rng.normal(size=dim) for z in elements}


def _aggregate(graph, h, kind):
    """Per-node aggregation written out neighbor by neighbor."""
    out = np.zeros_like(h)
    degree = [len(graph.neighbors[i]) + 1 for i in range(graph.num_nodes)]
    for i in range(graph.num_nodes):
        closed = (i, *graph.neighbors[i])
        if kind.name == "gin":
            out[i] = sum((h[j] for j in graph.neighbors[i]), np.zeros(h.shape[1])) + (1 + kind.eps) * h[i]
        elif kind.name == "gcn":
            out[i] = sum(h[j] / np.sqrt(degree[i] * degree[j]) for j in closed)
        else:
            out[i] = sum(h[j] for j in closed) / degree[i]
    return out


class TestBuildOperator:
    def test_gin_path(self):
        np.testing.assert_allclose(build_operator(adjacency(parse_smiles("CO")), GIN), [[1.5, 1.0], [1.0, 1.5]])

    def test_gcn_path(self):
        np.testing.assert_allclose(build_operator(adjacency(parse_smiles("CO")), GCN), [[0.5, 0.5], [0.5, 0.5]])

    def test_sage_star_center(self):
        operator = build_operator(adjacency(parse_smiles("CC(C)C")), SAGE)
        np.testing.assert_allclose(operator[1], [0.25, 0.25, 0.25, 0.25])

    @pytest.mark.parametrize("kind", [GIN, GCN, SAGE], ids=["gin", "gcn", "sage"])
    def test_matches_neighbor_aggregation(self, kind):
        rng = np.random.default_rng(13)
        for _ in range(100):
            graph = random_graph(rng)
            h = rng.normal(size=(graph.num_nodes, 3))
            operator = build_operator(adjacency(graph), kind)
            assert np.max(np.abs(operator @ h - _aggregate(graph, h, kind))) < 1e-12

    def test_symmetry_and_rows(self, toy_corpus):
        for graph in toy_corpus[:30]:
            view = adjacency(graph)
            np.testing.assert_allclose(build_operator(view, GIN), build_operator(view, GIN).T)
            np.testing.assert_allclose(build_operator(view, GCN), build_operator(view, GCN).T)
            np.testing.assert_allclose(build_operator(view, SAGE).sum(axis=1), np.ones(graph.num_nodes))


class TestBatchNormalize:
    def test_two_values(self):
        np.testing.assert_allclose(batch_normalize(np.array([[1.0], [3.0]])), [[-1.0], [1.0]], atol=1e-5)

    def test_constant_column(self):
        np.testing.assert_array_equal(batch_normalize(np.array([[2.0], [2.0]])), [[0.0], [0.0]])

    def test_unit_std(self):
        rng = np.random.default_rng(0)
        normalized = batch_normalize(rng.normal(loc=3.0, scale=0.2, size=(40, 5)), bn_epsilon=1e-12)
        assert np.all(np.abs(normalized.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(normalized.std(axis=0) - 1.0) < 1e-6)

    def test_empty(self):
        with pytest.raises(TokenizationException):
            batch_normalize(np.zeros((0, 3)))


class TestSgtTokenize:
    def test_methanol(self):
        cfg = SgtConfig(kind=GIN, layers=1, embedding_dim=2, bn_epsilon=1e-12)
        tokens = sgt_tokenize(parse_smiles("CO"), {6: np.array([1.0, 0.0]), 8: np.array([0.0, 1.0])}, cfg)
        np.testing.assert_allclose(tokens.values, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-9)

    def test_two_layers_width(self):
        rng = np.random.default_rng(0)
        cfg = SgtConfig(kind=GIN, layers=2, embedding_dim=4)
        tokens = sgt_tokenize(parse_smiles("CC(=O)N"), _embedding(rng, 4), cfg)
        assert tokens.values.shape == (4, 8)
        assert tokens.dim == 8
        np.testing.assert_array_equal(tokens.layer(2), tokens.values[:, 4:])
        with pytest.raises(IndexError):
            tokens.layer(3)

    def test_without_batch_norm_is_operator_product(self):
        rng = np.random.default_rng(1)
        graph = random_graph(rng)
        embedding = _embedding(rng, 3)
        tokens = sgt_tokenize(graph, embedding, SgtConfig(kind=GCN, layers=2, embedding_dim=3, batch_norm=False))
        operator = build_operator(adjacency(graph), GCN)
        h0 = np.stack([embedding[int(z)] for z in graph.atomic_numbers])
        np.testing.assert_allclose(tokens.layer(1), operator @ h0, atol=1e-12)
        np.testing.assert_allclose(tokens.layer(2), operator @ operator @ h0, atol=1e-12)

    def test_columns_standardized(self, toy_corpus):
        rng = np.random.default_rng(2)
        batch = make_batch(toy_corpus[:32])
        embedding = _embedding(rng, 6, sorted({int(z) for z in batch.graph.atomic_numbers}))
        values = sgt_tokenize(batch.graph, embedding, SgtConfig(kind=GIN, layers=2, embedding_dim=6, bn_epsilon=1e-12)).values
        assert np.all(np.abs(values.mean(axis=0)) < 1e-9)
        spread = values.std(axis=0)
        assert np.all(np.abs(spread[spread > 0] - 1.0) < 1e-6)

    def test_equal_subtrees_equal_tokens(self):
        rng = np.random.default_rng(21)
        cfg = SgtConfig(kind=GIN, layers=1, embedding_dim=5)
        for _ in range(50):
            batch = make_batch([random_graph(rng) for _ in range(int(rng.integers(1, 6)))]).graph
            values = sgt_tokenize(batch, _embedding(rng, 5), cfg).values
            groups = defaultdict(list)
            for node in range(batch.num_nodes):
                groups[subtree_key(batch, node)].append(node)
            for members in groups.values():
                assert all(np.array_equal(values[members[0]], values[other]) for other in members[1:])

    def test_distinct_rows_follow_subtrees(self):
        rng = np.random.default_rng(8)
        cfg = SgtConfig(kind=GIN, layers=1, embedding_dim=5)
        for _ in range(20):
            batch = make_batch([random_graph(rng) for _ in range(4)]).graph
            values = sgt_tokenize(batch, _embedding(rng, 5), cfg).values
            keys = {subtree_key(batch, node) for node in range(batch.num_nodes)}
            assert len(np.unique(values, axis=0)) == len(keys)

    def test_permutation_equivariant(self):
        rng = np.random.default_rng(3)
        cfg = SgtConfig(kind=GCN, layers=2, embedding_dim=4)
        for _ in range(10):
            graph = random_graph(rng)
            embedding = _embedding(rng, 4)
            perm = rng.permutation(graph.num_nodes)
            original = sgt_tokenize(graph, embedding, cfg).values
            moved = sgt_tokenize(permute_graph(graph, perm), embedding, cfg).values
            np.testing.assert_allclose(moved[perm], original, atol=1e-10)

    def test_embedding_untouched(self):
        rng = np.random.default_rng(4)
        vocab = AtomVocabulary(atomic_numbers=(6, 7, 8))
        table = rng.normal(size=(vocab.num_rows, 3))
        snapshot = embedding_snapshot(table, vocab)
        before = {z: row.copy() for z, row in snapshot.items()}
        sgt_tokenize(parse_smiles("CC(=O)N"), snapshot, SgtConfig(kind=GIN, embedding_dim=3))
        for z, row in snapshot.items():
            np.testing.assert_array_equal(row, before[z])
        table[0] += 1.0
        np.testing.assert_array_equal(snapshot[6], before[6])

    def test_missing_atom_type(self):
        with pytest.raises(TokenizationException):
            sgt_tokenize(parse_smiles("CS"), {6: np.zeros(2)}, SgtConfig(embedding_dim=2))

    def test_width_mismatch(self):
        with pytest.raises(TokenizationException):
            sgt_tokenize(parse_smiles("CO"), {6: np.zeros(3), 8: np.zeros(3)}, SgtConfig(embedding_dim=2))


class TestSgtConfig:
    def test_from_settings(self):
        cfg = make_sgt_config(16, SgtSettings(operator="sage", layers=2))
        assert cfg.kind.name == "sage"
        assert cfg.layers == 2
        assert cfg.embedding_dim == 16

    def test_serialization_stable(self):
        assert make_sgt_config(8).model_dump_json() == make_sgt_config(8).model_dump_json()

    def test_eps_must_be_finite(self):
        with pytest.raises(ValueError):
            GraphOperatorKind(name="gin", eps=float("inf"))
