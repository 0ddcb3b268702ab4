import networkx as nx
import numpy as np
import pytest
from src.exceptions import GraphFileError, GraphValidationError, SmilesParseError
from src.schemas.molgraph.models import BondType
from src.services.molgraph import (
    adjacency,
    batch_graphs,
    induced_subgraph,
    load_graph_file,
    make_batch,
    parse_smiles,
    render_graphs,
    subtree_key,
    write_graph_file,
)

from tests.conftest import ACETAMINOPHEN, random_graph


class TestParseSmiles:
    def test_methanol(self):
        graph = parse_smiles("CO")
        assert [node.atomic_number for node in graph.nodes] == [6, 8]
        assert graph.num_edges == 1
        assert graph.edges[0].attr.bond_type == BondType.SINGLE

    def test_figure_molecule_has_one_ring(self):
        graph = parse_smiles("CC(=O)Nc1cccc(O)c1")
        assert graph.num_nodes == 11
        assert graph.num_edges == 11
        view = nx.Graph([edge.pair for edge in graph.edges])
        assert graph.num_edges - graph.num_nodes + nx.number_connected_components(view) == 1
        assert len(nx.cycle_basis(view)) == 1

    def test_triangle(self):
        graph = parse_smiles("C1CC1")
        assert graph.num_nodes == 3
        assert sorted(edge.pair for edge in graph.edges) == [(0, 1), (0, 2), (1, 2)]

    def test_aromatic_ring_bonds(self):
        graph = parse_smiles("c1ccccc1")
        assert all(node.is_aromatic for node in graph.nodes)
        assert all(edge.attr.bond_type == BondType.AROMATIC for edge in graph.edges)

    def test_aromatic_chain_bond_is_single(self):
        graph = parse_smiles("c1ccccc1c1ccccc1")
        assert graph.bond_between(5, 6) == BondType.SINGLE
        assert sum(edge.attr.bond_type == BondType.AROMATIC for edge in graph.edges) == 12
        assert parse_smiles("c1ccccc1:c1ccccc1").bond_between(5, 6) == BondType.AROMATIC

    def test_explicit_bonds_and_brackets(self):
        graph = parse_smiles("C#N")
        assert graph.edges[0].attr.bond_type == BondType.TRIPLE
        assert parse_smiles("[Cl]C").nodes[0].atomic_number == 17

    def test_two_digit_ring_label(self):
        assert parse_smiles("C%10CC%10").num_edges == 3

    def test_deterministic(self):
        first, second = parse_smiles(ACETAMINOPHEN), parse_smiles(ACETAMINOPHEN)
        assert (first.nodes, first.edges) == (second.nodes, second.edges)

    @pytest.mark.parametrize(
        "text, offset",
        [
            ("C1CC", 1),
            ("C(C", 1),
            ("CXc", 1),
            ("C=", 1),
        ],
    )
    def test_errors_carry_offsets(self, text, offset):
        with pytest.raises(SmilesParseError) as info:
            parse_smiles(text)
        assert info.value.offset == offset

    def test_empty(self):
        with pytest.raises(SmilesParseError):
            parse_smiles("")

    def test_node_cap(self):
        with pytest.raises(SmilesParseError):
            parse_smiles("CCCC", max_nodes=3)

    def test_ring_count_matches_closures(self):
        for text, closures in [("C1CC1", 1), ("c1ccc2ccccc2c1", 2), ("C1CC2CC1C2", 2), ("CCO", 0)]:
            graph = parse_smiles(text)
            assert graph.num_edges - graph.num_nodes + 1 == closures


class TestGraphFiles:
    def test_smiles_lines(self, tmp_path):
        path = tmp_path / "corpus.smi"
        path.write_text("# two molecules\nCO\nC1CC1\n", encoding="utf-8")
        graphs = load_graph_file(path)
        assert [graph.num_nodes for graph in graphs] == [2, 3]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.smi"
        path.write_text("", encoding="utf-8")
        assert load_graph_file(path) == []

    def test_bad_line_is_named(self, tmp_path):
        path = tmp_path / "bad.smi"
        path.write_text("CO\nCC\nXxQ\n", encoding="utf-8")
        with pytest.raises(GraphFileError) as info:
            load_graph_file(path)
        assert info.value.line == 3

    def test_structured_round_trip(self, tmp_path):
        source = tmp_path / "corpus.smi"
        source.write_text(f"CO\nC1CC1\n{ACETAMINOPHEN}\n", encoding="utf-8")
        graphs = load_graph_file(source)
        first = write_graph_file(graphs, tmp_path / "graphs.txt")
        reloaded = load_graph_file(first)
        assert [(g.nodes, g.edges) for g in reloaded] == [(g.nodes, g.edges) for g in graphs]
        second = write_graph_file(reloaded, tmp_path / "again.txt")
        assert first.read_bytes() == second.read_bytes()

    def test_structured_format(self):
        assert render_graphs([parse_smiles("CO")]) == "graph 2 1\nnode 0 6 0 0\nnode 1 8 0 0\nedge 0 1 0\n"

    def test_toy_corpus(self, toy_corpus):
        assert len(toy_corpus) == 100
        assert max(graph.num_nodes for graph in toy_corpus) <= 15


class TestAdjacency:
    def test_methanol(self):
        view = adjacency(parse_smiles("CO"))
        np.testing.assert_array_equal(view.a, [[0, 1], [1, 0]])
        np.testing.assert_array_equal(view.a_tilde, [[1, 1], [1, 1]])
        np.testing.assert_array_equal(view.d_tilde, np.diag([2, 2]))

    def test_single_node(self):
        view = adjacency(parse_smiles("C"))
        np.testing.assert_array_equal(view.a, [[0]])
        np.testing.assert_array_equal(view.degree, [1])

    def test_triangle_row_sums(self):
        np.testing.assert_array_equal(adjacency(parse_smiles("C1CC1")).a.sum(axis=1), [2, 2, 2])

    def test_symmetric_zero_diagonal(self, toy_corpus):
        for graph in toy_corpus:
            view = adjacency(graph)
            np.testing.assert_array_equal(view.a, view.a.T)
            assert not np.any(np.diag(view.a))
            assert np.all(view.degree >= 1)


class TestInducedSubgraph:
    def test_triangle_pair(self):
        fragment = induced_subgraph(parse_smiles("C1CC1"), {0, 1})
        assert fragment.size == 2
        assert len(fragment.edge_ids) == 1

    def test_whole_graph(self):
        graph = parse_smiles(ACETAMINOPHEN)
        fragment = induced_subgraph(graph, range(graph.num_nodes))
        assert len(fragment.edge_ids) == graph.num_edges

    def test_path_ends(self):
        fragment = induced_subgraph(parse_smiles("CCC"), {0, 2})
        assert fragment.size == 2
        assert not fragment.edge_ids

    def test_errors(self):
        graph = parse_smiles("CCC")
        with pytest.raises(GraphValidationError):
            induced_subgraph(graph, set())
        with pytest.raises(GraphValidationError):
            induced_subgraph(graph, {0, 7})


class TestBatching:
    def test_two_methanols(self):
        union, offsets = batch_graphs([parse_smiles("CO"), parse_smiles("CO")])
        assert union.num_nodes == 4
        assert [edge.pair for edge in union.edges] == [(0, 1), (2, 3)]
        assert offsets == (0, 2)

    def test_single_graph_unchanged(self):
        graph = parse_smiles("CCO")
        union, offsets = batch_graphs([graph])
        assert union is graph
        assert offsets == (0,)

    def test_offsets(self):
        graphs = [parse_smiles(text) for text in ("CCC", "CO", "CCCCC")]
        assert batch_graphs(graphs)[1] == (0, 3, 5)

    def test_empty(self):
        with pytest.raises(GraphValidationError):
            batch_graphs([])

    def test_no_edges_across_members(self):
        rng = np.random.default_rng(3)
        graphs = [random_graph(rng) for _ in range(20)]
        batch = make_batch(graphs)
        owner = batch.node_graph
        assert all(owner[edge.i] == owner[edge.j] for edge in batch.graph.edges)
        assert sum(batch.sizes) == batch.graph.num_nodes


class TestSubtreeKey:
    def test_keys(self):
        graph = parse_smiles("CO")
        assert [subtree_key(graph, k) for k in range(2)] == ["C:O", "O:C"]

    def test_neighbors_sorted(self):
        graph = parse_smiles("OC(N)C")
        assert subtree_key(graph, 1) == "C:CNO"
