import networkx as nx
import numpy as np
import pytest
from networkx.algorithms import isomorphism
from src.exceptions import CanonicalizationError, RecipeMismatchError, TokenizationException, VocabularyError
from src.repositories import VocabularyRepository, save_checkpoint
from src.schemas.molgraph.models import BondType
from src.schemas.nets.models import AutoencoderConfig, StackConfig
from src.schemas.pretrain.models import Checkpoint, CheckpointMeta
from src.schemas.tokenize.models import AtomVocabulary, FrozenGinLayer
from src.services.fragment import extract_cycles, make_fragmenter
from src.services.molgraph import induced_subgraph, parse_smiles, to_networkx
from src.services.nets import init_autoencoder
from src.services.tokenize import (
    build_atom_vocab,
    build_motif_vocab,
    canonical_key,
    frozen_gnn_tokenize,
    frozen_gnn_vectors,
    frozen_tokenizer_from_parameters,
    load_frozen_tokenizer,
    make_frozen_tokenizer,
    tok_edge,
    tok_motif,
    tok_node,
)

from tests.conftest import permute_graph, random_graph


def _whole_key(graph):
    return canonical_key(induced_subgraph(graph, range(graph.num_nodes)), graph)


def _isomorphic(first, second):
    return nx.is_isomorphic(
        to_networkx(first),
        to_networkx(second),
        node_match=isomorphism.categorical_node_match(["z", "aromatic"], [0, False]),
        edge_match=isomorphism.categorical_edge_match("bond", -1),
    )


class TestNodeAndEdgeTokens:
    def test_methanol(self):
        vocab = AtomVocabulary(atomic_numbers=(6, 7, 8))
        assert [token.id for token in tok_node(parse_smiles("CO"), vocab)] == [0, 2]
        assert [token.id for token in tok_node(parse_smiles("C"), vocab)] == [0]

    def test_unknown_atom(self):
        vocab = AtomVocabulary(atomic_numbers=(6, 7, 8))
        assert [token.id for token in tok_node(parse_smiles("CF"), vocab)] == [0, vocab.unk_id]

    def test_atom_vocab(self, toy_corpus):
        vocab = build_atom_vocab(toy_corpus)
        assert list(vocab.atomic_numbers) == sorted(vocab.atomic_numbers)
        assert {6, 7, 8} <= set(vocab.atomic_numbers)
        assert vocab.mask_id == vocab.unk_id + 1

    def test_empty_corpus(self):
        with pytest.raises(VocabularyError):
            build_atom_vocab([])

    def test_edges(self):
        assert [token.id for token in tok_edge(parse_smiles("CO"))] == [BondType.SINGLE]
        assert [token.id for token in tok_edge(parse_smiles("C=O"))] == [BondType.DOUBLE]
        assert [token.id for token in tok_edge(parse_smiles("c1ccccc1"))] == [BondType.AROMATIC] * 6


class TestCanonicalKey:
    def test_triangle_orders(self):
        graph = parse_smiles("C1CO1")
        rng = np.random.default_rng(0)
        keys = {_whole_key(permute_graph(graph, rng.permutation(3))) for _ in range(6)}
        assert len(keys) == 1

    def test_benzene_from_any_molecule(self):
        keys = set()
        for text in ("c1ccccc1", "Cc1ccccc1", "Oc1ccccc1", "CC(=O)Nc1ccc(O)cc1"):
            graph = parse_smiles(text)
            keys.add(canonical_key(extract_cycles(graph)[0], graph))
        assert len(keys) == 1

    def test_singleton(self):
        graph = parse_smiles("CO")
        assert canonical_key(induced_subgraph(graph, {1}), graph) == "O|"

    def test_aromatic_label_differs(self):
        assert _whole_key(parse_smiles("c1ccccc1")) != _whole_key(parse_smiles("C1CCCCC1"))

    @pytest.mark.parametrize("max_nodes", [8, 12])
    def test_relabeling_invariant(self, max_nodes):
        rng = np.random.default_rng(max_nodes)
        for _ in range(25):
            graph = random_graph(rng, max_nodes=max_nodes)
            permuted = permute_graph(graph, rng.permutation(graph.num_nodes))
            assert _whole_key(graph) == _whole_key(permuted)

    def test_equal_keys_mean_isomorphic(self):
        rng = np.random.default_rng(9)
        graphs = [random_graph(rng, max_nodes=5, elements=(6, 8)) for _ in range(40)]
        keys = [_whole_key(graph) for graph in graphs]
        for a in range(len(graphs)):
            for b in range(a + 1, len(graphs)):
                assert (keys[a] == keys[b]) == _isomorphic(graphs[a], graphs[b])

    def test_size_guard(self):
        graph = parse_smiles("C" * 13)
        with pytest.raises(CanonicalizationError):
            _whole_key(graph)
        with pytest.raises(CanonicalizationError):
            canonical_key(induced_subgraph(graph, range(5)), graph, max_nodes=4)


class TestMotifVocabulary:
    @pytest.fixture
    def corpus(self):
        return [parse_smiles("c1ccccc1")] * 3 + [parse_smiles("C1CC1")]

    def test_threshold(self, corpus):
        fragmenter = make_fragmenter(recipe="cycles")
        vocab = build_motif_vocab(corpus, fragmenter, threshold=2)
        assert vocab.keys == (_whole_key(corpus[0]),)
        assert vocab.counts == (3,)
        assert vocab.unk_id == 1
        assert vocab.unk_count == 1

    def test_threshold_one(self, corpus):
        vocab = build_motif_vocab(corpus, make_fragmenter(recipe="cycles"), threshold=1)
        assert vocab.size == 3
        assert vocab.counts == (3, 1)

    def test_tokens(self, corpus):
        fragmenter = make_fragmenter(recipe="cycles")
        vocab = build_motif_vocab(corpus, fragmenter, threshold=2)
        assert [token.id for token in tok_motif(corpus[0], fragmenter, vocab)] == [0]
        assert [token.id for token in tok_motif(corpus[3], fragmenter, vocab)] == [vocab.unk_id]

    def test_toluene_ring_and_methyl(self, corpus):
        fragmenter = make_fragmenter(recipe="remaining_nodes(cycles)")
        vocab = build_motif_vocab(corpus, fragmenter, threshold=1)
        tokens = tok_motif(parse_smiles("Cc1ccccc1"), fragmenter, vocab)
        assert [token.fragment.size for token in tokens] == [1, 6]
        assert tokens[1].id == vocab.index(_whole_key(corpus[0]))

    def test_recipe_mismatch(self, corpus):
        vocab = build_motif_vocab(corpus, make_fragmenter(recipe="cycles"), threshold=1)
        with pytest.raises(RecipeMismatchError):
            tok_motif(corpus[0], make_fragmenter(recipe="mgssl"), vocab)

    def test_empty_corpus(self):
        with pytest.raises(VocabularyError):
            build_motif_vocab([], make_fragmenter(recipe="cycles"), threshold=1)

    def test_file_bytes_deterministic(self, toy_corpus, tmp_path):
        fragmenter = make_fragmenter(recipe="mgssl")
        repository = VocabularyRepository(tmp_path)
        first = repository.save(build_motif_vocab(toy_corpus, fragmenter, threshold=2), "first.txt")
        second = repository.save(build_motif_vocab(toy_corpus, fragmenter, threshold=2, threads=4), "second.txt")
        assert first.read_bytes() == second.read_bytes()
        assert repository.load("first.txt") == build_motif_vocab(toy_corpus, fragmenter, threshold=2)

    def test_index_order(self, toy_corpus):
        vocab = build_motif_vocab(toy_corpus, make_fragmenter(recipe="mgssl"), threshold=1)
        order = list(zip((-count for count in vocab.counts), vocab.keys))
        assert order == sorted(order)


class TestFrozenGnnTokenizer:
    def _layers(self, rng, widths):
        return [
            FrozenGinLayer(
                w1=rng.normal(size=(widths[k], widths[k + 1])),
                b1=rng.normal(size=widths[k + 1]),
                w2=rng.normal(size=(widths[k + 1], widths[k + 1])),
                b2=rng.normal(size=widths[k + 1]),
            )
            for k in range(len(widths) - 1)
        ]

    def test_zero_weights(self):
        vocab = AtomVocabulary(atomic_numbers=(6, 7, 8))
        zero = FrozenGinLayer(w1=np.zeros((4, 5)), b1=np.zeros(5), w2=np.zeros((5, 3)), b2=np.zeros(3))
        tokenizer = make_frozen_tokenizer(np.ones((vocab.num_rows, 4)), vocab, [zero])
        np.testing.assert_array_equal(frozen_gnn_vectors(parse_smiles("CC(=O)N"), tokenizer), np.zeros((4, 3)))

    def test_permutation_equivariant(self):
        rng = np.random.default_rng(2)
        vocab = AtomVocabulary(atomic_numbers=(6, 7, 8))
        tokenizer = make_frozen_tokenizer(rng.normal(size=(vocab.num_rows, 4)), vocab, self._layers(rng, [4, 6, 3]), eps=0.1)
        for _ in range(10):
            graph = random_graph(rng)
            perm = rng.permutation(graph.num_nodes)
            original = frozen_gnn_vectors(graph, tokenizer)
            moved = frozen_gnn_vectors(permute_graph(graph, perm), tokenizer)
            np.testing.assert_allclose(moved[perm], original, atol=1e-12)

    def test_weights_are_read_only(self):
        rng = np.random.default_rng(4)
        vocab = AtomVocabulary(atomic_numbers=(6, 8))
        tokenizer = make_frozen_tokenizer(rng.normal(size=(vocab.num_rows, 2)), vocab, self._layers(rng, [2, 2]))
        assert not tokenizer.layers[0].w1.flags.writeable
        assert not tokenizer.embedding.flags.writeable

    def test_shape_mismatch(self):
        rng = np.random.default_rng(1)
        vocab = AtomVocabulary(atomic_numbers=(6, 8))
        with pytest.raises(TokenizationException):
            make_frozen_tokenizer(rng.normal(size=(vocab.num_rows, 5)), vocab, self._layers(rng, [4, 3]))
        with pytest.raises(TokenizationException):
            make_frozen_tokenizer(rng.normal(size=(1, 4)), vocab, self._layers(rng, [4, 3]))

    def test_tokens_carry_node_vectors(self):
        rng = np.random.default_rng(5)
        vocab = AtomVocabulary(atomic_numbers=(6, 7, 8))
        tokenizer = make_frozen_tokenizer(rng.normal(size=(vocab.num_rows, 3)), vocab, self._layers(rng, [3, 4]))
        graph = parse_smiles("CC(=O)N")
        tokens = frozen_gnn_tokenize(graph, tokenizer)
        assert [token.node for token in tokens] == [0, 1, 2, 3]
        np.testing.assert_array_equal(np.array([token.vec for token in tokens]), frozen_gnn_vectors(graph, tokenizer))

    def test_from_trained_stack(self, tmp_path):
        vocab = AtomVocabulary(atomic_numbers=(6, 7, 8))
        cfg = AutoencoderConfig(
            encoder=StackConfig(preset="gts_small", gin_layers=3, attn_layers=1, model_dim=6, edge_features=True),
            decoder=StackConfig(preset="gts_tiny", gin_layers=1, attn_layers=1, model_dim=5),
            num_embeddings=vocab.num_rows,
            mask_id=vocab.mask_id,
            output_dim=4,
        )
        arrays = init_autoencoder(cfg, np.random.default_rng(0)).arrays()
        tokenizer = frozen_tokenizer_from_parameters(arrays, vocab)
        assert len(tokenizer.layers) == 3
        assert tokenizer.dim == 6

        meta = CheckpointMeta(config_fingerprint="f", epoch=1, atom_vocab=vocab.atomic_numbers)
        path = save_checkpoint(Checkpoint(params=arrays, meta=meta), tmp_path / "checkpoint")
        loaded = load_frozen_tokenizer(path)
        graph = parse_smiles("CCO")
        np.testing.assert_array_equal(frozen_gnn_vectors(graph, loaded), frozen_gnn_vectors(graph, tokenizer))

    def test_needs_embedding(self):
        with pytest.raises(TokenizationException):
            frozen_tokenizer_from_parameters({}, AtomVocabulary(atomic_numbers=(6,)))
