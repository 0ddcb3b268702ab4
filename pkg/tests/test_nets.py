import numpy as np
import pytest
from src.exceptions import EmptyKeepSetError, ModelException, ShapeError, StackConfigError
from src.schemas.nets.models import AutoencoderConfig, StackConfig
from src.schemas.pretrain.models import MaskPlan
from src.schemas.tokenize.models import AtomVocabulary
from src.services.molgraph import adjacency, edge_type_counts, make_batch, parse_smiles
from src.services.nets import (
    AttnLayer,
    BatchContext,
    GinLayer,
    attention_weights,
    attn_forward,
    check_pipeline,
    decode,
    encode,
    gin_forward,
    init_autoencoder,
    make_autoencoder,
    make_autoencoder_config,
    pool_subgraph,
    run_pipeline_suite,
)
from src.services.tensorcore import Parameter, Tape, constant, mse_loss, row_select

from tests.conftest import ACETAMINOPHEN, permute_graph, random_graph

VOCAB = AtomVocabulary(atomic_numbers=(6, 7, 8))
DIM = 6


def _config(encoder=None, decoder=None, output_dim=4):
    return AutoencoderConfig(
        encoder=encoder or StackConfig(preset="gts_small", gin_layers=3, attn_layers=1, model_dim=DIM, edge_features=True),
        decoder=decoder or StackConfig(preset="gts_tiny", gin_layers=1, attn_layers=1, model_dim=5),
        num_embeddings=VOCAB.num_rows,
        mask_id=VOCAB.mask_id,
        output_dim=output_dim,
    )


def _inputs(graphs, masked=()):
    batch = make_batch(graphs)
    ids = VOCAB.indices(batch.graph.atomic_numbers)
    ids[list(masked)] = VOCAB.mask_id
    plan = MaskPlan(masked=tuple(masked), ratio=0.35, seed=0)
    return ids, BatchContext.from_batch(batch), plan


def _gin_layer(rng, d_in, d_out, eps=0.0):
    return GinLayer(
        w1=Parameter("w1", rng.normal(size=(d_in, d_out))),
        b1=Parameter("b1", rng.normal(size=d_out)),
        w2=Parameter("w2", rng.normal(size=(d_out, d_out))),
        b2=Parameter("b2", rng.normal(size=d_out)),
        edge_embed=Parameter("edge", rng.normal(size=(4, d_in))),
        eps=eps,
    )


def _gin_loop(graph, h, layer):
    out = []
    for i in range(graph.num_nodes):
        combined = (1.0 + layer.eps) * h[i]
        for edge in graph.edges:
            if i in edge.pair:
                j = edge.j if edge.i == i else edge.i
                combined = combined + h[j] + layer.edge_embed.value[int(edge.attr.bond_type)]
        hidden = np.maximum(combined @ layer.w1.value + layer.b1.value, 0.0)
        out.append(hidden @ layer.w2.value + layer.b2.value)
    return np.array(out)


class TestGinForward:
    def test_matches_double_loop(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            graph = random_graph(rng, max_nodes=10)
            layer = _gin_layer(rng, 3, 4, eps=float(rng.choice([0.0, 0.5])))
            h = rng.normal(size=(graph.num_nodes, 3))
            out = gin_forward(constant(h), adjacency(graph).a, layer, edge_type_counts(graph)).value
            np.testing.assert_allclose(out, _gin_loop(graph, h, layer), atol=1e-12)

    def test_isolated_node(self):
        rng = np.random.default_rng(1)
        layer = _gin_layer(rng, 3, 3)
        h = rng.normal(size=(1, 3))
        out = gin_forward(constant(h), np.zeros((1, 1)), layer, np.zeros((1, 4))).value
        expected = np.maximum(h @ layer.w1.value + layer.b1.value, 0.0) @ layer.w2.value + layer.b2.value
        np.testing.assert_allclose(out, expected)

    def test_permutation_equivariant(self):
        rng = np.random.default_rng(2)
        layer = _gin_layer(rng, 3, 3)
        graph = random_graph(rng, max_nodes=10)
        perm = rng.permutation(graph.num_nodes)
        moved = permute_graph(graph, perm)
        h = rng.normal(size=(graph.num_nodes, 3))
        h_moved = np.empty_like(h)
        h_moved[perm] = h
        original = gin_forward(constant(h), adjacency(graph).a, layer, edge_type_counts(graph)).value
        permuted = gin_forward(constant(h_moved), adjacency(moved).a, layer, edge_type_counts(moved)).value
        np.testing.assert_allclose(permuted[perm], original, atol=1e-12)

    def test_shape_errors(self):
        rng = np.random.default_rng(3)
        layer = _gin_layer(rng, 3, 3)
        with pytest.raises(ShapeError):
            gin_forward(constant(np.ones((2, 3))), np.zeros((3, 3)), layer, np.zeros((2, 4)))
        with pytest.raises(ShapeError):
            gin_forward(constant(np.ones((2, 3))), np.zeros((2, 2)), layer)


class TestAttnForward:
    @pytest.fixture
    def layer(self):
        return AttnLayer.from_params(init_autoencoder(_config(), np.random.default_rng(0)), "encoder.attn0")

    def test_single_node_attends_to_itself(self, layer):
        h = constant(np.random.default_rng(0).normal(size=(1, DIM)))
        np.testing.assert_allclose(attention_weights(h, layer, np.array([0])), [[1.0]])

    def test_identical_rows(self, layer):
        row = np.random.default_rng(1).normal(size=DIM)
        out = attn_forward(constant(np.stack([row, row, row + 1.0])), layer, np.array([0, 0, 0])).value
        np.testing.assert_allclose(out[0], out[1], atol=1e-12)

    def test_rows_sum_to_one_within_graphs(self, layer):
        h = constant(np.random.default_rng(2).normal(size=(5, DIM)))
        weights = attention_weights(h, layer, np.array([0, 0, 1, 1, 1]))
        np.testing.assert_allclose(weights.sum(axis=1), np.ones(5))
        assert np.all(weights[:2, 2:] == 0.0)
        assert np.all(weights[2:, :2] == 0.0)

    def test_keep_drops_rows(self, layer):
        rng = np.random.default_rng(3)
        h = rng.normal(size=(5, DIM))
        keep = np.array([0, 2, 3])
        out = attn_forward(constant(h), layer, np.array([0, 0, 1, 1, 1]), keep=keep).value
        assert out.shape == (3, DIM)
        perturbed = h.copy()
        perturbed[[1, 4]] += rng.normal(size=(2, DIM)) * 10.0
        again = attn_forward(constant(perturbed), layer, np.array([0, 0, 1, 1, 1]), keep=keep).value
        np.testing.assert_array_equal(out, again)

    def test_whole_graph_masked(self, layer):
        with pytest.raises(EmptyKeepSetError):
            attn_forward(constant(np.ones((3, DIM))), layer, np.array([0, 1, 1]), keep=[1, 2])


class TestEncode:
    def test_v1_rows_are_m1(self):
        params = init_autoencoder(_config(), np.random.default_rng(0))
        params["remask.m1"].value = np.full(DIM, 9.0)
        ids, context, plan = _inputs([parse_smiles(ACETAMINOPHEN)], masked=(1,))
        hidden = encode(ids, context, plan, params, _config(), remask="v1").value
        np.testing.assert_array_equal(hidden[1], np.full(DIM, 9.0))

    def test_v2_rows_are_m1(self):
        params = init_autoencoder(_config(), np.random.default_rng(1))
        ids, context, plan = _inputs([parse_smiles(ACETAMINOPHEN), parse_smiles("CCO")], masked=(2, 5, 12))
        hidden = encode(ids, context, plan, params, _config(), remask="v2").value
        for row in plan.masked:
            np.testing.assert_array_equal(hidden[row], params["remask.m1"].value)

    def test_v2_masked_inputs_never_reach_unmasked_rows(self):
        attention_only = StackConfig(preset="gts", gin_layers=0, attn_layers=2, model_dim=DIM)
        cfg = _config(encoder=attention_only, decoder=StackConfig(preset="linear", gin_layers=0, attn_layers=0, model_dim=DIM))
        params = init_autoencoder(cfg, np.random.default_rng(2))
        ids, context, plan = _inputs([parse_smiles(ACETAMINOPHEN)], masked=(0, 4, 8))
        unmasked = [k for k in range(context.num_nodes) if k not in plan.masked]
        before = encode(ids, context, plan, params, cfg, remask="v2").value
        plain = encode(ids, context, plan, params, cfg, remask="none").value
        params["encoder.embed"].value[VOCAB.mask_id] += np.random.default_rng(3).normal(size=DIM)
        after = encode(ids, context, plan, params, cfg, remask="v2").value
        np.testing.assert_array_equal(before[unmasked], after[unmasked])
        # without remasking the masked inputs do leak through attention
        leaked = encode(ids, context, plan, params, cfg, remask="none").value
        assert not np.allclose(plain[unmasked], leaked[unmasked])

    @pytest.mark.parametrize("remask", ["v1", "v2"])
    def test_empty_mask_is_identity(self, remask):
        params = init_autoencoder(_config(), np.random.default_rng(3))
        ids, context, plan = _inputs([parse_smiles(ACETAMINOPHEN)])
        plain = encode(ids, context, plan, params, _config(), remask="none").value
        np.testing.assert_array_equal(encode(ids, context, plan, params, _config(), remask=remask).value, plain)
        np.testing.assert_array_equal(encode(ids, context, None, params, _config(), remask=remask).value, plain)

    def test_permutation_equivariant(self):
        rng = np.random.default_rng(4)
        params = init_autoencoder(_config(), rng)
        graph = parse_smiles(ACETAMINOPHEN)
        perm = rng.permutation(graph.num_nodes)
        ids, context, plan = _inputs([graph])
        moved_ids, moved_context, _ = _inputs([permute_graph(graph, perm)])
        original = encode(ids, context, plan, params, _config()).value
        moved = encode(moved_ids, moved_context, plan, params, _config()).value
        np.testing.assert_allclose(moved[perm], original, atol=1e-10)


class TestDecode:
    def test_linear_preset(self):
        cfg = _config(decoder=StackConfig(preset="linear", gin_layers=0, attn_layers=0, model_dim=DIM), output_dim=3)
        params = init_autoencoder(cfg, np.random.default_rng(0))
        ids, context, plan = _inputs([parse_smiles("CCO")])
        hidden = encode(ids, context, plan, params, cfg)
        z = decode(hidden, context, params, cfg).value
        expected = hidden.value @ params["decoder.out.w"].value + params["decoder.out.b"].value
        np.testing.assert_allclose(z, expected)
        assert z.shape == (3, 3)

    def test_small_decoder_on_one_node(self):
        cfg = _config(decoder=StackConfig(preset="gts_small", gin_layers=3, attn_layers=1, model_dim=4))
        params = init_autoencoder(cfg, np.random.default_rng(1))
        ids, context, plan = _inputs([parse_smiles("C")])
        assert decode(encode(ids, context, plan, params, cfg), context, params, cfg).shape == (1, 4)

    def test_gradient_reaches_encoder(self):
        cfg = _config()
        params = init_autoencoder(cfg, np.random.default_rng(2))
        ids, context, plan = _inputs([parse_smiles(ACETAMINOPHEN)], masked=(1, 3, 7))
        params.zero_grad()
        with Tape() as tape:
            z = decode(encode(ids, context, plan, params, cfg, remask="v2"), context, params, cfg)
            tape.backward(mse_loss(row_select(z, plan.masked), np.ones((plan.size, cfg.output_dim))))
        assert np.any(params["encoder.gin0.w1"].grad != 0.0)
        assert np.any(params["encoder.embed"].grad != 0.0)
        assert np.any(params["remask.m1"].grad != 0.0)

    def test_attention_only_decoder_width_must_match(self):
        with pytest.raises(StackConfigError):
            init_autoencoder(
                _config(decoder=StackConfig(preset="gts_tiny", gin_layers=0, attn_layers=1, model_dim=DIM + 1)),
                np.random.default_rng(0),
            )


class TestPoolSubgraph:
    z = constant(np.array([[1.0, 2.0], [3.0, 4.0]]))

    def test_modes(self):
        np.testing.assert_allclose(pool_subgraph(self.z, {0, 1}).value, [[2.0, 3.0]])
        np.testing.assert_allclose(pool_subgraph(self.z, {0, 1}, "sum").value, [[4.0, 6.0]])
        np.testing.assert_allclose(pool_subgraph(self.z, {0, 1}, "max").value, [[3.0, 4.0]])

    @pytest.mark.parametrize("mode", ["mean", "sum", "max"])
    def test_singleton(self, mode):
        np.testing.assert_allclose(pool_subgraph(self.z, [1], mode).value, [[3.0, 4.0]])

    def test_errors(self):
        with pytest.raises(ModelException):
            pool_subgraph(self.z, [])
        with pytest.raises(ModelException):
            pool_subgraph(self.z, [0], "median")


class TestPipelineGradients:
    @pytest.mark.parametrize("remask", ["none", "v1", "v2"])
    def test_pipeline(self, remask):
        assert check_pipeline(remask).passed

    def test_suite(self):
        assert [result.name for result in run_pipeline_suite()] == ["pipeline_none", "pipeline_v1", "pipeline_v2"]


class TestFactory:
    def test_default_stacks(self, default_settings):
        cfg = make_autoencoder_config(VOCAB, output_dim=16, settings=default_settings)
        assert (cfg.encoder.gin_layers, cfg.encoder.attn_layers) == (3, 1)
        assert (cfg.decoder.gin_layers, cfg.decoder.attn_layers) == (1, 1)
        assert cfg.mask_id == VOCAB.mask_id

    def test_seeded_init(self, default_settings):
        cfg = make_autoencoder_config(VOCAB, output_dim=4, settings=default_settings)
        first, second, other = make_autoencoder(cfg, 5), make_autoencoder(cfg, 5), make_autoencoder(cfg, 6)
        assert first.names == second.names
        for name in first.names:
            np.testing.assert_array_equal(first[name].value, second[name].value)
        assert not np.array_equal(first["encoder.embed"].value, other["encoder.embed"].value)
