import numpy as np
import pytest
from src.exceptions import CheckpointError, MgmLabException, VocabularyError
from src.repositories import (
    CensusRepository,
    CheckpointRepository,
    MetricsRepository,
    ProbeReportRepository,
    VocabularyRepository,
    load_checkpoint,
    parse_metrics,
    render_metrics,
    save_checkpoint,
)
from src.schemas.analyze.models import ClassScore, ProbeReport
from src.schemas.pretrain.models import Checkpoint, CheckpointMeta, EpochMetrics
from src.services.analyze import subtree_census
from src.services.fragment import make_fragmenter
from src.services.molgraph import parse_smiles
from src.services.tokenize import build_motif_vocab


def _checkpoint():
    rng = np.random.default_rng(0)
    params = {"encoder.embed": rng.normal(size=(5, 3)), "remask.m1": rng.normal(size=3)}
    meta = CheckpointMeta(
        config_fingerprint="abc123",
        epoch=4,
        rng_state={"mask": rng.bit_generator.state},
        atom_vocab=(6, 7, 8),
        config="[run]\nseed = 0\n",
    )
    return Checkpoint(params=params, meta=meta)


class TestCheckpointRepository:
    def test_round_trip(self, tmp_path):
        checkpoint = _checkpoint()
        path = save_checkpoint(checkpoint, tmp_path / "run" / "checkpoint")
        assert path.name == "checkpoint.npz"
        loaded = load_checkpoint(path)
        assert loaded.meta == checkpoint.meta
        assert sorted(loaded.params) == sorted(checkpoint.params)
        for name, value in checkpoint.params.items():
            np.testing.assert_array_equal(loaded.params[name], value)
            assert loaded.params[name].dtype == np.float64

    def test_missing(self, tmp_path):
        with pytest.raises(CheckpointError):
            CheckpointRepository(tmp_path).load("nothing")

    def test_garbage(self, tmp_path):
        (tmp_path / "broken.npz").write_bytes(b"not an archive")
        with pytest.raises(CheckpointError):
            CheckpointRepository(tmp_path).load("broken")

    def test_reserved_name(self, tmp_path):
        checkpoint = _checkpoint()
        bad = Checkpoint(params={**checkpoint.params, "__meta__": np.zeros(1)}, meta=checkpoint.meta)
        with pytest.raises(CheckpointError):
            CheckpointRepository(tmp_path).save(bad, "bad")


class TestMetricsRepository:
    def test_append_rewrites(self, tmp_path):
        repository = MetricsRepository(tmp_path)
        repository.append(EpochMetrics(epoch=1, mean_loss=1.5, token_accuracy=0.25))
        path = repository.append(EpochMetrics(epoch=2, mean_loss=0.75))
        assert path.read_text().splitlines() == [
            "epoch,mean_loss,token_accuracy,wall_ms",
            "1,1.5,0.25,",
            "2,0.75,,",
        ]
        assert [row.epoch for row in MetricsRepository(tmp_path).load("metrics.csv")] == [1, 2]

    def test_exact_floats(self):
        rows = [EpochMetrics(epoch=1, mean_loss=0.1 + 0.2, token_accuracy=1 / 3, wall_ms=12.5)]
        assert parse_metrics(render_metrics(rows)) == rows

    def test_bad_header(self):
        with pytest.raises(MgmLabException):
            parse_metrics("loss\n1.0\n")


class TestVocabularyRepository:
    def test_round_trip(self, tmp_path):
        corpus = [parse_smiles("c1ccccc1"), parse_smiles("CC(=O)Nc1ccc(O)cc1"), parse_smiles("C1CC1")]
        vocab = build_motif_vocab(corpus, make_fragmenter(recipe="mgssl"), threshold=1)
        repository = VocabularyRepository(tmp_path)
        repository.save(vocab, "vocab.txt")
        assert repository.load("vocab.txt") == vocab

    def test_missing_unk(self, tmp_path):
        (tmp_path / "vocab.txt").write_text("# recipe_fingerprint\tx\n# threshold\t1\n# recipe\tcycles\n0\t3\tC|\n")
        with pytest.raises(VocabularyError):
            VocabularyRepository(tmp_path).load("vocab.txt")

    def test_missing_file(self, tmp_path):
        with pytest.raises(VocabularyError):
            VocabularyRepository(tmp_path).load("absent.txt")


class TestReportRepositories:
    def test_census(self, tmp_path):
        report = subtree_census([parse_smiles("CO"), parse_smiles("c1ccccc1")])
        repository = CensusRepository(tmp_path)
        repository.save(report, "census")
        loaded = repository.load("census")
        assert loaded.subtrees == report.subtrees
        assert loaded.atoms == report.atoms
        assert loaded.num_nodes == 8
        assert "c:cc,6,0.75" in (tmp_path / "census_subtrees.csv").read_text()

    def test_probe_report(self, tmp_path):
        report = ProbeReport(
            task="masked_atom_type",
            metric_name="accuracy",
            metric=0.8125,
            per_class=(ClassScore(label="Z6", support=12, score=0.9), ClassScore(label="UNK", support=0)),
            train_size=90,
            test_size=16,
            seed=7,
            baseline=0.5,
            source="runs/toy/checkpoint.npz",
            notes=("mask ratio 0.35", "remask disabled"),
        )
        repository = ProbeReportRepository(tmp_path)
        repository.save(report, "probe.txt")
        assert repository.load("probe.txt") == report
