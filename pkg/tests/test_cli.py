import pytest
from src.exceptions import ConfigurationError, GraphFileError, StackConfigError, TrainingException
from src.main import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, exit_code, main
from src.repositories import CheckpointRepository, VocabularyRepository

from tests.conftest import TOY_CORPUS

SMALL_MODEL = ["--set", "encoder.model_dim=8", "--set", "decoder.model_dim=8"]


@pytest.fixture(autouse=True)
def no_seed_env(monkeypatch):
    monkeypatch.delenv("MGMLAB_SEED", raising=False)


@pytest.fixture
def corpus_file(tmp_path):
    path = tmp_path / "two.smi"
    path.write_text("CO\nc1ccccc1\n")
    return path


class TestExitCodes:
    def test_mapping(self):
        assert exit_code(TrainingException("nan")) == EXIT_NUMERICAL
        assert exit_code(ConfigurationError("bad")) == EXIT_USAGE
        assert exit_code(StackConfigError("width")) == EXIT_USAGE
        assert exit_code(GraphFileError("bad record", 3)) == EXIT_DATA

    def test_usage_errors(self, tmp_path, corpus_file):
        assert main([]) == EXIT_USAGE
        assert main(["explode", str(corpus_file)]) == EXIT_USAGE
        assert main(["census", str(corpus_file), "--out", str(tmp_path), "--set", "train.epochs"]) == EXIT_USAGE
        assert main(["census", str(corpus_file), "--out", str(tmp_path), "--set", "train.mask_ratio=2"]) == EXIT_USAGE

    def test_missing_input(self, tmp_path):
        assert main(["census", str(tmp_path / "absent.smi"), "--out", str(tmp_path)]) == EXIT_DATA

    def test_bad_smiles(self, tmp_path):
        path = tmp_path / "bad.smi"
        path.write_text("CO\nC1CC\n")
        assert main(["parse", str(path), "--out", str(tmp_path)]) == EXIT_DATA


class TestCommands:
    def test_census(self, tmp_path, corpus_file, capsys):
        assert main(["census", str(corpus_file), "--out", str(tmp_path)]) == EXIT_OK
        subtrees = (tmp_path / "census_subtrees.csv").read_text().splitlines()
        assert subtrees[0] == "key,count,fraction"
        assert subtrees[1].startswith("c:cc,6,")
        assert (tmp_path / "balance.csv").exists()
        assert (tmp_path / "resolved.cfg").exists()
        assert "3 subtree types" in capsys.readouterr().out

    def test_census_with_sgt(self, tmp_path):
        assert main(["census", str(TOY_CORPUS), "--sgt", "--out", str(tmp_path)] + SMALL_MODEL) == EXIT_OK
        lines = (tmp_path / "sgt_vocabulary.txt").read_text().splitlines()
        assert lines[0].startswith("atom_types: ")
        assert (tmp_path / "bn_ablation.csv").read_text().startswith("normalization,")

    def test_parse_and_reload(self, tmp_path, corpus_file):
        assert main(["parse", str(corpus_file), "--out", str(tmp_path)]) == EXIT_OK
        assert main(["census", str(tmp_path / "graphs.txt"), "--out", str(tmp_path / "again")]) == EXIT_OK
        first = (tmp_path / "graphs.txt").read_text()
        assert first.startswith("graph 2 1")

    def test_fragment_and_vocab(self, tmp_path):
        assert main(["fragment", str(TOY_CORPUS), "--recipe", "relmole", "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "fragments.tsv").read_text().startswith("molecule\tkind\tnodes\tedges\tlabel\tkey\n")
        assert main(["vocab", str(TOY_CORPUS), "--out", str(tmp_path)]) == EXIT_OK
        assert VocabularyRepository(tmp_path).load("vocab.txt").size >= 1

    @pytest.mark.parametrize("kind", ["node", "sgt", "motif"])
    def test_tokenize(self, tmp_path, corpus_file, kind):
        assert main(["tokenize", str(corpus_file), "--out", str(tmp_path), "--set", f"tokenizer.kind={kind}"]) == EXIT_OK
        assert (tmp_path / f"tokens_{kind}.tsv").read_text().strip()

    def test_frozen_gnn_needs_checkpoint(self, tmp_path, corpus_file):
        args = ["tokenize", str(corpus_file), "--out", str(tmp_path), "--set", "tokenizer.kind=frozen_gnn"]
        assert main(args) == EXIT_USAGE

    def test_pretrain_is_deterministic(self, tmp_path):
        args = ["pretrain", str(TOY_CORPUS), "--seed", "7", "--set", "train.epochs=2"] + SMALL_MODEL
        assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
        assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
        assert len((tmp_path / "a" / "metrics.csv").read_text().splitlines()) == 3
        assert CheckpointRepository(tmp_path / "a").load("checkpoint").meta.epoch == 2
        assert "seed = 7" in (tmp_path / "a" / "resolved.cfg").read_text()

    def test_probe_checkpoint(self, tmp_path):
        train_dir = tmp_path / "train"
        args = ["pretrain", str(TOY_CORPUS), "--set", "train.epochs=1", "--out", str(train_dir)] + SMALL_MODEL
        assert main(args) == EXIT_OK
        probe_args = ["probe", str(TOY_CORPUS), "--checkpoint", str(train_dir / "checkpoint.npz"), "--task", "masked_atom"]
        assert main(probe_args + ["--out", str(tmp_path / "probe"), "--set", "probe.epochs=50"]) == EXIT_OK
        assert (tmp_path / "probe" / "probe_masked_atoms.txt").read_text().startswith("task: masked_atom_type")

    def test_probe_needs_checkpoint(self, tmp_path):
        assert main(["probe", str(TOY_CORPUS), "--out", str(tmp_path)]) == EXIT_USAGE

    def test_sweep_ratios(self, tmp_path, corpus_file):
        assert main(["sweep", str(corpus_file), "--ratios", "a,b", "--out", str(tmp_path)]) == EXIT_USAGE
        args = ["sweep", str(corpus_file), "--ratios", "0.3,0.5", "--set", "train.epochs=1", "--out", str(tmp_path)]
        assert main(args + SMALL_MODEL) == EXIT_OK
        assert (tmp_path / "sweep.csv").read_text().splitlines()[0] == "ratio,first_loss,final_loss"

    def test_gradcheck(self, tmp_path):
        assert main(["gradcheck", "--instances", "3", "--out", str(tmp_path)]) == EXIT_OK
        rows = (tmp_path / "gradcheck.csv").read_text().splitlines()
        assert rows[0] == "name,instances,max_relative_error,tolerance,passed"
        assert all(row.endswith(",true") for row in rows[1:])

    def test_training_failure_exits_numerical(self, tmp_path, corpus_file, mocker, capsys):
        train = mocker.patch("src.main.train", side_effect=TrainingException("epoch 1 batch 0: loss is nan"))
        assert main(["pretrain", str(corpus_file), "--out", str(tmp_path)] + SMALL_MODEL) == EXIT_NUMERICAL
        train.assert_called_once()
        assert "loss is nan" in capsys.readouterr().err
