import pytest
from src.config import (
    config_fingerprint,
    dump_config,
    load_config,
    load_config_text,
    merge_overrides,
    parse_override,
)
from src.exceptions import ConfigurationError

from tests.conftest import TOY_CONFIG


class TestLoadConfig:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("MGMLAB_SEED", raising=False)
        config = load_config()
        assert config.seed == 0
        assert config.tokenizer.kind == "sgt"
        assert config.encoder.preset == "gts_small"
        assert config.decoder.preset == "gts_tiny"
        assert config.train.mask_ratio == pytest.approx(0.35)

    def test_toy_file(self, monkeypatch):
        monkeypatch.delenv("MGMLAB_SEED", raising=False)
        config = load_config(TOY_CONFIG)
        assert config.out_dir == "runs/toy"
        assert config.train.remask == "v2"
        assert config.train.lr == pytest.approx(0.003)
        assert config.sgt.batch_norm is True

    def test_overrides_beat_file(self, monkeypatch):
        monkeypatch.delenv("MGMLAB_SEED", raising=False)
        overrides = merge_overrides(parse_override("train.epochs=3"), parse_override("seed=11"))
        config = load_config(TOY_CONFIG, overrides)
        assert config.train.epochs == 3
        assert config.seed == 11
        # untouched keys of an overridden section keep their file values
        assert config.train.lr == pytest.approx(0.003)

    def test_seed_env_var(self, monkeypatch):
        monkeypatch.setenv("MGMLAB_SEED", "42")
        assert load_config(TOY_CONFIG).seed == 42
        assert load_config(TOY_CONFIG, {"seed": 5}).seed == 5

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "absent.cfg")

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[train]\nepochz = 3\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[train]\nmask_ratio = 1.5\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_frozen(self):
        config = load_config()
        with pytest.raises(Exception):
            config.seed = 3


class TestDumpConfig:
    def test_round_trip(self, monkeypatch):
        monkeypatch.delenv("MGMLAB_SEED", raising=False)
        config = load_config(TOY_CONFIG, {"train": {"epochs": 7}})
        text = dump_config(config)
        again = load_config_text(text)
        assert again == config
        assert dump_config(again) == text
        assert config_fingerprint(again) == config_fingerprint(config)

    def test_fingerprint_changes(self, monkeypatch):
        monkeypatch.delenv("MGMLAB_SEED", raising=False)
        assert config_fingerprint(load_config()) != config_fingerprint(load_config(overrides={"seed": 1}))


class TestOverrides:
    def test_parse(self):
        assert parse_override("train.lr=0.01") == {"train": {"lr": "0.01"}}
        assert parse_override("seed = 3") == {"seed": "3"}

    @pytest.mark.parametrize("text", ["train.lr", "a.b.c=1", "=3"])
    def test_malformed(self, text):
        with pytest.raises(ConfigurationError):
            parse_override(text)

    def test_merge_nested(self):
        merged = merge_overrides({"train": {"lr": "1"}}, {"train": {"epochs": "2"}}, {"seed": "4"})
        assert merged == {"train": {"lr": "1", "epochs": "2"}, "seed": "4"}
