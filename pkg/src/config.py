import configparser
import hashlib
import os
from contextvars import ContextVar
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic.fields import FieldInfo
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict
from src.exceptions import ConfigurationError

PROJECT_ROOT = Path(__file__).parent.parent
DATA_DIR = PROJECT_ROOT / "data"
SEED_ENV_VAR = "MGMLAB_SEED"

# Top-level keys live in this section of the config file.
RUN_SECTION = "run"

_CONFIG_FILE: ContextVar[Optional[Path]] = ContextVar("_CONFIG_FILE", default=None)
_CONFIG_TEXT: ContextVar[Optional[str]] = ContextVar("_CONFIG_TEXT", default=None)


class SectionSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class MolGraphSettings(SectionSettings):
    """Molecular graph limits."""

    max_nodes: int = Field(default=1024, ge=1, le=1024)


class FragmentSettings(SectionSettings):
    """Fragmentation settings."""

    pattern_file: Optional[str] = None  # bundled data/fg_patterns.txt when unset
    cleavage_file: Optional[str] = None  # bundled data/cleavage_table.txt when unset
    recipe: str = "mgssl"
    max_pattern_atoms: int = Field(default=16, ge=1)


class TokenizerSettings(SectionSettings):
    """Reconstruction-target tokenizer settings."""

    kind: Literal["node", "motif", "sgt", "frozen_gnn"] = "sgt"
    vocab_threshold: int = Field(default=5, ge=1)
    max_canonical_nodes: int = Field(default=12, ge=1, le=12)
    frozen_checkpoint: Optional[str] = None


class SgtSettings(SectionSettings):
    """Simple GNN-based tokenizer settings."""

    operator: Literal["gin", "gcn", "sage"] = "gin"
    eps: float = 0.5
    layers: int = Field(default=1, ge=1)
    bn_epsilon: float = Field(default=1e-5, gt=0)
    batch_norm: bool = True


class StackSettings(SectionSettings):
    """Encoder or decoder stack settings."""

    preset: Literal["linear", "gine", "gine_small", "gts_tiny", "gts_small", "gts"] = "gts_small"
    model_dim: int = Field(default=16, ge=1)
    edge_features: bool = True


class TrainSettings(SectionSettings):
    """Masked graph modeling loop settings."""

    mask_ratio: float = Field(default=0.35, gt=0.0, lt=1.0)
    epochs: int = Field(default=200, ge=0)
    batch_size: int = Field(default=32, ge=1)
    lr: float = Field(default=1e-3, ge=0.0)
    remask: Literal["none", "v1", "v2"] = "v2"
    loss: Literal["mse", "sce"] = "mse"
    sce_gamma: float = Field(default=1.0, ge=1.0)
    pool: Literal["mean", "sum", "max"] = "mean"
    checkpoint_every: int = Field(default=0, ge=0)  # 0 writes only the final checkpoint
    record_wall_time: bool = False


class ProbeSettings(SectionSettings):
    """Linear probing settings."""

    ratio: float = Field(default=0.35, gt=0.0, lt=1.0)
    epochs: int = Field(default=1000, ge=1)
    lr: float = Field(default=0.5, gt=0.0)
    train_fraction: float = Field(default=0.9, gt=0.0, lt=1.0)


class IniSectionsSource(PydanticBaseSettingsSource):
    """Reads a sectioned ``key = value`` file into nested settings values."""

    def __init__(self, settings_cls: Type[BaseSettings], path: Optional[Path], text: Optional[str] = None):
        super().__init__(settings_cls)
        self.path = path
        self.text = text

    def get_field_value(self, field: FieldInfo, field_name: str) -> Tuple[Any, str, bool]:
        return None, field_name, False

    def __call__(self) -> Dict[str, Any]:
        if self.text is not None:
            text, source = self.text, "<config text>"
        elif self.path is None:
            return {}
        elif not self.path.exists():
            raise ConfigurationError(f"Config file not found: {self.path}")
        else:
            text, source = self.path.read_text(encoding="utf-8"), str(self.path)

        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=source)
        except configparser.Error as e:
            raise ConfigurationError(f"Malformed config file {source}: {e}") from e

        values: Dict[str, Any] = {}
        for section in parser.sections():
            entries = {key: value for key, value in parser.items(section) if value != ""}
            if section == RUN_SECTION:
                values.update(entries)
            else:
                values[section] = entries
        return values


class SeedEnvSource(PydanticBaseSettingsSource):
    """The only environment override: ``MGMLAB_SEED``."""

    def get_field_value(self, field: FieldInfo, field_name: str) -> Tuple[Any, str, bool]:
        return None, field_name, False

    def __call__(self) -> Dict[str, Any]:
        value = os.environ.get(SEED_ENV_VAR)
        return {"seed": value} if value else {}


class RunConfig(BaseSettings):
    """Resolved configuration of one run: file values, the seed override and command-line overrides."""

    model_config = SettingsConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    out_dir: str = "runs/default"

    molgraph: MolGraphSettings = Field(default_factory=MolGraphSettings)
    fragment: FragmentSettings = Field(default_factory=FragmentSettings)
    tokenizer: TokenizerSettings = Field(default_factory=TokenizerSettings)
    sgt: SgtSettings = Field(default_factory=SgtSettings)
    encoder: StackSettings = Field(default_factory=lambda: StackSettings(preset="gts_small"))
    decoder: StackSettings = Field(default_factory=lambda: StackSettings(preset="gts_tiny", edge_features=False))
    train: TrainSettings = Field(default_factory=TrainSettings)
    probe: ProbeSettings = Field(default_factory=ProbeSettings)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (
            init_settings,
            SeedEnvSource(settings_cls),
            IniSectionsSource(settings_cls, _CONFIG_FILE.get(), _CONFIG_TEXT.get()),
        )


def load_config(path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Resolve a run configuration.

    Args:
        path: Sectioned ``key = value`` config file (optional)
        overrides: Command-line overrides; nested sections as dicts

    Returns:
        RunConfig: the frozen, validated configuration
    """
    token = _CONFIG_FILE.set(Path(path) if path is not None else None)
    try:
        return RunConfig(**dict(overrides or {}))
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e
    finally:
        _CONFIG_FILE.reset(token)


def load_config_text(text: str, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Resolve a configuration from config text, such as the copy stored in a checkpoint."""
    token = _CONFIG_TEXT.set(text)
    try:
        return RunConfig(**dict(overrides or {}))
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e
    finally:
        _CONFIG_TEXT.reset(token)


def parse_override(assignment: str) -> Dict[str, Any]:
    """Turn ``section.key=value`` (or ``key=value``) into a nested override dict."""
    if "=" not in assignment:
        raise ConfigurationError(f"Override must look like section.key=value, got {assignment!r}")
    dotted, value = assignment.split("=", 1)
    parts = [part.strip() for part in dotted.strip().split(".") if part.strip()]
    if not parts or len(parts) > 2:
        raise ConfigurationError(f"Override key must be 'key' or 'section.key', got {dotted!r}")
    if len(parts) == 1:
        return {parts[0]: value.strip()}
    return {parts[0]: {parts[1]: value.strip()}}


def merge_overrides(*overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged: Dict[str, Any] = {}
    for override in overrides:
        for key, value in override.items():
            if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
                merged[key].update(value)
            elif isinstance(value, Mapping):
                merged[key] = dict(value)
            else:
                merged[key] = value
    return merged


def _render_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def dump_config(config: RunConfig) -> str:
    """Render a resolved config in the sectioned file format; reloading it yields an equal config."""
    lines = [f"[{RUN_SECTION}]"]
    sections = []
    for name in RunConfig.model_fields:
        value = getattr(config, name)
        if isinstance(value, BaseModel):
            sections.append((name, value))
        else:
            lines.append(f"{name} = {_render_value(value)}")

    for name, section in sections:
        lines.append("")
        lines.append(f"[{name}]")
        for key in type(section).model_fields:
            lines.append(f"{key} = {_render_value(getattr(section, key))}")
    return "\n".join(lines) + "\n"


def config_fingerprint(config: RunConfig) -> str:
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()[:16]


@lru_cache(maxsize=1)
def get_settings() -> RunConfig:
    """Default configuration (no file, no overrides)."""
    return load_config()
