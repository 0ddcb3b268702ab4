import io
import json
import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np
from pydantic import ValidationError
from src.exceptions import CheckpointError
from src.schemas.pretrain.models import CHECKPOINT_VERSION, Checkpoint, CheckpointMeta

from .base import BaseFileRepository, atomic_write_bytes

logger = logging.getLogger(__name__)

META_KEY = "__meta__"


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """Serialize to an ``.npz`` archive of little-endian float64 arrays plus a JSON metadata record."""
    arrays: Dict[str, np.ndarray] = {}
    for name, value in sorted(checkpoint.params.items()):
        if name == META_KEY:
            raise CheckpointError(f"parameter name {META_KEY!r} is reserved")
        arrays[name] = np.ascontiguousarray(value, dtype="<f8")
    meta = json.dumps(checkpoint.meta.model_dump(mode="json"), sort_keys=True).encode("utf-8")
    arrays[META_KEY] = np.frombuffer(meta, dtype=np.uint8)

    buffer = io.BytesIO()
    np.savez(buffer, **arrays)
    return buffer.getvalue()


def decode_checkpoint(data: bytes) -> Checkpoint:
    try:
        with np.load(io.BytesIO(data), allow_pickle=False) as archive:
            if META_KEY not in archive.files:
                raise CheckpointError("checkpoint has no metadata record")
            meta = CheckpointMeta(**json.loads(archive[META_KEY].tobytes().decode("utf-8")))
            params = {name: archive[name].astype(np.float64) for name in archive.files if name != META_KEY}
    except CheckpointError:
        raise
    except (ValueError, OSError, ValidationError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable checkpoint: {e}") from e

    if meta.version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint format version {meta.version} is not supported (expected {CHECKPOINT_VERSION})")
    return Checkpoint(params=params, meta=meta)


class CheckpointRepository(BaseFileRepository):
    """Checkpoints stored as ``<name>.npz`` under a run directory."""

    suffix = ".npz"

    def path_for(self, name: str) -> Path:
        return self.root / (name if name.endswith(self.suffix) else f"{name}{self.suffix}")

    def save(self, item: Checkpoint, name: str) -> Path:
        path = atomic_write_bytes(self.path_for(name), encode_checkpoint(item))
        logger.info(f"Saved checkpoint for epoch {item.meta.epoch} to {path}")
        return path

    def load(self, name: str) -> Checkpoint:
        path = self.path_for(name)
        if not path.exists():
            raise CheckpointError(f"Checkpoint not found: {path}")
        return decode_checkpoint(path.read_bytes())


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Load a checkpoint file by path."""
    path = Path(path)
    return CheckpointRepository(path.parent).load(path.name)


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    path = Path(path)
    return CheckpointRepository(path.parent).save(checkpoint, path.name)
