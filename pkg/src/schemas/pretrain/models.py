from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

CHECKPOINT_VERSION = 1


class MaskPlan(BaseModel):
    """Masked node set of one batch, the ratio and the seed that produced it."""

    model_config = ConfigDict(frozen=True)

    masked: Tuple[int, ...] = Field(..., description="Sorted masked node indices (batch coordinates)")
    ratio: float = Field(..., gt=0.0, lt=1.0)
    seed: int = Field(..., description="Seed of the masking stream")

    @model_validator(mode="after")
    def _check_sorted(self) -> "MaskPlan":
        if list(self.masked) != sorted(set(self.masked)):
            raise ValueError("masked indices must be distinct and sorted")
        return self

    @property
    def size(self) -> int:
        return len(self.masked)


class CheckpointMeta(BaseModel):
    """Everything a checkpoint carries besides the parameter arrays."""

    model_config = ConfigDict(frozen=True)

    version: int = CHECKPOINT_VERSION
    config_fingerprint: str
    epoch: int = Field(..., ge=0)
    rng_state: Dict[str, Any] = Field(default_factory=dict, description="Bit-generator state per named stream")
    atom_vocab: Tuple[int, ...] = Field(..., description="Atomic numbers of the atom vocabulary")
    config: str = Field(default="", description="Resolved config text of the run")


class Checkpoint(BaseModel):
    """Named float64 parameter arrays plus metadata."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: Dict[str, np.ndarray]
    meta: CheckpointMeta


class EpochMetrics(BaseModel):
    """One line of the metrics file."""

    model_config = ConfigDict(frozen=True)

    epoch: int = Field(..., ge=1)
    mean_loss: float
    token_accuracy: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    wall_ms: Optional[float] = None


class TrainResult(BaseModel):
    """Final checkpoint and the per-epoch metric stream of a training run."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    checkpoint: Checkpoint
    metrics: Tuple[EpochMetrics, ...] = ()


class AdamState(BaseModel):
    """First and second moment estimates per parameter name and the step counter."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    step: int = Field(default=0, ge=0)
    m: Dict[str, np.ndarray] = Field(default_factory=dict)
    v: Dict[str, np.ndarray] = Field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
