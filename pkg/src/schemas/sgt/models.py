import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class GraphOperatorKind(BaseModel):
    """Linear graph operator family; ``eps`` only affects gin."""

    model_config = ConfigDict(frozen=True)

    name: Literal["gin", "gcn", "sage"] = "gin"
    eps: float = Field(default=0.5, description="Self-loop weight offset of the gin operator")

    @field_validator("eps")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("eps must be finite")
        return value


class SgtConfig(BaseModel):
    """A k-layer simple GNN tokenizer."""

    model_config = ConfigDict(frozen=True)

    kind: GraphOperatorKind = Field(default_factory=GraphOperatorKind)
    layers: int = Field(default=1, ge=1)
    embedding_dim: int = Field(default=16, ge=1)
    bn_epsilon: float = Field(default=1e-5, gt=0.0)
    batch_norm: bool = True


class SgtTokens(BaseModel):
    """n x (k * d) token matrix; columns [l * d, (l + 1) * d) hold layer l + 1."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    layers: int = Field(..., ge=1)
    embedding_dim: int = Field(..., ge=1)

    @property
    def dim(self) -> int:
        return self.layers * self.embedding_dim

    @property
    def num_nodes(self) -> int:
        return self.values.shape[0]

    def layer(self, index: int) -> np.ndarray:
        """Slice of layer ``index`` (1-based, as H^1..H^k)."""
        if not 1 <= index <= self.layers:
            raise IndexError(f"layer {index} outside 1..{self.layers}")
        start = (index - 1) * self.embedding_dim
        return self.values[:, start : start + self.embedding_dim]
