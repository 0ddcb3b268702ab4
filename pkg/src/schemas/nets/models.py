from typing import Dict, Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field

PresetName = Literal["linear", "gine", "gine_small", "gts_tiny", "gts_small", "gts"]
RemaskMode = Literal["none", "v1", "v2"]

# (message-passing layers, attention layers) of each preset
PRESET_LAYERS: Dict[str, Tuple[int, int]] = {
    "linear": (0, 0),
    "gine": (5, 0),
    "gine_small": (3, 0),
    "gts": (5, 4),
    "gts_small": (3, 1),
    "gts_tiny": (1, 1),
}


class StackConfig(BaseModel):
    """Layer counts and width of an encoder or decoder stack."""

    model_config = ConfigDict(frozen=True)

    preset: PresetName
    gin_layers: int = Field(..., ge=0)
    attn_layers: int = Field(..., ge=0)
    model_dim: int = Field(..., ge=1)
    edge_features: bool = False

    @property
    def is_linear(self) -> bool:
        return self.preset == "linear"


class AutoencoderConfig(BaseModel):
    """Encoder and decoder stacks plus the embedding and output sizes they connect."""

    model_config = ConfigDict(frozen=True)

    encoder: StackConfig
    decoder: StackConfig
    num_embeddings: int = Field(..., ge=2, description="Embedding rows, the m0 row included")
    mask_id: int = Field(..., ge=0, description="Embedding row of the input mask token m0")
    output_dim: int = Field(..., ge=1, description="Token width (continuous) or class count (discrete)")
    gin_eps: float = 0.0
    bn_epsilon: float = Field(default=1e-5, gt=0.0)
