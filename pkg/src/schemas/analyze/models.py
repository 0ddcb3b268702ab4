from typing import Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator
from src.schemas.pretrain.models import EpochMetrics

# Every fg_presence report carries this note.
FG_LIBRARY_NOTE = "FG labels come from the bundled pattern library, not the 85-group RDKit catalogue"


def _sorted_counts(counts: Tuple[Tuple[str, int], ...]) -> bool:
    return list(counts) == sorted(counts, key=lambda item: (-item[1], item[0]))


class CensusReport(BaseModel):
    """One-hop rooted-subtree and atom-type distributions of a corpus, each sorted by (count desc, key asc)."""

    model_config = ConfigDict(frozen=True)

    subtrees: Tuple[Tuple[str, int], ...] = Field(..., description="(CENTER:NEIGHBORS key, count)")
    atoms: Tuple[Tuple[str, int], ...] = Field(..., description="(element symbol, count)")
    num_molecules: int = Field(..., ge=0)
    num_nodes: int = Field(..., ge=0)

    @model_validator(mode="after")
    def _check_order(self) -> "CensusReport":
        if not (_sorted_counts(self.subtrees) and _sorted_counts(self.atoms)):
            raise ValueError("census entries must be sorted by count descending, then key")
        return self

    @property
    def subtree_types(self) -> int:
        return len(self.subtrees)

    @property
    def atom_types(self) -> int:
        return len(self.atoms)

    def subtree_counts(self) -> Dict[str, int]:
        return dict(self.subtrees)

    def atom_counts(self) -> Dict[str, int]:
        return dict(self.atoms)


class BalanceReport(BaseModel):
    """How evenly a distribution spreads over its types."""

    model_config = ConfigDict(frozen=True)

    name: str
    types: int = Field(..., ge=0)
    total: int = Field(..., ge=0)
    top3_share: float = Field(..., ge=0.0, le=1.0, description="Fraction of the total held by the three largest types")
    normalized_entropy: float = Field(..., ge=0.0, le=1.0, description="Shannon entropy divided by log(types)")


class ClassScore(BaseModel):
    """Per-class (or per-pattern) slice of a probe."""

    model_config = ConfigDict(frozen=True)

    label: str
    support: int = Field(..., ge=0, description="Positive test examples")
    score: Optional[float] = Field(default=None, ge=0.0, le=1.0)


class ProbeReport(BaseModel):
    """Outcome of a linear probe on frozen representations."""

    model_config = ConfigDict(frozen=True)

    task: Literal["masked_atom_type", "fg_presence"]
    metric_name: Literal["accuracy", "roc_auc"]
    metric: float = Field(..., ge=0.0, le=1.0)
    per_class: Tuple[ClassScore, ...] = ()
    train_size: int = Field(..., ge=1)
    test_size: int = Field(..., ge=1)
    seed: int = Field(..., ge=0)
    baseline: Optional[float] = Field(default=None, ge=0.0, le=1.0, description="Majority-class test accuracy")
    source: str = Field(default="", description="Checkpoint or tokenizer the representations came from")
    notes: Tuple[str, ...] = ()


class ColumnSpread(BaseModel):
    """Min, mean and max of the per-column standard deviation of a token matrix."""

    model_config = ConfigDict(frozen=True)

    min_std: float
    mean_std: float
    max_std: float


class BnAblationReport(BaseModel):
    """Column spread of the same batch's tokens with and without batch normalization."""

    model_config = ConfigDict(frozen=True)

    num_nodes: int = Field(..., ge=1)
    with_bn: ColumnSpread
    without_bn: ColumnSpread


class SweepPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    ratio: float = Field(..., gt=0.0, lt=1.0)
    first_loss: Optional[float] = None
    final_loss: Optional[float] = None


class SweepReport(BaseModel):
    """Short seeded pretraining runs over several mask ratios."""

    model_config = ConfigDict(frozen=True)

    points: Tuple[SweepPoint, ...]
    epochs: int = Field(..., ge=0)
    seed: int = Field(..., ge=0)


class VocabularySizeReport(BaseModel):
    """Distinct first-layer SGT tokens of a corpus next to its atom and subtree type counts."""

    model_config = ConfigDict(frozen=True)

    atom_types: int = Field(..., ge=0)
    subtree_types: int = Field(..., ge=0)
    sgt_tokens: int = Field(..., ge=0)


class ComparisonEntry(BaseModel):
    """One tokenizer's training stream and the FG probe of its final encoder."""

    model_config = ConfigDict(frozen=True)

    tokenizer: str
    metrics: Tuple[EpochMetrics, ...]
    fg_probe: ProbeReport
