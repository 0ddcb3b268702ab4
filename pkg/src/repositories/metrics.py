import logging
from pathlib import Path
from typing import List, Optional, Sequence

from src.exceptions import MgmLabException
from src.schemas.pretrain.models import EpochMetrics

from .base import BaseFileRepository, atomic_write_text

logger = logging.getLogger(__name__)

METRICS_HEADER = "epoch,mean_loss,token_accuracy,wall_ms"


def _cell(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def render_metrics(rows: Sequence[EpochMetrics]) -> str:
    """Comma-separated epoch records under a header; missing values are empty cells."""
    lines = [METRICS_HEADER]
    lines.extend(f"{row.epoch},{_cell(row.mean_loss)},{_cell(row.token_accuracy)},{_cell(row.wall_ms)}" for row in rows)
    return "\n".join(lines) + "\n"


def parse_metrics(text: str) -> List[EpochMetrics]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != METRICS_HEADER:
        raise MgmLabException(f"metrics file must start with {METRICS_HEADER!r}")
    rows = []
    for line in lines[1:]:
        epoch, loss, accuracy, wall = line.split(",")
        rows.append(
            EpochMetrics(
                epoch=int(epoch),
                mean_loss=float(loss),
                token_accuracy=float(accuracy) if accuracy else None,
                wall_ms=float(wall) if wall else None,
            )
        )
    return rows


class MetricsRepository(BaseFileRepository):
    """Per-epoch metrics of a run, rewritten atomically as records are appended."""

    def __init__(self, root, name: str = "metrics.csv"):
        super().__init__(root)
        self.name = name
        self.rows: List[EpochMetrics] = []

    def append(self, row: EpochMetrics) -> Path:
        self.rows.append(row)
        return self.save(self.rows, self.name)

    def save(self, item: Sequence[EpochMetrics], name: str) -> Path:
        path = atomic_write_text(self.path_for(name), render_metrics(item))
        logger.debug(f"Wrote {len(item)} metric records to {path}")
        return path

    def load(self, name: str) -> List[EpochMetrics]:
        return parse_metrics(self.path_for(name).read_text(encoding="utf-8"))
