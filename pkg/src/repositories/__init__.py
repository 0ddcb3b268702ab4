from .base import BaseFileRepository, atomic_write_bytes, atomic_write_text
from .checkpoint import CheckpointRepository, load_checkpoint, save_checkpoint
from .metrics import MetricsRepository, parse_metrics, render_metrics
from .reports import (
    CensusRepository,
    ProbeReportRepository,
    render_balance,
    render_bn_ablation,
    render_comparison,
    render_distribution,
    render_probe_report,
    render_sweep,
    render_vocabulary_size,
)
from .vocabulary import VocabularyRepository

__all__ = [
    "BaseFileRepository",
    "CensusRepository",
    "CheckpointRepository",
    "MetricsRepository",
    "ProbeReportRepository",
    "VocabularyRepository",
    "atomic_write_bytes",
    "atomic_write_text",
    "load_checkpoint",
    "parse_metrics",
    "render_balance",
    "render_bn_ablation",
    "render_comparison",
    "render_distribution",
    "render_metrics",
    "render_probe_report",
    "render_sweep",
    "render_vocabulary_size",
    "save_checkpoint",
]
