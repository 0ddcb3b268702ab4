import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from src.exceptions import MgmLabException
from src.schemas.analyze.models import (
    BalanceReport,
    BnAblationReport,
    CensusReport,
    ClassScore,
    ComparisonEntry,
    ProbeReport,
    SweepReport,
    VocabularySizeReport,
)

from .base import BaseFileRepository, atomic_write_text

logger = logging.getLogger(__name__)

CENSUS_HEADER = "key,count,fraction"
SUMMARY_PREFIX = "# "


def render_distribution(entries: Sequence[Tuple[str, int]], label: str) -> str:
    """``key,count,fraction`` rows followed by a ``# types=... total=...`` summary line."""
    total = sum(count for _, count in entries)
    lines = [CENSUS_HEADER]
    lines.extend(f"{key},{count},{count / total!r}" for key, count in entries)
    lines.append(f"{SUMMARY_PREFIX}{label} types={len(entries)} total={total}")
    return "\n".join(lines) + "\n"


def parse_distribution(text: str) -> Tuple[Tuple[Tuple[str, int], ...], int]:
    """(entries, total) of a rendered distribution."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != CENSUS_HEADER or not lines[-1].startswith(SUMMARY_PREFIX):
        raise MgmLabException(f"census file must start with {CENSUS_HEADER!r} and end with a summary line")
    entries = []
    for line in lines[1:-1]:
        key, count, _ = line.rsplit(",", 2)
        entries.append((key, int(count)))
    summary = dict(field.split("=", 1) for field in lines[-1][len(SUMMARY_PREFIX) :].split() if "=" in field)
    return tuple(entries), int(summary.get("total", 0))


class CensusRepository(BaseFileRepository):
    """A census as two files: ``<name>_subtrees.csv`` and ``<name>_atoms.csv``."""

    def paths(self, name: str) -> Tuple[Path, Path]:
        return self.path_for(f"{name}_subtrees.csv"), self.path_for(f"{name}_atoms.csv")

    def save(self, item: CensusReport, name: str) -> Path:
        subtree_path, atom_path = self.paths(name)
        atomic_write_text(atom_path, render_distribution(item.atoms, "atom"))
        atomic_write_text(subtree_path, render_distribution(item.subtrees, "subtree"))
        logger.info(f"Wrote census of {item.subtree_types} subtree types to {subtree_path}")
        return subtree_path

    def load(self, name: str) -> CensusReport:
        subtree_path, atom_path = self.paths(name)
        subtrees, num_nodes = parse_distribution(subtree_path.read_text(encoding="utf-8"))
        atoms, _ = parse_distribution(atom_path.read_text(encoding="utf-8"))
        # The molecule count is not part of the file format.
        return CensusReport(subtrees=subtrees, atoms=atoms, num_molecules=0, num_nodes=num_nodes)


def _optional(value) -> str:
    return "" if value is None else repr(value)


def render_probe_report(report: ProbeReport) -> str:
    """
    ``key: value`` header lines, ``note:`` lines, then one ``class:`` line per class.

    Example::

        task: masked_atom_type
        metric: accuracy 0.8125
        ...
        class: Z6 support=24 score=0.9583333333333334
    """
    lines = [
        f"task: {report.task}",
        f"metric: {report.metric_name} {report.metric!r}",
        f"baseline: {_optional(report.baseline)}",
        f"train_size: {report.train_size}",
        f"test_size: {report.test_size}",
        f"seed: {report.seed}",
        f"source: {report.source}",
    ]
    lines.extend(f"note: {note}" for note in report.notes)
    lines.extend(f"class: {entry.label} support={entry.support} score={_optional(entry.score)}" for entry in report.per_class)
    return "\n".join(lines) + "\n"


def parse_probe_report(text: str) -> ProbeReport:
    fields: Dict[str, str] = {}
    notes: List[str] = []
    per_class: List[ClassScore] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(": ")
        if key == "note":
            notes.append(value)
        elif key == "class":
            label, support, score = value.rsplit(" ", 2)
            score_text = score.split("=", 1)[1]
            per_class.append(
                ClassScore(label=label, support=int(support.split("=", 1)[1]), score=float(score_text) if score_text else None)
            )
        else:
            fields[key] = value
    try:
        metric_name, metric = fields["metric"].split(" ", 1)
        return ProbeReport(
            task=fields["task"],
            metric_name=metric_name,
            metric=float(metric),
            baseline=float(fields["baseline"]) if fields.get("baseline") else None,
            train_size=int(fields["train_size"]),
            test_size=int(fields["test_size"]),
            seed=int(fields["seed"]),
            source=fields.get("source", ""),
            notes=tuple(notes),
            per_class=tuple(per_class),
        )
    except (KeyError, ValueError) as e:
        raise MgmLabException(f"malformed probe report: {e}") from e


class ProbeReportRepository(BaseFileRepository):
    def save(self, item: ProbeReport, name: str) -> Path:
        path = atomic_write_text(self.path_for(name), render_probe_report(item))
        logger.info(f"Wrote {item.task} probe report to {path}")
        return path

    def load(self, name: str) -> ProbeReport:
        return parse_probe_report(self.path_for(name).read_text(encoding="utf-8"))


def render_balance(reports: Sequence[BalanceReport]) -> str:
    lines = ["distribution,types,total,top3_share,normalized_entropy"]
    lines.extend(f"{r.name},{r.types},{r.total},{r.top3_share!r},{r.normalized_entropy!r}" for r in reports)
    return "\n".join(lines) + "\n"


def render_vocabulary_size(report: VocabularySizeReport) -> str:
    return f"atom_types: {report.atom_types}\nsubtree_types: {report.subtree_types}\nsgt_tokens: {report.sgt_tokens}\n"


def render_bn_ablation(report: BnAblationReport) -> str:
    lines = ["normalization,min_std,mean_std,max_std"]
    for label, spread in (("batch_norm", report.with_bn), ("none", report.without_bn)):
        lines.append(f"{label},{spread.min_std!r},{spread.mean_std!r},{spread.max_std!r}")
    return "\n".join(lines) + "\n"


def render_sweep(report: SweepReport) -> str:
    lines = ["ratio,first_loss,final_loss"]
    lines.extend(f"{point.ratio!r},{_optional(point.first_loss)},{_optional(point.final_loss)}" for point in report.points)
    return "\n".join(lines) + "\n"


def render_comparison(entries: Sequence[ComparisonEntry]) -> str:
    """Per tokenizer: the accuracy stream (one value per epoch) and the FG probe score."""
    lines = ["tokenizer,fg_roc_auc,final_loss,token_accuracy_stream"]
    for entry in entries:
        stream = " ".join(_optional(row.token_accuracy) or "-" for row in entry.metrics)
        final = _optional(entry.metrics[-1].mean_loss) if entry.metrics else ""
        lines.append(f"{entry.tokenizer},{entry.fg_probe.metric!r},{final},{stream}")
    return "\n".join(lines) + "\n"
