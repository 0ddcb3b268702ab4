import logging
from typing import List, Optional, Sequence

from src.config import RunConfig
from src.schemas.analyze.models import ComparisonEntry, SweepPoint, SweepReport
from src.schemas.fragment.models import Pattern
from src.schemas.molgraph.models import MolGraph
from src.schemas.tokenize.models import AtomVocabulary
from src.services.pretrain.factory import make_target_tokenizer
from src.services.pretrain.trainer import train
from src.services.tokenize.tokenizers import build_atom_vocab

from .probe import probe_fg

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_RATIOS = (0.25, 0.3, 0.35, 0.4, 0.45)
DEFAULT_COMPARED_TOKENIZERS = ("node", "sgt")


def with_section(settings: RunConfig, section: str, **values) -> RunConfig:
    """Copy of a resolved config with some keys of one section replaced."""
    return settings.model_copy(update={section: getattr(settings, section).model_copy(update=values)})


def mask_ratio_sweep(
    corpus: Sequence[MolGraph],
    settings: RunConfig,
    ratios: Sequence[float] = DEFAULT_SWEEP_RATIOS,
    atom_vocab: Optional[AtomVocabulary] = None,
) -> SweepReport:
    """
    Seeded pretraining runs that differ only in the mask ratio.

    Args:
        corpus: Training molecules
        settings: Base configuration; every run uses its seed, stacks and epoch count
        ratios: Mask ratios to try
        atom_vocab: Atom vocabulary (built from the corpus when omitted)

    Returns:
        SweepReport with the first and final epoch-mean loss per ratio
    """
    atom_vocab = atom_vocab or build_atom_vocab(corpus)
    points: List[SweepPoint] = []
    for ratio in ratios:
        run = with_section(settings, "train", mask_ratio=float(ratio))
        result = train(corpus, run, atom_vocab, make_target_tokenizer(corpus, atom_vocab, run))
        first = result.metrics[0].mean_loss if result.metrics else None
        final = result.metrics[-1].mean_loss if result.metrics else None
        logger.info(f"Mask ratio {ratio}: final loss {final}")
        points.append(SweepPoint(ratio=float(ratio), first_loss=first, final_loss=final))
    return SweepReport(points=tuple(points), epochs=settings.train.epochs, seed=settings.seed)


def compare_tokenizers(
    corpus: Sequence[MolGraph],
    settings: RunConfig,
    patterns: Sequence[Pattern],
    kinds: Sequence[str] = DEFAULT_COMPARED_TOKENIZERS,
) -> List[ComparisonEntry]:
    """
    Pretrain once per tokenizer kind and FG-probe each final encoder.

    Every entry carries the run's per-epoch metrics, including the token-prediction accuracy stream.
    """
    atom_vocab = build_atom_vocab(corpus)
    entries = []
    for kind in kinds:
        run = with_section(settings, "tokenizer", kind=kind)
        result = train(corpus, run, atom_vocab, make_target_tokenizer(corpus, atom_vocab, run))
        report = probe_fg(result.checkpoint, corpus, patterns, run, source=kind)
        entries.append(ComparisonEntry(tokenizer=kind, metrics=result.metrics, fg_probe=report))
    return entries
