import logging
from pathlib import Path
from typing import Dict

from pydantic import ValidationError
from src.exceptions import VocabularyError
from src.schemas.tokenize.models import UNK_KEY, MotifVocabulary

from .base import BaseFileRepository, atomic_write_text

logger = logging.getLogger(__name__)

HEADER_FIELDS = ("recipe_fingerprint", "threshold", "recipe")


def render_vocabulary(vocab: MotifVocabulary) -> str:
    """``index<TAB>count<TAB>key`` lines under a header; UNK is the last line."""
    lines = [
        f"# recipe_fingerprint\t{vocab.recipe_fingerprint}",
        f"# threshold\t{vocab.threshold}",
        f"# recipe\t{vocab.recipe}",
    ]
    for index, (key, count) in enumerate(zip(vocab.keys, vocab.counts)):
        lines.append(f"{index}\t{count}\t{key}")
    lines.append(f"{vocab.unk_id}\t{vocab.unk_count}\t{UNK_KEY}")
    return "\n".join(lines) + "\n"


def parse_vocabulary(text: str) -> MotifVocabulary:
    header: Dict[str, str] = {}
    rows = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            name, _, value = line[1:].strip().partition("\t")
            header[name] = value
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise VocabularyError(f"line {number}: expected index<TAB>count<TAB>key")
        try:
            rows.append((int(fields[0]), int(fields[1]), fields[2]))
        except ValueError as e:
            raise VocabularyError(f"line {number}: index and count must be integers") from e

    missing = [name for name in HEADER_FIELDS if name not in header]
    if missing:
        raise VocabularyError(f"vocabulary header lacks {', '.join(missing)}")
    if not rows or rows[-1][2] != UNK_KEY:
        raise VocabularyError(f"vocabulary must end with the {UNK_KEY} entry")
    if [row[0] for row in rows] != list(range(len(rows))):
        raise VocabularyError("vocabulary indices must be dense and ascending from 0")

    entries = rows[:-1]
    try:
        return MotifVocabulary(
            keys=tuple(key for _, _, key in entries),
            counts=tuple(count for _, count, _ in entries),
            threshold=int(header["threshold"]),
            recipe_fingerprint=header["recipe_fingerprint"],
            recipe=header["recipe"],
            unk_count=rows[-1][1],
        )
    except (ValueError, ValidationError) as e:
        raise VocabularyError(f"invalid vocabulary: {e}") from e


class VocabularyRepository(BaseFileRepository):
    """Motif vocabularies stored as text files under a directory."""

    def save(self, item: MotifVocabulary, name: str) -> Path:
        path = atomic_write_text(self.path_for(name), render_vocabulary(item))
        logger.info(f"Wrote vocabulary of {item.size} entries to {path}")
        return path

    def load(self, name: str) -> MotifVocabulary:
        path = self.path_for(name)
        if not path.exists():
            raise VocabularyError(f"Vocabulary file not found: {path}")
        return parse_vocabulary(path.read_text(encoding="utf-8"))
