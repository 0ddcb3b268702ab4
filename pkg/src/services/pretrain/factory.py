import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

from src.config import RunConfig, get_settings, load_config_text
from src.exceptions import CheckpointError, ConfigurationError
from src.repositories.vocabulary import VocabularyRepository
from src.schemas.molgraph.models import MolGraph
from src.schemas.nets.models import AutoencoderConfig
from src.schemas.pretrain.models import Checkpoint
from src.schemas.tokenize.models import AtomVocabulary
from src.services.fragment.factory import make_fragmenter
from src.services.nets.factory import make_autoencoder_config
from src.services.nets.init import init_autoencoder
from src.services.nets.parameters import ParameterSet
from src.services.seeding import INIT_STREAM, stream_generator
from src.services.sgt.factory import make_sgt_config
from src.services.tokenize.frozen_gnn import load_frozen_tokenizer
from src.services.tokenize.tokenizers import build_motif_vocab

from .targets import FrozenGnnTargets, MotifTargets, NodeTargets, SgtTargets, TargetTokenizer

logger = logging.getLogger(__name__)


def make_target_tokenizer(
    corpus: Sequence[MolGraph],
    atom_vocab: AtomVocabulary,
    settings: Optional[RunConfig] = None,
    vocab_path: Optional[Union[str, Path]] = None,
) -> TargetTokenizer:
    """
    Create the configured target tokenizer.

    Args:
        corpus: Training molecules (a motif vocabulary is built from them unless ``vocab_path`` is given)
        atom_vocab: Atom vocabulary of the corpus
        settings: Run configuration (defaults when omitted)
        vocab_path: Stored motif vocabulary file

    Returns:
        TargetTokenizer for ``tokenizer.kind``
    """
    settings = settings or get_settings()
    kind = settings.tokenizer.kind
    if kind == "node":
        return NodeTargets(atom_vocab)
    if kind == "sgt":
        return SgtTargets(make_sgt_config(settings.encoder.model_dim, settings.sgt), atom_vocab)
    if kind == "frozen_gnn":
        if not settings.tokenizer.frozen_checkpoint:
            raise ConfigurationError("tokenizer.kind = frozen_gnn needs tokenizer.frozen_checkpoint")
        return FrozenGnnTargets(load_frozen_tokenizer(settings.tokenizer.frozen_checkpoint))

    fragmenter = make_fragmenter(settings.fragment)
    if vocab_path is not None:
        path = Path(vocab_path)
        vocab = VocabularyRepository(path.parent).load(path.name)
    else:
        vocab = build_motif_vocab(
            corpus, fragmenter, settings.tokenizer.vocab_threshold, settings.tokenizer.max_canonical_nodes, settings.threads
        )
    logger.info(f"Motif targets over {vocab.size} classes (recipe {vocab.recipe})")
    return MotifTargets(fragmenter, vocab, settings.tokenizer.max_canonical_nodes)


def model_from_checkpoint(checkpoint: Checkpoint, settings: Optional[RunConfig] = None) -> Tuple[AutoencoderConfig, ParameterSet]:
    """
    Rebuild the autoencoder stored in a checkpoint.

    Args:
        checkpoint: Loaded checkpoint
        settings: Stack settings to use; the checkpoint's own resolved config when omitted

    Raises:
        StackConfigError: when the stored arrays do not fit the configured stacks
    """
    if settings is None:
        settings = load_config_text(checkpoint.meta.config) if checkpoint.meta.config else get_settings()
    if "decoder.out.b" not in checkpoint.params:
        raise CheckpointError("checkpoint holds no decoder output layer")
    atom_vocab = AtomVocabulary(atomic_numbers=checkpoint.meta.atom_vocab)
    cfg = make_autoencoder_config(atom_vocab, int(checkpoint.params["decoder.out.b"].shape[0]), settings)
    params = init_autoencoder(cfg, stream_generator(settings.seed, INIT_STREAM))
    params.load(checkpoint.params)
    return cfg, params
