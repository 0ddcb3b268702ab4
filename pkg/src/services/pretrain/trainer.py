import logging
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from src.config import RunConfig, config_fingerprint, dump_config
from src.exceptions import MgmLabException, ModelException, NumericalException, TrainingException, VocabularyError
from src.repositories.checkpoint import CheckpointRepository
from src.repositories.metrics import MetricsRepository
from src.schemas.molgraph.models import MolGraph
from src.schemas.nets.models import AutoencoderConfig
from src.schemas.pretrain.models import AdamState, Checkpoint, CheckpointMeta, EpochMetrics, TrainResult
from src.schemas.tokenize.models import AtomVocabulary
from src.services.molgraph.graph_ops import make_batch
from src.services.nets.autoencoder import BatchContext, decode, encode, pool_subgraph
from src.services.nets.factory import make_autoencoder_config
from src.services.nets.init import init_autoencoder
from src.services.nets.parameters import ParameterSet
from src.services.seeding import INIT_STREAM, MASK_STREAM, SHUFFLE_STREAM, RandomStreams
from src.services.tensorcore import Tape, concat_rows, row_select

from .accuracy import prediction_counts
from .loss import contributing_fragments, reconstruction_loss
from .masking import mask_nodes
from .optim import adam_step
from .targets import TargetTokenizer, compute_targets

logger = logging.getLogger(__name__)

FINAL_CHECKPOINT = "checkpoint"


class Pretrainer:
    """
    Masked graph modeling loop: mask, tokenize the clean batch, reconstruct, step Adam.

    All randomness comes from the run seed's named streams: ``init`` for weights, ``shuffle`` for the
    epoch order and ``mask`` for the masked node sets.
    """

    def __init__(
        self,
        settings: RunConfig,
        corpus: Sequence[MolGraph],
        atom_vocab: AtomVocabulary,
        tokenizer: TargetTokenizer,
        out_dir: Optional[Union[str, Path]] = None,
    ):
        if not corpus:
            raise VocabularyError("cannot pretrain on an empty corpus")
        self.settings = settings
        self.corpus = list(corpus)
        self.atom_vocab = atom_vocab
        self.tokenizer = tokenizer
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.model_cfg: AutoencoderConfig = make_autoencoder_config(atom_vocab, tokenizer.output_dim, settings)
        self.streams = RandomStreams(settings.seed)
        self.params: ParameterSet = init_autoencoder(self.model_cfg, self.streams.get(INIT_STREAM))
        self.optimizer = AdamState()
        self.epoch = 0

    def batches(self) -> List[List[MolGraph]]:
        """One epoch's mini-batches in the shuffle stream's order."""
        order = self.streams.get(SHUFFLE_STREAM).permutation(len(self.corpus))
        size = self.settings.train.batch_size
        return [[self.corpus[k] for k in order[start : start + size]] for start in range(0, len(order), size)]

    def step(self, graphs: Sequence[MolGraph]) -> Tuple[float, int, int]:
        """
        One optimizer step on one batch.

        Returns:
            (loss value, correct token predictions, scored tokens)
        """
        train = self.settings.train
        batch = make_batch(graphs)
        context = BatchContext.from_batch(batch)
        ids, plan = mask_nodes(batch, self.atom_vocab, train.mask_ratio, self.settings.seed, self.streams.get(MASK_STREAM))
        targets = compute_targets(graphs, batch, self.tokenizer, self.params)

        self.params.zero_grad()
        with Tape() as tape:
            z = decode(encode(ids, context, plan, self.params, self.model_cfg, train.remask), context, self.params, self.model_cfg)
            loss = reconstruction_loss(z, targets, plan, train.loss, train.sce_gamma, train.pool)
            tape.backward(loss)
        self.optimizer = adam_step(self.params, self.optimizer, train.lr)

        if targets.level == "node":
            rows = list(plan.masked)
            predictions = row_select(z, rows).value
        else:
            contributing = contributing_fragments(targets, plan)
            rows = [k for k, _ in contributing]
            predictions = concat_rows([pool_subgraph(z, fragment, train.pool) for _, fragment in contributing]).value
        correct, scored = prediction_counts(predictions, targets, rows)
        return float(loss.value), correct, scored

    def run_epoch(self) -> EpochMetrics:
        started = time.perf_counter()
        losses: List[float] = []
        correct = scored = 0
        epoch = self.epoch + 1
        for number, graphs in enumerate(self.batches()):
            try:
                loss, hits, total = self.step(graphs)
            except (NumericalException, ModelException) as e:
                logger.error(f"Training failed at epoch {epoch}, batch {number}: {e}")
                raise TrainingException(f"epoch {epoch}, batch {number}: {e}") from e
            except MgmLabException as e:
                logger.error(f"Training failed at epoch {epoch}, batch {number}: {e}")
                raise
            except Exception as e:
                logger.error(f"Unexpected error at epoch {epoch}, batch {number}: {e}")
                raise TrainingException(f"epoch {epoch}, batch {number}: {e}") from e
            losses.append(loss)
            correct += hits
            scored += total
        self.epoch = epoch

        wall_ms = (time.perf_counter() - started) * 1000.0 if self.settings.train.record_wall_time else None
        return EpochMetrics(
            epoch=epoch,
            mean_loss=float(np.mean(losses)),
            token_accuracy=correct / scored if scored else None,
            wall_ms=wall_ms,
        )

    def checkpoint(self) -> Checkpoint:
        meta = CheckpointMeta(
            config_fingerprint=config_fingerprint(self.settings),
            epoch=self.epoch,
            rng_state=self.streams.state(),
            atom_vocab=self.atom_vocab.atomic_numbers,
            config=dump_config(self.settings),
        )
        return Checkpoint(params=self.params.arrays(), meta=meta)

    def train(self) -> TrainResult:
        """
        Run the configured number of epochs.

        With an output directory, metrics are rewritten after every epoch, intermediate checkpoints are
        saved every ``checkpoint_every`` epochs and the final checkpoint as ``checkpoint.npz``.
        """
        train = self.settings.train
        metrics_repo = MetricsRepository(self.out_dir) if self.out_dir is not None else None
        checkpoints = CheckpointRepository(self.out_dir) if self.out_dir is not None else None
        logger.info(
            f"Pretraining on {len(self.corpus)} molecules for {train.epochs} epochs "
            f"({self.tokenizer.kind} targets, remask {train.remask}, {self.params.size} weights)"
        )

        history: List[EpochMetrics] = []
        for _ in range(train.epochs):
            row = self.run_epoch()
            history.append(row)
            accuracy = f"{row.token_accuracy:.4f}" if row.token_accuracy is not None else "n/a"
            logger.info(f"epoch {row.epoch}: mean loss {row.mean_loss:.6f}, token accuracy {accuracy}")
            if metrics_repo is not None:
                metrics_repo.append(row)
            if checkpoints is not None and train.checkpoint_every and row.epoch % train.checkpoint_every == 0:
                checkpoints.save(self.checkpoint(), f"checkpoint_epoch{row.epoch}")

        final = self.checkpoint()
        if checkpoints is not None:
            checkpoints.save(final, FINAL_CHECKPOINT)
            if metrics_repo is not None and not history:
                metrics_repo.save([], metrics_repo.name)
        return TrainResult(checkpoint=final, metrics=tuple(history))


def train(
    corpus: Sequence[MolGraph],
    settings: RunConfig,
    atom_vocab: AtomVocabulary,
    tokenizer: TargetTokenizer,
    out_dir: Optional[Union[str, Path]] = None,
) -> TrainResult:
    return Pretrainer(settings, corpus, atom_vocab, tokenizer, out_dir).train()
