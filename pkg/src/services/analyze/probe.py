import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata
from src.config import ProbeSettings, RunConfig, get_settings
from src.exceptions import MgmLabException, ProbeException
from src.schemas.analyze.models import FG_LIBRARY_NOTE, ClassScore, ProbeReport
from src.schemas.fragment.models import Pattern
from src.schemas.molgraph.models import MolGraph
from src.schemas.nets.models import AutoencoderConfig
from src.schemas.pretrain.models import Checkpoint
from src.schemas.tokenize.models import AtomVocabulary
from src.services.fragment.matcher import match_pattern
from src.services.molgraph.graph_ops import make_batch
from src.services.nets.autoencoder import BatchContext, encode
from src.services.nets.layers import linear
from src.services.nets.parameters import ParameterSet
from src.services.pretrain.factory import model_from_checkpoint
from src.services.pretrain.masking import mask_nodes
from src.services.seeding import PROBE_STREAM, stream_generator
from src.services.tensorcore import Parameter, Tape, constant, cross_entropy

logger = logging.getLogger(__name__)


def split_indices(size: int, train_fraction: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Random train/test split of ``size`` examples.

    Raises:
        ProbeException: when either side would be empty
    """
    train_size = math.floor(train_fraction * size)
    if train_size < 1 or size - train_size < 1:
        raise ProbeException(f"{size} examples are too few for a {train_fraction:.2f} train split")
    order = rng.permutation(size)
    return np.sort(order[:train_size]), np.sort(order[train_size:])


def standardize(train: np.ndarray, test: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Scale both sides by the train columns' mean and std; constant columns become zero."""
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (train - mean) / std, (test - mean) / std


def _step_size(features: np.ndarray, lr: float) -> float:
    # Cross-entropy curvature is at most half the top eigenvalue of the bias-augmented second moment.
    augmented = np.hstack([features, np.ones((features.shape[0], 1))])
    curvature = 0.5 * float(np.linalg.eigvalsh(augmented.T @ augmented / features.shape[0])[-1])
    return min(lr, 1.0 / curvature) if curvature > 0 else lr


def fit_linear_probe(
    features: np.ndarray, labels: np.ndarray, num_classes: int, epochs: int, lr: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Softmax regression by full-batch gradient descent from zero weights.

    The step is capped at the inverse curvature bound of the loss so strongly correlated features
    cannot make the descent oscillate.

    Returns:
        (weights d x C, bias C)
    """
    w = Parameter("probe.w", np.zeros((features.shape[1], num_classes)))
    b = Parameter("probe.b", np.zeros(num_classes))
    x = constant(features)
    step = _step_size(features, lr)
    for _ in range(epochs):
        w.zero_grad()
        b.zero_grad()
        with Tape() as tape:
            tape.backward(cross_entropy(linear(x, w, b), labels))
        w.value = w.value - step * w.grad
        b.value = b.value - step * b.grad
    return w.value, b.value


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """
    Area under the ROC curve by the rank-sum method; tied scores count half.

    Raises:
        ProbeException: when the labels hold only one class
    """
    labels = np.asarray(labels, dtype=bool)
    positives = int(labels.sum())
    negatives = labels.size - positives
    if positives == 0 or negatives == 0:
        raise ProbeException("area under the ROC curve needs both classes")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - positives * (positives + 1) / 2.0) / (positives * negatives))


def probe_accuracy(
    features: np.ndarray,
    labels: np.ndarray,
    class_names: Sequence[str],
    settings: ProbeSettings,
    seed: int,
) -> ProbeReport:
    """
    Multi-class linear probe: train on a split of the rows and report test accuracy.

    The baseline is the test accuracy of always predicting the majority class of the train split.
    """
    labels = np.asarray(labels, dtype=np.int64)
    train, test = split_indices(len(labels), settings.train_fraction, stream_generator(seed, PROBE_STREAM))
    x_train, x_test = standardize(features[train], features[test])
    w, b = fit_linear_probe(x_train, labels[train], len(class_names), settings.epochs, settings.lr)
    predicted = (x_test @ w + b).argmax(axis=1)
    correct = predicted == labels[test]

    majority = int(np.bincount(labels[train], minlength=len(class_names)).argmax())
    per_class = []
    for k, name in enumerate(class_names):
        members = labels[test] == k
        support = int(members.sum())
        per_class.append(ClassScore(label=name, support=support, score=float(correct[members].mean()) if support else None))

    return ProbeReport(
        task="masked_atom_type",
        metric_name="accuracy",
        metric=float(correct.mean()),
        per_class=tuple(per_class),
        train_size=len(train),
        test_size=len(test),
        seed=seed,
        baseline=float(np.mean(labels[test] == majority)),
    )


def probe_presence(
    features: np.ndarray,
    labels: np.ndarray,
    names: Sequence[str],
    settings: ProbeSettings,
    seed: int,
) -> ProbeReport:
    """
    One binary linear probe per pattern on the same split; the metric is the macro area under the ROC curve.

    Patterns that never occur (or occur in every molecule) are excluded with a warning, as are
    patterns whose test split holds a single class.

    Raises:
        ProbeException: when no pattern can be scored
    """
    labels = np.asarray(labels, dtype=bool)
    notes: List[str] = [FG_LIBRARY_NOTE]
    usable = []
    for k, name in enumerate(names):
        present = int(labels[:, k].sum())
        if present == 0 or present == labels.shape[0]:
            state = "absent from" if present == 0 else "present in every molecule of"
            logger.warning(f"Pattern {name!r} is {state} the corpus; excluded from the probe")
            notes.append(f"excluded {name}: {state} the corpus")
        else:
            usable.append(k)
    if not usable:
        raise ProbeException("no pattern separates the corpus")

    train, test = split_indices(labels.shape[0], settings.train_fraction, stream_generator(seed, PROBE_STREAM))
    x_train, x_test = standardize(features[train], features[test])
    per_class = []
    scored: List[float] = []
    for k in usable:
        w, b = fit_linear_probe(x_train, labels[train, k].astype(np.int64), 2, settings.epochs, settings.lr)
        logits = x_test @ w + b
        truth = labels[test, k]
        score: Optional[float] = None
        if truth.all() or not truth.any():
            logger.warning(f"Pattern {names[k]!r} has a single class in the test split; not scored")
            notes.append(f"unscored {names[k]}: single class in the test split")
        else:
            score = roc_auc(logits[:, 1] - logits[:, 0], truth)
            scored.append(score)
        per_class.append(ClassScore(label=names[k], support=int(truth.sum()), score=score))
    if not scored:
        raise ProbeException("no pattern has both classes in the test split")

    return ProbeReport(
        task="fg_presence",
        metric_name="roc_auc",
        metric=float(np.mean(scored)),
        per_class=tuple(per_class),
        train_size=len(train),
        test_size=len(test),
        seed=seed,
        notes=tuple(notes),
    )


def masked_atom_features(
    params: ParameterSet,
    cfg: AutoencoderConfig,
    corpus: Sequence[MolGraph],
    atom_vocab: AtomVocabulary,
    ratio: float,
    seed: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Encoder hidden states of the masked nodes, with remasking disabled, and their atom-type ids.

    The corpus is encoded as one batch without a gradient tape, so no parameter is touched.
    """
    batch = make_batch(corpus)
    ids, plan = mask_nodes(batch, atom_vocab, ratio, seed)
    hidden = encode(ids, BatchContext.from_batch(batch), plan, params, cfg, remask="none").value
    masked = list(plan.masked)
    return hidden[masked], atom_vocab.indices(batch.graph.atomic_numbers)[masked]


def pooled_features(
    params: ParameterSet, cfg: AutoencoderConfig, corpus: Sequence[MolGraph], atom_vocab: AtomVocabulary
) -> np.ndarray:
    """Mean-pooled encoder hidden states of every unmasked molecule, one row per molecule."""
    batch = make_batch(corpus)
    ids = atom_vocab.indices(batch.graph.atomic_numbers)
    hidden = encode(ids, BatchContext.from_batch(batch), None, params, cfg, remask="none").value
    return np.stack([hidden[list(batch.node_range(k))].mean(axis=0) for k in range(batch.num_graphs)])


def fg_labels(corpus: Sequence[MolGraph], patterns: Sequence[Pattern]) -> np.ndarray:
    """N x P presence matrix of every pattern in every molecule."""
    return np.array([[bool(match_pattern(graph, pattern)) for pattern in patterns] for graph in corpus], dtype=bool).reshape(
        len(corpus), len(patterns)
    )


def _load(checkpoint: Checkpoint) -> Tuple[AutoencoderConfig, ParameterSet, AtomVocabulary]:
    try:
        cfg, params = model_from_checkpoint(checkpoint)
    except MgmLabException:
        raise
    except Exception as e:
        logger.error(f"Could not rebuild the encoder from the checkpoint: {e}")
        raise ProbeException(f"checkpoint cannot be probed: {e}") from e
    return cfg, params, AtomVocabulary(atomic_numbers=checkpoint.meta.atom_vocab)


def probe_masked_atoms(
    checkpoint: Checkpoint,
    corpus: Sequence[MolGraph],
    ratio: Optional[float] = None,
    seed: Optional[int] = None,
    settings: Optional[RunConfig] = None,
    source: str = "",
) -> ProbeReport:
    """
    Predict masked atom types from the frozen encoder's hidden states.

    Args:
        checkpoint: Trained (or freshly initialized) model; its own config rebuilds the stacks
        corpus: Molecules to probe on
        ratio: Mask ratio (``probe.ratio`` when omitted)
        seed: Masking and split seed (the run seed when omitted)
        settings: Probe settings source
        source: Label stored in the report

    Returns:
        ProbeReport with test accuracy, per-type accuracy and the majority baseline
    """
    settings = settings or get_settings()
    ratio = settings.probe.ratio if ratio is None else ratio
    seed = settings.seed if seed is None else seed
    cfg, params, atom_vocab = _load(checkpoint)

    features, labels = masked_atom_features(params, cfg, corpus, atom_vocab, ratio, seed)
    class_names = [*(f"Z{z}" for z in atom_vocab.atomic_numbers), "UNK"]
    report = probe_accuracy(features, labels, class_names, settings.probe, seed)
    logger.info(f"Masked-atom probe: accuracy {report.metric:.4f} against baseline {report.baseline:.4f}")
    return report.model_copy(update={"source": source, "notes": (f"mask ratio {ratio}", "remask disabled")})


def probe_fg(
    checkpoint: Checkpoint,
    corpus: Sequence[MolGraph],
    patterns: Sequence[Pattern],
    settings: Optional[RunConfig] = None,
    source: str = "",
) -> ProbeReport:
    """
    Predict functional-group presence from mean-pooled frozen representations of unmasked molecules.

    Raises:
        ProbeException: for an empty pattern list, or when no pattern can be scored
    """
    if not patterns:
        raise ProbeException("functional-group probing needs at least one pattern")
    settings = settings or get_settings()
    cfg, params, atom_vocab = _load(checkpoint)

    features = pooled_features(params, cfg, corpus, atom_vocab)
    names = [pattern.name for pattern in patterns]
    report = probe_presence(features, fg_labels(corpus, patterns), names, settings.probe, settings.seed)
    logger.info(f"FG probe: macro ROC-AUC {report.metric:.4f} over {sum(c.score is not None for c in report.per_class)} patterns")
    return report.model_copy(update={"source": source})
