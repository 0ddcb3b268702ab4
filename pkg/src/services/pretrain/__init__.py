from .accuracy import nearest_token, prediction_counts, token_prediction_accuracy, token_vocabulary
from .factory import make_target_tokenizer, model_from_checkpoint
from .loss import contributing_fragments, reconstruction_loss
from .masking import mask_count, mask_nodes
from .optim import adam_step
from .targets import (
    FrozenGnnTargets,
    MotifTargets,
    NodeTargets,
    SgtTargets,
    TargetTokenizer,
    compute_targets,
    shift_fragment,
)
from .trainer import Pretrainer, train

__all__ = [
    "FrozenGnnTargets",
    "MotifTargets",
    "NodeTargets",
    "Pretrainer",
    "SgtTargets",
    "TargetTokenizer",
    "adam_step",
    "compute_targets",
    "contributing_fragments",
    "make_target_tokenizer",
    "mask_count",
    "mask_nodes",
    "model_from_checkpoint",
    "nearest_token",
    "prediction_counts",
    "reconstruction_loss",
    "shift_fragment",
    "token_prediction_accuracy",
    "token_vocabulary",
    "train",
]
