from .ablation import bn_ablation, column_spread
from .census import distribution_balance, sgt_vocabulary_size, subtree_census
from .experiments import DEFAULT_SWEEP_RATIOS, compare_tokenizers, mask_ratio_sweep, with_section
from .probe import (
    fg_labels,
    fit_linear_probe,
    masked_atom_features,
    pooled_features,
    probe_accuracy,
    probe_fg,
    probe_masked_atoms,
    probe_presence,
    roc_auc,
    split_indices,
    standardize,
)

__all__ = [
    "DEFAULT_SWEEP_RATIOS",
    "bn_ablation",
    "column_spread",
    "compare_tokenizers",
    "distribution_balance",
    "fg_labels",
    "fit_linear_probe",
    "mask_ratio_sweep",
    "masked_atom_features",
    "pooled_features",
    "probe_accuracy",
    "probe_fg",
    "probe_masked_atoms",
    "probe_presence",
    "roc_auc",
    "sgt_vocabulary_size",
    "split_indices",
    "standardize",
    "subtree_census",
    "with_section",
]
