from .gradcheck import check_gradients, check_op, numeric_gradient, raise_on_failure, relative_error, run_op_suite
from .losses import cross_entropy, mse_loss, sce_loss
from .ops import (
    add,
    batch_norm,
    concat_cols,
    concat_rows,
    embedding_lookup,
    layer_norm,
    matmul,
    max_rows,
    mean,
    mean_rows,
    mul,
    pad_rows,
    relu,
    replace_rows,
    row_select,
    scale,
    softmax_rows,
    sub,
    sum_rows,
    total,
    transpose,
)
from .tensor import Parameter, Tape, Tensor, active_tape, as_tensor, constant

__all__ = [
    "Parameter",
    "Tape",
    "Tensor",
    "active_tape",
    "add",
    "as_tensor",
    "batch_norm",
    "check_gradients",
    "check_op",
    "concat_cols",
    "concat_rows",
    "constant",
    "cross_entropy",
    "embedding_lookup",
    "layer_norm",
    "matmul",
    "max_rows",
    "mean",
    "mean_rows",
    "mse_loss",
    "mul",
    "numeric_gradient",
    "pad_rows",
    "raise_on_failure",
    "relative_error",
    "relu",
    "replace_rows",
    "row_select",
    "run_op_suite",
    "scale",
    "sce_loss",
    "softmax_rows",
    "sub",
    "sum_rows",
    "total",
    "transpose",
]
