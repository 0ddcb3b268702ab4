"""Central-difference gradient checks for the tensor ops."""

import logging
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from src.exceptions import GradientCheckError
from src.schemas.tensorcore.models import GradcheckResult
from src.services.seeding import stream_generator

from . import losses, ops
from .tensor import Parameter, Tape, Tensor, constant

logger = logging.getLogger(__name__)

STEP = 1e-6
OP_TOLERANCE = 1e-4

LossFn = Callable[[], Tensor]
Case = Callable[[np.random.Generator], Tuple[List[Parameter], LossFn]]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||, 1e-8)."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / scale)


def numeric_gradient(loss_fn: LossFn, param: Parameter, step: float = STEP) -> np.ndarray:
    """Central differences of the scalar ``loss_fn()`` with respect to each entry of ``param``."""
    grad = np.zeros_like(param.value)
    for index in np.ndindex(param.shape):
        original = param.value[index]
        param.value[index] = original + step
        plus = float(loss_fn().value)
        param.value[index] = original - step
        minus = float(loss_fn().value)
        param.value[index] = original
        grad[index] = (plus - minus) / (2.0 * step)
    return grad


def analytic_gradient(loss_fn: LossFn, params: Sequence[Parameter]) -> List[np.ndarray]:
    for param in params:
        param.zero_grad()
    with Tape() as tape:
        tape.backward(loss_fn())
    return [param.grad.copy() for param in params]


def check_gradients(loss_fn: LossFn, params: Sequence[Parameter], step: float = STEP) -> float:
    """Relative error between the tape's gradient and central differences, over all params jointly."""
    analytic = np.concatenate([grad.ravel() for grad in analytic_gradient(loss_fn, params)])
    numeric = np.concatenate([numeric_gradient(loss_fn, param, step).ravel() for param in params])
    return relative_error(analytic, numeric)


def _away_from_zero(rng: np.random.Generator, shape) -> np.ndarray:
    values = rng.standard_normal(shape)
    return np.sign(values) * (np.abs(values) + 0.1)


def _dims(rng: np.random.Generator) -> Tuple[int, int]:
    return int(rng.integers(2, 6)), int(rng.integers(2, 6))


def _projected(out_fn: LossFn, rng: np.random.Generator, shape) -> LossFn:
    """Scalarize a matrix-valued op as sum(op(...) * R) for a fixed random R."""
    weights = constant(rng.standard_normal(shape))
    return lambda: ops.total(ops.mul(out_fn(), weights))


def _binary(op) -> Case:
    def case(rng):
        n, d = _dims(rng)
        a, b = Parameter("a", rng.standard_normal((n, d))), Parameter("b", rng.standard_normal((n, d)))
        return [a, b], _projected(lambda: op(a, b), rng, (n, d))

    return case


def _row_broadcast(op) -> Case:
    def case(rng):
        n, d = _dims(rng)
        a, b = Parameter("a", rng.standard_normal((n, d))), Parameter("b", rng.standard_normal(d))
        return [a, b], _projected(lambda: op(a, b), rng, (n, d))

    return case


def _matmul(rng):
    n, k = _dims(rng)
    m = int(rng.integers(2, 6))
    a, b = Parameter("a", rng.standard_normal((n, k))), Parameter("b", rng.standard_normal((k, m)))
    return [a, b], _projected(lambda: ops.matmul(a, b), rng, (n, m))


def _unary(op, reduce_shape=None, sampler=None) -> Case:
    def case(rng):
        n, d = _dims(rng)
        values = sampler(rng, (n, d)) if sampler else rng.standard_normal((n, d))
        a = Parameter("a", values)
        out_shape = reduce_shape(n, d) if reduce_shape else (n, d)
        return [a], _projected(lambda: op(a), rng, out_shape)

    return case


def _scalar(op) -> Case:
    def case(rng):
        n, d = _dims(rng)
        a = Parameter("a", rng.standard_normal((n, d)))
        factor = float(rng.standard_normal())
        return [a], lambda: ops.scale(op(a), factor)

    return case


def _concat(op, axis: int) -> Case:
    def case(rng):
        n, d = _dims(rng)
        other = int(rng.integers(1, 4))
        a = Parameter("a", rng.standard_normal((n, d)))
        b = Parameter("b", rng.standard_normal((n, other) if axis == 1 else (other, d)))
        out_shape = (n, d + other) if axis == 1 else (n + other, d)
        return [a, b], _projected(lambda: op([a, b]), rng, out_shape)

    return case


def _row_select(rng):
    n, d = _dims(rng)
    a = Parameter("a", rng.standard_normal((n, d)))
    index = rng.integers(0, n, size=n + 2)
    return [a], _projected(lambda: ops.row_select(a, index), rng, (index.size, d))


def _replace_rows(rng):
    n, d = _dims(rng)
    a = Parameter("a", rng.standard_normal((n, d)))
    index = np.sort(rng.choice(n, size=int(rng.integers(1, n)), replace=False))
    rows = Parameter("rows", rng.standard_normal((index.size, d)))
    return [a, rows], _projected(lambda: ops.replace_rows(a, index, rows), rng, (n, d))


def _replace_rows_shared(rng):
    n, d = _dims(rng)
    a = Parameter("a", rng.standard_normal((n, d)))
    index = np.sort(rng.choice(n, size=int(rng.integers(1, n)), replace=False))
    fill = Parameter("fill", rng.standard_normal(d))
    return [a, fill], _projected(lambda: ops.replace_rows(a, index, fill), rng, (n, d))


def _pad_rows(rng):
    total_rows, d = int(rng.integers(3, 6)), int(rng.integers(2, 6))
    keep = np.sort(rng.choice(total_rows, size=int(rng.integers(1, total_rows)), replace=False))
    a = Parameter("a", rng.standard_normal((keep.size, d)))
    fill = Parameter("fill", rng.standard_normal(d))
    return [a, fill], _projected(lambda: ops.pad_rows(a, keep, total_rows, fill), rng, (total_rows, d))


def _softmax(rng):
    n, d = _dims(rng)
    mask = rng.random((n, d)) < 0.7
    mask[np.arange(n), rng.integers(0, d, size=n)] = True
    a = Parameter("a", rng.standard_normal((n, d)))
    return [a], _projected(lambda: ops.softmax_rows(a, mask), rng, (n, d))


def _embedding(rng):
    k, d = _dims(rng)
    table = Parameter("table", rng.standard_normal((k, d)))
    ids = rng.integers(0, k, size=int(rng.integers(1, 7)))
    return [table], _projected(lambda: ops.embedding_lookup(table, ids, mask_id=k - 1), rng, (ids.size, d))


def _norm(op) -> Case:
    def case(rng):
        n, d = _dims(rng)
        x = Parameter("x", rng.standard_normal((n, d)))
        gamma = Parameter("gamma", rng.standard_normal(d))
        beta = Parameter("beta", rng.standard_normal(d))
        return [x, gamma, beta], _projected(lambda: op(x, gamma, beta), rng, (n, d))

    return case


def _mse(rng):
    n, d = _dims(rng)
    pred, target = Parameter("pred", rng.standard_normal((n, d))), rng.standard_normal((n, d))
    return [pred], lambda: losses.mse_loss(pred, target)


def _cross_entropy(rng):
    n, k = _dims(rng)
    logits = Parameter("logits", rng.standard_normal((n, k)))
    ids = rng.integers(0, k, size=n)
    return [logits], lambda: losses.cross_entropy(logits, ids)


def _sce(rng):
    n, d = _dims(rng)
    pred, target = Parameter("pred", rng.standard_normal((n, d))), rng.standard_normal((n, d))
    gamma = float(rng.choice([1.0, 1.5, 2.0]))
    return [pred], lambda: losses.sce_loss(pred, target, gamma)


OP_CASES: Dict[str, Case] = {
    "matmul": _matmul,
    "add": _binary(ops.add),
    "add_row": _row_broadcast(ops.add),
    "sub": _binary(ops.sub),
    "sub_row": _row_broadcast(ops.sub),
    "mul": _binary(ops.mul),
    "mul_row": _row_broadcast(ops.mul),
    "scale": _unary(lambda a: ops.scale(a, 1.7)),
    "transpose": _unary(ops.transpose, reduce_shape=lambda n, d: (d, n)),
    "relu": _unary(ops.relu, sampler=_away_from_zero),
    "concat_cols": _concat(ops.concat_cols, axis=1),
    "concat_rows": _concat(ops.concat_rows, axis=0),
    "row_select": _row_select,
    "replace_rows": _replace_rows,
    "replace_rows_shared": _replace_rows_shared,
    "pad_rows": _pad_rows,
    "sum_rows": _unary(ops.sum_rows, reduce_shape=lambda n, d: (1, d)),
    "mean_rows": _unary(ops.mean_rows, reduce_shape=lambda n, d: (1, d)),
    "max_rows": _unary(ops.max_rows, reduce_shape=lambda n, d: (1, d)),
    "sum": _scalar(ops.total),
    "mean": _scalar(ops.mean),
    "softmax_rows": _softmax,
    "embedding_lookup": _embedding,
    "batch_norm": _norm(ops.batch_norm),
    "layer_norm": _norm(ops.layer_norm),
    "mse_loss": _mse,
    "cross_entropy": _cross_entropy,
    "sce_loss": _sce,
}


def check_op(name: str, seed: int = 0, instances: int = 30, tolerance: float = OP_TOLERANCE) -> GradcheckResult:
    rng = stream_generator(seed, f"gradcheck.{name}")
    worst = 0.0
    for _ in range(instances):
        params, loss_fn = OP_CASES[name](rng)
        worst = max(worst, check_gradients(loss_fn, params))
    return GradcheckResult(name=name, instances=instances, max_relative_error=worst, tolerance=tolerance)


def run_op_suite(seed: int = 0, instances: int = 30, tolerance: float = OP_TOLERANCE) -> List[GradcheckResult]:
    """Check every op on ``instances`` random inputs of at most 5 x 5."""
    results = []
    for name in OP_CASES:
        result = check_op(name, seed=seed, instances=instances, tolerance=tolerance)
        logger.debug(f"gradcheck {name}: max relative error {result.max_relative_error:.3e}")
        results.append(result)
    return results


def raise_on_failure(results: Sequence[GradcheckResult]) -> None:
    failed = [result for result in results if not result.passed]
    if failed:
        details = ", ".join(f"{r.name} ({r.max_relative_error:.2e} >= {r.tolerance:.0e})" for r in failed)
        logger.error(f"Gradient check failed for {details}")
        raise GradientCheckError(f"analytic gradients disagree with finite differences: {details}")
