import logging
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from src.exceptions import NonFiniteError, ShapeError, TapeError

logger = logging.getLogger(__name__)

_ACTIVE_TAPE: ContextVar[Optional["Tape"]] = ContextVar("_ACTIVE_TAPE", default=None)

Backward = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """Dense float64 value that may sit on the active gradient tape."""

    __slots__ = ("value", "requires_grad", "node", "__weakref__")

    def __init__(self, value, requires_grad: bool = False, node: Optional[int] = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.node = node  # index on the tape, None for constants and leaves

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def is_constant(self) -> bool:
        return not self.requires_grad

    def numpy(self) -> np.ndarray:
        return self.value.copy()

    def __repr__(self) -> str:
        origin = "constant" if self.is_constant else f"node {self.node}"
        return f"Tensor(shape={self.shape}, {origin})"

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from .ops import matmul

        return matmul(self, other)

    def __add__(self, other: "Tensor") -> "Tensor":
        from .ops import add

        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from .ops import sub

        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from .ops import mul

        return mul(self, other)


class Parameter(Tensor):
    """Trainable leaf with a stable name and an accumulated gradient."""

    __slots__ = ("name", "grad")

    def __init__(self, name: str, value):
        super().__init__(np.array(value, dtype=np.float64, copy=True), requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def constant(value) -> Tensor:
    """A tensor that never receives an adjoint."""
    return Tensor(value)


@dataclass
class _Record:
    op: str
    output: Tensor
    parents: Tuple[Tensor, ...]
    backward: Backward


class Tape:
    """
    Append-only record of the operations run while the tape is active.

    Usage::

        with Tape() as tape:
            loss = mse_loss(model(x), y)
            tape.backward(loss)
    """

    def __init__(self):
        self.records: List[_Record] = []
        self._consumed = False
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.records)

    def record(self, op: str, output: Tensor, parents: Sequence[Tensor], backward: Backward) -> Tensor:
        if self._consumed:
            raise TapeError("cannot record on a tape that already ran backward; call reset() first")
        output.requires_grad = True
        output.node = len(self.records)
        self.records.append(_Record(op=op, output=output, parents=tuple(parents), backward=backward))
        return output

    def reset(self) -> None:
        self.records = []
        self._consumed = False

    def backward(self, loss: Tensor, seed: float = 1.0) -> None:
        """
        Accumulate d(seed * loss)/d(param) into every reachable Parameter's ``grad``.

        Raises:
            TapeError: non-scalar loss, loss not on this tape, or a second call without reset
        """
        if self._consumed:
            raise TapeError("backward already ran on this tape; call reset() before reusing it")
        if loss.value.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        self._consumed = True
        if isinstance(loss, Parameter):
            loss.grad = loss.grad + seed * np.ones_like(loss.value)
            return
        if loss.node is None or loss.node >= len(self.records) or self.records[loss.node].output is not loss:
            if loss.requires_grad:
                raise TapeError("loss was not recorded on this tape")
            return

        adjoints: Dict[int, np.ndarray] = {id(loss): np.full(loss.shape, seed, dtype=np.float64)}
        for record in reversed(self.records[: loss.node + 1]):
            upstream = adjoints.pop(id(record.output), None)
            if upstream is None:
                continue
            for parent, grad in zip(record.parents, record.backward(upstream)):
                if grad is None or not parent.requires_grad:
                    continue
                if grad.shape != parent.shape:
                    raise ShapeError(f"{record.op} produced an adjoint of shape {grad.shape} for an input of shape {parent.shape}")
                if isinstance(parent, Parameter):
                    parent.grad = parent.grad + grad
                else:
                    key = id(parent)
                    adjoints[key] = adjoints[key] + grad if key in adjoints else grad


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else constant(value)


def emit(op: str, value: np.ndarray, parents: Sequence[Tensor], backward: Backward) -> Tensor:
    """Wrap an op result, trip on non-finite values, and record it when a tape is active."""
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"{op} produced a non-finite value")
    output = Tensor(value)
    tape = active_tape()
    if tape is not None and any(parent.requires_grad for parent in parents):
        tape.record(op, output, parents, backward)
    return output
