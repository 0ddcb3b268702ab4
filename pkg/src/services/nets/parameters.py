import logging
from typing import Dict, Iterator, List, Mapping

import numpy as np
from src.exceptions import StackConfigError
from src.services.tensorcore import Parameter

logger = logging.getLogger(__name__)


class ParameterSet:
    """Ordered, named collection of the trainable Parameters of a model."""

    def __init__(self):
        self._params: Dict[str, Parameter] = {}

    def add(self, name: str, value: np.ndarray) -> Parameter:
        if name in self._params:
            raise StackConfigError(f"duplicate parameter name {name!r}")
        param = Parameter(name, value)
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        try:
            return self._params[name]
        except KeyError as e:
            raise StackConfigError(f"model has no parameter {name!r}") from e

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    @property
    def names(self) -> List[str]:
        return list(self._params)

    @property
    def size(self) -> int:
        """Total number of scalar weights."""
        return sum(param.value.size for param in self)

    def zero_grad(self) -> None:
        for param in self:
            param.zero_grad()

    def arrays(self) -> Dict[str, np.ndarray]:
        """Copies of every parameter value, keyed by name."""
        return {name: param.value.copy() for name, param in self._params.items()}

    def load(self, arrays: Mapping[str, np.ndarray]) -> None:
        """
        Overwrite every parameter value in place.

        Raises:
            StackConfigError: when names or shapes differ from this model's
        """
        missing = sorted(set(self._params) - set(arrays))
        unexpected = sorted(set(arrays) - set(self._params))
        if missing or unexpected:
            raise StackConfigError(f"parameter names differ: missing {missing}, unexpected {unexpected}")
        for name, param in self._params.items():
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != param.shape:
                raise StackConfigError(f"parameter {name!r} has shape {param.shape}, stored array has {value.shape}")
            param.value = value.copy()
            param.zero_grad()
        logger.debug(f"Loaded {len(self._params)} parameter arrays")

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> "ParameterSet":
        params = cls()
        for name, value in arrays.items():
            params.add(name, np.asarray(value, dtype=np.float64))
        return params
