import zlib
from typing import Any, Dict, Mapping

import numpy as np
from src.exceptions import ConfigurationError

MASK_STREAM = "mask"
SHUFFLE_STREAM = "shuffle"
INIT_STREAM = "init"
PROBE_STREAM = "probe"


def stream_generator(seed: int, name: str) -> np.random.Generator:
    """Generator of the stream ``name`` under ``seed``; streams of different names are independent."""
    if seed < 0:
        raise ConfigurationError(f"seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode("utf-8")),))
    return np.random.Generator(np.random.PCG64(sequence))


class RandomStreams:
    """Named random streams split from one run seed."""

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: Dict[str, np.random.Generator] = {}

    def get(self, name: str) -> np.random.Generator:
        if name not in self._streams:
            self._streams[name] = stream_generator(self.seed, name)
        return self._streams[name]

    def state(self) -> Dict[str, Any]:
        """Bit-generator state of every stream drawn from so far."""
        return {name: generator.bit_generator.state for name, generator in sorted(self._streams.items())}

    def restore(self, state: Mapping[str, Any]) -> None:
        for name, bit_state in state.items():
            self.get(name).bit_generator.state = dict(bit_state)


def streams(seed: int) -> RandomStreams:
    return RandomStreams(seed)
