"""Counter-based random streams.

An `RngState` is a (seed, counter) pair. Each draw consumes one Philox stream
addressed by the counter, so the same pair gives the same numbers on every
platform and a stream can be handed to a worker without sharing state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngState:
    seed: int
    counter: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "counter", int(self.counter) & _MASK64)

    def generator(self) -> np.random.Generator:
        """Generator for the stream at the current counter."""
        bit_generator = np.random.Philox(key=self.seed, counter=[0, 0, 0, self.counter])
        return np.random.Generator(bit_generator)

    def advance(self, steps: int = 1) -> "RngState":
        return RngState(self.seed, self.counter + steps)

    def draw(self) -> tuple[np.random.Generator, "RngState"]:
        """Generator for this stream and the state that follows it."""
        return self.generator(), self.advance()

    def fork(self, index: int) -> "RngState":
        """Independent child stream; children of distinct indices never overlap."""
        child_seed = np.random.SeedSequence([self.seed, self.counter, index]).generate_state(2, np.uint64)
        return RngState((int(child_seed[0]) << 1) ^ int(child_seed[1]))
