"""Counter-based Gaussian noise streams.

Every draw is addressed by ``(seed, purpose, step)``: the 64-bit seed is the
Philox key and ``(purpose, step)`` occupy the two high words of the
256-bit counter, so each step of each run reads its own disjoint block of
the stream.  Noise at step ``t`` therefore does not depend on how many
numbers earlier steps consumed.
"""

from __future__ import annotations

import numpy as np

GENERATOR_NAME = "philox4x64-normal-v1"

INIT = 1
STEP = 2
MASK = 3


def stream(seed: int, purpose: int, step: int = 0) -> np.random.Generator:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    bitgen = np.random.Philox(key=seed, counter=[0, 0, int(purpose), int(step)])
    return np.random.Generator(bitgen)


def normal(seed: int, purpose: int, step: int, shape) -> np.ndarray:
    return stream(seed, purpose, step).standard_normal(shape)
