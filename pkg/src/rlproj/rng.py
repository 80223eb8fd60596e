"""Named, seeded random streams.

Every stochastic component draws from its own counter-based Philox stream
keyed by (purpose, seed), so a run is reproducible piece by piece and no
component's draws shift when another component consumes more randomness.
"""

from __future__ import annotations

import numpy as np

STREAM_PURPOSES = (
    "dataset",   # synthetic data generation
    "split",     # train/test partitioning
    "noise",     # additive feature noise
    "init",      # model parameter initialization
    "batching",  # batch generation and epoch shuffles
    "probe",     # probe-point draws for the projection loss
    "mixup",     # mixing-coefficient draws
    "eval",      # evaluation-time sampling
    "theory",    # randomized property checks
)

_IDS = {name: i for i, name in enumerate(STREAM_PURPOSES)}
_MASK64 = (1 << 64) - 1


def stream(purpose: str, seed: int) -> np.random.Generator:
    """Return the generator for one (purpose, seed) pair.

    Streams with different purposes never overlap: the purpose id is folded
    into the upper 64 bits of the 128-bit Philox key, the seed into the
    lower 64.
    """
    if purpose not in _IDS:
        raise ValueError(f"unknown stream purpose {purpose!r}; known: {list(STREAM_PURPOSES)}")
    key = (int(seed) & _MASK64) | ((_IDS[purpose] + 1) << 64)
    return np.random.Generator(np.random.Philox(key=key))
