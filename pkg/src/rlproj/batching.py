"""Balanced unique-batch generation.

Repeatedly shuffles the full index sequence and slices it into strides of M,
keeping each slice unless an equal batch (as an index set) was already kept,
until K batches accumulate. Whenever K*M >= n every index is guaranteed to
appear in at least one batch: the first pass appends one extra tail slice
when M does not divide n, since plain striding would leave the shuffle's
tail uncovered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ExhaustionError
from .rng import stream

REJECT_BUDGET = 1000


@dataclass(frozen=True)
class BatchSet:
    """K index lists of length M into a dataset of n rows."""

    batches: tuple
    n: int
    M: int
    seed: int

    def __len__(self) -> int:
        return len(self.batches)

    def __iter__(self):
        return iter(self.batches)

    def __getitem__(self, j):
        return self.batches[j]

    def coverage(self) -> np.ndarray:
        """How many batches each index appears in."""
        counts = np.zeros(self.n, dtype=np.int64)
        for b in self.batches:
            counts[b] += 1
        return counts


def balanced_batches(n: int, M: int, K: int, seed: int = 0) -> BatchSet:
    """Sample K distinct size-M index batches covering the dataset.

    Batches are distinct as index sets; within-batch order is kept as drawn.
    Raises ExhaustionError after 1000 consecutive duplicate rejections,
    which bounds the search when K approaches the number of distinct
    M-subsets.
    """
    if not 1 <= M <= n:
        raise ConfigError(f"batch size M={M} must satisfy 1 <= M <= n={n}")
    if K < 1:
        raise ConfigError(f"batch count K={K} must be >= 1")
    rng = stream("batching", seed)
    seen: set = set()
    batches: list = []
    rejects = 0
    first_pass = True
    while len(batches) < K:
        order = rng.permutation(n)
        starts = list(range(0, n - M + 1, M))
        slices = [order[i : i + M] for i in starts]
        if first_pass and n % M != 0:
            slices.append(order[n - M :])
        first_pass = False
        for raw in slices:
            key = tuple(sorted(raw.tolist()))
            if key in seen:
                rejects += 1
                if rejects >= REJECT_BUDGET:
                    raise ExhaustionError(
                        f"no new distinct batch of size {M} from {n} rows after "
                        f"{REJECT_BUDGET} consecutive rejections ({len(batches)} of {K} found)"
                    )
            else:
                seen.add(key)
                b = raw.copy()
                b.setflags(write=False)
                batches.append(b)
                rejects = 0
            if len(batches) >= K:
                break
    return BatchSet(batches=tuple(batches), n=n, M=M, seed=seed)


def write_batchset(path, bs: BatchSet) -> None:
    """Dump batches as a text file of index rows, for audit."""
    with open(path, "w") as fh:
        fh.write(f"# n={bs.n} M={bs.M} K={len(bs)} seed={bs.seed}\n")
        for b in bs:
            fh.write(" ".join(str(int(i)) for i in b) + "\n")


def read_batchset(path) -> list:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append(np.array([int(t) for t in line.split()], dtype=np.int64))
    return rows
