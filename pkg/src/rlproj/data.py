"""Dataset construction, loading, transformation, and splitting.

Datasets are immutable (features, labels) pairs with provenance metadata.
Synthetic generators are pure functions of (n, seed); file loaders cover
comma-separated tables with a header line, IDX image files, and CIFAR-style
binary batch directories.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DegenerateSplitError,
    FormatError,
    ParseError,
    SchemaError,
    ShapeError,
)
from .rng import stream

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801
CIFAR_RECORD_BYTES = 1 + 3072


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """Paired feature and label matrices with provenance metadata.

    ``feature_mean``/``feature_std`` hold the standardization transform when
    ``standardized`` is set, so the transform can be replayed or inverted.
    """

    features: np.ndarray
    labels: np.ndarray
    source: str
    seed: int | None = None
    standardized: bool = False
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None

    def __post_init__(self):
        f = _readonly(self.features)
        l = _readonly(self.labels)
        if f.ndim != 2 or l.ndim != 2:
            raise ShapeError("features and labels must be 2-d")
        if f.shape[0] != l.shape[0]:
            raise ShapeError(f"{f.shape[0]} feature rows vs {l.shape[0]} label rows")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", l)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def c(self) -> int:
        return self.labels.shape[1]

    def take(self, indices) -> "Dataset":
        """Row subset, metadata preserved."""
        idx = np.asarray(indices, dtype=np.int64)
        return replace(self, features=self.features[idx], labels=self.labels[idx])


@dataclass(frozen=True)
class SplitSpec:
    """How to partition a dataset into train and test."""

    mode: str = "random"  # random | biased
    train_fraction: float = 0.5
    train_count: int = 0  # overrides fraction when > 0
    gamma: float = 0.5    # biased mode only
    seed: int = 0

    def apply(self, ds: Dataset) -> tuple[Dataset, Dataset]:
        if self.mode == "random":
            if self.train_count > 0:
                return split_random(ds, seed=self.seed, train_count=self.train_count)
            return split_random(ds, fraction=self.train_fraction, seed=self.seed)
        if self.mode == "biased":
            return split_biased(ds, self.gamma, self.seed)
        raise ConfigError(f"unknown split mode {self.mode!r}")


LINEAR_COEFFS = np.array([0.5, 1.5, 2.5, 3.5, 4.5])


def gen_linear(n: int, seed: int = 0) -> Dataset:
    """Five uniform features, label a fixed linear combination of them."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = stream("dataset", seed)
    x = rng.random((n, 5))
    y = x @ LINEAR_COEFFS
    return Dataset(x, y[:, None], source="linear", seed=seed)


def gen_nonlinear(n: int, seed: int = 0) -> Dataset:
    """Seven uniform features, label mixing powers, an exponential, a sine."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = stream("dataset", seed)
    x = rng.random((n, 7))
    y = (
        x[:, 0]
        + x[:, 1] ** 2
        + x[:, 2] ** 3
        + x[:, 3] ** 4
        + x[:, 4] ** 5
        + np.exp(x[:, 5])
        + np.sin(x[:, 6])
    )
    return Dataset(x, y[:, None], source="nonlinear", seed=seed)


def gen_moons(n: int, noise_level: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaved half-circle point clouds with one-hot labels.

    First class sits on the upper unit half-circle; the second is that arc
    flipped and translated so the two interleave. Gaussian jitter of scale
    ``noise_level`` is added to every coordinate.
    """
    if n < 2:
        raise ConfigError(f"n must be >= 2, got {n}")
    n_out = n // 2
    n_in = n - n_out
    t_out = np.linspace(0.0, math.pi, n_out)
    t_in = np.linspace(0.0, math.pi, n_in)
    pts = np.concatenate(
        [
            np.column_stack([np.cos(t_out), np.sin(t_out)]),
            np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)]),
        ]
    )
    if noise_level > 0:
        rng = stream("dataset", seed)
        pts = pts + noise_level * rng.standard_normal(pts.shape)
    labels = np.zeros((n, 2))
    labels[:n_out, 0] = 1.0
    labels[n_out:, 1] = 1.0
    return Dataset(pts, labels, source="moons", seed=seed)


def load_table(paths, feature_columns, label_column: str) -> Dataset:
    """Load one or more comma-separated files with a shared header line.

    Multiple paths are concatenated in the order given. Columns are selected
    by name; a missing column raises a schema error, an unparsable cell a
    parse error naming the row.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    feature_columns = list(feature_columns)
    blocks_x, blocks_y = [], []
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise DataError(f"table file not found: {path}")
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{path} is empty")
            header = [h.strip() for h in header]
            try:
                fidx = [header.index(c) for c in feature_columns]
                lidx = header.index(label_column)
            except ValueError as e:
                raise SchemaError(f"{path}: {e}; columns present: {header}")
            rows_x, rows_y = [], []
            for i, row in enumerate(reader):
                if not row:
                    continue
                try:
                    rows_x.append([float(row[j]) for j in fidx])
                    rows_y.append(float(row[lidx]))
                except (ValueError, IndexError):
                    raise ParseError(f"{path}: unparsable row {i + 1}", row=i + 1)
        blocks_x.append(np.array(rows_x))
        blocks_y.append(np.array(rows_y))
    x = np.concatenate(blocks_x)
    y = np.concatenate(blocks_y)
    source = "table:" + ",".join(Path(p).name for p in paths)
    return Dataset(x, y[:, None], source=source)


def read_idx(path) -> np.ndarray:
    """Read one IDX file (big-endian magic, dimension sizes, raw bytes)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"image file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < 4:
        raise FormatError(f"{path}: too short for an IDX header")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic not in (IDX_MAGIC_IMAGES, IDX_MAGIC_LABELS):
        raise FormatError(f"{path}: bad IDX magic 0x{magic:08x}")
    ndim = magic & 0xFF
    dims = struct.unpack(f">{ndim}I", raw[4 : 4 + 4 * ndim])
    expect = 4 + 4 * ndim + int(np.prod(dims))
    if len(raw) != expect:
        raise FormatError(f"{path}: expected {expect} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim).reshape(dims)


def write_idx_images(path, images: np.ndarray) -> None:
    """Write a uint8 image stack (n, rows, cols) as an IDX file."""
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise ShapeError(f"expected (n, rows, cols), got {images.shape}")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_MAGIC_IMAGES, *images.shape))
        fh.write(images.tobytes())


def gen_glyph_images(n: int, seed: int = 0, size: int = 28) -> np.ndarray:
    """Procedural grayscale glyphs: Gaussian ink along 2-3 random strokes.

    Returns a uint8 stack (n, size, size) suitable for write_idx_images.
    The images live on a low-dimensional stroke manifold, so a small
    autoencoder can learn them from few examples; they stand in for
    handwritten digits in desk-scale reconstruction runs.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = stream("dataset", seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    out = np.zeros((n, size, size))
    margin = max(2, size // 7)
    for i in range(n):
        img = np.zeros((size, size))
        for _ in range(int(rng.integers(2, 4))):
            p0 = rng.uniform(margin, size - margin, 2)
            p1 = rng.uniform(margin, size - margin, 2)
            width = rng.uniform(1.0, 2.2)
            for t in np.linspace(0.0, 1.0, 24):
                c = p0 + t * (p1 - p0)
                img += np.exp(-((yy - c[0]) ** 2 + (xx - c[1]) ** 2) / (2.0 * width**2))
        img /= img.max()
        out[i] = img
    return np.rint(out * 255).astype(np.uint8)


def load_images(path, limit: int | None = None) -> Dataset:
    """Load flattened grayscale images as a reconstruction dataset.

    Accepts an IDX image file or a directory of binary batches (one label
    byte plus 3072 pixel bytes per record). Pixels are scaled into [0, 1]
    and the labels are the features themselves (reconstruction target).
    """
    p = Path(path)
    if not p.exists():
        raise DataError(f"image path not found: {p}")
    if p.is_dir():
        files = sorted(p.glob("*.bin"))
        if not files:
            raise FormatError(f"{p}: no .bin batch files found")
        blocks = []
        for f in files:
            raw = np.frombuffer(f.read_bytes(), dtype=np.uint8)
            if raw.size % CIFAR_RECORD_BYTES != 0:
                raise FormatError(f"{f}: size {raw.size} is not a whole number of records")
            recs = raw.reshape(-1, CIFAR_RECORD_BYTES)
            blocks.append(recs[:, 1:])
        pixels = np.concatenate(blocks)
        source = f"images:{p.name}/"
    else:
        arr = read_idx(p)
        if arr.ndim != 3:
            raise FormatError(f"{p}: expected a 3-d image stack, got {arr.ndim} dims")
        pixels = arr.reshape(arr.shape[0], -1)
        source = f"images:{p.name}"
    if limit is not None:
        pixels = pixels[:limit]
    x = pixels.astype(np.float64) / 255.0
    return Dataset(x, x.copy(), source=source)


def standardize(train: Dataset, others=()) -> tuple[Dataset, list[Dataset]]:
    """Center and scale features by the train split's column statistics.

    Columns with vanishing spread are left unscaled. The same affine
    transform is applied to every dataset in ``others``.
    """
    if train.n == 0:
        raise DataError("cannot standardize an empty training split")
    mu = train.features.mean(axis=0)
    sigma = train.features.std(axis=0)
    sigma = np.where(sigma < 1e-12, 1.0, sigma)

    def apply(ds: Dataset) -> Dataset:
        return replace(
            ds,
            features=(ds.features - mu) / sigma,
            standardized=True,
            feature_mean=mu,
            feature_std=sigma,
        )

    return apply(train), [apply(ds) for ds in others]


def unstandardize_features(ds: Dataset) -> np.ndarray:
    if not ds.standardized or ds.feature_mean is None:
        raise DataError("dataset is not standardized")
    return ds.features * ds.feature_std + ds.feature_mean


def split_random(
    ds: Dataset, fraction: float | None = None, seed: int = 0, train_count: int | None = None
) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive random partition, reproducible under the seed."""
    n = ds.n
    if train_count is not None:
        k = int(train_count)
    else:
        if fraction is None or not 0.0 <= fraction <= 1.0:
            raise ConfigError(f"train fraction must be in [0, 1], got {fraction}")
        k = int(n * fraction)
    if not 0 <= k <= n:
        raise ConfigError(f"train count {k} out of range for {n} rows")
    order = stream("split", seed).permutation(n)
    tr = np.sort(order[:k])
    te = np.sort(order[k:])
    return ds.take(tr), ds.take(te)


def roi_mask(ds: Dataset) -> np.ndarray:
    """Rows whose every coordinate lies within half a deviation of the mean."""
    mu = ds.features.mean(axis=0)
    sigma = ds.features.std(axis=0)
    return np.all(np.abs(ds.features - mu) < 0.5 * sigma, axis=1)


def split_biased(ds: Dataset, gamma: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Partition with membership bias toward or away from the feature mean.

    Rows inside the region of interest enter train with probability gamma,
    rows outside with probability 1 - gamma, each independently.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    inside = roi_mask(ds)
    u = stream("split", seed).random(ds.n)
    to_train = np.where(inside, u < gamma, u < 1.0 - gamma)
    if not to_train.any() or to_train.all():
        raise DegenerateSplitError(
            f"biased split with gamma={gamma} left an empty side "
            f"({int(to_train.sum())} train of {ds.n}); retry with another seed"
        )
    idx = np.arange(ds.n)
    return ds.take(idx[to_train]), ds.take(idx[~to_train])


def add_noise(train: Dataset, beta: float, seed: int = 0) -> Dataset:
    """Add scaled per-coordinate standard normal noise to the features."""
    if beta == 0.0:
        return train
    zeta = stream("noise", seed).standard_normal(train.features.shape)
    return replace(train, features=train.features + beta * zeta)


def save_table(path, ds: Dataset) -> None:
    """Write a dataset as a comma-separated file with an x1..xd,y1..yc header."""
    cols = [f"x{i + 1}" for i in range(ds.d)]
    cols += ["y"] if ds.c == 1 else [f"y{i + 1}" for i in range(ds.c)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for xr, yr in zip(ds.features, ds.labels):
            writer.writerow([f"{v:.17g}" for v in xr] + [f"{v:.17g}" for v in yr])
