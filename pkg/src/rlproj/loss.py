"""Loss functions: squared error, the hyperplane-projection loss, and mixup.

The projection loss fits least-squares hyperplanes to a batch's
(features, labels) and (features, predictions) pairs and penalizes the
squared gap between the two hyperplanes evaluated at a probe feature point.
Writing the probe pullback w as the minimum-norm solution of X^T w ~ probe,
the value is ||R^T w||^2 for residual R = Y - H, and the sensitivity with
respect to H is the exact closed form -2 w v^T with v = R^T w (w depends
only on the batch features and the probe, never on H).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .batching import balanced_batches
from .errors import BatchSizeMismatch, NumericError, ShapeError
from .linalg import DEFAULT_RTOL, pullback
from .model import ModelParams, ForwardCache, forward
from .rng import stream


@dataclass
class LossOutput:
    value: float
    dL_dH: np.ndarray  # sensitivity w.r.t. the evaluated model outputs


def _aligned(H, Y, names=("predictions", "labels")):
    H = np.ascontiguousarray(H, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if H.shape != Y.shape:
        raise ShapeError(f"{names[0]} {H.shape} vs {names[1]} {Y.shape}")
    return H, Y


def mse(H, Y) -> LossOutput:
    """Mean over rows of the squared row-residual norm; gradient 2(H - Y)/n."""
    H, Y = _aligned(H, Y)
    n = H.shape[0]
    r = H - Y
    return LossOutput(value=float(np.sum(r * r) / n), dL_dH=2.0 * r / n)


def cross_entropy(H, Y) -> LossOutput:
    """Softmax cross entropy against one-hot labels (classification baseline)."""
    H, Y = _aligned(H, Y)
    n = H.shape[0]
    z = H - H.max(axis=1, keepdims=True)
    ez = np.exp(z)
    p = ez / ez.sum(axis=1, keepdims=True)
    value = float(-np.sum(Y * (z - np.log(ez.sum(axis=1, keepdims=True)))) / n)
    return LossOutput(value=value, dL_dH=(p - Y) / n)


def rlp_batch(Xb, Yb, Hb, x_probe, rtol: float = DEFAULT_RTOL, label: str = "") -> LossOutput:
    """Squared hyperplane gap of one batch, evaluated at a probe point.

    Xb is M x d, Yb and Hb are row-aligned M x c, x_probe a d-vector. The
    value is quadratic in the probe and zero exactly when Hb equals Yb.
    """
    Xb = np.ascontiguousarray(Xb, dtype=np.float64)
    Hb, Yb = _aligned(Hb, Yb)
    if Xb.shape[0] != Yb.shape[0]:
        raise ShapeError(f"features have {Xb.shape[0]} rows, targets {Yb.shape[0]}")
    w = pullback(Xb, x_probe, rtol)
    v = (Yb - Hb).T @ w
    value = float(v @ v)
    out = LossOutput(value=value, dL_dH=-2.0 * np.outer(w, v))
    if not np.isfinite(out.value) or not np.all(np.isfinite(out.dL_dH)):
        where = f" ({label})" if label else ""
        raise NumericError(f"non-finite projection loss{where}")
    return out


def mixup_pairs(Xa, Ya, Xb, Yb, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise convex combination of two row-aligned batches."""
    Xa, Xb = _aligned(Xa, Xb, names=("first batch", "second batch"))
    Ya, Yb = _aligned(Ya, Yb, names=("first labels", "second labels"))
    lam = float(lam)
    return lam * Xa + (1.0 - lam) * Xb, lam * Ya + (1.0 - lam) * Yb


def rlp_mixup_batch(
    params: ModelParams, Xa, Ya, Xb, Yb, lam: float, rtol: float = DEFAULT_RTOL
) -> tuple[LossOutput, ForwardCache]:
    """Projection loss on a mixed batch, summed over the batch's own rows.

    The two batches are convexly combined, the model is evaluated on the
    mixed features, and the loss is the squared sum over rows k of the
    hyperplane gap at x_k. Summing first is equivalent to probing at the
    column sum of the mixed features, which is how it is computed here.
    Unequal batch sizes raise BatchSizeMismatch as a skip signal.
    """
    Xa = np.asarray(Xa)
    Xb = np.asarray(Xb)
    if Xa.shape[0] != Xb.shape[0]:
        raise BatchSizeMismatch(f"{Xa.shape[0]} rows vs {Xb.shape[0]} rows")
    Xm, Ym = mixup_pairs(Xa, Ya, Xb, Yb, lam)
    H, cache = forward(params, Xm)
    probe = Xm.sum(axis=0)
    out = rlp_batch(Xm, Ym, H, probe, rtol=rtol, label="mixed batch")
    return out, cache


def probe_index(prng: np.random.Generator, n: int, batch) -> int:
    """Draw a probe row index, distinct from the batch rows whenever possible."""
    i = int(prng.integers(n))
    if n > len(batch):
        members = set(int(j) for j in batch)
        while i in members:
            i = int(prng.integers(n))
    return i


def rlp_metric(
    params: ModelParams, ds, M: int, K: int, seed: int = 0, rtol: float = DEFAULT_RTOL
) -> float:
    """Mean projection loss over a fresh batch set on a dataset.

    Deterministic given (M, K, seed); reported alongside the test MSE as the
    second evaluation column.
    """
    bs = balanced_batches(ds.n, M, K, seed)
    prng = stream("probe", seed)
    X, Y = ds.features, ds.labels
    total = 0.0
    for j, b in enumerate(bs):
        Xb = X[b]
        H, _ = forward(params, Xb)
        p = probe_index(prng, ds.n, b)
        total += rlp_batch(Xb, Y[b], H, X[p], rtol=rtol, label=f"metric batch {j}").value
    return total / len(bs)
