"""Training loops, evaluation, and metrics records.

``train_rlp`` is the projection-loss epoch loop: one fixed batch set, fresh
probes every epoch, and either a single averaged optimizer step per epoch
(default, matching the loss-averaging formulation) or one step per batch.
``train_baseline`` covers plain/L2/mixup squared-error and cross-entropy
minibatch training; ``train_rlp_mixup`` pairs two independent batch sets
and mixes them before each hyperplane fit.

Determinism contract: every numeric field of the emitted MetricsRecords is
reproducible from the config and seeds; wall_seconds is the one exception.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .batching import balanced_batches
from .data import Dataset
from .errors import BatchSizeMismatch, ConfigError
from .linalg import DEFAULT_RTOL
from .loss import cross_entropy, mixup_pairs, mse, probe_index, rlp_batch, rlp_metric, rlp_mixup_batch
from .model import (
    ModelParams,
    backward,
    bundle_add_,
    bundle_scale_,
    forward,
    save_checkpoint,
    zero_bundle,
)
from .optim import make_optimizer, step
from .rng import stream

LOSS_KINDS = ("mse", "mse_l2", "mse_mixup", "rlp", "rlp_mixup", "cross_entropy")
TASKS = ("regression", "reconstruction", "classification")


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "rlp"
    optimizer: str = "adam"
    lr: float = 1e-4
    epochs: int = 200
    batch_size: int = 0          # M; 0 resolves to d+2, or n//2 when d+2 > n
    batch_count: int = 1000      # K
    minibatch: int = 64          # baseline minibatch size
    weight_decay: float = 0.0
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    mixup_psi: float = 0.25
    update: str = "per_epoch"    # per_epoch | per_batch
    probe_mode: str = "resample"  # resample | frozen
    seed: int = 0
    eval_every: int = 10
    eval_batches: int = 100      # K for the projection metric at eval time
    rtol: float = DEFAULT_RTOL
    task: str = "regression"
    checkpoint_epochs: tuple = ()
    data_tag: str = ""  # digest of the data/split/noise/model pipeline, set by config resolution

    def validate(self) -> "TrainConfig":
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"unknown loss {self.loss!r}; choose from {LOSS_KINDS}")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {TASKS}")
        if self.update not in ("per_epoch", "per_batch"):
            raise ConfigError(f"update must be per_epoch or per_batch, got {self.update!r}")
        if self.probe_mode not in ("resample", "frozen"):
            raise ConfigError(f"probe_mode must be resample or frozen, got {self.probe_mode!r}")
        if self.loss in ("rlp", "rlp_mixup") and self.batch_count < 1:
            raise ConfigError("projection losses need batch_count >= 1")
        if self.loss in ("mse_mixup", "rlp_mixup") and not self.mixup_psi > 0:
            raise ConfigError("mixup losses need mixup_psi > 0")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        return self

    def resolved_batch_size(self, n: int, d: int) -> int:
        if self.batch_size > 0:
            return self.batch_size
        if d + 2 <= n:
            return d + 2
        return max(2, n // 2)

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class MetricsRecord:
    epoch: int
    train_loss: float
    test_mse: float
    test_rlp: float
    accuracy: float
    f1: float
    wall_seconds: float
    config_hash: str

    CSV_FIELDS = ("epoch", "train_loss", "test_mse", "test_rlp", "accuracy", "f1", "wall_seconds", "config_hash")


def write_metrics_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MetricsRecord.CSV_FIELDS)
        for r in records:
            writer.writerow([
                r.epoch,
                f"{r.train_loss:.17g}",
                f"{r.test_mse:.17g}",
                f"{r.test_rlp:.17g}",
                f"{r.accuracy:.17g}",
                f"{r.f1:.17g}",
                f"{r.wall_seconds:.6f}",
                r.config_hash,
            ])


def read_metrics_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(
                MetricsRecord(
                    epoch=int(row["epoch"]),
                    train_loss=float(row["train_loss"]),
                    test_mse=float(row["test_mse"]),
                    test_rlp=float(row["test_rlp"]),
                    accuracy=float(row["accuracy"]),
                    f1=float(row["f1"]),
                    wall_seconds=float(row["wall_seconds"]),
                    config_hash=row["config_hash"],
                )
            )
    return out


def accuracy_and_macro_f1(H: np.ndarray, Y: np.ndarray) -> tuple[float, float]:
    """Argmax accuracy and unweighted mean per-class F1."""
    pred = H.argmax(axis=1)
    true = Y.argmax(axis=1)
    acc = float(np.mean(pred == true))
    f1s = []
    for k in range(Y.shape[1]):
        tp = np.sum((pred == k) & (true == k))
        fp = np.sum((pred == k) & (true != k))
        fn = np.sum((pred != k) & (true == k))
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom > 0 else 0.0)
    return acc, float(np.mean(f1s))


def evaluate(
    params: ModelParams,
    test_ds: Dataset,
    M: int,
    K: int,
    seed: int = 0,
    task: str = "regression",
    rtol: float = DEFAULT_RTOL,
) -> MetricsRecord:
    """Test metrics on a held-out dataset.

    test_mse is the mean squared error per output element (identical to the
    mean squared row-residual norm when there is a single output).
    """
    H, _ = forward(params, test_ds.features)
    test_mse = float(np.mean((H - test_ds.labels) ** 2))
    m_eval = min(M, test_ds.n)
    test_rlp = rlp_metric(params, test_ds, m_eval, K, seed=seed, rtol=rtol)
    acc = f1 = math.nan
    if task == "classification":
        acc, f1 = accuracy_and_macro_f1(H, test_ds.labels)
    return MetricsRecord(
        epoch=0,
        train_loss=math.nan,
        test_mse=test_mse,
        test_rlp=test_rlp,
        accuracy=acc,
        f1=f1,
        wall_seconds=0.0,
        config_hash="",
    )


class _Recorder:
    """Collects one MetricsRecord per eval point."""

    def __init__(self, cfg: TrainConfig, test_ds, M: int):
        self.cfg = cfg
        self.test_ds = test_ds
        self.M = M
        self.hash = cfg.config_hash()
        self.t0 = time.perf_counter()
        self.records: list = []

    def due(self, epoch: int) -> bool:
        if self.cfg.eval_every <= 0:
            return epoch == self.cfg.epochs
        return epoch % self.cfg.eval_every == 0 or epoch == self.cfg.epochs

    def emit(self, epoch: int, train_loss: float, params: ModelParams) -> None:
        test_mse = test_rlp = acc = f1 = math.nan
        if self.test_ds is not None and self.test_ds.n > 0:
            ev = evaluate(
                params,
                self.test_ds,
                self.M,
                self.cfg.eval_batches,
                seed=self.cfg.seed,
                task=self.cfg.task,
                rtol=self.cfg.rtol,
            )
            test_mse, test_rlp, acc, f1 = ev.test_mse, ev.test_rlp, ev.accuracy, ev.f1
        self.records.append(
            MetricsRecord(
                epoch=epoch,
                train_loss=train_loss,
                test_mse=test_mse,
                test_rlp=test_rlp,
                accuracy=acc,
                f1=f1,
                wall_seconds=time.perf_counter() - self.t0,
                config_hash=self.hash,
            )
        )


def _maybe_checkpoint(cfg: TrainConfig, epoch: int, params: ModelParams, run_dir) -> None:
    if run_dir is not None and epoch in set(cfg.checkpoint_epochs):
        save_checkpoint(Path(run_dir) / f"checkpoint_epoch{epoch}.bin", params)


def train_rlp(
    cfg: TrainConfig, params: ModelParams, train_ds: Dataset, test_ds: Dataset = None, run_dir=None
) -> tuple[ModelParams, list]:
    """Projection-loss training over one fixed balanced batch set."""
    cfg.validate()
    n, d = train_ds.features.shape
    M = cfg.resolved_batch_size(n, d)
    bs = balanced_batches(n, M, cfg.batch_count, cfg.seed)
    K = len(bs)
    prng = stream("probe", cfg.seed)
    frozen = None
    if cfg.probe_mode == "frozen":
        frozen = [probe_index(prng, n, b) for b in bs]
    opt = make_optimizer(
        cfg.optimizer, params, cfg.lr,
        momentum=cfg.momentum, beta1=cfg.beta1, beta2=cfg.beta2,
        eps=cfg.eps, weight_decay=cfg.weight_decay,
    )
    rec = _Recorder(cfg, test_ds, M)
    X, Y = train_ds.features, train_ds.labels
    for epoch in range(1, cfg.epochs + 1):
        accum = zero_bundle(params) if cfg.update == "per_epoch" else None
        epoch_loss = 0.0
        for j, idx in enumerate(bs):
            Xb = X[idx]
            H, cache = forward(params, Xb)
            p = frozen[j] if frozen is not None else probe_index(prng, n, idx)
            out = rlp_batch(Xb, Y[idx], H, X[p], rtol=cfg.rtol, label=f"epoch {epoch} batch {j}")
            g = backward(params, cache, out.dL_dH, out.value)
            epoch_loss += out.value
            if cfg.update == "per_batch":
                step(opt, params, g)
            else:
                bundle_add_(accum, g)
        if cfg.update == "per_epoch":
            bundle_scale_(accum, 1.0 / K)
            step(opt, params, accum)
        if rec.due(epoch):
            rec.emit(epoch, epoch_loss / K, params)
        _maybe_checkpoint(cfg, epoch, params, run_dir)
    return params, rec.records


def train_baseline(
    cfg: TrainConfig, params: ModelParams, train_ds: Dataset, test_ds: Dataset = None, run_dir=None
) -> tuple[ModelParams, list]:
    """Minibatch training with squared-error (optionally L2 or mixup) or cross entropy."""
    cfg.validate()
    if cfg.loss not in ("mse", "mse_l2", "mse_mixup", "cross_entropy"):
        raise ConfigError(f"train_baseline cannot run loss {cfg.loss!r}")
    n, d = train_ds.features.shape
    M = cfg.resolved_batch_size(n, d)
    srng = stream("batching", cfg.seed)
    mrng = stream("mixup", cfg.seed)
    loss_fn = cross_entropy if cfg.loss == "cross_entropy" else mse
    opt = make_optimizer(
        cfg.optimizer, params, cfg.lr,
        momentum=cfg.momentum, beta1=cfg.beta1, beta2=cfg.beta2,
        eps=cfg.eps, weight_decay=cfg.weight_decay,
    )
    rec = _Recorder(cfg, test_ds, M)
    X, Y = train_ds.features, train_ds.labels
    B = cfg.minibatch
    for epoch in range(1, cfg.epochs + 1):
        order = srng.permutation(n)
        order2 = srng.permutation(n) if cfg.loss == "mse_mixup" else None
        epoch_loss = 0.0
        n_batches = 0
        for s in range(0, n, B):
            idx = order[s : s + B]
            if cfg.loss == "mse_mixup":
                idx2 = order2[s : s + B]
                lam = float(mrng.beta(cfg.mixup_psi, cfg.mixup_psi))
                Xm, Ym = mixup_pairs(X[idx], Y[idx], X[idx2], Y[idx2], lam)
            else:
                Xm, Ym = X[idx], Y[idx]
            H, cache = forward(params, Xm)
            out = loss_fn(H, Ym)
            g = backward(params, cache, out.dL_dH, out.value)
            step(opt, params, g)
            epoch_loss += out.value
            n_batches += 1
        if rec.due(epoch):
            rec.emit(epoch, epoch_loss / n_batches, params)
        _maybe_checkpoint(cfg, epoch, params, run_dir)
    return params, rec.records


def train_rlp_mixup(
    cfg: TrainConfig, params: ModelParams, train_ds: Dataset, test_ds: Dataset = None, run_dir=None
) -> tuple[ModelParams, list]:
    """Projection-loss training on convex combinations of paired batches."""
    cfg.validate()
    n, d = train_ds.features.shape
    M = cfg.resolved_batch_size(n, d)
    bs_a = balanced_batches(n, M, cfg.batch_count, cfg.seed)
    bs_b = balanced_batches(n, M, cfg.batch_count, cfg.seed + 1)
    K = len(bs_a)
    mrng = stream("mixup", cfg.seed)
    opt = make_optimizer(
        cfg.optimizer, params, cfg.lr,
        momentum=cfg.momentum, beta1=cfg.beta1, beta2=cfg.beta2,
        eps=cfg.eps, weight_decay=cfg.weight_decay,
    )
    rec = _Recorder(cfg, test_ds, M)
    X, Y = train_ds.features, train_ds.labels
    for epoch in range(1, cfg.epochs + 1):
        accum = zero_bundle(params) if cfg.update == "per_epoch" else None
        epoch_loss = 0.0
        for j in range(K):
            ia, ib = bs_a[j], bs_b[j]
            lam = float(mrng.beta(cfg.mixup_psi, cfg.mixup_psi))
            try:
                out, cache = rlp_mixup_batch(params, X[ia], Y[ia], X[ib], Y[ib], lam, rtol=cfg.rtol)
            except BatchSizeMismatch:
                continue
            g = backward(params, cache, out.dL_dH, out.value)
            epoch_loss += out.value
            if cfg.update == "per_batch":
                step(opt, params, g)
            else:
                bundle_add_(accum, g)
        if cfg.update == "per_epoch":
            bundle_scale_(accum, 1.0 / K)
            step(opt, params, accum)
        if rec.due(epoch):
            rec.emit(epoch, epoch_loss / K, params)
        _maybe_checkpoint(cfg, epoch, params, run_dir)
    return params, rec.records


def train(
    cfg: TrainConfig, params: ModelParams, train_ds: Dataset, test_ds: Dataset = None, run_dir=None
) -> tuple[ModelParams, list]:
    """Dispatch to the loop matching cfg.loss."""
    cfg.validate()
    if cfg.loss == "rlp":
        return train_rlp(cfg, params, train_ds, test_ds, run_dir)
    if cfg.loss == "rlp_mixup":
        return train_rlp_mixup(cfg, params, train_ds, test_ds, run_dir)
    return train_baseline(cfg, params, train_ds, test_ds, run_dir)
