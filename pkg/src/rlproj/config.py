"""Run configuration: YAML schema, per-dataset defaults, run manifests.

A run config is a YAML file with nested sections (run / data / split /
noise / model / train, plus ablate for grid runs). Every key left
unspecified falls back to the per-dataset, per-profile defaults below, and
the fully resolved configuration is echoed into the run manifest so a run
can be audited without rereading code.
"""

from __future__ import annotations

import json
from pathlib import Path

import yaml

from .data import (
    Dataset,
    add_noise,
    gen_glyph_images,
    gen_linear,
    gen_moons,
    gen_nonlinear,
    load_images,
    load_table,
    split_biased,
    split_random,
    standardize,
)
from .errors import ConfigError
from .model import build_autoencoder, build_moons_classifier, build_regression_net
from .trainer import TrainConfig

PROFILES = ("no_ablation", "limited", "shift", "noise")

# (optimizer, lr, weight_decay for the L2 baseline, mixup shape psi) per profile
_HP = {
    "california": {
        "no_ablation": ("adam", 1e-4, 1e-4, 0.25),
        "limited": ("adamw", 5e-4, 1e-2, 0.25),
        "shift": ("adam", 1e-4, 1e-4, 0.25),
        "noise": ("adam", 1e-4, 1e-4, 0.25),
    },
    "wine": {
        "no_ablation": ("adam", 1e-4, 1e-4, 0.25),
        "limited": ("adamw", 5e-3, 1e-2, 0.25),
        "shift": ("adam", 1e-4, 1e-4, 0.25),
        "noise": ("adam", 1e-4, 1e-4, 0.25),
    },
    "linear": {
        "no_ablation": ("adam", 1e-4, 1e-4, 0.25),
        "limited": ("adamw", 5e-4, 1e-2, 0.25),
        "shift": ("adam", 1e-4, 1e-4, 0.25),
        "noise": ("adam", 1e-4, 1e-4, 0.25),
    },
    "nonlinear": {
        "no_ablation": ("adam", 1e-4, 1e-4, 0.25),
        "limited": ("adamw", 5e-4, 1e-2, 0.25),
        "shift": ("adam", 1e-4, 1e-4, 0.25),
        "noise": ("adam", 1e-4, 1e-4, 0.25),
    },
    "mnist": {p: ("sgd_nesterov", 1e-2, 1e-4, 0.25) for p in PROFILES},
    "cifar": {p: ("sgd_nesterov", 1e-2, 1e-4, 0.25) for p in PROFILES},
    "glyphs": {p: ("sgd_nesterov", 1e-2, 1e-4, 0.25) for p in PROFILES},
    "moons": {p: ("adam", 1e-3, 1e-4, 0.15) for p in PROFILES},
    "table": {
        "no_ablation": ("adam", 1e-4, 1e-4, 0.25),
        "limited": ("adamw", 5e-4, 1e-2, 0.25),
        "shift": ("adam", 1e-4, 1e-4, 0.25),
        "noise": ("adam", 1e-4, 1e-4, 0.25),
    },
}

_EPOCHS = {
    "california": 500, "wine": 200, "linear": 200, "nonlinear": 200,
    "mnist": 100, "cifar": 50, "glyphs": 50, "moons": 200, "table": 200,
}

_STANDARDIZE = {
    "california": True, "wine": True, "table": True,
    "linear": False, "nonlinear": False, "moons": False,
    "mnist": False, "cifar": False, "glyphs": False,
}

_TASK = {
    "mnist": "reconstruction", "cifar": "reconstruction", "glyphs": "reconstruction",
    "moons": "classification",
}

ADAMW_DEFAULT_DECAY = 1e-4

_SECTIONS = {
    "run": {"name", "seed", "out"},
    "data": {"source", "n", "noise_level", "path", "paths", "feature_columns",
             "label_column", "limit", "standardize"},
    "split": {"mode", "train_fraction", "train_count", "gamma", "seed"},
    "noise": {"beta", "seed"},
    "model": {"arch", "hidden", "latent", "seed"},
    "train": {"loss", "epochs", "batch_size", "batch_count", "minibatch", "optimizer",
              "lr", "weight_decay", "momentum", "beta1", "beta2", "eps", "mixup_psi",
              "update", "probe_mode", "eval_every", "eval_batches", "rtol",
              "checkpoint_epochs", "task"},
    "ablate": {"axis", "values", "losses", "out_prefix"},
}


def load_yaml(path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}")
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def _check_keys(raw: dict) -> None:
    for section, body in raw.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        unknown = set(body) - _SECTIONS[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")


def infer_profile(resolved: dict) -> str:
    if resolved["split"]["mode"] == "biased":
        return "shift"
    if resolved["noise"]["beta"] > 0:
        return "noise"
    tc = resolved["split"]["train_count"]
    if 0 < tc <= 100:
        return "limited"
    return "no_ablation"


def resolve_run(raw: dict, overrides: dict | None = None) -> dict:
    """Fill every unspecified key from the logged defaults.

    ``overrides`` maps flat keys (e.g. "train.update") to values supplied on
    the command line; they win over the file.
    """
    _check_keys(raw)
    cfg = {s: dict(raw.get(s) or {}) for s in _SECTIONS}
    for key, value in (overrides or {}).items():
        section, _, name = key.partition(".")
        if section not in _SECTIONS or name not in _SECTIONS[section]:
            raise ConfigError(f"unknown override {key!r}")
        cfg[section][name] = value

    run = cfg["run"]
    run.setdefault("name", "run")
    run.setdefault("seed", 0)
    run.setdefault("out", f"runs/{run['name']}")

    data = cfg["data"]
    source = data.setdefault("source", "linear")
    if source not in _HP:
        raise ConfigError(f"unknown data source {source!r}; choose from {sorted(_HP)}")
    data.setdefault("n", 6000)
    data.setdefault("noise_level", 0.1)
    data.setdefault("path", None)
    data.setdefault("paths", None)
    data.setdefault("feature_columns", None)
    data.setdefault("label_column", "y")
    data.setdefault("limit", None)
    data.setdefault("standardize", "auto")

    split = cfg["split"]
    split.setdefault("mode", "random")
    split.setdefault("train_fraction", 0.5)
    split.setdefault("train_count", 0)
    split.setdefault("gamma", 0.5)
    split.setdefault("seed", run["seed"])

    noise = cfg["noise"]
    noise.setdefault("beta", 0.0)
    noise.setdefault("seed", run["seed"])

    model = cfg["model"]
    model.setdefault("arch", "auto")
    model.setdefault("hidden", 32)
    model.setdefault("latent", 32)
    model.setdefault("seed", run["seed"])

    profile = infer_profile(cfg)
    opt, lr, wd_l2, psi = _HP[source][profile]

    train = cfg["train"]
    train.setdefault("loss", "rlp")
    train.setdefault("epochs", _EPOCHS[source])
    train.setdefault("batch_size", 0)
    train.setdefault("batch_count", 100 if profile == "limited" else 1000)
    train.setdefault("minibatch", 64)
    train.setdefault("optimizer", opt)
    train.setdefault("lr", lr)
    if "weight_decay" not in train:
        if train["loss"] == "mse_l2":
            train["weight_decay"] = wd_l2
        elif train["optimizer"] == "adamw":
            train["weight_decay"] = ADAMW_DEFAULT_DECAY
        else:
            train["weight_decay"] = 0.0
    train.setdefault("momentum", 0.9)
    train.setdefault("beta1", 0.9)
    train.setdefault("beta2", 0.999)
    train.setdefault("eps", 1e-8)
    train.setdefault("mixup_psi", psi)
    train.setdefault("update", "per_epoch")
    train.setdefault("probe_mode", "resample")
    train.setdefault("eval_every", 10)
    train.setdefault("eval_batches", 100)
    train.setdefault("rtol", 1e-10)
    train.setdefault("checkpoint_epochs", [])
    train.setdefault("task", _TASK.get(source, "regression"))

    cfg["profile"] = profile
    return cfg


def pipeline_digest(resolved: dict) -> str:
    """Digest of everything upstream of the optimizer: data, split, noise, model."""
    import hashlib

    payload = json.dumps(
        {k: resolved[k] for k in ("data", "split", "noise", "model")},
        sort_keys=True,
        default=str,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def make_train_config(resolved: dict) -> TrainConfig:
    t = resolved["train"]
    return TrainConfig(
        loss=t["loss"],
        optimizer=t["optimizer"],
        lr=float(t["lr"]),
        epochs=int(t["epochs"]),
        batch_size=int(t["batch_size"]),
        batch_count=int(t["batch_count"]),
        minibatch=int(t["minibatch"]),
        weight_decay=float(t["weight_decay"]),
        momentum=float(t["momentum"]),
        beta1=float(t["beta1"]),
        beta2=float(t["beta2"]),
        eps=float(t["eps"]),
        mixup_psi=float(t["mixup_psi"]),
        update=t["update"],
        probe_mode=t["probe_mode"],
        seed=int(resolved["run"]["seed"]),
        eval_every=int(t["eval_every"]),
        eval_batches=int(t["eval_batches"]),
        rtol=float(t["rtol"]),
        task=t["task"],
        checkpoint_epochs=tuple(int(e) for e in t["checkpoint_epochs"]),
        data_tag=pipeline_digest(resolved),
    ).validate()


def build_source_dataset(resolved: dict) -> Dataset:
    data = resolved["data"]
    source = data["source"]
    seed = int(resolved["run"]["seed"])
    if source == "linear":
        return gen_linear(int(data["n"]), seed)
    if source == "nonlinear":
        return gen_nonlinear(int(data["n"]), seed)
    if source == "moons":
        return gen_moons(int(data["n"]), float(data["noise_level"]), seed)
    if source == "glyphs":
        if data["path"]:
            return load_images(data["path"], data["limit"])
        imgs = gen_glyph_images(int(data["n"]), seed)
        return load_images_from_array(imgs, source="glyphs")
    if source in ("mnist", "cifar"):
        if not data["path"]:
            raise ConfigError(f"data source {source!r} needs data.path")
        return load_images(data["path"], data["limit"])
    # tabular files: california / wine / table
    paths = data["paths"] or data["path"]
    if not paths:
        raise ConfigError(f"data source {source!r} needs data.path or data.paths")
    if not data["feature_columns"]:
        raise ConfigError(f"data source {source!r} needs data.feature_columns")
    return load_table(paths, data["feature_columns"], data["label_column"])


def load_images_from_array(imgs, source: str) -> Dataset:
    x = imgs.reshape(imgs.shape[0], -1).astype(float) / 255.0
    return Dataset(x, x.copy(), source=source)


def build_datasets(resolved: dict) -> tuple[Dataset, Dataset]:
    """Construct, split, standardize, and noise the configured data."""
    ds = build_source_dataset(resolved)
    split = resolved["split"]
    if split["mode"] == "biased":
        train, test = split_biased(ds, float(split["gamma"]), int(split["seed"]))
    elif int(split["train_count"]) > 0:
        train, test = split_random(ds, seed=int(split["seed"]), train_count=int(split["train_count"]))
    else:
        train, test = split_random(ds, fraction=float(split["train_fraction"]), seed=int(split["seed"]))
    std = resolved["data"]["standardize"]
    do_std = _STANDARDIZE[resolved["data"]["source"]] if std == "auto" else bool(std in (True, "on"))
    if do_std:
        train, (test,) = standardize(train, [test])
    beta = float(resolved["noise"]["beta"])
    if beta > 0:
        train = add_noise(train, beta, int(resolved["noise"]["seed"]))
    return train, test


def build_model(resolved: dict, d: int):
    m = resolved["model"]
    arch = m["arch"]
    loss = resolved["train"]["loss"]
    if arch == "auto":
        task = resolved["train"]["task"]
        arch = {"reconstruction": "autoencoder", "classification": "moons_classifier"}.get(
            task, "regression"
        )
    seed = int(m["seed"])
    if arch == "regression":
        return build_regression_net(d, int(m["hidden"]), seed)
    if arch == "autoencoder":
        return build_autoencoder(d, int(m["latent"]), seed)
    if arch == "moons_classifier":
        return build_moons_classifier(seed, sigmoid_output=loss in ("rlp", "rlp_mixup"))
    raise ConfigError(f"unknown model arch {arch!r}")


def write_manifest(path, command: str, resolved: dict, cfg_hash: str, started: float, finished: float | None = None) -> None:
    import numpy

    manifest = {
        "command": command,
        "resolved_config": resolved,
        "config_hash": cfg_hash,
        "seeds": {
            "run": resolved["run"]["seed"],
            "split": resolved["split"]["seed"],
            "noise": resolved["noise"]["seed"],
            "model": resolved["model"]["seed"],
        },
        "out_dir": str(resolved["run"]["out"]),
        "versions": {"rlproj": "0.1.0", "numpy": numpy.__version__},
        "started": started,
        "finished": finished,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, default=str) + "\n")
