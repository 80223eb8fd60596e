"""First-order update rules: sgd, sgd with Nesterov momentum, adam, adamw.

Weight decay is coupled into the gradient for sgd/sgd_nesterov/adam and
decoupled (applied directly to the parameters) for adamw, so adamw with
zero decay is bitwise the adam update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .model import GradientBundle, ModelParams

RULES = ("sgd", "sgd_nesterov", "adam", "adamw")


@dataclass
class OptimizerState:
    rule: str
    lr: float
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step_count: int = 0
    m: list = field(default_factory=list)  # momentum / first-moment buffers
    v: list = field(default_factory=list)  # second-moment buffers


def make_optimizer(
    rule: str,
    params: ModelParams,
    lr: float,
    momentum: float = 0.9,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> OptimizerState:
    if rule not in RULES:
        raise ConfigError(f"unknown optimizer {rule!r}; choose from {RULES}")
    tensors = _param_tensors(params)
    return OptimizerState(
        rule=rule,
        lr=lr,
        momentum=momentum,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        weight_decay=weight_decay,
        m=[np.zeros_like(t) for t in tensors],
        v=[np.zeros_like(t) for t in tensors],
    )


def _param_tensors(params: ModelParams) -> list:
    out = []
    for l in params.layers:
        out.append(l.weight)
        out.append(l.bias)
    return out


def _grad_tensors(grads: GradientBundle) -> list:
    out = []
    for w, b in zip(grads.weight_grads, grads.bias_grads):
        out.append(w)
        out.append(b)
    return out


def step(state: OptimizerState, params: ModelParams, grads: GradientBundle) -> ModelParams:
    """Apply one in-place update; aborts on non-finite gradients."""
    tensors = _param_tensors(params)
    gs = _grad_tensors(grads)
    if len(tensors) != len(gs):
        raise ConfigError("gradient bundle does not match parameter layout")
    for i, g in enumerate(gs):
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter tensor {i} at step {state.step_count + 1}")
    state.step_count += 1
    t = state.step_count
    lr, wd, mu = state.lr, state.weight_decay, state.momentum
    b1, b2, eps = state.beta1, state.beta2, state.eps
    for i, (p, g) in enumerate(zip(tensors, gs)):
        if state.rule == "sgd":
            p -= lr * (g + wd * p)
        elif state.rule == "sgd_nesterov":
            geff = g + wd * p
            buf = state.m[i]
            buf *= mu
            buf += geff
            p -= lr * (geff + mu * buf)
        elif state.rule == "adam":
            geff = g + wd * p
            state.m[i] = b1 * state.m[i] + (1.0 - b1) * geff
            state.v[i] = b2 * state.v[i] + (1.0 - b2) * geff * geff
            mhat = state.m[i] / (1.0 - b1**t)
            vhat = state.v[i] / (1.0 - b2**t)
            p -= lr * mhat / (np.sqrt(vhat) + eps)
        else:  # adamw: decay decoupled from the moments
            p *= 1.0 - lr * wd
            state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
            state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
            mhat = state.m[i] / (1.0 - b1**t)
            vhat = state.v[i] / (1.0 - b2**t)
            p -= lr * mhat / (np.sqrt(vhat) + eps)
    return params
