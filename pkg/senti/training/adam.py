from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import ConfigError, ShapeError
from ..nets import ModelParams
from ..tensor import Tensor


@dataclass(frozen=True)
class AdamConfig:
    """Adam hyper-parameters and the step-halving learning-rate schedule."""

    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    halve_every: int = 5000

    def __post_init__(self):
        if not self.lr > 0 or not math.isfinite(self.lr):
            raise ConfigError(f"lr must be positive, got {self.lr}")
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in [0, 1), got {getattr(self, name)}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.halve_every < 1:
            raise ConfigError(f"halve_every must be at least 1, got {self.halve_every}")

    def lr_at(self, iteration: int) -> float:
        """lr / 2**floor(iteration / halve_every)."""
        return self.lr / 2 ** (iteration // self.halve_every)


@dataclass(frozen=True)
class AdamState:
    """First and second moments keyed by parameter name, plus the step count."""

    m: Mapping[str, np.ndarray]
    v: Mapping[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros(cls, params: Mapping[str, Tensor]) -> "AdamState":
        m = {name: np.zeros(t.shape, dtype=np.float32) for name, t in params.items()}
        v = {name: np.zeros(t.shape, dtype=np.float32) for name, t in params.items()}
        return cls(m, v, 0)


def adam_step(
    params: ModelParams,
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    config: AdamConfig,
    iteration: int | None = None,
) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update of the parameters named in `grads`.

    The learning rate follows `config.lr_at(iteration)`; `iteration` defaults
    to the state's own step count.
    """
    schedule_step = state.step if iteration is None else iteration
    lr = np.float32(config.lr_at(schedule_step))
    beta1, beta2, eps = np.float32(config.beta1), np.float32(config.beta2), np.float32(config.eps)
    t = state.step + 1
    correction1 = np.float32(1 - config.beta1**t)
    correction2 = np.float32(1 - config.beta2**t)

    m, v, updates = dict(state.m), dict(state.v), {}
    for name, g in grads.items():
        if name not in state.m:
            raise ShapeError(f"no optimizer moments for parameter '{name}'")
        g = np.asarray(g, dtype=np.float32)
        if g.shape != params[name].shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} does not match parameter shape {params[name].shape}")
        m[name] = (beta1 * state.m[name] + (1 - beta1) * g).astype(np.float32)
        v[name] = (beta2 * state.v[name] + (1 - beta2) * g * g).astype(np.float32)
        m_hat = m[name] / correction1
        v_hat = v[name] / correction2
        step = lr * m_hat / (np.sqrt(v_hat) + eps)
        updates[name] = (params[name].data - step).astype(params[name].dtype)
    return params.replace(updates), AdamState(m, v, t)
