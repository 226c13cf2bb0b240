"""
Adam, the warmup/inverse-sqrt learning-rate schedule and weight clipping.
"""
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from adaptation.engine.tensor import Tensor
from adaptation.exceptions import ConfigurationError, NumericalError, ShapeError

BASE_LR = 1e-3


def lr_at(step: int, warmup: int = 100, scale: float = 1.0) -> float:
    """scale * 1e-3 * min(1/sqrt(step), step/warmup)."""
    if step < 1:
        raise ConfigurationError(f"Learning-rate schedule starts at step 1, got {step}")
    if warmup < 1:
        raise ConfigurationError(f"warmup must be at least 1, got {warmup}")
    return scale * BASE_LR * min(1.0 / np.sqrt(step), step / warmup)


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_parameters(cls, params: Mapping[str, Tensor], **kwargs) -> 'AdamState':
        return cls(
            m={name: np.zeros_like(p.data) for name, p in params.items()},
            v={name: np.zeros_like(p.data) for name, p in params.items()},
            **kwargs,
        )


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray],
              state: AdamState, lr: float) -> Mapping[str, Tensor]:
    """One bias-corrected Adam update, applied in place to ``params``."""
    if not lr > 0:
        raise ConfigurationError(f"Learning rate must be positive, got {lr}")
    for name, p in params.items():
        grad = grads.get(name)
        if grad is None:
            raise ShapeError(f"No gradient supplied for parameter '{name}'")
        if grad.shape != p.shape:
            raise ShapeError(f"Gradient for '{name}' has shape {grad.shape}, parameter has {p.shape}")
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"Non-finite gradient for parameter '{name}' at step {state.step + 1}")

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / (1.0 - b1 ** t)
        v_hat = state.v[name] / (1.0 - b2 ** t)
        # Never update in place; state snapshots share arrays.
        p.data = (p.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.data.dtype)
    return params


class Adam:
    """Adam over a fixed, named parameter group."""

    def __init__(self, params: Mapping[str, Tensor], beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = dict(params)
        self.state = AdamState.for_parameters(self.params, beta1=beta1, beta2=beta2, eps=eps)

    def step(self, grads: Mapping[str, np.ndarray], lr: float, ascent: bool = False) -> None:
        if ascent:
            grads = {name: -g for name, g in grads.items()}
        adam_step(self.params, grads, self.state, lr)


def clip_parameters(params: Mapping[str, Tensor], bound: float) -> None:
    for p in params.values():
        p.data = np.clip(p.data, -bound, bound)
