"""Adaptive per-parameter updates from decaying squared-gradient/-update averages.

    E[g^2] <- rho E[g^2] + (1-rho) g^2
    dx      = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
    E[dx^2] <- rho E[dx^2] + (1-rho) dx^2
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class AdaDeltaState:
    """Per-parameter accumulators keyed by parameter name."""

    def __init__(self, params: dict[str, Tensor], rho: float = 0.95, epsilon: float = 1e-6):
        if not 0.0 <= rho < 1.0:
            raise ValueError(f"rho must be in [0, 1), got {rho}")
        if epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.rho = rho
        self.epsilon = epsilon
        self.accum_grad = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.accum_update = {k: np.zeros_like(p.data) for k, p in params.items()}


def adadelta_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
                  state: AdaDeltaState) -> None:
    """Apply one update in place; missing gradients count as zero."""
    rho, eps = state.rho, state.epsilon
    for name, param in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(param.data)
        eg = state.accum_grad[name]
        ex = state.accum_update[name]
        eg *= rho
        eg += (1.0 - rho) * g * g
        delta = -np.sqrt(ex + eps) / np.sqrt(eg + eps) * g
        param.data += delta
        ex *= rho
        ex += (1.0 - rho) * delta * delta
