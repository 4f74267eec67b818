"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .rng import Rng
from .tensor import Tensor

# Above this many scalar entries a seeded subsample is checked instead.
SUBSAMPLE_THRESHOLD = 5000


def grad_check(loss_fn: Callable[[], Tensor], params: dict[str, Tensor],
               epsilon: float = 1e-5, seed: int = 0,
               max_entries: int = SUBSAMPLE_THRESHOLD) -> float:
    """Max relative error between analytic and numeric gradients.

    loss_fn must rebuild the forward graph from the current parameter values
    on every call.  Relative error per entry is |a - n| / max(|a|, |n|, 1e-8).
    Requires float64 parameters.  Returns 0.0 for an empty parameter set.
    """
    if not params:
        return 0.0
    for name, p in params.items():
        if p.data.dtype != np.float64:
            raise ValueError(f"grad_check needs float64 parameters, {name} is {p.data.dtype}")
        p.grad = None
    loss_fn().backward()
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for name, p in params.items()}

    entries = [(name, idx) for name, p in params.items() for idx in range(p.data.size)]
    if len(entries) > max_entries:
        rng = Rng(seed)
        chosen = []
        pool = list(entries)
        for _ in range(max_entries):
            chosen.append(pool.pop(rng.randint(len(pool))))
        entries = chosen

    worst = 0.0
    for name, idx in entries:
        flat = params[name].data.reshape(-1)
        orig = flat[idx]
        flat[idx] = orig + epsilon
        loss_plus = float(loss_fn().data)
        flat[idx] = orig - epsilon
        loss_minus = float(loss_fn().data)
        flat[idx] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
        a = float(analytic[name].reshape(-1)[idx])
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
