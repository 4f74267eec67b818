"""Recurrent cells, attention and the output head, built on the autodiff tensor.

All parameters are plain Tensor leaves; the init helpers draw from the shared
deterministic stream so a fixed seed reproduces every weight bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Rng, init_uniform
from .tensor import (
    LOG_CLAMP,
    Tensor,
    concat,
    log,
    matmul,
    mul,
    pick,
    scale,
    sigmoid,
    softmax,
    stack,
    tanh,
    transpose,
)

INIT_LOW = -0.08
INIT_HIGH = 0.08


def uniform_leaf(rng: Rng, shape, dtype=np.float64) -> Tensor:
    return Tensor(init_uniform(rng, shape, INIT_LOW, INIT_HIGH, dtype=dtype))


def zero_leaf(shape, dtype=np.float64) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype))


@dataclass
class GruParams:
    """Update gate (z), reset gate (r) and candidate weights of one GRU cell."""

    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor
    input_size: int
    hidden_size: int

    @classmethod
    def create(cls, rng: Rng, input_size: int, hidden_size: int, dtype=np.float64) -> "GruParams":
        def w():
            return uniform_leaf(rng, (hidden_size, input_size), dtype)

        def u():
            return uniform_leaf(rng, (hidden_size, hidden_size), dtype)

        def b():
            return uniform_leaf(rng, (hidden_size,), dtype)

        return cls(w(), u(), b(), w(), u(), b(), w(), u(), b(), input_size, hidden_size)

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {
            f"{prefix}.w_z": self.w_z, f"{prefix}.u_z": self.u_z, f"{prefix}.b_z": self.b_z,
            f"{prefix}.w_r": self.w_r, f"{prefix}.u_r": self.u_r, f"{prefix}.b_r": self.b_r,
            f"{prefix}.w_h": self.w_h, f"{prefix}.u_h": self.u_h, f"{prefix}.b_h": self.b_h,
        }


def gru_step(params: GruParams, x_t: Tensor, h_prev: Tensor) -> Tensor:
    """One GRU update: h_t = (1-z) * h_prev + z * tanh-candidate.

    The candidate applies the reset gate to h_prev before the recurrent
    matrix, i.e. tanh(W x + U (r * h_prev) + b).
    """
    if x_t.shape != (params.input_size,) or h_prev.shape != (params.hidden_size,):
        raise ValueError(
            f"gru_step shape mismatch: x {x_t.shape} vs input {params.input_size}, "
            f"h {h_prev.shape} vs hidden {params.hidden_size}")
    z = sigmoid(matmul(params.w_z, x_t) + matmul(params.u_z, h_prev) + params.b_z)
    r = sigmoid(matmul(params.w_r, x_t) + matmul(params.u_r, h_prev) + params.b_r)
    h_tilde = tanh(matmul(params.w_h, x_t) + matmul(params.u_h, mul(r, h_prev)) + params.b_h)
    return mul(1.0 - z, h_prev) + mul(z, h_tilde)


def gru_run(params: GruParams, inputs: list[Tensor]) -> list[Tensor]:
    """Run a GRU over a sequence from a zero initial state; returns all states."""
    h = zero_leaf((params.hidden_size,), dtype=params.b_z.data.dtype)
    states = []
    for x_t in inputs:
        h = gru_step(params, x_t, h)
        states.append(h)
    return states


def bigru_encode(fwd: GruParams, bwd: GruParams, embedded: list[Tensor]) -> list[Tensor]:
    """Bi-directional encoding: state i is [forward_i ; backward_i].

    Forward states run left-to-right, backward states right-to-left, both
    from zero initial states.
    """
    if not embedded:
        raise ValueError("bigru_encode needs a non-empty sequence")
    f_states = gru_run(fwd, embedded)
    b_states = gru_run(bwd, embedded[::-1])[::-1]
    return [concat([f, b]) for f, b in zip(f_states, b_states)]


@dataclass
class AttentionParams:
    """Additive alignment model: score_j = v . tanh(W s_prev + U h_j)."""

    w_a: Tensor  # (align, decoder_hidden)
    u_a: Tensor  # (align, encoder_state)
    v_a: Tensor  # (align,)

    @classmethod
    def create(cls, rng: Rng, decoder_hidden: int, encoder_state: int, align: int,
               dtype=np.float64) -> "AttentionParams":
        return cls(
            uniform_leaf(rng, (align, decoder_hidden), dtype),
            uniform_leaf(rng, (align, encoder_state), dtype),
            uniform_leaf(rng, (align,), dtype),
        )

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w_a": self.w_a, f"{prefix}.u_a": self.u_a, f"{prefix}.v_a": self.v_a}


def attention(s_prev: Tensor, h_stack: Tensor, params: AttentionParams) -> tuple[Tensor, Tensor]:
    """Context vector and weights over encoder states.

    h_stack is the (T, state) matrix of encoder states.  Scores are
    softmax-normalised over all T positions; the context is the weighted sum
    of states.  Returns (context, weights).
    """
    if h_stack.data.ndim != 2 or h_stack.data.shape[0] == 0:
        raise ValueError("attention needs a non-empty (T, state) matrix")
    proj = matmul(h_stack, transpose(params.u_a)) + matmul(params.w_a, s_prev)  # (T, align)
    scores = matmul(tanh(proj), params.v_a)  # (T,)
    weights = softmax(scores)
    context = matmul(weights, h_stack)  # (state,)
    return context, weights


@dataclass
class OutputParams:
    """Two-layer head mapping [state; prev-char embedding; context] to char probabilities.

    The final affine starts at zero so a fresh model emits the exact uniform
    distribution, which gives closed-form untrained perplexity.
    """

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def create(cls, rng: Rng, feature_size: int, hidden: int, vocab_size: int,
               dtype=np.float64) -> "OutputParams":
        return cls(
            uniform_leaf(rng, (hidden, feature_size), dtype),
            uniform_leaf(rng, (hidden,), dtype),
            zero_leaf((vocab_size, hidden), dtype),
            zero_leaf((vocab_size,), dtype),
        )

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w1": self.w1, f"{prefix}.b1": self.b1,
                f"{prefix}.w2": self.w2, f"{prefix}.b2": self.b2}


def output_distribution(params: OutputParams, s_t: Tensor, y_prev_emb: Tensor,
                        c_t: Tensor) -> Tensor:
    """Probability vector over the vocabulary for the next character."""
    features = concat([s_t, y_prev_emb, c_t])
    hidden = tanh(matmul(params.w1, features) + params.b1)
    logits = matmul(params.w2, hidden) + params.b2
    return softmax(logits)


_clamp_warnings = 0


def clamp_warning_count() -> int:
    """How many times a target probability hit the log clamp."""
    return _clamp_warnings


def cross_entropy(probs_seq: list[Tensor], targets: list[int]) -> Tensor:
    """Negative log-likelihood of the targets under per-step probability vectors."""
    global _clamp_warnings
    if len(probs_seq) != len(targets):
        raise ValueError(f"{len(probs_seq)} probability vectors vs {len(targets)} targets")
    acc = None
    for probs, target in zip(probs_seq, targets):
        if probs.data[target] <= LOG_CLAMP:
            _clamp_warnings += 1
        term = log(pick(probs, target))
        acc = term if acc is None else acc + term
    return scale(acc, -1.0)
