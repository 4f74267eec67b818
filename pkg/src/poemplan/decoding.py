"""Exact-length line decoding and poem assembly.

Beam search runs over character steps with UNK/BOS/SEP masked everywhere and
the end-of-line token masked until exactly L characters have been produced,
then forced, so every decoded line has exactly L characters.  Hypothesis
scores are unnormalised sums of full-softmax log-probabilities, which makes a
wide-enough beam identical to exhaustive argmax.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import SEP_CHAR, Poem
from .model import EncodedContext, PoemModel
from .nnet.tensor import Tensor, stack


@dataclass
class DecodeConfig:
    beam_width: int = 10
    line_length: int = 5
    anti_repeat: bool = False  # refuse lines that duplicate a whole earlier line

    def validate(self) -> None:
        if self.beam_width < 1:
            raise ValueError("beam_width must be at least 1")
        if self.line_length < 1:
            raise ValueError("line_length must be at least 1")


@dataclass
class _Hypothesis:
    tokens: tuple[int, ...]
    log_prob: float
    state: np.ndarray
    context: np.ndarray


def _masked_log_probs(model: PoemModel, probs: np.ndarray, allow_eol: bool) -> np.ndarray:
    logp = np.log(np.maximum(probs, 1e-300))
    vocab = model.vocab
    logp[vocab.unk_id] = -np.inf
    logp[vocab.bos_id] = -np.inf
    logp[vocab.sep_id] = -np.inf
    if not allow_eol:
        logp[vocab.eol_id] = -np.inf
    return logp


def _detached_step(model: PoemModel, hyp: _Hypothesis, y_prev: int,
                   h_stack: Tensor) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One decoder step on plain arrays; the throwaway graph is dropped."""
    s, c, probs = model.step(Tensor(hyp.state), y_prev, Tensor(hyp.context), h_stack)
    return s.data, c.data, probs.data


def decode_line(model: PoemModel, ctx: EncodedContext, cfg: DecodeConfig,
                forbidden_lines: tuple[str, ...] = ()) -> str:
    """Highest-scoring character sequence of exactly cfg.line_length characters.

    forbidden_lines is honoured when cfg.anti_repeat is set: a completed line
    equal to one of them is dropped unless every candidate would be dropped.
    """
    cfg.validate()
    vocab = model.vocab
    h_stack = stack(ctx.states)
    s0 = model.initial_state(ctx.r_c)
    beams = [_Hypothesis((), 0.0, s0.data, model.zero_context().data)]

    for _ in range(cfg.line_length):
        candidates: list[tuple[float, int, int, _Hypothesis]] = []
        for hyp_idx, hyp in enumerate(beams):
            y_prev = hyp.tokens[-1] if hyp.tokens else vocab.bos_id
            s, c, probs = _detached_step(model, hyp, y_prev, h_stack)
            logp = _masked_log_probs(model, probs, allow_eol=False)
            for char_id in range(len(vocab.char_of)):
                lp = hyp.log_prob + logp[char_id]
                if lp > -np.inf:
                    candidates.append((lp, hyp_idx, char_id, _Hypothesis(
                        hyp.tokens + (char_id,), lp, s, c)))
        candidates.sort(key=lambda item: (-item[0], item[1], item[2]))
        beams = [item[3] for item in candidates[:cfg.beam_width]]

    # Close every hypothesis with the forced end-of-line token.
    completed: list[tuple[float, int, str]] = []
    for hyp_idx, hyp in enumerate(beams):
        _, _, probs = _detached_step(model, hyp, hyp.tokens[-1], h_stack)
        logp = _masked_log_probs(model, probs, allow_eol=True)
        total = hyp.log_prob + logp[vocab.eol_id]
        completed.append((total, hyp_idx, vocab.decode(hyp.tokens)))
    completed.sort(key=lambda item: (-item[0], item[1]))

    if cfg.anti_repeat:
        fresh = [item for item in completed if item[2] not in forbidden_lines]
        if fresh:
            return fresh[0][2]
    return completed[0][2]


def generate_poem(model: PoemModel, plan, cfg: DecodeConfig, title: str = "") -> Poem:
    """Decode one line per plan keyword, each conditioned on all earlier lines."""
    vocab = model.vocab
    lines: list[str] = []
    for keyword in plan.keywords:
        if not vocab.covers(keyword):
            raise ValueError(f"keyword {keyword!r} is not covered by the vocabulary")
        keyword_ids = vocab.encode(keyword)
        preceding_ids = vocab.encode(SEP_CHAR.join(lines))
        ctx = model.encode_inputs(keyword_ids, preceding_ids)
        lines.append(decode_line(model, ctx, cfg, forbidden_lines=tuple(lines)))
    return Poem(title=title, lines=lines)
