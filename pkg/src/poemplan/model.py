"""The line generator network and the keyword language model.

The generator encodes a keyword with one bi-directional GRU and the preceding
poem text with another.  The keyword summary (last forward state stacked on
first backward state) is prepended to the text states, so the decoder's
attention sees one sequence carrying both inputs; the first line is generated
from the keyword summary alone.  The decoder is a GRU with additive
attention; by default its state update consumes the previous step's context
vector, with a config switch for the variant that feeds the current one.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .corpus import Vocabulary, WordVocabulary
from .nnet.archive import ArchiveError, load_archive, save_archive
from .nnet.layers import (
    AttentionParams,
    GruParams,
    OutputParams,
    attention,
    bigru_encode,
    cross_entropy,
    gru_run,
    gru_step,
    output_distribution,
    uniform_leaf,
    zero_leaf,
)
from .nnet.rng import Rng
from .nnet.tensor import Tensor, concat, matmul, row, softmax, stack, tanh

KIND_POEM = "poem-model"
KIND_KEYWORD_LM = "keyword-lm"

CONTEXT_LITERAL = "literal"
CONTEXT_CONVENTIONAL = "conventional"


class VocabularyMismatchError(ArchiveError):
    """Archive was produced against a different vocabulary."""


@dataclass
class ModelConfig:
    """Dimensions and wiring switches of the generator network."""

    embed_dim: int = 64
    hidden_dim: int = 64
    align_dim: int = 64
    out_hidden_dim: int = 64
    context_variant: str = CONTEXT_LITERAL
    share_embeddings: bool = True
    share_encoders: bool = False
    float32: bool = False

    def validate(self) -> None:
        for name in ("embed_dim", "hidden_dim", "align_dim", "out_hidden_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.context_variant not in (CONTEXT_LITERAL, CONTEXT_CONVENTIONAL):
            raise ValueError(f"unknown context_variant {self.context_variant!r}")

    @property
    def dtype(self):
        return np.float32 if self.float32 else np.float64

    @property
    def state_width(self) -> int:
        """Width of one encoder output state (both directions)."""
        return 2 * self.hidden_dim


@dataclass
class EncodedContext:
    """Attention targets: states[0] is the keyword summary r_c, the rest encode
    the preceding text."""

    states: list[Tensor]
    r_c: Tensor

    def __len__(self) -> int:
        return len(self.states)


class PoemModel:
    """All learned tensors of the line generator, bound to a character vocabulary."""

    def __init__(self, vocab: Vocabulary, config: ModelConfig | None = None,
                 rng: Rng | None = None):
        config = config or ModelConfig()
        config.validate()
        self.vocab = vocab
        self.config = config
        rng = rng or Rng(0)
        dt = config.dtype
        v, e, h, a, o = vocab.size, config.embed_dim, config.hidden_dim, \
            config.align_dim, config.out_hidden_dim

        self.embedding = uniform_leaf(rng, (v, e), dt)
        if config.share_embeddings:
            self.kw_embedding = self.embedding
        else:
            self.kw_embedding = uniform_leaf(rng, (v, e), dt)
        self.kw_fwd = GruParams.create(rng, e, h, dt)
        self.kw_bwd = GruParams.create(rng, e, h, dt)
        if config.share_encoders:
            self.tx_fwd, self.tx_bwd = self.kw_fwd, self.kw_bwd
        else:
            self.tx_fwd = GruParams.create(rng, e, h, dt)
            self.tx_bwd = GruParams.create(rng, e, h, dt)
        self.decoder = GruParams.create(rng, e + config.state_width, h, dt)
        self.attn = AttentionParams.create(rng, h, config.state_width, a, dt)
        self.init_w = uniform_leaf(rng, (h, config.state_width), dt)
        self.init_b = uniform_leaf(rng, (h,), dt)
        self.out = OutputParams.create(rng, h + e + config.state_width, o, v, dt)

    def params(self) -> dict[str, Tensor]:
        named = {"embedding": self.embedding}
        if not self.config.share_embeddings:
            named["kw_embedding"] = self.kw_embedding
        named.update(self.kw_fwd.named("kw_enc.fwd"))
        named.update(self.kw_bwd.named("kw_enc.bwd"))
        if not self.config.share_encoders:
            named.update(self.tx_fwd.named("tx_enc.fwd"))
            named.update(self.tx_bwd.named("tx_enc.bwd"))
        named.update(self.decoder.named("decoder"))
        named.update(self.attn.named("attn"))
        named["init.w"] = self.init_w
        named["init.b"] = self.init_b
        named.update(self.out.named("out"))
        return named

    # -- forward passes -----------------------------------------------------

    def encode_inputs(self, keyword_ids: list[int], preceding_ids: list[int]) -> EncodedContext:
        """Keyword summary plus encoded preceding text.

        The context has exactly len(preceding_ids) + 1 states and its first
        state is the keyword summary itself.
        """
        if not keyword_ids:
            raise ValueError("cannot encode an empty keyword")
        kw_emb = [row(self.kw_embedding, i) for i in keyword_ids]
        f_states = gru_run(self.kw_fwd, kw_emb)
        b_states = gru_run(self.kw_bwd, kw_emb[::-1])
        r_c = concat([f_states[-1], b_states[-1]])  # last forward, first backward
        states = [r_c]
        if preceding_ids:
            tx_emb = [row(self.embedding, i) for i in preceding_ids]
            states.extend(bigru_encode(self.tx_fwd, self.tx_bwd, tx_emb))
        return EncodedContext(states=states, r_c=r_c)

    def initial_state(self, r_c: Tensor) -> Tensor:
        return tanh(matmul(self.init_w, r_c) + self.init_b)

    def zero_context(self) -> Tensor:
        return zero_leaf((self.config.state_width,), dtype=self.config.dtype)

    def step(self, s_prev: Tensor, y_prev: int, c_prev: Tensor,
             h_stack: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        """One decode step: returns (s_t, c_t, probability vector for y_t)."""
        c_t, _ = attention(s_prev, h_stack, self.attn)
        c_in = c_prev if self.config.context_variant == CONTEXT_LITERAL else c_t
        y_emb = row(self.embedding, y_prev)
        s_t = gru_step(self.decoder, concat([y_emb, c_in]), s_prev)
        probs = output_distribution(self.out, s_t, y_emb, c_t)
        return s_t, c_t, probs

    def triple_loss(self, keyword_ids: list[int], preceding_ids: list[int],
                    target_ids: list[int]) -> tuple[Tensor, int]:
        """Teacher-forced negative log-likelihood of target_ids followed by EOL."""
        ctx = self.encode_inputs(keyword_ids, preceding_ids)
        h_stack = stack(ctx.states)
        s = self.initial_state(ctx.r_c)
        c_prev = self.zero_context()
        inputs = [self.vocab.bos_id] + list(target_ids)
        targets = list(target_ids) + [self.vocab.eol_id]
        probs_seq = []
        for y_prev in inputs:
            s, c_prev, probs = self.step(s, y_prev, c_prev, h_stack)
            probs_seq.append(probs)
        return cross_entropy(probs_seq, targets), len(targets)

    def corpus_nll(self, encoded_triples) -> tuple[float, int]:
        """Total NLL and predicted-token count over (kw, preceding, target) id triples."""
        nll = 0.0
        tokens = 0
        for kw_ids, pre_ids, tgt_ids in encoded_triples:
            loss, count = self.triple_loss(kw_ids, pre_ids, tgt_ids)
            nll += float(loss.data)
            tokens += count
        return nll, tokens

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        meta = {
            "kind": KIND_POEM,
            "config": asdict(self.config),
            "vocab_chars": "".join(self.vocab.char_of),
            "vocab_sha256": self.vocab.sha256(),
        }
        tensors = {name: p.data for name, p in self.params().items()}
        save_archive(path, tensors, meta, scalar_width=4 if self.config.float32 else 8)

    @classmethod
    def load(cls, path, vocab: Vocabulary | None = None) -> "PoemModel":
        tensors, meta, _ = load_archive(path)
        if meta.get("kind") != KIND_POEM:
            raise ArchiveError(f"archive holds {meta.get('kind')!r}, expected {KIND_POEM!r}")
        archived = Vocabulary(list(meta["vocab_chars"]))
        if archived.sha256() != meta["vocab_sha256"]:
            raise ArchiveError("corrupt archive: vocabulary hash does not match contents")
        if vocab is not None and vocab.sha256() != meta["vocab_sha256"]:
            raise VocabularyMismatchError(
                "archive was built against a different vocabulary")
        model = cls(vocab or archived, ModelConfig(**meta["config"]))
        _load_params(model.params(), tensors, model.config.dtype)
        return model


class LmUntrainedError(Exception):
    """Keyword prediction was requested from an untrained language model."""


@dataclass
class LmConfig:
    embed_dim: int = 64
    hidden_dim: int = 64
    float32: bool = False

    def validate(self) -> None:
        if self.embed_dim < 1 or self.hidden_dim < 1:
            raise ValueError("dimensions must be at least 1")

    @property
    def dtype(self):
        return np.float32 if self.float32 else np.float64


class KeywordLanguageModel:
    """Word-level GRU language model over keyword sequences.

    The output affine starts at zero, so an untrained model is exactly
    uniform over its vocabulary.
    """

    def __init__(self, vocab: WordVocabulary, config: LmConfig | None = None,
                 rng: Rng | None = None):
        config = config or LmConfig()
        config.validate()
        self.vocab = vocab
        self.config = config
        self.trained = False
        rng = rng or Rng(0)
        dt = config.dtype
        self.embedding = uniform_leaf(rng, (vocab.size, config.embed_dim), dt)
        self.gru = GruParams.create(rng, config.embed_dim, config.hidden_dim, dt)
        self.out_w = zero_leaf((vocab.size, config.hidden_dim), dt)
        self.out_b = zero_leaf((vocab.size,), dt)

    def params(self) -> dict[str, Tensor]:
        named = {"embedding": self.embedding, "out.w": self.out_w, "out.b": self.out_b}
        named.update(self.gru.named("gru"))
        return named

    def _step_probs(self, h: Tensor, y_prev: int) -> tuple[Tensor, Tensor]:
        h = gru_step(self.gru, row(self.embedding, y_prev), h)
        return h, softmax(matmul(self.out_w, h) + self.out_b)

    def sequence_loss(self, word_ids: list[int]) -> tuple[Tensor, int]:
        """NLL of the sequence conditioned on a BOS prefix."""
        if not word_ids:
            raise ValueError("cannot score an empty sequence")
        h = zero_leaf((self.config.hidden_dim,), dtype=self.config.dtype)
        inputs = [self.vocab.bos_id] + list(word_ids[:-1])
        probs_seq = []
        for y_prev in inputs:
            h, probs = self._step_probs(h, y_prev)
            probs_seq.append(probs)
        return cross_entropy(probs_seq, word_ids), len(word_ids)

    def next_distribution(self, prefix_words: list[str]) -> np.ndarray:
        """P(next keyword | prefix) over the whole word vocabulary."""
        h = zero_leaf((self.config.hidden_dim,), dtype=self.config.dtype)
        ids = [self.vocab.bos_id] + [self.vocab.encode_word(w) for w in prefix_words]
        probs = None
        for y_prev in ids:
            h, probs = self._step_probs(h, y_prev)
        return probs.data

    def ranked_keywords(self, prefix_words: list[str]) -> list[str]:
        """Vocabulary words ordered by P(word | prefix), ties by smaller id."""
        probs = self.next_distribution(prefix_words)
        order = np.argsort(-probs, kind="stable")
        specials = {self.vocab.unk_id, self.vocab.bos_id}
        return [self.vocab.word_of[i] for i in order if i not in specials]

    def corpus_nll(self, encoded_sequences) -> tuple[float, int]:
        nll = 0.0
        tokens = 0
        for ids in encoded_sequences:
            loss, count = self.sequence_loss(ids)
            nll += float(loss.data)
            tokens += count
        return nll, tokens

    def save(self, path) -> None:
        meta = {
            "kind": KIND_KEYWORD_LM,
            "config": asdict(self.config),
            "vocab_words": self.vocab.word_of,
            "vocab_sha256": self.vocab.sha256(),
            "trained": self.trained,
        }
        tensors = {name: p.data for name, p in self.params().items()}
        save_archive(path, tensors, meta, scalar_width=4 if self.config.float32 else 8)

    @classmethod
    def load(cls, path) -> "KeywordLanguageModel":
        tensors, meta, _ = load_archive(path)
        if meta.get("kind") != KIND_KEYWORD_LM:
            raise ArchiveError(
                f"archive holds {meta.get('kind')!r}, expected {KIND_KEYWORD_LM!r}")
        vocab = WordVocabulary(list(meta["vocab_words"]))
        if vocab.sha256() != meta["vocab_sha256"]:
            raise ArchiveError("corrupt archive: vocabulary hash does not match contents")
        lm = cls(vocab, LmConfig(**meta["config"]))
        lm.trained = bool(meta.get("trained", False))
        _load_params(lm.params(), tensors, lm.config.dtype)
        return lm


def _load_params(params: dict[str, Tensor], tensors: dict[str, np.ndarray], dtype) -> None:
    missing = sorted(set(params) - set(tensors))
    extra = sorted(set(tensors) - set(params))
    if missing or extra:
        raise ArchiveError(f"tensor names do not match model: missing {missing}, extra {extra}")
    for name, leaf in params.items():
        arr = tensors[name]
        if arr.shape != leaf.data.shape:
            raise ArchiveError(
                f"tensor {name} has shape {arr.shape}, expected {leaf.data.shape}")
        leaf.data = arr.astype(dtype)
