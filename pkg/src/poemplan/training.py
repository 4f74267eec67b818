"""Minibatch training with adaptive updates and perplexity-based model selection.

Both the line generator and the keyword language model train through the same
loop: shuffled minibatches, mean-over-sequences loss, one optimizer update per
batch, validation perplexity after every epoch, and the parameters from the
best validation epoch are the ones returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import KeywordSequence, TrainingTriple, Vocabulary, WordVocabulary
from .model import KeywordLanguageModel, LmConfig, ModelConfig, PoemModel
from .nnet.adadelta import AdaDeltaState, adadelta_step
from .nnet.rng import Rng
from .nnet.tensor import scale


class TrainingError(Exception):
    """Training aborted (empty data or numerical failure)."""


@dataclass
class TrainConfig:
    seed: int = 12345
    batch_size: int = 16
    max_epochs: int = 50
    patience: int = 20
    rho: float = 0.95
    epsilon: float = 1e-6
    valid_split: float = 0.0  # fraction held out; 0 validates on the training set

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if not 0.0 <= self.valid_split < 1.0:
            raise ValueError("valid_split must be in [0, 1)")


@dataclass
class EpochStats:
    epoch: int
    train_nll: float  # mean per-sequence negative log-likelihood
    valid_ppl: float


@dataclass
class TrainingReport:
    epochs: list[EpochStats]
    best_epoch: int

    def best_valid_ppl(self) -> float:
        return self.epochs[self.best_epoch - 1].valid_ppl

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch\ttrain_nll\tvalid_ppl\n")
            for row in self.epochs:
                fh.write(f"{row.epoch}\t{row.train_nll:.10g}\t{row.valid_ppl:.10g}\n")

    @classmethod
    def read(cls, path) -> "TrainingReport":
        rows = []
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        for line in lines[1:]:
            if not line:
                continue
            epoch, nll, ppl = line.split("\t")
            rows.append(EpochStats(int(epoch), float(nll), float(ppl)))
        best = min(rows, key=lambda r: (r.valid_ppl, r.epoch)).epoch
        return cls(rows, best)


def encode_triple(triple: TrainingTriple, vocab: Vocabulary):
    return (vocab.encode(triple.keyword), vocab.encode(triple.preceding_text),
            vocab.encode(triple.target_line))


def encode_triples(triples: list[TrainingTriple], vocab: Vocabulary):
    return [encode_triple(t, vocab) for t in triples]


def encode_sequences(sequences: list[KeywordSequence], vocab: WordVocabulary):
    return [[vocab.encode_word(w) for w in seq.keywords] for seq in sequences]


def perplexity(model, encoded_dataset) -> float:
    """exp(total NLL / predicted tokens), teacher-forced."""
    if not encoded_dataset:
        raise ValueError("perplexity needs a non-empty dataset")
    nll, tokens = model.corpus_nll(encoded_dataset)
    return math.exp(nll / tokens)


def _fit(params, examples, loss_of, cfg: TrainConfig, rng: Rng) -> TrainingReport:
    cfg.validate()
    if not examples:
        raise TrainingError("no training examples")

    if cfg.valid_split > 0.0:
        pool = list(examples)
        rng.shuffle(pool)
        n_valid = max(1, int(round(len(pool) * cfg.valid_split)))
        if n_valid >= len(pool):
            raise TrainingError("valid_split leaves no training examples")
        valid, train = pool[:n_valid], pool[n_valid:]
    else:
        train = list(examples)
        valid = train

    state = AdaDeltaState(params, rho=cfg.rho, epsilon=cfg.epsilon)
    report_rows: list[EpochStats] = []
    best_ppl = math.inf
    best_epoch = 0
    best_params: dict[str, np.ndarray] = {}
    stale = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = list(range(len(train)))
        rng.shuffle(order)
        epoch_nll = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            for p in params.values():
                p.grad = None
            inv = 1.0 / len(batch)
            for idx in batch:
                loss, _ = loss_of(train[idx])
                value = float(loss.data)
                if not math.isfinite(value):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, example {idx}: {value}")
                epoch_nll += value
                scale(loss, inv).backward()
            grads = {name: p.grad for name, p in params.items() if p.grad is not None}
            adadelta_step(params, grads, state)

        valid_nll = 0.0
        valid_tokens = 0
        for ex in valid:
            loss, count = loss_of(ex)
            valid_nll += float(loss.data)
            valid_tokens += count
        valid_ppl = math.exp(valid_nll / valid_tokens)
        report_rows.append(EpochStats(epoch, epoch_nll / len(train), valid_ppl))

        if valid_ppl < best_ppl:
            best_ppl = valid_ppl
            best_epoch = epoch
            best_params = {name: p.data.copy() for name, p in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    for name, p in params.items():
        p.data = best_params[name]
    return TrainingReport(report_rows, best_epoch)


def train_poem_model(triples: list[TrainingTriple], vocab: Vocabulary,
                     model_config: ModelConfig | None = None,
                     train_config: TrainConfig | None = None
                     ) -> tuple[PoemModel, TrainingReport]:
    """Fit the line generator on training triples; returns the model whose
    validation perplexity was lowest, plus the per-epoch report."""
    if not triples:
        raise TrainingError("no training triples")
    cfg = train_config or TrainConfig()
    cfg.validate()
    rng = Rng(cfg.seed)
    model = PoemModel(vocab, model_config, rng)
    encoded = encode_triples(triples, vocab)
    report = _fit(model.params(), encoded,
                  lambda ex: model.triple_loss(*ex), cfg, rng)
    return model, report


def train_keyword_lm(sequences: list[KeywordSequence],
                     lm_config: LmConfig | None = None,
                     train_config: TrainConfig | None = None
                     ) -> tuple[KeywordLanguageModel, TrainingReport]:
    """Fit the next-keyword model on keyword sequences."""
    if not sequences:
        raise TrainingError("no keyword sequences")
    cfg = train_config or TrainConfig()
    cfg.validate()
    rng = Rng(cfg.seed)
    vocab = WordVocabulary.from_sequences(sequences)
    lm = KeywordLanguageModel(vocab, lm_config, rng)
    encoded = encode_sequences(sequences, vocab)
    report = _fit(lm.params(), encoded, lambda ids: lm.sequence_loss(ids), cfg, rng)
    lm.trained = True
    return lm, report
