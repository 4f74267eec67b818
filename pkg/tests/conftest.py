import time

import pytest

from poemplan.corpus import (
    KeywordSequence,
    Poem,
    build_vocabulary,
    extract_training_triples,
)
from poemplan.model import ModelConfig
from poemplan.training import TrainConfig, train_poem_model

# The classic five-character quatrain used as the golden example throughout.
TABLE1_POEM = Poem(
    title="静夜思",
    lines=["床前明月光", "疑是地上霜", "举头望明月", "低头思故乡"],
)
TABLE1_KEYWORDS = ["床", "霜", "明月", "故乡"]


def toy_poems() -> list[Poem]:
    return [
        Poem("one", ["abcde", "fghij", "klmno", "pqrst"]),
        Poem("two", ["uvwxy", "zabcd", "efghi", "jklmn"]),
    ]


def toy_keywords() -> list[KeywordSequence]:
    return [
        KeywordSequence(["a", "f", "k", "p"]),
        KeywordSequence(["u", "z", "e", "j"]),
    ]


@pytest.fixture(scope="session")
def toy_corpus():
    poems = toy_poems()
    keywords = toy_keywords()
    triples = [t for p, k in zip(poems, keywords)
               for t in extract_training_triples(p, k)]
    vocab = build_vocabulary(poems, 60)
    return poems, keywords, triples, vocab


@pytest.fixture(scope="session")
def memorized_model(toy_corpus):
    """Line generator overfit on the 8-triple toy corpus; shared because the
    300-epoch run costs ~30s.  Yields (model, report, triples, vocab, seconds)."""
    _, _, triples, vocab = toy_corpus
    config = TrainConfig(seed=7, batch_size=4, max_epochs=300, patience=300)
    started = time.monotonic()
    model, report = train_poem_model(triples, vocab, ModelConfig(), config)
    return model, report, triples, vocab, time.monotonic() - started
