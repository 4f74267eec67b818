"""Query-to-keywords planning: extraction, knowledge and LM expansion."""

import math

import pytest

from poemplan.corpus import KeywordSequence, Poem, build_vocabulary
from poemplan.model import LmConfig, LmUntrainedError
from poemplan.planner import (
    KeywordPlan,
    KnowledgeBase,
    PlanningError,
    PosLexicon,
    expand_knowledge,
    expand_rnnlm,
    plan,
)
from poemplan.textrank import ScoreMap
from poemplan.training import TrainConfig, train_keyword_lm

VOCAB = build_vocabulary([
    Poem("one", ["abcde", "fghij", "klmno", "pqrst"]),
    Poem("two", ["uvwxy", "zabcd", "efghi", "jklmn"]),
], 60)

SCORES = ScoreMap(score={"a": 0.9, "b": 0.5, "c": 0.8, "d": 0.3, "e": 0.7,
                         "f": 0.6, "wa": 0.5, "wb": 0.9, "wc": 0.7, "wd": 0.2,
                         "we": 0.6, "wf": 1.0})


@pytest.fixture(scope="module")
def bigram_lm():
    """LM trained so that b reliably follows a, d follows c, f follows e."""
    sequences = []
    for _ in range(4):
        sequences.append(KeywordSequence(["a", "b"]))
        sequences.append(KeywordSequence(["c", "d"]))
        sequences.append(KeywordSequence(["e", "f"]))
    lm, _ = train_keyword_lm(sequences, LmConfig(embed_dim=8, hidden_dim=8),
                             TrainConfig(seed=4, batch_size=4, max_epochs=120, patience=120))
    return lm


# ---------------------------------------------------------------- plan: extraction

def test_long_query_reduces_to_ranked_subsequence():
    result = plan(["b", "e", "a", "d", "c", "f"], 4, scores=SCORES, vocab=VOCAB)
    assert result.keywords == ["e", "a", "c", "f"]
    assert result.provenance == ["extracted"] * 4


def test_exact_length_query_is_identity():
    result = plan(["a", "b", "c", "d"], 4, scores=SCORES, vocab=VOCAB)
    assert result.keywords == ["a", "b", "c", "d"]
    assert result.provenance == ["extracted"] * 4


def test_uncovered_query_words_are_not_usable():
    # 'ζ' is not in the vocabulary, so only 4 usable words remain
    result = plan(["a", "ζ", "b", "c", "d"], 4, scores=SCORES, vocab=VOCAB)
    assert result.keywords == ["a", "b", "c", "d"]


def test_empty_query_rejected():
    with pytest.raises(PlanningError):
        plan([], 4, scores=SCORES, vocab=VOCAB)


def test_plan_never_returns_short(bigram_lm):
    with pytest.raises(PlanningError):
        plan(["ζ"], 4, scores=SCORES, vocab=VOCAB)  # nothing usable, no expanders


# ---------------------------------------------------------------- LM expansion

def enumeration_argmax(lm, prefix):
    """P(k | prefix) for every vocabulary word via two full-sequence scores."""
    base = float(lm.sequence_loss([lm.vocab.encode_word(w) for w in prefix])[0].data) \
        if prefix else 0.0
    best_word, best_p = None, -1.0
    for word in lm.vocab.word_of:
        ids = [lm.vocab.encode_word(w) for w in prefix] + [lm.vocab.encode_word(word)]
        joint = float(lm.sequence_loss(ids)[0].data)
        p = math.exp(-(joint - base))
        if p > best_p + 1e-15:
            best_word, best_p = word, p
    return best_word


def test_expand_rnnlm_matches_enumeration_oracle(bigram_lm):
    for prefix in ([], ["a"], ["c"], ["e"], ["a", "b"]):
        expected = enumeration_argmax(bigram_lm, prefix)
        if expected in prefix:  # exclusion rule changes the answer
            continue
        assert expand_rnnlm(prefix, bigram_lm) == expected


def test_expand_rnnlm_trained_bigram(bigram_lm):
    assert expand_rnnlm(["a"], bigram_lm) == "b"
    assert expand_rnnlm(["c"], bigram_lm) == "d"


def test_expand_rnnlm_excludes_prefix(bigram_lm):
    unconstrained = expand_rnnlm(["a"], bigram_lm)
    second = expand_rnnlm(["a", unconstrained], bigram_lm)
    assert second != unconstrained
    assert second not in ("a", unconstrained)


def test_expand_rnnlm_empty_prefix_is_bos_argmax(bigram_lm):
    word = expand_rnnlm([], bigram_lm)
    assert word == enumeration_argmax(bigram_lm, [])


def test_expand_rnnlm_requires_trained_model(bigram_lm):
    from poemplan.model import KeywordLanguageModel

    untrained = KeywordLanguageModel(bigram_lm.vocab, bigram_lm.config)
    with pytest.raises(LmUntrainedError):
        expand_rnnlm(["a"], untrained)
    with pytest.raises(LmUntrainedError):
        expand_rnnlm(["a"], None)


# ---------------------------------------------------------------- knowledge expansion

def window_kb():
    return KnowledgeBase(entries={
        "a": [["x", "x", "x", "a", "wa", "wb", "wc", "wd", "we", "wf"]],
    })


def content_pos():
    return PosLexicon(tags={w: {"n"} for w in ("wa", "wb", "wc", "wd", "we", "wf")})


def test_knowledge_window_excludes_distant_words():
    result = expand_knowledge("a", window_kb(), content_pos(), VOCAB, SCORES, count=10)
    assert "wf" not in result  # +6 positions away
    assert set(result) == {"wa", "wb", "wc", "wd", "we"}


def test_knowledge_missing_term_gives_empty_list():
    assert expand_knowledge("nope", window_kb(), content_pos(), VOCAB, SCORES, 5) == []


def test_knowledge_pos_filter_blocks_non_content_words():
    pos = PosLexicon(tags={"wa": {"v"}, "wb": {"n"}, "wc": {"adj"}})
    result = expand_knowledge("a", window_kb(), pos, VOCAB, SCORES, count=10)
    assert "wa" not in result  # verb-only, even though scored
    assert set(result) == {"wb", "wc"}


def test_knowledge_pos_filter_can_be_disabled():
    kb = KnowledgeBase(entries={"a": [["a", "wa", "wb"]]})
    assert expand_knowledge("a", kb, None, VOCAB, SCORES, 5, pos_filter=False) \
        == ["wb", "wa"]  # ranked by score


def test_knowledge_requires_vocabulary_coverage():
    kb = KnowledgeBase(entries={"a": [["a", "bq", "bζ"]]})
    pos = PosLexicon(tags={"bq": {"n"}, "bζ": {"n"}})
    result = expand_knowledge("a", kb, pos, VOCAB, SCORES, 5)
    assert result == ["bq"]  # 'ζ' is out of vocabulary


def test_knowledge_ranking_score_then_frequency_then_name():
    kb = KnowledgeBase(entries={"k": [
        ["k", "b", "c", "b"],   # b seen twice in windows, c once
        ["k", "d"],
    ]})
    pos = PosLexicon(tags={w: {"n"} for w in "bcd"})
    scores = ScoreMap(score={"b": 0.5, "c": 0.5, "d": 0.9})
    result = expand_knowledge("k", kb, pos, VOCAB, scores, count=3)
    assert result == ["d", "b", "c"]


def test_knowledge_count_truncates():
    result = expand_knowledge("a", window_kb(), content_pos(), VOCAB, SCORES, count=2)
    assert len(result) == 2
    assert result == ["wb", "wc"]  # scores 0.9, 0.7


# ---------------------------------------------------------------- plan: expansion

def test_short_query_expands_with_lm(bigram_lm):
    result = plan(["a"], 3, scores=SCORES, vocab=VOCAB, lm=bigram_lm)
    assert result.keywords[0] == "a"
    assert result.provenance == ["extracted", "rnnlm", "rnnlm"]
    assert len(set(result.keywords)) == 3
    # hand-traced: after 'a' the bigram LM predicts 'b'
    assert result.keywords[1] == "b"


def test_short_query_prefers_knowledge_by_default(bigram_lm):
    kb = KnowledgeBase(entries={"a": [["a", "e", "c"]]})
    pos = PosLexicon(tags={"e": {"n"}, "c": {"n"}})
    result = plan(["a"], 2, scores=SCORES, vocab=VOCAB, lm=bigram_lm, kb=kb, pos=pos)
    assert result.keywords == ["a", "c"]  # c outscored by... score c=0.8 > e=0.7
    assert result.provenance == ["extracted", "knowledge"]


def test_lm_first_order_flips_precedence(bigram_lm):
    kb = KnowledgeBase(entries={"a": [["a", "e", "c"]]})
    pos = PosLexicon(tags={"e": {"n"}, "c": {"n"}})
    result = plan(["a"], 2, scores=SCORES, vocab=VOCAB, lm=bigram_lm, kb=kb, pos=pos,
                  knowledge_first=False)
    assert result.provenance == ["extracted", "rnnlm"]
    assert result.keywords == ["a", "b"]


def test_knowledge_falls_back_to_lm_when_empty(bigram_lm):
    kb = KnowledgeBase(entries={})
    result = plan(["a"], 2, scores=SCORES, vocab=VOCAB, lm=bigram_lm, kb=kb)
    assert result.provenance == ["extracted", "rnnlm"]


def test_expansion_never_repeats_query_words(bigram_lm):
    # 'b' is in the query but not usable as a seed slot twice; expansion must skip it
    result = plan(["a", "b"], 4, scores=SCORES, vocab=VOCAB, lm=bigram_lm)
    assert result.keywords[:2] == ["a", "b"]
    assert len(set(result.keywords)) == 4


def test_zero_seed_query_can_still_plan_from_lm(bigram_lm):
    result = plan(["ζ"], 2, scores=SCORES, vocab=VOCAB, lm=bigram_lm)
    assert len(result.keywords) == 2
    assert result.provenance == ["rnnlm", "rnnlm"]


def test_plan_keywords_always_covered_and_distinct(bigram_lm):
    kb = KnowledgeBase(entries={"a": [["a", "wa", "wb", "wc"]]})
    pos = content_pos()
    result = plan(["a"], 4, scores=SCORES, vocab=VOCAB, lm=bigram_lm, kb=kb, pos=pos)
    assert len(result.keywords) == 4
    assert len(set(result.keywords)) == 4
    assert all(VOCAB.covers(k) for k in result.keywords)


def test_plan_rejects_bad_n():
    with pytest.raises(ValueError):
        plan(["a"], 0, scores=SCORES, vocab=VOCAB)


def test_keyword_plan_invariants():
    with pytest.raises(ValueError):
        KeywordPlan(["a", "a"], ["extracted", "extracted"])
    with pytest.raises(ValueError):
        KeywordPlan(["a"], [])


# ---------------------------------------------------------------- file formats

def test_knowledge_base_file_format(tmp_path):
    path = tmp_path / "kb.tsv"
    path.write_text("月\t月 是 天上 明镜\n月\t举杯 邀 月\n酒\t酒 香醇\n", encoding="utf-8")
    kb = KnowledgeBase.load(path)
    assert len(kb.entries["月"]) == 2
    assert kb.entries["酒"] == [["酒", "香醇"]]


def test_pos_lexicon_file_format(tmp_path):
    path = tmp_path / "pos.tsv"
    path.write_text("明月\tn\n香醇\tadj,n\n和\tother\n", encoding="utf-8")
    pos = PosLexicon.load(path)
    assert pos.is_content_word("明月")
    assert pos.is_content_word("香醇")
    assert not pos.is_content_word("和")
    assert not pos.is_content_word("unknown")


def test_plan_is_deterministic_with_fixed_models(bigram_lm):
    kb = KnowledgeBase(entries={"a": [["a", "wa", "wb", "wc"]]})
    pos = content_pos()
    first = plan(["a"], 4, scores=SCORES, vocab=VOCAB, lm=bigram_lm, kb=kb, pos=pos)
    second = plan(["a"], 4, scores=SCORES, vocab=VOCAB, lm=bigram_lm, kb=kb, pos=pos)
    assert first.keywords == second.keywords
    assert first.provenance == second.provenance
