"""Turn a user query into exactly N sub-topic keywords.

Long queries are reduced by graph-ranking importance; short queries are
padded by expansion, preferring encyclopedia-style knowledge lookups seeded
from the most recent keyword and falling back to the keyword language model
(the order can be flipped).  Every keyword in a plan must be encodable by the
poem vocabulary, and a plan never contains duplicates.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .corpus import Vocabulary
from .model import KeywordLanguageModel, LmUntrainedError
from .textrank import ScoreMap, rank_query_keywords

EXPANSION_WINDOW = 5  # positions on either side of a keyword occurrence

PROV_EXTRACTED = "extracted"
PROV_RNNLM = "rnnlm"
PROV_KNOWLEDGE = "knowledge"


class PlanningError(Exception):
    """The query could not be turned into the requested number of keywords."""


@dataclass
class KeywordPlan:
    keywords: list[str]
    provenance: list[str]

    def __post_init__(self):
        if len(self.keywords) != len(self.provenance):
            raise ValueError("keywords and provenance must align")
        if len(set(self.keywords)) != len(self.keywords):
            raise ValueError("plan keywords must be distinct")


@dataclass
class KnowledgeBase:
    """term -> list of word-segmented description texts."""

    entries: dict[str, list[list[str]]]

    @classmethod
    def load(cls, path) -> "KnowledgeBase":
        entries: dict[str, list[list[str]]] = {}
        for line in Path(path).read_text(encoding="utf-8-sig").splitlines():
            if not line.strip():
                continue
            term, _, description = line.partition("\t")
            words = description.split()
            if not words:
                continue
            entries.setdefault(term, []).append(words)
        return cls(entries)


@dataclass
class PosLexicon:
    """word -> set of part-of-speech tags; words not listed count as 'other'."""

    tags: dict[str, set[str]]

    NOUN = "n"
    ADJECTIVE = "adj"

    def is_content_word(self, word: str) -> bool:
        return bool(self.tags.get(word, set()) & {self.NOUN, self.ADJECTIVE})

    @classmethod
    def load(cls, path) -> "PosLexicon":
        tags: dict[str, set[str]] = {}
        for line in Path(path).read_text(encoding="utf-8-sig").splitlines():
            if not line.strip():
                continue
            word, _, tag_list = line.partition("\t")
            tags.setdefault(word, set()).update(
                t.strip() for t in tag_list.split(",") if t.strip())
        return cls(tags)


def expand_knowledge(keyword: str, kb: KnowledgeBase, pos: PosLexicon | None,
                     vocab: Vocabulary, scores: ScoreMap, count: int,
                     pos_filter: bool = True) -> list[str]:
    """Candidate keywords found near occurrences of `keyword` in its descriptions.

    A word qualifies when it sits within EXPANSION_WINDOW positions of an
    occurrence, is tagged noun or adjective (unless filtering is disabled) and
    is fully covered by the poem vocabulary.  Candidates are ranked by score,
    then by how often they were seen in windows, then lexicographically.
    """
    descriptions = kb.entries.get(keyword, [])
    window_counts: Counter = Counter()
    for words in descriptions:
        for position, word in enumerate(words):
            if word != keyword:
                continue
            lo = max(0, position - EXPANSION_WINDOW)
            hi = min(len(words), position + EXPANSION_WINDOW + 1)
            for neighbor in range(lo, hi):
                if neighbor == position:
                    continue
                candidate = words[neighbor]
                if candidate == keyword:
                    continue
                if pos_filter and (pos is None or not pos.is_content_word(candidate)):
                    continue
                if not vocab.covers(candidate):
                    continue
                window_counts[candidate] += 1
    ranked = sorted(window_counts,
                    key=lambda w: (-scores.get(w), -window_counts[w], w))
    return ranked[:count]


def expand_rnnlm(prefix: list[str], lm: KeywordLanguageModel) -> str:
    """Most probable next keyword given the prefix, never repeating the prefix."""
    if lm is None or not lm.trained:
        raise LmUntrainedError("keyword language model is not trained")
    taken = set(prefix)
    for word in lm.ranked_keywords(prefix):
        if word not in taken:
            return word
    raise PlanningError("language model has no keyword outside the prefix")


def plan(query_words: list[str], n: int, *, scores: ScoreMap, vocab: Vocabulary,
         lm: KeywordLanguageModel | None = None, kb: KnowledgeBase | None = None,
         pos: PosLexicon | None = None, knowledge_first: bool = True,
         pos_filter: bool = True) -> KeywordPlan:
    """Exactly n distinct vocabulary-covered keywords for the query.

    With at least n usable query words the plan is pure extraction; otherwise
    the usable words seed the plan and expansion fills the remaining slots.
    Expanded keywords never repeat query words.
    """
    if not query_words:
        raise PlanningError("empty query")
    if n < 1:
        raise ValueError("n must be at least 1")

    usable: list[str] = []
    for word in query_words:
        if vocab.covers(word) and word not in usable:
            usable.append(word)

    if len(usable) >= n:
        keywords = rank_query_keywords(usable, scores, n)
        return KeywordPlan(keywords, [PROV_EXTRACTED] * n)

    keywords = list(usable)
    provenance = [PROV_EXTRACTED] * len(usable)
    excluded = set(query_words) | set(keywords)

    def from_knowledge() -> str | None:
        if kb is None or not keywords:
            return None
        for cand in expand_knowledge(keywords[-1], kb, pos, vocab, scores,
                                     count=n + len(excluded), pos_filter=pos_filter):
            if cand not in excluded:
                return cand
        return None

    def from_lm() -> str | None:
        if lm is None or not lm.trained:
            return None
        for cand in lm.ranked_keywords(keywords):
            if cand not in excluded and vocab.covers(cand):
                return cand
        return None

    order = (from_knowledge, from_lm) if knowledge_first else (from_lm, from_knowledge)
    while len(keywords) < n:
        picked = None
        source = None
        for attempt in order:
            picked = attempt()
            if picked is not None:
                source = PROV_KNOWLEDGE if attempt is from_knowledge else PROV_RNNLM
                break
        if picked is None:
            raise PlanningError(
                f"could not expand the query beyond {len(keywords)} keywords "
                f"(need {n}); provide a longer query, a knowledge base or a "
                f"trained keyword language model")
        keywords.append(picked)
        provenance.append(source)
        excluded.add(picked)
    return KeywordPlan(keywords, provenance)
