"""Graph ranking of words by weighted co-occurrence.

Vertices are words, edge weights count how often two words appear within a
sliding window of each other, and importance scores are iterated to a fixed
point of

    S(i) = (1 - d) + d * sum_j  w_ji / strength(j) * S(j)

over the neighbours j of i, where strength(j) is the total edge weight at j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class CoocGraph:
    """Symmetric weighted co-occurrence graph."""

    vertices: list[str] = field(default_factory=list)
    adjacency: dict[str, dict[str, float]] = field(default_factory=dict)

    def add_vertex(self, word: str) -> None:
        if word not in self.adjacency:
            self.vertices.append(word)
            self.adjacency[word] = {}

    def add_cooccurrence(self, a: str, b: str, weight: float = 1.0) -> None:
        if a == b:
            return  # no self-loops
        self.add_vertex(a)
        self.add_vertex(b)
        self.adjacency[a][b] = self.adjacency[a].get(b, 0.0) + weight
        self.adjacency[b][a] = self.adjacency[b].get(a, 0.0) + weight

    def edge_weight(self, a: str, b: str) -> float:
        return self.adjacency.get(a, {}).get(b, 0.0)

    def strength(self, word: str) -> float:
        return sum(self.adjacency[word].values())


@dataclass
class TextRankConfig:
    damping: float = 0.85
    init_score: float = 1.0
    tolerance: float = 1e-6
    max_iterations: int = 200

    def validate(self) -> None:
        if not 0.0 < self.damping < 1.0:
            raise ValueError(f"damping must be in (0, 1), got {self.damping}")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class ScoreMap:
    score: dict[str, float]
    iterations_used: int = 0
    converged: bool = True

    def get(self, word: str) -> float:
        """Score of a word; unscored words count as 0."""
        return self.score.get(word, 0.0)


def build_cooc_graph(documents: list[list[str]], window: int = 5) -> CoocGraph:
    """Add one unit of edge weight per pair of distinct words at most `window`
    positions apart in any document."""
    if window < 1:
        raise ValueError("window must be at least 1")
    graph = CoocGraph()
    for doc in documents:
        for i, word in enumerate(doc):
            graph.add_vertex(word)
            for j in range(i + 1, min(i + window + 1, len(doc))):
                graph.add_cooccurrence(word, doc[j])
    return graph


def textrank_scores(graph: CoocGraph, config: TextRankConfig | None = None) -> ScoreMap:
    """Synchronous (Jacobi) iteration of the ranking equation until the largest
    per-vertex change drops below tolerance or the iteration budget runs out."""
    config = config or TextRankConfig()
    config.validate()
    d = config.damping
    scores = {v: config.init_score for v in graph.vertices}
    strengths = {v: graph.strength(v) for v in graph.vertices}
    iterations = 0
    converged = False
    while iterations < config.max_iterations:
        iterations += 1
        new_scores = {}
        for v in graph.vertices:
            acc = 0.0
            for neighbor, weight in graph.adjacency[v].items():
                acc += weight / strengths[neighbor] * scores[neighbor]
            new_scores[v] = (1.0 - d) + d * acc
        delta = max((abs(new_scores[v] - scores[v]) for v in graph.vertices), default=0.0)
        scores = new_scores
        if delta < config.tolerance:
            converged = True
            break
    return ScoreMap(score=scores, iterations_used=iterations, converged=converged)


def rank_query_keywords(query_words: list[str], scores: ScoreMap, n: int) -> list[str]:
    """The n highest-scoring distinct words of the query, in original order.

    A repeated word is considered once (at its earliest position); ties are
    broken toward the earlier position.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    first_pos: dict[str, int] = {}
    for i, word in enumerate(query_words):
        first_pos.setdefault(word, i)
    if len(first_pos) < n:
        raise ValueError(f"query has {len(first_pos)} distinct words, need {n}")
    chosen = sorted(first_pos, key=lambda w: (-scores.get(w), first_pos[w]))[:n]
    return sorted(chosen, key=lambda w: first_pos[w])


def line_keyword(line_words: list[str], scores: ScoreMap) -> str:
    """Highest-scoring word of the line; earliest position wins ties."""
    if not line_words:
        raise ValueError("line has no words")
    best = line_words[0]
    best_score = scores.get(best)
    for word in line_words[1:]:
        s = scores.get(word)
        if s > best_score:
            best, best_score = word, s
    return best


def save_scores(path, scores: ScoreMap) -> None:
    """word<TAB>score rows, 10 significant digits, best first."""
    ordered = sorted(scores.score.items(), key=lambda kv: (-kv[1], kv[0]))
    with open(path, "w", encoding="utf-8") as fh:
        for word, value in ordered:
            fh.write(f"{word}\t{value:.10g}\n")


def load_scores(path) -> ScoreMap:
    score = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        word, value = line.split("\t")
        score[word] = float(value)
    return ScoreMap(score=score)
