"""Figure rendering for the delimited reports.

Every figure lands next to its TSV counterpart: training curves next to the
per-epoch report, a keyword-score chart next to the score table.
"""

from __future__ import annotations

import warnings

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .textrank import ScoreMap  # noqa: E402
from .training import TrainingReport  # noqa: E402


def _save(fig, path) -> None:
    # CJK labels are common here and the container fonts rarely cover them;
    # the missing-glyph warnings are cosmetic.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
    plt.close(fig)


def save_training_figure(report: TrainingReport, path) -> None:
    """Train loss and validation perplexity per epoch, best epoch marked."""
    epochs = [row.epoch for row in report.epochs]
    fig, (ax_loss, ax_ppl) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [row.train_nll for row in report.epochs], color="tab:blue")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train NLL / sequence")
    ax_ppl.plot(epochs, [row.valid_ppl for row in report.epochs], color="tab:orange")
    ax_ppl.axvline(report.best_epoch, color="gray", linestyle=":", linewidth=1)
    ax_ppl.set_xlabel("epoch")
    ax_ppl.set_ylabel("validation perplexity")
    ax_ppl.set_yscale("log")
    _save(fig, path)


def save_score_figure(scores: ScoreMap, path, top: int = 30) -> None:
    """Horizontal bar chart of the highest-ranked words."""
    ranked = sorted(scores.score.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
    ranked.reverse()  # best on top
    words = [w for w, _ in ranked]
    values = [v for _, v in ranked]
    fig, ax = plt.subplots(figsize=(6, max(2.0, 0.25 * len(words) + 1)))
    ax.barh(range(len(words)), values, color="tab:blue")
    ax.set_yticks(range(len(words)))
    ax.set_yticklabels(words)
    ax.set_xlabel("importance score")
    _save(fig, path)
