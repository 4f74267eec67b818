"""Command-line pipeline: prepare, train, plan, generate, eval.

Configuration values come from built-in defaults, then an optional config
file of "key = value" lines, then command-line flags, later sources winning.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import corpus as corpus_mod
from . import textrank as textrank_mod
from .corpus import CorpusError, SkipRecord
from .decoding import DecodeConfig, generate_poem
from .model import KeywordLanguageModel, LmConfig, ModelConfig, PoemModel
from .nnet.archive import ArchiveError, load_archive
from .planner import KeywordPlan, KnowledgeBase, PlanningError, PosLexicon, plan
from .training import (
    TrainConfig,
    TrainingError,
    encode_sequences,
    encode_triples,
    perplexity,
    train_keyword_lm,
    train_poem_model,
)

LINE_LENGTHS = (5, 7)


class UsageError(Exception):
    """Bad invocation or configuration; exits with code 2."""


@dataclass
class RunConfig:
    """Every tunable of the pipeline; any field can come from the config file
    or be overridden by the matching command-line flag."""

    seed: int = 12345
    vocab_size: int = 6000
    window: int = 5
    damping: float = 0.85
    tolerance: float = 1e-6
    max_iterations: int = 200
    embed_dim: int = 64
    hidden_dim: int = 64
    align_dim: int = 64
    out_hidden_dim: int = 64
    context_variant: str = "literal"
    share_embeddings: bool = True
    share_encoders: bool = False
    float32: bool = False
    batch_size: int = 16
    max_epochs: int = 50
    patience: int = 20
    rho: float = 0.95
    epsilon: float = 1e-6
    valid_split: float = 0.0
    beam: int = 10
    length: int = 5
    n: int = 4
    strict: bool = False
    knowledge_first: bool = True
    pos_filter: bool = True
    anti_repeat: bool = False

    def validate(self) -> None:
        for name in ("vocab_size", "window", "max_iterations", "embed_dim", "hidden_dim",
                     "align_dim", "out_hidden_dim", "batch_size", "max_epochs",
                     "patience", "beam", "n"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be at least 1")
        if not -(2 ** 63) <= self.seed < 2 ** 64:
            raise UsageError("seed must fit in 64 bits")
        if self.length not in LINE_LENGTHS:
            raise UsageError(f"length must be one of {LINE_LENGTHS}")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            embed_dim=self.embed_dim, hidden_dim=self.hidden_dim,
            align_dim=self.align_dim, out_hidden_dim=self.out_hidden_dim,
            context_variant=self.context_variant,
            share_embeddings=self.share_embeddings,
            share_encoders=self.share_encoders, float32=self.float32)

    def lm_config(self) -> LmConfig:
        return LmConfig(embed_dim=self.embed_dim, hidden_dim=self.hidden_dim,
                        float32=self.float32)

    def train_config(self) -> TrainConfig:
        return TrainConfig(seed=self.seed, batch_size=self.batch_size,
                           max_epochs=self.max_epochs, patience=self.patience,
                           rho=self.rho, epsilon=self.epsilon,
                           valid_split=self.valid_split)

    def decode_config(self) -> DecodeConfig:
        return DecodeConfig(beam_width=self.beam, line_length=self.length,
                            anti_repeat=self.anti_repeat)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}

_FLAG_HELP = {
    "seed": "master seed for all randomness",
    "vocab_size": "most frequent characters kept in the vocabulary",
    "window": "co-occurrence window (words) for the ranking graph",
    "damping": "damping factor of the ranking iteration",
    "tolerance": "ranking convergence threshold",
    "max_iterations": "ranking iteration cap",
    "embed_dim": "character embedding width",
    "hidden_dim": "GRU hidden width (encoders and decoder)",
    "align_dim": "attention alignment width",
    "out_hidden_dim": "output head hidden width",
    "context_variant": "decoder context wiring: literal (previous step) or conventional",
    "share_embeddings": "keyword encoder reuses the main embedding table",
    "share_encoders": "keyword and text encoders share GRU weights",
    "float32": "train in 32-bit floats",
    "batch_size": "sequences per optimizer update",
    "max_epochs": "training epoch cap",
    "patience": "epochs without validation improvement before stopping",
    "rho": "optimizer accumulator decay",
    "epsilon": "optimizer stabilizer",
    "valid_split": "fraction of examples held out for validation (0: validate on train)",
    "beam": "beam width for decoding",
    "length": "characters per poem line",
    "n": "number of poem lines / plan keywords",
    "strict": "fail on the first malformed corpus record",
    "knowledge_first": "try knowledge expansion before the language model",
    "pos_filter": "keep only nouns/adjectives in knowledge expansion",
    "anti_repeat": "refuse lines that duplicate an earlier line verbatim",
}


def _parse_value(name: str, raw: str):
    kind = _FIELDS[name].type
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise UsageError(f"config key {name}: expected a boolean, got {raw!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError as exc:
        raise UsageError(f"config key {name}: {exc}") from exc
    return raw


def load_config_file(path) -> dict:
    """Parse "key = value" lines; '#' starts a comment; unknown keys are fatal."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise UsageError(f"{path}:{line_no}: unknown config key {key!r}")
        values[key] = _parse_value(key, value)
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            setattr(cfg, key, value)
    for name in _FIELDS:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            setattr(cfg, name, flag_value)
    cfg.validate()
    return cfg


def _add_config_flags(parser: argparse.ArgumentParser, names) -> None:
    parser.add_argument("--config", metavar="PATH", help="config file of key = value lines")
    for name in names:
        field = _FIELDS[name]
        flag = "--" + name.replace("_", "-")
        help_text = _FLAG_HELP.get(name)
        if field.type == "bool":
            parser.add_argument(flag, dest=name, default=None, help=help_text,
                                action=argparse.BooleanOptionalAction)
        elif field.type == "int":
            kwargs = {"type": int, "default": None, "help": help_text}
            if name == "length":
                kwargs["choices"] = LINE_LENGTHS
            parser.add_argument(flag, dest=name, **kwargs)
        elif field.type == "float":
            parser.add_argument(flag, dest=name, type=float, default=None, help=help_text)
        else:
            parser.add_argument(flag, dest=name, default=None, help=help_text)


_PREPARE_KEYS = ("seed", "vocab_size", "window", "damping", "tolerance",
                 "max_iterations", "strict")
_TRAIN_KEYS = ("seed", "embed_dim", "hidden_dim", "align_dim", "out_hidden_dim",
               "context_variant", "share_embeddings", "share_encoders", "float32",
               "batch_size", "max_epochs", "patience", "rho", "epsilon", "valid_split")
_PLAN_KEYS = ("seed", "n", "knowledge_first", "pos_filter")
_GENERATE_KEYS = _PLAN_KEYS + ("length", "beam", "anti_repeat")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poemplan",
        description="Plan sub-topic keywords from a query, then write a poem line by line.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build vocabulary, scores, triples and keyword corpus")
    p.add_argument("corpus", help="poem corpus file")
    p.add_argument("--lexicon", help="word list for segmentation (default: per character)")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p, _PREPARE_KEYS)

    p = sub.add_parser("train", help="train the poem model or the keyword language model")
    p.add_argument("kind", choices=("poem-model", "keyword-lm"))
    p.add_argument("prepared", help="directory produced by prepare")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p, _TRAIN_KEYS)

    p = sub.add_parser("plan", help="turn a query into n sub-topic keywords")
    p.add_argument("query", help="free-form query text")
    p.add_argument("--prepared", required=True, help="directory produced by prepare")
    p.add_argument("--lm", help="keyword language model archive")
    p.add_argument("--kb", help="knowledge base file")
    p.add_argument("--pos", help="part-of-speech lexicon file")
    _add_config_flags(p, _PLAN_KEYS)

    p = sub.add_parser("generate", help="plan keywords and write the poem")
    p.add_argument("query", help="free-form query text")
    p.add_argument("--prepared", required=True, help="directory produced by prepare")
    p.add_argument("--model", required=True, help="poem model archive")
    p.add_argument("--lm", help="keyword language model archive")
    p.add_argument("--kb", help="knowledge base file")
    p.add_argument("--pos", help="part-of-speech lexicon file")
    p.add_argument("--explain", action="store_true",
                   help="also print the keyword plan with provenance")
    p.add_argument("--json", action="store_true", dest="as_json",
                   help="emit a machine-readable record instead of plain text")
    _add_config_flags(p, _GENERATE_KEYS)

    p = sub.add_parser("eval", help="perplexity of a model archive on a dataset")
    p.add_argument("model", help="model archive")
    p.add_argument("dataset", help="triples.tsv for poem models, keywords.tsv for the LM")
    _add_config_flags(p, ())

    return parser


def _require_dir(path, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"{what} directory {path} does not exist")
    return p


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} {path} does not exist")
    return p


def _prepared_paths(prepared) -> dict[str, Path]:
    root = _require_dir(prepared, "prepared")
    paths = {name: root / fname for name, fname in (
        ("vocab", "vocab.txt"), ("scores", "scores.tsv"),
        ("triples", "triples.tsv"), ("keywords", "keywords.tsv"),
        ("lexicon", "lexicon.txt"))}
    for name in ("vocab", "scores", "triples", "keywords"):
        if not paths[name].is_file():
            raise UsageError(f"prepared directory {prepared} is missing {paths[name].name}")
    return paths


def cmd_prepare(args) -> int:
    cfg = resolve_config(args)
    corpus_path = _require_file(args.corpus, "corpus file")
    lexicon = corpus_mod.load_lexicon(args.lexicon) if args.lexicon else []
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    skips: list[SkipRecord] = []
    poems = corpus_mod.load_poems(corpus_path, strict=cfg.strict, skips=skips)
    for skip in skips:
        print(f"skipped record at line {skip.line_no}: {skip.reason}", file=sys.stderr)

    documents = [[w for line in corpus_mod.poem_words(poem, lexicon) for w in line]
                 for poem in poems]
    graph = textrank_mod.build_cooc_graph(documents, window=cfg.window)
    scores = textrank_mod.textrank_scores(graph, textrank_mod.TextRankConfig(
        damping=cfg.damping, tolerance=cfg.tolerance, max_iterations=cfg.max_iterations))

    vocab = corpus_mod.build_vocabulary(poems, cfg.vocab_size)
    sequences = corpus_mod.build_keyword_corpus(poems, scores, lexicon)
    triples = [t for poem, seq in zip(poems, sequences)
               for t in corpus_mod.extract_training_triples(poem, seq)]

    corpus_mod.save_vocabulary(out / "vocab.txt", vocab)
    textrank_mod.save_scores(out / "scores.tsv", scores)
    corpus_mod.save_triples(out / "triples.tsv", triples)
    corpus_mod.save_keyword_sequences(out / "keywords.tsv", sequences)
    with open(out / "lexicon.txt", "w", encoding="utf-8") as fh:
        for word in lexicon:
            fh.write(word + "\n")

    from .report import save_score_figure

    save_score_figure(scores, out / "scores.png")

    print(f"poems read: {len(poems)}")
    print(f"poems skipped: {len(skips)}")
    print(f"triples emitted: {len(triples)}")
    print(f"vocabulary characters: {len(vocab.char_of)}")
    print(f"graph vertices: {len(graph.vertices)} "
          f"(ranking {'converged' if scores.converged else 'hit iteration cap'} "
          f"after {scores.iterations_used} iterations)")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    paths = _prepared_paths(args.prepared)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.kind == "poem-model":
        vocab = corpus_mod.load_vocabulary(paths["vocab"])
        triples = corpus_mod.load_triples(paths["triples"])
        model, report = train_poem_model(triples, vocab, cfg.model_config(),
                                         cfg.train_config())
        stem = "poem_model"
        model.save(out / f"{stem}.bin")
    else:
        sequences = corpus_mod.load_keyword_sequences(paths["keywords"])
        model, report = train_keyword_lm(sequences, cfg.lm_config(), cfg.train_config())
        stem = "keyword_lm"
        model.save(out / f"{stem}.bin")

    report.write(out / f"{stem}_report.tsv")
    from .report import save_training_figure

    save_training_figure(report, out / f"{stem}_report.png")
    best = report.epochs[report.best_epoch - 1]
    print(f"trained {args.kind} for {len(report.epochs)} epochs")
    print(f"best epoch {best.epoch}: validation perplexity {best.valid_ppl:.6g}")
    print(f"model: {out / (stem + '.bin')}")
    print(f"report: {out / (stem + '_report.tsv')}")
    return 0


def _load_planning_inputs(args, cfg: RunConfig):
    paths = _prepared_paths(args.prepared)
    vocab = corpus_mod.load_vocabulary(paths["vocab"])
    scores = textrank_mod.load_scores(paths["scores"])
    lexicon = corpus_mod.load_lexicon(paths["lexicon"]) if paths["lexicon"].is_file() else []
    lm = KeywordLanguageModel.load(_require_file(args.lm, "language model")) if args.lm else None
    kb = KnowledgeBase.load(_require_file(args.kb, "knowledge base")) if args.kb else None
    pos = PosLexicon.load(_require_file(args.pos, "POS lexicon")) if args.pos else None
    return vocab, scores, lexicon, lm, kb, pos


def _plan_from_args(args, cfg: RunConfig) -> tuple[KeywordPlan, object]:
    vocab, scores, lexicon, lm, kb, pos = _load_planning_inputs(args, cfg)
    chunks = args.query.split()
    if not chunks:
        raise UsageError("query is empty")
    query_words = [w for chunk in chunks
                   for w in corpus_mod.segment_line(chunk, lexicon)]
    keyword_plan = plan(query_words, cfg.n, scores=scores, vocab=vocab, lm=lm, kb=kb,
                        pos=pos, knowledge_first=cfg.knowledge_first,
                        pos_filter=cfg.pos_filter)
    return keyword_plan, vocab


def cmd_plan(args) -> int:
    cfg = resolve_config(args)
    keyword_plan, _ = _plan_from_args(args, cfg)
    for keyword, source in zip(keyword_plan.keywords, keyword_plan.provenance):
        print(f"{keyword}\t{source}")
    return 0


def cmd_generate(args) -> int:
    cfg = resolve_config(args)
    keyword_plan, vocab = _plan_from_args(args, cfg)
    model = PoemModel.load(_require_file(args.model, "model archive"), vocab=vocab)
    poem = generate_poem(model, keyword_plan, cfg.decode_config(), title=args.query.strip())
    if args.as_json:
        record = {
            "query": poem.title,
            "plan": [{"keyword": k, "provenance": p}
                     for k, p in zip(keyword_plan.keywords, keyword_plan.provenance)],
            "lines": poem.lines,
            "line_length": cfg.length,
            "seed": cfg.seed,
        }
        print(json.dumps(record, ensure_ascii=False))
        return 0
    print(poem.title)
    if args.explain:
        for keyword, source in zip(keyword_plan.keywords, keyword_plan.provenance):
            print(f"# keyword: {keyword} ({source})")
    for line in poem.lines:
        print(line)
    return 0


def cmd_eval(args) -> int:
    resolve_config(args)
    model_path = _require_file(args.model, "model archive")
    dataset_path = _require_file(args.dataset, "dataset")
    _, meta, _ = load_archive(model_path)
    if meta.get("kind") == "poem-model":
        model = PoemModel.load(model_path)
        triples = corpus_mod.load_triples(dataset_path)
        if not triples:
            raise UsageError(f"dataset {dataset_path} is empty")
        encoded = encode_triples(triples, model.vocab)
    else:
        model = KeywordLanguageModel.load(model_path)
        sequences = corpus_mod.load_keyword_sequences(dataset_path)
        if not sequences:
            raise UsageError(f"dataset {dataset_path} is empty")
        encoded = encode_sequences(sequences, model.vocab)
    print(f"perplexity: {perplexity(model, encoded):.6g}")
    return 0


_COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "plan": cmd_plan,
    "generate": cmd_generate,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, PlanningError, TrainingError, ArchiveError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
