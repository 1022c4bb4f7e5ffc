"""Command-line entry point exposing the full pipeline.

Subcommands: make-instances, train, score, pairdist, eval, rank, choice,
analyze, stats.  Shared flags: --config (flat key=value file), --seed,
--backend (toy[:seed] | file:<path> | service[:<url>]), --quiet.

Exit codes:
    0 success            4 schema/format/config violation
    1 unexpected error   5 embedding-backend failure
    2 usage error        6 input-domain error
    3 missing/unreadable file

Failures print one machine-parseable JSON line to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .analysis import (bin_by_implicitness, diversity_summary, load_verdicts,
                       pragmatic_diversity, score_corpus,
                       verdict_accuracy_by_bin, write_bin_csv)
from .backends import (EmbeddingBackend, FileBackend, ServiceBackend,
                       ToyHashBackend, embed_unique)
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (dataset_stats, generate_negatives, load_instances,
                   load_pairs, write_instances)
from .evaluation import (evaluate_instances, load_choice_questions,
                         load_ranking_questions, run_choice_task,
                         run_ranking_task, write_choice_csv, write_ranking_csv)
from .exceptions import (BackendError, ConfigError, DimensionError,
                         ImpscoreError, MissingEmbeddingError, SchemaError)
from .model import ModelConfig, pragmatic_distances
from .training import TrainConfig, train

log = logging.getLogger("impscore")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_SCHEMA = 4
EXIT_BACKEND = 5
EXIT_DOMAIN = 6

ENV_EMBED_URL = "IMPSCORE_EMBED_URL"

_MODEL_KEYS = ("d", "l", "imp_metric", "prag_metric", "transform")
_TRAIN_KEYS = ("gamma1", "gamma2", "alpha", "lr", "batch_size", "epochs",
               "split", "seed")
_CONFIG_KEYS = set(_MODEL_KEYS) | set(_TRAIN_KEYS) | {"backend"}

_INT_KEYS = {"d", "l", "batch_size", "epochs", "seed"}
_FLOAT_KEYS = {"gamma1", "gamma2", "alpha", "lr"}


def parse_config_file(path) -> dict[str, str]:
    """Flat `key = value` lines; # starts a comment; unknown keys rejected."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise SchemaError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = value.strip()
    return values


def _convert(key: str, value):
    if isinstance(value, str):
        try:
            if key in _INT_KEYS:
                return int(value)
            if key in _FLOAT_KEYS:
                return float(value)
            if key == "split":
                parts = [float(p) for p in value.split(",")]
                return tuple(parts)
        except ValueError as exc:
            raise SchemaError(f"config key {key}: {exc}") from exc
    return value


def resolve_settings(args) -> tuple[ModelConfig, TrainConfig, str]:
    """Merge config file and CLI flags into configs plus a backend spec.

    Precedence: CLI flag > config file > default.
    """
    file_vals = parse_config_file(args.config) if getattr(args, "config", None) else {}

    merged: dict = {k: _convert(k, v) for k, v in file_vals.items()}
    for key in _MODEL_KEYS + _TRAIN_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    if getattr(args, "seed", None) is not None:
        merged["seed"] = args.seed

    model_cfg = ModelConfig(**{k: merged[k] for k in _MODEL_KEYS if k in merged})
    train_cfg = TrainConfig(**{k: merged[k] for k in _TRAIN_KEYS if k in merged})
    backend_spec = getattr(args, "backend", None) or merged.get("backend") or "toy"
    return model_cfg, train_cfg, backend_spec


def make_backend(spec: str, dim: int, seed: int) -> EmbeddingBackend:
    """Instantiate a backend from its spec string."""
    if spec == "toy":
        return ToyHashBackend(dim=dim, seed=seed)
    if spec.startswith("toy:"):
        try:
            toy_seed = int(spec[4:])
        except ValueError as exc:
            raise ConfigError(f"bad toy backend seed in {spec!r}") from exc
        return ToyHashBackend(dim=dim, seed=toy_seed)
    if spec.startswith("file:"):
        return FileBackend(spec[5:])
    if spec == "service" or spec.startswith("service:"):
        url = spec[8:] if spec.startswith("service:") else ""
        url = url or os.environ.get(ENV_EMBED_URL, "")
        if not url:
            raise ConfigError(
                f"no service URL: use service:<url> or set {ENV_EMBED_URL}")
        return ServiceBackend(url)
    raise ConfigError(f"unknown backend spec {spec!r}")


def _read_text_lines(path: str | None) -> list[str]:
    """One text per line from a file or stdin; blank lines are skipped."""
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            data = fh.read()
    else:
        data = sys.stdin.read()
    return [line for line in (l.rstrip("\r") for l in data.split("\n")) if line]


def _print_json(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2))
    sys.stdout.write("\n")


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(payload, separators=(",", ":"), allow_nan=False))
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands

def cmd_make_instances(args) -> int:
    _, train_cfg, _ = resolve_settings(args)
    pairs = load_pairs(args.pairs)
    instances, skipped = generate_negatives(pairs, train_cfg.seed)
    for s in skipped:
        log.warning("skipped pair %d (source %r): %s", s.index, s.source, s.reason)
    write_instances(args.out, instances)
    log.info("wrote %d instances (%d skipped) to %s",
             len(instances), len(skipped), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    model_cfg, train_cfg, backend_spec = resolve_settings(args)
    instances = load_instances(args.instances)
    backend = make_backend(backend_spec, model_cfg.d, train_cfg.seed)
    head, history = train(instances, backend, model_cfg, train_cfg)
    best = history.best_record()
    save_checkpoint(args.out, head, {
        "best_epoch": history.best_epoch,
        "val_imp_acc": best.val_imp_acc if best else None,
        "val_prag_acc": best.val_prag_acc if best else None,
        "seed": train_cfg.seed,
    })
    history_path = args.history or args.out + ".history.json"
    _write_json(history_path, history.to_dict())
    log.info("wrote checkpoint %s (best epoch %d) and history %s",
             args.out, history.best_epoch, history_path)
    return EXIT_OK


def cmd_score(args) -> int:
    head, _ = load_checkpoint(args.checkpoint)
    texts = _read_text_lines(args.texts)
    if not texts:
        return EXIT_OK
    _, train_cfg, backend_spec = resolve_settings(args)
    backend = make_backend(backend_spec, head.config.d, train_cfg.seed)
    scored = score_corpus(texts, head, backend, checkpoint_id=str(args.checkpoint))
    for text, score in zip(scored.texts, scored.scores):
        sys.stdout.write(f"{text}\t{float(score)!r}\n")
    return EXIT_OK


def cmd_pairdist(args) -> int:
    head, _ = load_checkpoint(args.checkpoint)
    lines = _read_text_lines(args.pairs)
    if not lines:
        return EXIT_OK
    pairs = []
    for i, line in enumerate(lines, start=1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise SchemaError(
                f"pair input line {i}: expected two tab-separated texts")
        pairs.append((parts[0], parts[1]))
    _, train_cfg, backend_spec = resolve_settings(args)
    backend = make_backend(backend_spec, head.config.d, train_cfg.seed)
    texts = [t for pair in pairs for t in pair]
    matrix, row = embed_unique(texts, backend)
    if matrix.shape[1] != head.config.d:
        raise DimensionError(head.config.d, matrix.shape[1],
                             "backend embedding width")
    ia = np.array([row[a] for a, _ in pairs], dtype=np.intp)
    ib = np.array([row[b] for _, b in pairs], dtype=np.intp)
    dists = pragmatic_distances(matrix[ia], matrix[ib], head)
    for (a, b), d in zip(pairs, dists):
        sys.stdout.write(f"{a}\t{b}\t{float(d)!r}\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    head, _ = load_checkpoint(args.checkpoint)
    instances = load_instances(args.instances)
    _, train_cfg, backend_spec = resolve_settings(args)
    backend = make_backend(backend_spec, head.config.d, train_cfg.seed)
    report = evaluate_instances(instances, head, backend)
    _print_json(report)
    return EXIT_OK


def cmd_rank(args) -> int:
    head, _ = load_checkpoint(args.checkpoint)
    questions = load_ranking_questions(args.questions)
    _, train_cfg, backend_spec = resolve_settings(args)
    backend = make_backend(backend_spec, head.config.d, train_cfg.seed)
    report = run_ranking_task(questions, head, backend)
    if args.csv:
        write_ranking_csv(report, args.csv)
    _print_json(report.to_dict())
    return EXIT_OK


def cmd_choice(args) -> int:
    head, _ = load_checkpoint(args.checkpoint)
    questions = load_choice_questions(args.questions)
    _, train_cfg, backend_spec = resolve_settings(args)
    backend = make_backend(backend_spec, head.config.d, train_cfg.seed)
    report = run_choice_task(questions, head, backend)
    if args.csv:
        write_choice_csv(report, args.csv)
    _print_json(report.to_dict())
    return EXIT_OK


def cmd_analyze(args) -> int:
    head, _ = load_checkpoint(args.checkpoint)
    texts = _read_text_lines(args.texts)
    if args.dedup:
        texts = list(dict.fromkeys(texts))
    _, train_cfg, backend_spec = resolve_settings(args)
    backend = make_backend(backend_spec, head.config.d, train_cfg.seed)
    scored = score_corpus(texts, head, backend, checkpoint_id=str(args.checkpoint))

    bins = None
    if head.config.imp_metric == "cosine":
        if args.verdicts:
            bins = verdict_accuracy_by_bin(scored, load_verdicts(args.verdicts))
        else:
            bins = bin_by_implicitness(scored.scores)
    else:
        log.warning("binning skipped: scores of a euclidean-metric head "
                    "are not confined to [0, 2]")

    diversity = None
    if len(texts) >= 2:
        distances = pragmatic_diversity(texts, head, backend,
                                        n_samples=args.diversity_samples,
                                        seed=train_cfg.seed)
        diversity = diversity_summary(distances)

    if bins is not None and args.csv:
        write_bin_csv(bins, args.csv)
    _print_json({
        "corpus": scored.summary(),
        "bins": bins.to_dict() if bins is not None else None,
        "pragmatic_diversity": diversity,
    })
    return EXIT_OK


def cmd_stats(args) -> int:
    instances = load_instances(args.instances)
    _print_json(dataset_stats(instances).to_dict())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="flat key = value config file")
    common.add_argument("--seed", type=int, metavar="N",
                        help="seed governing all randomness (overrides config)")
    common.add_argument("--backend", metavar="SPEC",
                        help="toy[:seed] | file:<path> | service[:<url>] "
                             f"(service URL falls back to ${ENV_EMBED_URL})")
    common.add_argument("--quiet", action="store_true",
                        help="log warnings and errors only")

    parser = argparse.ArgumentParser(
        prog="impscore",
        description="Train and apply a reference-free implicitness metric.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("make-instances", parents=[common],
                       help="build training instances from positive pairs")
    p.add_argument("--pairs", required=True, metavar="JSONL")
    p.add_argument("--out", required=True, metavar="JSONL")
    p.set_defaults(func=cmd_make_instances)

    p = sub.add_parser("train", parents=[common],
                       help="train a projection head")
    p.add_argument("--instances", required=True, metavar="JSONL")
    p.add_argument("--out", required=True, metavar="CKPT")
    p.add_argument("--history", metavar="JSON",
                   help="history output path (default: <ckpt>.history.json)")
    p.add_argument("--d", type=int, help="embedding dimension")
    p.add_argument("--l", type=int, help="feature dimension")
    p.add_argument("--imp-metric", dest="imp_metric",
                   choices=["cosine", "euclidean"])
    p.add_argument("--prag-metric", dest="prag_metric",
                   choices=["cosine", "euclidean"])
    p.add_argument("--transform",
                   choices=["p_to_s", "s_to_p", "third_space"])
    p.add_argument("--gamma1", type=float, help="implicitness margin")
    p.add_argument("--gamma2", type=float, help="pragmatic margin")
    p.add_argument("--alpha", type=float, help="pragmatic-loss weight")
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", parents=[common],
                       help="score texts for implicitness (TSV to stdout)")
    p.add_argument("--checkpoint", required=True, metavar="CKPT")
    p.add_argument("--texts", metavar="FILE",
                   help="one text per line (default: stdin)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("pairdist", parents=[common],
                       help="pragmatic distance per tab-separated text pair")
    p.add_argument("--checkpoint", required=True, metavar="CKPT")
    p.add_argument("--pairs", metavar="FILE",
                   help="lines of 'text_a<TAB>text_b' (default: stdin)")
    p.set_defaults(func=cmd_pairdist)

    p = sub.add_parser("eval", parents=[common],
                       help="implicitness and pragmatics accuracy over instances")
    p.add_argument("--checkpoint", required=True, metavar="CKPT")
    p.add_argument("--instances", required=True, metavar="JSONL")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", parents=[common],
                       help="run ranking questions against gold orderings")
    p.add_argument("--checkpoint", required=True, metavar="CKPT")
    p.add_argument("--questions", required=True, metavar="JSONL")
    p.add_argument("--csv", metavar="FILE", help="also write per-question CSV")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("choice", parents=[common],
                       help="run closest-option choice questions")
    p.add_argument("--checkpoint", required=True, metavar="CKPT")
    p.add_argument("--questions", required=True, metavar="JSONL")
    p.add_argument("--csv", metavar="FILE", help="also write per-question CSV")
    p.set_defaults(func=cmd_choice)

    p = sub.add_parser("analyze", parents=[common],
                       help="corpus summary, implicitness bins, diversity")
    p.add_argument("--checkpoint", required=True, metavar="CKPT")
    p.add_argument("--texts", metavar="FILE",
                   help="one text per line (default: stdin)")
    p.add_argument("--verdicts", metavar="JSONL",
                   help="external model verdicts to join per bin")
    p.add_argument("--dedup", action="store_true",
                   help="drop duplicate texts before scoring")
    p.add_argument("--diversity-samples", dest="diversity_samples", type=int,
                   default=2000, metavar="N",
                   help="sampled text pairs for pragmatic diversity")
    p.add_argument("--csv", metavar="FILE", help="also write the bin CSV")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("stats", parents=[common],
                       help="dataset statistics for an instances file")
    p.add_argument("--instances", required=True, metavar="JSONL")
    p.set_defaults(func=cmd_stats)

    return parser


def _fail(code: int, kind: str, exc: BaseException) -> int:
    line = json.dumps({"error": kind, "exit_code": code, "message": str(exc)})
    sys.stderr.write(line + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        return _fail(EXIT_MISSING_FILE, "missing-file", exc)
    except (SchemaError, ConfigError) as exc:
        return _fail(EXIT_SCHEMA, "schema", exc)
    except (BackendError, MissingEmbeddingError) as exc:
        return _fail(EXIT_BACKEND, "backend", exc)
    except (DimensionError, ValueError) as exc:
        return _fail(EXIT_DOMAIN, "input-domain", exc)
    except ImpscoreError as exc:
        return _fail(EXIT_INTERNAL, "internal", exc)
    except Exception as exc:  # pragma: no cover - defensive
        return _fail(EXIT_INTERNAL, "internal", exc)


if __name__ == "__main__":
    sys.exit(main())
