"""Command-line entry point.

Subcommands: pretrain, train, decode, eval, report, gradcheck, gen-data.
Training flags mirror TrainConfig keys one for one; a config file provides
defaults and flags override it.  Relative output paths resolve under
$SOFTBEAM_RUN_ROOT when it is set.  Exit code is 0 on success; on failure a
single machine-parsable line `error: <kind>: <message>` goes to stderr and
the exit code is 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, load_config
from .data import (gen_lookahead_tagging, gen_transduction, read_corpus,
                   write_corpus)
from .diagnostics import run_gradcheck_suite
from .errors import ConfigError, SoftbeamError
from .metrics import EvalReport, evaluate
from .objectives import logz_stats
from .reporting import (assemble_report, plot_learning_curves,
                        render_logz_table, scan_runs)
from .training import decode_corpus, run_pretrain, run_search_aware

RUN_ROOT_ENV = "SOFTBEAM_RUN_ROOT"


def _resolve(path: str | Path) -> Path:
    p = Path(path)
    root = os.environ.get(RUN_ROOT_ENV)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    for f in dataclasses.fields(TrainConfig):
        parser.add_argument("--" + f.name.replace("_", "-"),
                            dest=f.name, default=None, metavar="V")
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="key = value config file")


def _config_from_args(args: argparse.Namespace,
                      defaults: dict | None = None) -> TrainConfig:
    overrides = {f.name: getattr(args, f.name)
                 for f in dataclasses.fields(TrainConfig)
                 if getattr(args, f.name) is not None}
    return load_config(args.config, overrides, defaults)


def _load_corpora(cfg: TrainConfig):
    if not cfg.train_path or not cfg.dev_path:
        raise ConfigError("train_path and dev_path are required")
    train = read_corpus(_resolve(cfg.train_path))
    dev = read_corpus(_resolve(cfg.dev_path))
    if train.task_kind != cfg.task_kind:
        raise ConfigError(
            f"config task_kind {cfg.task_kind!r} does not match corpus "
            f"task kind {train.task_kind!r}")
    return train, dev


def _open_run_dir(cfg: TrainConfig) -> Path:
    out = _resolve(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    return out


def _log_to(path: Path):
    handle = open(path, "a")

    def log(line: str) -> None:
        handle.write(line + "\n")
        handle.flush()
        print(line)

    return log


def _dev_eval(params, dev, cfg, decode_mode: str, label: str,
              alpha: float) -> EvalReport:
    preds = decode_corpus(params, dev, mode=decode_mode, k=cfg.beam_k,
                          alpha=alpha)
    golds = [y for _, y in dev.examples]
    src_lens = [len(x) for x, _ in dev.examples]
    return evaluate(preds, golds, cfg.task_kind, label, src_lens)


def _write_report(out: Path, name: str, report: EvalReport) -> None:
    (out / f"eval_{name}.json").write_text(
        json.dumps(report.to_dict(), indent=1) + "\n")


def cmd_pretrain(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    train, dev = _load_corpora(cfg)
    out = _open_run_dir(cfg)
    log = _log_to(out / "log.txt")
    result = run_pretrain(cfg, train, dev, log)
    save_checkpoint(result.params, out / "checkpoint.bin")

    stats = {"train": logz_stats(result.params, train.examples,
                                 "train").to_dict(),
             "dev": logz_stats(result.params, dev.examples, "dev").to_dict()}
    (out / "logz.json").write_text(json.dumps(stats, indent=1) + "\n")
    print(render_logz_table(
        [{"label": f"{cfg.objective} (lam={cfg.lam:g})", **stats}]))

    for decode_mode, label in (("greedy", "pretrain-greedy"),
                               ("beam", "pretrain-beam")):
        report = _dev_eval(result.params, dev, cfg, decode_mode, label,
                           cfg.alpha_max)
        _write_report(out, decode_mode, report)
        print(f"dev {label}: accuracy={report.accuracy:.4f} "
              f"bleu={report.bleu:.2f}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args, defaults={"objective": "soft-beam"})
    train, dev = _load_corpora(cfg)
    warm = load_checkpoint(_resolve(cfg.warm_start))
    if len(train.src_vocab) != warm.config.src_vocab \
            or len(train.tgt_vocab) != warm.config.tgt_vocab:
        raise ConfigError(
            "warm-start checkpoint vocabulary sizes do not match corpus")
    out = _open_run_dir(cfg)
    log = _log_to(out / "log.txt")
    result = run_search_aware(cfg, train, dev, warm, log)
    save_checkpoint(result.params, out / "checkpoint.bin")

    label = ("locally-normalized" if cfg.normalization_mode == "local"
             else "globally-normalized")
    # evaluate in the same regime checkpoint selection used: soft-beam MAP
    # at the final epoch's inverse temperature
    report = _dev_eval(result.params, dev, cfg, "soft-map", label,
                       cfg.anneal.alpha(cfg.epochs - 1))
    _write_report(out, "softmap", report)
    print(f"dev {label}: accuracy={report.accuracy:.4f} "
          f"bleu={report.bleu:.2f}")
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    params = load_checkpoint(_resolve(args.checkpoint))
    corpus = read_corpus(_resolve(args.corpus))
    if len(corpus.src_vocab) != params.config.src_vocab \
            or len(corpus.tgt_vocab) != params.config.tgt_vocab:
        raise ConfigError(
            "checkpoint vocabulary sizes do not match corpus")
    preds = decode_corpus(params, corpus, mode=args.mode, k=args.k,
                          alpha=args.alpha, score_mode=args.score_mode)
    lines = [" ".join(corpus.tgt_vocab.to_tokens(p)) for p in preds]
    if args.out:
        _resolve(args.out).write_text(
            "".join(line + "\n" for line in lines))
    else:
        for line in lines:
            print(line)

    label = {"greedy": "pretrain-greedy", "beam": "pretrain-beam"}.get(
        args.mode,
        "locally-normalized" if params.config.normalization_mode == "local"
        else "globally-normalized")
    golds = [y for _, y in corpus.examples]
    src_lens = [len(x) for x, _ in corpus.examples]
    report = evaluate(preds, golds, corpus.task_kind, label, src_lens)
    print(json.dumps(report.to_dict()))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    corpus = read_corpus(_resolve(args.corpus))
    pred_path = _resolve(args.pred)
    preds = []
    for i, line in enumerate(pred_path.read_text().splitlines(), start=1):
        preds.append(corpus.tgt_vocab.to_ids(
            line.split(), where=f"{pred_path}: line {i}: "))
    golds = [y for _, y in corpus.examples]
    src_lens = [len(x) for x, _ in corpus.examples]
    report = evaluate(preds, golds, corpus.task_kind, args.decode_mode,
                      src_lens)
    print(json.dumps(report.to_dict()))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    root = _resolve(args.run_root if args.run_root else ".")
    runs = scan_runs(root)
    if not runs:
        raise ConfigError(f"no run directories under {root}")
    tasks = ([args.task] if args.task != "both"
             else ["tagging", "transduction"])
    for task in tasks:
        print(assemble_report(runs, task))
    if args.plots:
        for run in runs:
            if (run.path / "log.txt").exists():
                out = plot_learning_curves(run.path)
                print(f"wrote {out}")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    results = run_gradcheck_suite(instances=args.instances, seed=args.seed,
                                  epsilon=args.epsilon,
                                  rel_tol=args.rel_tol)
    ok = True
    for r in results:
        print(r.line())
        ok = ok and r.passed
    return 0 if ok else 1


def cmd_gen_data(args: argparse.Namespace) -> int:
    n_range = (args.n_lo, args.n_hi)
    if args.vocab_size is None:
        args.vocab_size = 32 if args.task == "tagging" else 64
    if args.task == "tagging":
        corpus = gen_lookahead_tagging(
            n_range=n_range, vocab_size=args.vocab_size,
            ambiguity_rate=args.ambiguity_rate, seed=args.seed,
            count=args.count)
    else:
        corpus = gen_transduction(
            n_range=n_range, vocab_size=args.vocab_size,
            reorder_window=args.reorder_window, seed=args.seed,
            count=args.count, rewrite=args.rewrite, t_max=args.t_max)
    write_corpus(corpus, _resolve(args.out))
    print(f"wrote {args.count} examples to {_resolve(args.out)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softbeam",
        description="train and evaluate seq2seq models under local/global "
                    "normalization with search-aware soft-beam training")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="teacher-forcing or self-normalized "
                                        "pre-training")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("train", help="search-aware soft-beam training from "
                                     "a warm start")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("decode", help="decode a corpus with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=("greedy", "beam", "soft-map"),
                   default="beam")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=1000.0)
    p.add_argument("--score-mode", choices=("normalized", "unnormalized"),
                   default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("eval", help="evaluate a predictions file")
    p.add_argument("--pred", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--decode-mode", default="pretrain-beam")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="render tables over completed runs")
    p.add_argument("--run-root", default=None)
    p.add_argument("--task", choices=("tagging", "transduction", "both"),
                   default="both")
    p.add_argument("--plots", action="store_true",
                   help="also render learning-curve images")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--rel-tol", type=float, default=1e-4)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    p.add_argument("--task", choices=("tagging", "transduction"),
                   required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-lo", type=int, default=4)
    p.add_argument("--n-hi", type=int, default=8)
    p.add_argument("--vocab-size", type=int, default=None)
    p.add_argument("--ambiguity-rate", type=float, default=1.0)
    p.add_argument("--reorder-window", type=int, default=3)
    p.add_argument("--rewrite", choices=("classes", "identity"),
                   default="classes")
    p.add_argument("--t-max", type=int, default=24)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gen_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SoftbeamError as exc:
        msg = str(exc).replace("\n", "; ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
