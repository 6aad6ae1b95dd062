"""Command-line interface: ``lexhmm train|eval|analyze``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import checkpoint as ckpt
from . import eval as ev
from .corpus import Corpus, CorpusFormatError, read_corpus, read_vertical, write_vertical
from .inference import SamplerConfig, run_training
from .model import EMISSION_MODES, INIT_MODES, SAMPLER_KINDS

log = logging.getLogger("lexhmm")


class UsageError(Exception):
    pass


# -- config files ----------------------------------------------------------------

def read_config_file(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys may use '-' or '_'."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _train_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--corpus", help="training corpus (CoNLL-X or vertical)")
    p.add_argument("--format", choices=("conllx", "vertical"), help="corpus format (default: guessed)")
    p.add_argument("--gold-column", choices=("cpostag", "postag"), default="cpostag")
    p.add_argument("--no-gold", action="store_true", help="vertical corpus without a tag column")
    p.add_argument("--tags", type=int, help="number of induced tags (default: gold tag count)")
    p.add_argument("--sampler", choices=SAMPLER_KINDS, default="lex")
    p.add_argument("--emission", choices=EMISSION_MODES, default="uniform")
    p.add_argument("--particles", type=int, default=10)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p-geom", type=float, default=0.5)
    p.add_argument("--init", choices=INIT_MODES, default="random")
    p.add_argument("--resample-threshold", type=float, default=0.5)
    p.add_argument("--hyper-every", type=int, default=0, help="hyperparameter resampling cadence (0 = off)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--discount", type=float, default=0.5)
    p.add_argument("--strength", type=float, default=1.0)
    p.add_argument("--class-discount", type=float, default=0.5)
    p.add_argument("--class-strength", type=float, default=1.0)
    p.add_argument("--backend", choices=("python", "compiled"))
    p.add_argument("--out", default="run", help="output directory")
    p.add_argument("--checkpoint-every", type=int, default=10, help="0 = only at the end")
    p.add_argument("--resume", help="continue from this checkpoint")
    return p


def build_parser(train_defaults: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lexhmm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    pt = sub.add_parser("train", parents=[_train_parser()], help="train a tagger")
    if train_defaults:
        pt.set_defaults(**train_defaults)
    pe = sub.add_parser("eval", help="score a predicted tagging against gold")
    pe.add_argument("pred", help="vertical file: word<TAB>induced tag")
    pe.add_argument("gold", help="gold corpus (CoNLL-X or vertical)")
    pe.add_argument("--gold-column", choices=("cpostag", "postag"), default="cpostag")
    pe.add_argument("--report", help="also write the class report TSV here")
    pe.add_argument("--out", help="write metrics here as well as to stdout")
    pa = sub.add_parser("analyze", help="lexicon class report and rank-frequency table")
    pa.add_argument("assignment", help="vertical file: word<TAB>tag")
    pa.add_argument("corpus", nargs="?", help="gold corpus for per-type tag proportions")
    pa.add_argument("--gold-column", choices=("cpostag", "postag"), default="cpostag")
    pa.add_argument("--top", type=int, default=5)
    pa.add_argument("--report", help="class report TSV path (default: stdout)")
    pa.add_argument("--zipf", help="rank-frequency TSV path")
    return parser


def config_defaults(cfg: dict[str, str]) -> dict:
    """Typed train defaults from a config file, validated like the flags."""
    actions = {a.dest: a for a in _train_parser()._actions}
    bad = sorted(k for k in cfg if k not in actions or k == "config")
    if bad:
        raise UsageError(f"unknown config keys: {', '.join(bad)}")
    out = {}
    for k, v in cfg.items():
        a = actions[k]
        if isinstance(a, argparse._StoreTrueAction):
            out[k] = v.lower() in ("1", "true", "yes", "on")
            continue
        try:
            out[k] = a.type(v) if a.type else v
        except ValueError:
            raise UsageError(f"config {k}={v}: not a valid {a.type.__name__}") from None
        if a.choices and out[k] not in a.choices:
            raise UsageError(f"config {k}={v}: choose from {', '.join(a.choices)}")
    return out


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.command == "train" and args.config:
        # parse again with the file as defaults so explicit flags win
        args = build_parser(config_defaults(read_config_file(args.config))).parse_args(argv)
    return args


# -- commands --------------------------------------------------------------------

def _load_corpus(path, fmt=None, gold_column="cpostag", gold=True) -> Corpus:
    if not path:
        raise UsageError("no corpus given")
    if not os.path.isfile(path):
        raise UsageError(f"cannot read corpus {path}")
    return read_corpus(path, fmt, gold_column=gold_column, gold=gold)


def sampler_config(args, corpus: Corpus) -> SamplerConfig:
    n_tags = args.tags
    if n_tags is None:
        if corpus.gold is None or not corpus.gold_labels:
            raise UsageError("--tags is required when the corpus has no gold tags")
        n_tags = len(corpus.gold_labels)
    cfg = SamplerConfig(
        n_tags=n_tags, kind=args.sampler, emission=args.emission, particles=args.particles,
        iterations=args.iterations, seed=args.seed, p_geom=args.p_geom, init=args.init,
        resample_threshold=args.resample_threshold, hyper_every=args.hyper_every,
        threads=args.threads, discount=args.discount, strength=args.strength,
        class_discount=args.class_discount, class_strength=args.class_strength,
        backend=args.backend)
    try:
        cfg.validate()
    except ValueError as e:
        raise UsageError(str(e)) from None
    if cfg.kind == "local" and cfg.emission == "charlm":
        log.warning("the token-level sampler mixes poorly with the character LM base")
    return cfg


def write_lexicon(path, corpus: Corpus, classes) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for w, c in enumerate(classes):
            f.write(f"{corpus.vocab[w]}\t{','.join(map(str, c))}\n")


def cmd_train(args) -> int:
    corpus = _load_corpus(args.corpus, args.format, args.gold_column, not args.no_gold)
    cfg = sampler_config(args, corpus)
    os.makedirs(args.out, exist_ok=True)
    ck_path = os.path.join(args.out, "checkpoint.npz")
    diag_path = os.path.join(args.out, "diagnostics.jsonl")
    state, start, history = None, 0, []
    if args.resume:
        try:
            state, cfg, start, history = ckpt.load(args.resume, corpus, cfg)
        except ckpt.CheckpointError as e:
            raise UsageError(f"cannot resume: {e}") from None
        log.info("resuming after iteration %d", start)
    diag = open(diag_path, "w", encoding="utf-8", newline="\n")
    for r in history:
        diag.write(json.dumps(r, sort_keys=True) + "\n")
    diag.flush()

    def on_iteration(st, rec):
        history.append(rec)
        diag.write(json.dumps(rec, sort_keys=True) + "\n")
        diag.flush()
        it = rec["iteration"]
        if args.checkpoint_every and it % args.checkpoint_every == 0:
            ckpt.save(ck_path, st, cfg, it, history)

    try:
        state, tags, _ = run_training(corpus, cfg, state, start, on_iteration)
    finally:
        diag.close()
    ckpt.save(ck_path, state, cfg, max(start, cfg.iterations), history)
    write_vertical(os.path.join(args.out, "tags.txt"), corpus, tags)
    write_lexicon(os.path.join(args.out, "lexicon.tsv"), corpus, state.lexicon.classes)
    metrics = {"iterations": cfg.iterations, "tokens": corpus.n_tokens, "types": corpus.n_types,
               "tags": cfg.n_tags, "mean_class_size": state.lexicon.mean_class_size(),
               "distinct_classes": state.lexicon.n_distinct()}
    if history:
        metrics["log_joint"] = float(history[-1]["log_joint"])
    if corpus.gold is not None:
        metrics.update(ev.evaluate(tags, corpus.gold))
    with open(os.path.join(args.out, "metrics.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write(ev.format_metrics(metrics))
    sys.stdout.write(ev.format_metrics(metrics))
    return 0


def _read_assignment(path) -> Corpus:
    if not os.path.isfile(path):
        raise UsageError(f"cannot read {path}")
    return read_vertical(path, gold=True)


def _aligned(pred: Corpus, gold: Corpus) -> None:
    if pred.n_tokens != gold.n_tokens or not np.array_equal(np.diff(pred.offsets), np.diff(gold.offsets)):
        raise UsageError("predicted and gold files differ in tokens or sentence boundaries")
    pv = np.asarray(pred.vocab, dtype=object)[pred.tokens]
    gv = np.asarray(gold.vocab, dtype=object)[gold.tokens]
    bad = np.flatnonzero(pv != gv)
    if bad.size:
        raise UsageError(f"word mismatch at token {int(bad[0]) + 1}: {pv[bad[0]]!r} vs {gv[bad[0]]!r}")


def cmd_eval(args) -> int:
    pred = _read_assignment(args.pred)
    gold = _load_corpus(args.gold, None, args.gold_column)
    if gold.gold is None:
        raise UsageError("gold file has no tags")
    _aligned(pred, gold)
    metrics = ev.evaluate(pred.gold, gold.gold)
    classes = ev.extract_classes(pred.gold, gold)
    metrics["mean_class_size"] = ev.mean_class_size(classes)
    metrics["distinct_classes"] = len(ev.class_counts(classes))
    text = ev.format_metrics(metrics)
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    if args.report:
        rows = ev.class_report(classes, gold)
        with open(args.report, "w", encoding="utf-8", newline="\n") as f:
            f.write(ev.format_class_report(rows, pred.gold_labels))
    return 0


def cmd_analyze(args) -> int:
    assign = _read_assignment(args.assignment)
    corpus = assign
    if args.corpus:
        corpus = _load_corpus(args.corpus, None, args.gold_column)
        _aligned(assign, corpus)
    classes = ev.extract_classes(assign.gold, corpus)
    rows = ev.class_report(classes, corpus, top=args.top)
    report = ev.format_class_report(rows, assign.gold_labels)
    table = ev.zipf_table(classes)
    fit = ev.zipf_fit(table)
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as f:
            f.write(report)
    else:
        sys.stdout.write(report)
    if args.zipf:
        with open(args.zipf, "w", encoding="utf-8", newline="\n") as f:
            f.write(ev.format_zipf_table([(r, tuple(assign.gold_labels[t] for t in c), n)
                                          for r, c, n in table]))
    summary = {"types": corpus.n_types, "distinct_classes": len(table),
               "mean_class_size": ev.mean_class_size(classes), "zipf_slope": fit.slope,
               "zipf_r2": fit.r2}
    sys.stderr.write(ev.format_metrics(summary))
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "analyze": cmd_analyze}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except (UsageError, CorpusFormatError, ckpt.CheckpointError) as e:
        sys.stderr.write(f"lexhmm: error: {e}\n")
        return 2
    except FileNotFoundError as e:
        sys.stderr.write(f"lexhmm: error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
