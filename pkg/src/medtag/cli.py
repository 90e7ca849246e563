"""``medtag`` command line.

Exit codes: 0 success, 2 bad configuration, 3 I/O or data error,
4 scorer failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager

from . import annotation, metrics, pretrain, taskio
from .core import get_tokenizer, resolve_schema
from .decoder import DEFAULT_BEAM_WIDTH, DecodeFailure, decode_batch
from .errors import (
    AnnotationError,
    MedtagError,
    PipelineError,
    SchemaError,
    ScorerFailure,
    TaskIOError,
)
from .scorers import (
    RandomTableScorer,
    TableScorer,
    gold_scorer,
    ngram_scorer_train,
    remote_scorer,
    uniform_scorer,
)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SCORER = 0, 2, 3, 4


class ConfigError(MedtagError):
    pass


@contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as f:
            yield f


def _read_text(path):
    if path is None or path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as f:
        return f.read()


def _schema(args):
    try:
        return resolve_schema(args.schema)
    except FileNotFoundError:
        raise ConfigError(f"schema {args.schema!r} is neither a builtin name nor a readable file") from None
    except (SchemaError, ValueError) as e:
        raise ConfigError(f"bad schema {args.schema!r}: {e}") from None


def parse_weights(text):
    weights = {}
    for item in filter(None, (text or "").split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"bad weight {item!r}, expected lang=value")
        try:
            weights[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"bad weight value in {item!r}") from None
        if not weights[key.strip()] > 0:
            raise ConfigError(f"weight for {key!r} must be positive")
    return weights


def build_scorer(spec, schema, tokenizer, seed=0, gold=None):
    kind, _, arg = spec.partition(":")
    if kind == "uniform":
        return uniform_scorer()
    if kind == "random":
        return RandomTableScorer(int(arg) if arg else seed)
    if kind == "table":
        return TableScorer.load(arg)
    if kind == "ngram":
        return ngram_scorer_train(taskio.read_tagged(arg, schema), schema, tokenizer=tokenizer)
    if kind == "gold":
        path = arg or gold
        if not path:
            raise ConfigError("gold scorer needs --gold PATH (or gold:PATH)")
        return gold_scorer(taskio.read_tagged(path, schema), schema, tokenizer)
    if kind == "remote":
        timeout = int(os.environ.get("SCORER_TIMEOUT_MS", "10000"))
        try:
            return remote_scorer(arg, timeout_ms=timeout, retries=2)
        except ValueError as e:
            raise ConfigError(str(e)) from None
    raise ConfigError(f"unknown scorer spec {spec!r}")


def cmd_decode(args):
    schema = _schema(args)
    if args.beam < 1:
        raise ConfigError("--beam must be >= 1")
    if args.parallelism < 1:
        raise ConfigError("--parallelism must be >= 1")
    try:
        tokenizer = get_tokenizer(args.tokenizer)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    sentences = [line.split() for line in _read_text(args.input).splitlines()]
    scorer = build_scorer(args.scorer, schema, tokenizer, seed=args.seed, gold=args.gold)
    conds = [taskio.add_label_prefix(s, schema) for s in sentences] if args.multitask else None
    results = decode_batch(sentences, schema, scorer, tokenizer, args.beam, args.parallelism, conds)
    failures = [r for r in results if isinstance(r, DecodeFailure)]
    with _open_out(args.output) as out:
        for r in results:
            out.write(("" if isinstance(r, DecodeFailure) else r.text) + "\n")
    for f in failures:
        print(f"sentence {f.index + 1}: {f.error}", file=sys.stderr)
    if failures:
        return EXIT_SCORER if any(isinstance(f.error, ScorerFailure) for f in failures) else EXIT_IO
    return EXIT_OK


def cmd_evaluate(args):
    schema = _schema(args)
    golds = taskio.read_tagged(args.gold, schema)
    preds = taskio.read_tagged(args.pred, schema)
    report = metrics.span_f1(golds, preds)
    with _open_out(args.output) as out:
        out.write(json.dumps(report.to_json(digits=4), indent=2) + "\n")
    return EXIT_OK


def cmd_corrupt(args):
    if not 0 <= args.density < 1:
        raise ConfigError("--density must be in [0, 1)")
    if args.mean_span <= 0:
        raise ConfigError("--mean-span must be positive")
    with _open_out(args.output) as out:
        for i, line in enumerate(_read_text(args.input).splitlines()):
            tokens = line.split()
            if not tokens:
                continue
            if not args.text:
                try:
                    tokens = [int(t) for t in tokens]
                except ValueError:
                    raise PipelineError(f"line {i + 1}: expected integer token ids (use --text for words)") from None
                if min(tokens) < 0:
                    raise PipelineError(f"line {i + 1}: token ids must be non-negative")
            ex = pretrain.corrupt_span(tokens, args.density, args.mean_span, rng_seed=[args.seed, i])
            out.write(json.dumps({"source": list(ex.source), "target": list(ex.target)}) + "\n")
    return EXIT_OK


def cmd_mix(args):
    weights = parse_weights(args.weights)
    shards = []
    for path in args.manifest:
        shards.extend(pretrain.load_manifest(path))
    if args.stats:
        stats = pretrain.corpus_stats(shards)
        print(json.dumps(stats, sort_keys=True))
        return EXIT_OK
    with _open_out(args.output) as out:
        for lang, doc in pretrain.sample_mixture(shards, weights, args.seed, args.count):
            out.write(json.dumps({"language": lang, "text": doc}, ensure_ascii=False) + "\n")
    return EXIT_OK


def cmd_qa_format(args):
    items = taskio.read_qa_jsonl("/dev/stdin" if args.input in (None, "-") else args.input)
    with _open_out(args.output) as out:
        for item in items:
            out.write(json.dumps({"input": taskio.build_qa_prompt(item),
                                  "ideal_answers": list(item.ideal_answers)}, ensure_ascii=False) + "\n")
    return EXIT_OK


def cmd_agree(args):
    if len(args.rankings) == 2:
        # two files: every record of the first is rater A, of the second rater B
        a = [metrics.RankingRecord(r.question, "A", r.ranks) for r in metrics.read_rankings(args.rankings[0])]
        b = [metrics.RankingRecord(r.question, "B", r.ranks) for r in metrics.read_rankings(args.rankings[1])]
        records = a + b
    elif len(args.rankings) == 1:
        records = metrics.read_rankings(args.rankings[0])
    else:
        raise ConfigError("agree takes one or two rankings files")
    summary = metrics.rank_aggregate(records)
    report = {
        "kappa": metrics.best_model_kappa(records),
        "spearman": metrics.average_spearman(records),
        "best_counts": summary.best,
        "histogram": {m: {str(k): v for k, v in h.items()} for m, h in summary.histogram.items()},
    }
    with _open_out(args.output) as out:
        out.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_convert(args):
    schema = _schema(args)
    if args.input in (None, "-"):
        raise ConfigError("convert needs --input PATH")
    if args.source == "bio":
        sentences = taskio.read_conll(args.input, schema)
    else:
        sentences = taskio.read_tagged(args.input, schema)
    with _open_out(args.output) as out:
        if args.to == "bio":
            out.write(taskio.format_conll(sentences))
        else:
            for ts in sentences:
                out.write(annotation.serialize(ts, schema) + "\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="medtag", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def io_flags(p):
        p.add_argument("--input", default="-", help="input file (default: stdin)")
        p.add_argument("--output", default="-", help="output file (default: stdout)")

    p = sub.add_parser("decode", help="tag plain sentences with constrained beam search")
    p.add_argument("--schema", required=True, help="builtin schema name or schema JSON file")
    p.add_argument("--beam", type=int, default=DEFAULT_BEAM_WIDTH, help="beam width (default: 4)")
    p.add_argument("--scorer", default="uniform",
                   help="uniform | random[:SEED] | table:PATH | ngram:PATH | gold[:PATH] | remote:URL")
    p.add_argument("--gold", help="tagged gold file for the gold scorer")
    p.add_argument("--tokenizer", default="word", choices=["word", "char"], help="subtoken model")
    p.add_argument("--seed", type=int, default=0, help="seed for random scorers (default: 0)")
    p.add_argument("--parallelism", type=int, default=1, help="sentences decoded concurrently")
    p.add_argument("--multitask", action="store_true", help="prefix inputs with the label markers")
    io_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="strict span F1 of predictions against gold, as JSON")
    p.add_argument("--schema", required=True, help="builtin schema name or schema JSON file")
    p.add_argument("--gold", required=True, help="tagged gold file")
    p.add_argument("--pred", required=True, help="tagged prediction file")
    p.add_argument("--output", default="-", help="output file (default: stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("corrupt", help="span-corrupt token lines into JSON Lines examples")
    p.add_argument("--density", type=float, default=0.15, help="fraction of tokens masked (default: 0.15)")
    p.add_argument("--mean-span", type=float, default=3.0, help="mean masked span length (default: 3)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--text", action="store_true", help="tokens are words; sentinels are <extra_id_N>")
    io_flags(p)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("mix", help="sample documents from weighted language shards")
    p.add_argument("manifest", nargs="+", help="shard manifest JSON files")
    p.add_argument("--weights", default="", help="per-language weights, e.g. en=1,es=1,fr=1,it=2")
    p.add_argument("--count", type=int, default=1000, help="number of draws (default: 1000)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--stats", action="store_true", help="print word counts per language instead")
    p.add_argument("--output", default="-", help="output file (default: stdout)")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("qa-format", help="turn QA JSON Lines into question/context prompts")
    io_flags(p)
    p.set_defaults(func=cmd_qa_format)

    p = sub.add_parser("agree", help="agreement statistics for model rankings")
    p.add_argument("rankings", nargs="+", help="one file with several raters, or one file per rater")
    p.add_argument("--output", default="-", help="output file (default: stdout)")
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("convert", help="convert between CoNLL BIO and tagged text")
    p.add_argument("--schema", required=True, help="builtin schema name or schema JSON file")
    p.add_argument("--from", dest="source", choices=["bio", "tagged"], required=True, help="input format")
    p.add_argument("--to", choices=["bio", "tagged"], required=True, help="output format")
    io_flags(p)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"medtag: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ScorerFailure as e:
        print(f"medtag: scorer failure: {e}", file=sys.stderr)
        return EXIT_SCORER
    except (OSError, AnnotationError, TaskIOError, PipelineError, MedtagError, ValueError) as e:
        print(f"medtag: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
