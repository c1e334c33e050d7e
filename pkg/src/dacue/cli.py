"""Command-line interface.

Exit status is 0 on success, 1 for usage errors and 2 for data errors.
Diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .corpus import ClusterLexicon, CorpusError, read_corpus, read_lexicon, split_corpus, format_corpus
from .counts import build_table, extract_phrases
from .evaluation import (
    ALL,
    LIT,
    TBLConfig,
    accuracy,
    compare_to,
    emit_report,
    format_significance,
    gen_synthetic,
    read_phrase_list,
    run_sweep,
)
from .filter import FilterMode, format_audit, frequency_filter, lexical_filter
from .metrics import MetricId, cutoff, format_ranked, parse_ranked, rank_phrases
from .tbl import ModelFormatError, apply_rules, format_model, parse_model, train

log = logging.getLogger("dacue")

METRIC_NAMES = [m.value for m in MetricId]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _percent(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0 < value <= 100:
        raise argparse.ArgumentTypeError(f"{text!r} is not in (0, 100]")
    return value


def _percent_list(text: str) -> list[float]:
    return [_percent(t) for t in text.split(",") if t]


def _metric_list(text: str) -> list[str]:
    if text.lower() == "all":
        return list(METRIC_NAMES)
    names = [t.strip().lower() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in METRIC_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown metric(s) {bad}; choose from {METRIC_NAMES} or 'all'")
    return names


def _baseline_list(text: str) -> list[str]:
    names = [t.strip().lower() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in (ALL, LIT)]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown baseline(s) {bad}; choose from all, lit")
    return names


def _filter_list(text: str) -> list[str]:
    names = [t.strip().lower() for t in text.split(",") if t.strip()]
    valid = [m.value for m in FilterMode]
    bad = [n for n in names if n not in valid]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown filter mode(s) {bad}; choose from {valid}")
    return names


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 1")
    return value


def _add_lexicon_args(p):
    g = p.add_argument_group("semantic clusters")
    g.add_argument("--lexicon", metavar="TSV", help="cluster lexicon file (cluster_label<TAB>surface_token)")
    g.add_argument(
        "--builtin-lexicon",
        action="store_true",
        help="use the built-in weekday/month clusters plus number and ordinal matchers",
    )


def _add_tbl_args(p):
    g = p.add_argument_group("tagger")
    g.add_argument("--threshold", type=_positive_int, default=2, help="minimum net gain for a rule (default 2)")
    g.add_argument(
        "--update",
        choices=("sequential", "simultaneous"),
        default="sequential",
        help="whether the previous-tag condition sees rewrites made earlier in the same sweep",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dacue", description="Dialogue act cue selection and transformation-based tagging.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--threads",
        type=_positive_int,
        default=1,
        help="worker processes; output is identical for any value (only sweep grids run in parallel)",
    )

    p = sub.add_parser("rank", parents=[common], help="rank candidate phrases of a corpus")
    p.add_argument("--corpus", required=True, help="training corpus TSV")
    p.add_argument("--metric", required=True, choices=METRIC_NAMES)
    p.add_argument("--out", required=True, help="ranked-list TSV to write ('-' for stdout)")
    p.add_argument("--max-len", type=_positive_int, default=3, help="longest candidate n-gram (default 3)")
    p.add_argument("--table-dump", metavar="TSV", help="also write the phrase/act count table")
    _add_lexicon_args(p)

    p = sub.add_parser("filter", parents=[common], help="apply the lexical filter to a ranked list")
    p.add_argument("--ranked", required=True, help="ranked-list TSV")
    p.add_argument("--mode", required=True, choices=("basic", "modified"))
    p.add_argument("--out", required=True, help="filtered ranked-list TSV ('-' for stdout)")
    p.add_argument("--audit", metavar="TSV", help="write removed phrases and their blocking subphrases")
    p.add_argument("--min-freq", type=_positive_int, help="drop phrases occurring in fewer utterances")
    p.add_argument("--max-freq", type=_positive_int, help="drop phrases occurring in more utterances")

    p = sub.add_parser("train", parents=[common], help="train a tagger on a corpus with selected phrases")
    p.add_argument("--corpus", required=True, help="training corpus TSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ranked", help="ranked-list TSV to take the top phrases from")
    src.add_argument("--phrases", help="plain phrase list (one per line), used whole")
    src.add_argument("--all-phrases", action="store_true", help="use every candidate n-gram of the corpus")
    p.add_argument("--cutoff", type=_percent, default=100.0, help="percent of phrases to keep (default 100)")
    p.add_argument("--max-len", type=_positive_int, default=3, help="longest n-gram for --all-phrases")
    p.add_argument("--out", required=True, help="model file to write")
    _add_tbl_args(p)
    _add_lexicon_args(p)

    p = sub.add_parser("tag", parents=[common], help="tag a corpus with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True, help="corpus TSV (act column is ignored)")
    p.add_argument("--out", required=True, help="tagged corpus TSV ('-' for stdout)")
    _add_lexicon_args(p)

    p = sub.add_parser("eval", parents=[common], help="accuracy of a tagged corpus against gold")
    p.add_argument("--tagged", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", default="-", help="where to write the accuracy (default stdout)")

    p = sub.add_parser("sweep", parents=[common], help="run a method x filter x cutoff experiment grid")
    data = p.add_argument_group("data")
    data.add_argument("--train", help="training corpus TSV")
    data.add_argument("--heldout", help="held-out corpus TSV")
    data.add_argument("--corpus", help="single corpus TSV to split by dialogue")
    data.add_argument("--heldout-fraction", type=float, default=0.1)
    data.add_argument("--seed", type=int, default=0, help="split seed")
    p.add_argument("--metrics", type=_metric_list, default=[], help="comma list of metrics, or 'all' for all nine")
    p.add_argument("--baselines", type=_baseline_list, default=[], help="comma list of baselines: all, lit")
    p.add_argument("--lit", metavar="FILE", help="phrase list for the lit baseline")
    p.add_argument("--cutoffs", type=_percent_list, default=[100.0], help="comma list of percentages")
    p.add_argument("--filter", type=_filter_list, default=["none"], help="comma list of none, basic, modified")
    p.add_argument("--max-len", type=_positive_int, default=3)
    p.add_argument("--out", required=True, help="report CSV ('-' for stdout)")
    p.add_argument("--significance", metavar="CSV", help="Welch t tests of every cell against the all baseline")
    _add_tbl_args(p)
    _add_lexicon_args(p)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic planted-cue corpus")
    p.add_argument("--dialogues", type=_positive_int, default=150)
    p.add_argument("--acts", type=_positive_int, default=18)
    p.add_argument("--cue-strength", type=float, default=0.85)
    p.add_argument("--noise-vocab", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="corpus TSV ('-' for stdout)")

    return parser


def _lexicon(args) -> ClusterLexicon | None:
    if getattr(args, "lexicon", None) and getattr(args, "builtin_lexicon", False):
        raise UsageError("--lexicon and --builtin-lexicon are mutually exclusive")
    if getattr(args, "lexicon", None):
        return read_lexicon(args.lexicon)
    if getattr(args, "builtin_lexicon", False):
        return ClusterLexicon.scheduling()
    return None


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _read_ranked(path):
    with open(path, encoding="utf-8") as fh:
        return parse_ranked(fh)


def cmd_rank(args):
    corpus = read_corpus(args.corpus, _lexicon(args))
    phrases = extract_phrases(corpus, args.max_len)
    table = build_table(corpus, phrases)
    ranked = rank_phrases(table, None, args.metric)
    _write(args.out, format_ranked(ranked, total=len(phrases)))
    if args.table_dump:
        _write(args.table_dump, table.dump())
    log.info("ranked %d phrases by %s", len(ranked), args.metric)


def cmd_filter(args):
    ranked, total = _read_ranked(args.ranked)
    audit = [] if args.audit else None
    out = lexical_filter(ranked, args.mode, audit)
    if args.min_freq is not None or args.max_freq is not None:
        out = frequency_filter(out, args.min_freq, args.max_freq)
    _write(args.out, format_ranked(out, total=total if total is not None else len(ranked)))
    if args.audit:
        _write(args.audit, format_audit(audit))
    log.info("kept %d of %d phrases", len(out), len(ranked))


def cmd_train(args):
    corpus = read_corpus(args.corpus, _lexicon(args))
    if args.ranked:
        ranked, total = _read_ranked(args.ranked)
        phrases = {r.phrase for r in cutoff(ranked, args.cutoff, total=total)}
    elif args.phrases:
        if args.cutoff != 100.0:
            raise UsageError("--cutoff only applies to --ranked")
        phrases = set(read_phrase_list(args.phrases))
    else:
        if args.cutoff != 100.0:
            raise UsageError("--cutoff only applies to --ranked")
        phrases = extract_phrases(corpus, args.max_len)
    model = train(corpus, phrases, threshold=args.threshold, update=args.update)
    _write(args.out, format_model(model))
    log.info("learned %d rules, training accuracy %.4f", len(model.rules), model.training_accuracy)


def cmd_tag(args):
    with open(args.model, encoding="utf-8") as fh:
        model = parse_model(fh)
    corpus = read_corpus(args.corpus, _lexicon(args))
    _write(args.out, format_corpus(corpus, apply_rules(model, corpus)))


def cmd_eval(args):
    tagged = read_corpus(args.tagged)
    gold = read_corpus(args.gold)
    t_keys = [(u.dialogue_id, u.turn_index) for u in tagged.utterances()]
    g_keys = [(u.dialogue_id, u.turn_index) for u in gold.utterances()]
    if t_keys != g_keys:
        raise ValueError("tagged and gold corpora do not contain the same utterances in the same order")
    _write(args.out, f"{accuracy(tagged.gold(), gold.gold())!r}\n")


def cmd_sweep(args):
    lexicon = _lexicon(args)
    if args.corpus:
        if args.train or args.heldout:
            raise UsageError("use either --corpus or --train/--heldout")
        train_corpus, heldout = split_corpus(read_corpus(args.corpus, lexicon), args.heldout_fraction, args.seed)
    elif args.train and args.heldout:
        train_corpus = read_corpus(args.train, lexicon)
        heldout = read_corpus(args.heldout, lexicon)
    else:
        raise UsageError("sweep needs --corpus, or both --train and --heldout")
    methods = list(args.metrics) + list(args.baselines)
    if not methods:
        raise UsageError("nothing to run: give --metrics and/or --baselines")
    if LIT in args.baselines and not args.lit:
        raise UsageError("the lit baseline needs --lit FILE")
    lit = read_phrase_list(args.lit) if args.lit else None
    config = TBLConfig(threshold=args.threshold, update=args.update)
    results = run_sweep(
        train_corpus,
        heldout,
        methods,
        args.cutoffs,
        args.filter,
        config,
        lit_phrases=lit,
        n_jobs=args.threads,
        max_len=args.max_len,
    )
    _write(args.out, emit_report(results))
    if args.significance:
        if not any(r.method == ALL for r in results):
            raise UsageError("--significance needs the all baseline (--baselines all)")
        _write(args.significance, format_significance(compare_to(results, ALL)))


def cmd_synth(args):
    if not 0.0 <= args.cue_strength <= 1.0:
        raise UsageError("--cue-strength must be in [0, 1]")
    if args.noise_vocab < 0:
        raise UsageError("--noise-vocab must be >= 0")
    if args.acts < 2:
        raise UsageError("--acts must be >= 2")
    corpus = gen_synthetic(args.dialogues, args.acts, args.cue_strength, args.noise_vocab, args.seed)
    _write(args.out, format_corpus(corpus))


COMMANDS = {
    "rank": cmd_rank,
    "filter": cmd_filter,
    "train": cmd_train,
    "tag": cmd_tag,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        print(f"dacue {args.command}: error: {e}", file=sys.stderr)
        return 1
    except (CorpusError, ModelFormatError, ValueError, KeyError, OSError) as e:
        print(f"dacue {args.command}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
