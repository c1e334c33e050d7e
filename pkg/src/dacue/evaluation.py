"""Accuracy, significance tests, synthetic corpora and cutoff/filter sweeps."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .corpus import Corpus, Utterance
from .counts import Phrase, build_table, extract_phrases
from .filter import FilterMode, lexical_filter
from .metrics import MetricId, cutoff, rank_phrases
from .tbl import DEFAULT_TEMPLATES, apply_rules, train

log = logging.getLogger(__name__)

__all__ = [
    "ALL",
    "LIT",
    "METHOD_ORDER",
    "ExperimentResult",
    "SignificanceReport",
    "TBLConfig",
    "accuracy",
    "per_dialogue_accuracy",
    "welch_t_test",
    "gen_synthetic",
    "run_sweep",
    "compare_to",
    "emit_report",
    "parse_report",
    "read_phrase_list",
]

ALL = "all"
LIT = "lit"
METHOD_ORDER = (LIT, ALL) + tuple(m.value for m in MetricId)
FILTER_ORDER = tuple(m.value for m in FilterMode)


def accuracy(predicted: Sequence[str], gold: Sequence[str]) -> float:
    if len(predicted) != len(gold):
        raise ValueError(f"{len(predicted)} predictions for {len(gold)} gold tags")
    if not gold:
        raise ValueError("accuracy of an empty tag sequence is undefined")
    return sum(p == g for p, g in zip(predicted, gold)) / len(gold)


def per_dialogue_accuracy(corpus: Corpus, predicted: Sequence[str]) -> list[float]:
    if len(predicted) != len(corpus):
        raise ValueError(f"{len(predicted)} predictions for {len(corpus)} utterances")
    out = []
    i = 0
    for dialogue in corpus.dialogues:
        n = len(dialogue)
        out.append(accuracy(predicted[i : i + n], [u.gold_act for u in dialogue]))
        i += n
    return out


@dataclass(frozen=True)
class SignificanceReport:
    a: str
    b: str
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    alpha: float = 0.05

    @property
    def significant(self) -> bool:
        return self.p_value < self.alpha


def welch_t_test(sample_a, sample_b, a: str = "a", b: str = "b", alpha: float = 0.05) -> SignificanceReport:
    """Two-sided Welch t test with Welch-Satterthwaite degrees of freedom."""
    xa = np.asarray(sample_a, dtype=np.float64)
    xb = np.asarray(sample_b, dtype=np.float64)
    na, nb = len(xa), len(xb)
    if na < 2 or nb < 2:
        raise ValueError(f"each sample needs at least 2 values (got {na} and {nb})")
    va = xa.var(ddof=1) / na
    vb = xb.var(ddof=1) / nb
    se2 = va + vb
    if se2 == 0:
        raise ValueError("both samples have zero variance; the t statistic is undefined")
    t = (xa.mean() - xb.mean()) / math.sqrt(se2)
    # Welch-Satterthwaite on variance shares, which cannot underflow
    sa, sb = va / se2, vb / se2
    df = 1.0 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    p = min(1.0, 2.0 * stats.t.sf(abs(t), df))
    if not (math.isfinite(t) and math.isfinite(p)):
        raise ValueError(f"t test is numerically undefined for these samples (t={t}, df={df})")
    return SignificanceReport(a, b, float(t), float(df), float(p), alpha)


def _transition_matrix(k: int) -> np.ndarray:
    # Fixed (seed-independent) act dynamics: strong successor, weaker
    # second successor, the rest spread uniformly.
    m = np.full((k, k), 0.4 / k)
    for i in range(k):
        m[i, (i + 1) % k] += 0.4
        m[i, (i + 2) % k] += 0.2
    return m / m.sum(axis=1, keepdims=True)


def gen_synthetic(
    n_dialogues: int,
    acts=18,
    cue_strength: float = 0.85,
    noise_vocab: int = 500,
    seed: int = 0,
    turns: tuple[int, int] = (10, 30),
    noise_tokens: tuple[int, int] = (2, 8),
    speaker_repeat: float = 0.2,
) -> Corpus:
    """Generate a corpus with one planted cue bigram per act.

    Each utterance of act ``k`` contains the bigram ``cueKa cueKb`` with
    probability ``cue_strength``; the other tokens are drawn Zipf-like from a
    shared ``w0..w{noise_vocab-1}`` vocabulary. Acts follow a fixed
    first-order transition matrix; two speakers alternate, repeating a turn
    with probability ``speaker_repeat``.
    """
    labels = [f"act{k:02d}" for k in range(acts)] if isinstance(acts, int) else list(acts)
    k = len(labels)
    if k < 2:
        raise ValueError("need at least 2 acts")
    if not 0.0 <= cue_strength <= 1.0:
        raise ValueError("cue_strength must be in [0, 1]")
    rng = np.random.default_rng(seed)
    trans = _transition_matrix(k)
    cues = [(f"cue{j:02d}a", f"cue{j:02d}b") for j in range(k)]
    vocab = [f"w{j}" for j in range(noise_vocab)]
    if noise_vocab:
        weights = 1.0 / np.arange(1, noise_vocab + 1)
        weights /= weights.sum()
    dialogues = []
    for d in range(n_dialogues):
        did = f"s{seed}d{d:04d}"
        n_turns = int(rng.integers(turns[0], turns[1] + 1))
        speaker = int(rng.integers(2))
        act = 0
        utts = []
        for t in range(n_turns):
            if t > 0:
                act = int(rng.choice(k, p=trans[act]))
                if rng.random() >= speaker_repeat:
                    speaker = 1 - speaker
            tokens: list[str] = []
            if noise_vocab:
                n_noise = int(rng.integers(noise_tokens[0], noise_tokens[1] + 1))
                tokens = [vocab[j] for j in rng.choice(noise_vocab, size=n_noise, p=weights)]
            if rng.random() < cue_strength:
                at = int(rng.integers(len(tokens) + 1))
                tokens[at:at] = cues[act]
            if not tokens:
                tokens = ["uh"]
            utts.append(Utterance(did, t, "AB"[speaker], labels[act], tuple(tokens)))
        dialogues.append(tuple(utts))
    return Corpus(tuple(dialogues))


@dataclass(frozen=True)
class TBLConfig:
    threshold: int = 2
    templates: tuple = DEFAULT_TEMPLATES
    update: str = "sequential"


@dataclass(frozen=True)
class ExperimentResult:
    method: str
    filter_mode: str
    cutoff_percent: float
    phrase_count: int
    heldout_accuracy: float
    per_dialogue_accuracy: tuple[float, ...] = field(default=(), repr=False)
    n_rules: int = 0

    @property
    def id(self) -> str:
        return f"{self.method}/{self.filter_mode}/{self.cutoff_percent!r}"

    def sort_key(self):
        return (
            METHOD_ORDER.index(self.method),
            FILTER_ORDER.index(self.filter_mode),
            self.cutoff_percent,
        )


def _method_name(method) -> str:
    if isinstance(method, MetricId):
        return method.value
    name = str(method).lower()
    if name in (ALL, LIT):
        return name
    return MetricId.parse(name).value


def _fit_and_score(train_corpus, heldout, phrases, config: TBLConfig):
    model = train(train_corpus, phrases, config.templates, config.threshold, config.update)
    predicted = apply_rules(model, heldout)
    return (
        accuracy(predicted, heldout.gold()),
        tuple(per_dialogue_accuracy(heldout, predicted)),
        len(model.rules),
    )


def run_sweep(
    train_corpus: Corpus,
    heldout: Corpus,
    methods: Iterable,
    cutoffs: Iterable[float],
    filter_modes: Iterable,
    tbl_config: TBLConfig | None = None,
    lit_phrases: Iterable[Phrase] | None = None,
    n_jobs: int = 1,
    max_len: int = 3,
) -> list[ExperimentResult]:
    """Rank, filter, cut off, train and evaluate every grid cell.

    Metric methods produce one result per (filter, cutoff); the ``all`` and
    ``lit`` baselines produce a single unfiltered 100% result each. Cutoff
    percentages refer to the size of the full candidate set, so a filtered
    list shorter than the cutoff count is used whole.
    """
    config = tbl_config or TBLConfig()
    names = sorted({_method_name(m) for m in methods}, key=METHOD_ORDER.index)
    cutoffs = sorted({float(c) for c in cutoffs})
    modes = sorted({FilterMode.parse(f) for f in filter_modes}, key=lambda m: FILTER_ORDER.index(m.value))
    if LIT in names and lit_phrases is None:
        raise ValueError("the lit baseline needs a phrase list")
    if train_corpus.act_inventory and heldout.act_inventory:
        shared = {u.dialogue_id for u in train_corpus.utterances()} & {
            u.dialogue_id for u in heldout.utterances()
        }
        if shared:
            raise ValueError(f"train and held-out corpora share dialogues: {sorted(shared)[:3]}")

    all_phrases = extract_phrases(train_corpus, max_len)
    n_all = len(all_phrases)
    cells: list[tuple[str, str, float, frozenset]] = []
    if LIT in names:
        lit = frozenset(tuple(p) for p in lit_phrases)
        cells.append((LIT, FilterMode.NONE.value, 100.0, lit))
    if ALL in names:
        cells.append((ALL, FilterMode.NONE.value, 100.0, frozenset(all_phrases)))
    metric_names = [n for n in names if n not in (ALL, LIT)]
    if metric_names:
        table = build_table(train_corpus, all_phrases)
        for name in metric_names:
            ranked = rank_phrases(table, None, name)
            for mode in modes:
                filtered = lexical_filter(ranked, mode)
                for pct in cutoffs:
                    selected = frozenset(r.phrase for r in cutoff(filtered, pct, total=n_all))
                    cells.append((name, mode.value, pct, selected))

    unique = list(dict.fromkeys(c[3] for c in cells))
    log.info("sweep: %d cells, %d distinct phrase sets", len(cells), len(unique))
    scored = Parallel(n_jobs=n_jobs)(
        delayed(_fit_and_score)(train_corpus, heldout, phrases, config) for phrases in unique
    )
    by_set = dict(zip(unique, scored))
    results = []
    for name, mode, pct, phrases in cells:
        acc, per_dialogue, n_rules = by_set[phrases]
        results.append(ExperimentResult(name, mode, pct, len(phrases), acc, per_dialogue, n_rules))
    results.sort(key=ExperimentResult.sort_key)
    return results


def compare_to(results: Sequence[ExperimentResult], baseline: str = ALL) -> list[SignificanceReport]:
    """Welch t tests of every result against the named baseline, on per-dialogue accuracy."""
    base = [r for r in results if r.method == baseline]
    if not base:
        raise ValueError(f"no {baseline!r} result to compare against")
    ref = base[0]
    reports = []
    for r in results:
        if r is ref:
            continue
        try:
            reports.append(welch_t_test(r.per_dialogue_accuracy, ref.per_dialogue_accuracy, r.id, ref.id))
        except ValueError as e:
            log.warning("skipping %s vs %s: %s", r.id, ref.id, e)
    return reports


REPORT_COLUMNS = ("method", "filter", "cutoff_percent", "phrase_count", "accuracy")


def emit_report(results: Iterable[ExperimentResult], out: TextIO | None = None) -> str:
    """Write the result grid as CSV (sorted by method, filter, cutoff) and return it."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in sorted(results, key=ExperimentResult.sort_key):
        writer.writerow([r.method, r.filter_mode, repr(r.cutoff_percent), r.phrase_count, repr(r.heldout_accuracy)])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def parse_report(stream: TextIO | str) -> list[ExperimentResult]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.DictReader(stream)
    if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
        raise ValueError(f"unexpected report columns {reader.fieldnames}")
    return [
        ExperimentResult(
            method=row["method"],
            filter_mode=row["filter"],
            cutoff_percent=float(row["cutoff_percent"]),
            phrase_count=int(row["phrase_count"]),
            heldout_accuracy=float(row["accuracy"]),
        )
        for row in reader
    ]


def format_significance(reports: Sequence[SignificanceReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("a", "b", "t_statistic", "df", "p_value", "significant"))
    for r in reports:
        writer.writerow((r.a, r.b, repr(r.t_statistic), repr(r.degrees_of_freedom), repr(r.p_value), int(r.significant)))
    return buf.getvalue()


def read_phrase_list(path) -> list[Phrase]:
    """One phrase per line, tokens space-separated; blank and ``#`` lines skipped."""
    phrases = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                phrases.append(tuple(line.split()))
    return phrases
