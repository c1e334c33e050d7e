"""Phrase scoring, selected-act attribution and ranking.

Every metric is computed from a :class:`~dacue.counts.PhraseTable` in a
vectorized pass over all of its rows; :func:`score_phrase` and
:func:`selected_act` are single-row views of the same computation.
Logarithms are base 2 and ``0 * log 0`` is taken as 0.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, TextIO

import numpy as np

from .counts import Phrase, PhraseTable, parse_phrase, phrase_str

log = logging.getLogger(__name__)

__all__ = [
    "MetricId",
    "RankedPhrase",
    "score_table",
    "score_phrase",
    "selected_act",
    "rank_phrases",
    "cutoff",
    "cutoff_count",
    "format_ranked",
    "parse_ranked",
    "TTEST_ZERO_DENOMINATOR",
]

TTEST_ZERO_DENOMINATOR = "ttest-zero-denominator"


class MetricId(enum.Enum):
    COOC = "cooc"
    CP = "cp"
    ENT = "ent"
    TTEST = "ttest"
    MI = "mi"
    S = "s"
    IG = "ig"
    D = "d"
    DCP = "dcp"

    @property
    def larger_is_better(self) -> bool:
        return self not in (MetricId.ENT, MetricId.D, MetricId.DCP)

    @classmethod
    def parse(cls, name) -> "MetricId":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown metric {name!r} (expected one of {valid})") from None

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class RankedPhrase:
    phrase: Phrase
    score: float
    selected_act: str | None
    rank: int
    freq: int
    metric: MetricId
    flags: tuple[str, ...] = ()

    @property
    def text(self) -> str:
        return phrase_str(self.phrase)


def _xlog2x(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=np.float64)
    pos = x > 0
    out[pos] = x[pos] * np.log2(x[pos])
    return out


def _first_arg(terms: np.ndarray, largest: bool) -> np.ndarray:
    # np.argmax/argmin return the first extremum, i.e. inventory order on ties.
    return np.argmax(terms, axis=1) if largest else np.argmin(terms, axis=1)


def _evaluate(joint: np.ndarray, act_count: np.ndarray, metric: MetricId):
    """Scores, selected-act indices and TTEST degeneracy flags for rows of ``joint``."""
    J = joint.astype(np.float64)
    Nd = act_count.astype(np.float64)
    Np = J.sum(axis=1)
    U = float(Nd.sum())
    D = joint.shape[1]
    n = joint.shape[0]
    degenerate = np.zeros(n, dtype=bool)

    if metric is MetricId.COOC:
        scores = J.max(axis=1)
        sel = _first_arg(J, True)
    elif metric is MetricId.CP:
        p_p_d = J / Nd
        scores = p_p_d.max(axis=1)
        sel = _first_arg(p_p_d, True)
    elif metric is MetricId.ENT:
        p_d_p = J / Np[:, None]
        terms = -_xlog2x(p_d_p)
        scores = terms.sum(axis=1)
        # equal terms (e.g. all zero for a single-act phrase) go to the likelier act
        top = terms == terms.max(axis=1, keepdims=True)
        sel = _first_arg(np.where(top, p_d_p, -1.0), True)
    elif metric in (MetricId.S, MetricId.MI):
        p_d_p = J / Np[:, None]
        log_ratio = np.zeros_like(p_d_p)
        pos = p_d_p > 0
        log_p_d = np.broadcast_to(np.log2(Nd / U), p_d_p.shape)
        log_ratio[pos] = np.log2(p_d_p[pos]) - log_p_d[pos]
        terms = p_d_p * log_ratio
        s = terms.sum(axis=1)
        if metric is MetricId.S:
            scores, sel = s, _first_arg(terms, True)
        else:
            p_p = Np / U
            scores = p_p * s
            sel = _first_arg(p_p[:, None] * terms, True)
    elif metric is MetricId.TTEST:
        ij = np.asarray(joint, dtype=np.int64)
        nd = np.asarray(act_count, dtype=np.int64)
        npi = ij.sum(axis=1)
        u = int(nd.sum())
        den = (D * ij - npi[:, None]) ** 2 + (D * nd - u)[None, :] ** 2
        zero = den == 0
        degenerate = zero.any(axis=1)
        terms = np.where(zero, 0.0, (D * D - D) / np.where(zero, 1, den))
        p_bar = (u - npi).astype(np.float64)
        scores = p_bar * np.sqrt(terms.sum(axis=1))
        scores[p_bar == 0] = 0.0
        sel = _first_arg(np.where(zero, -np.inf, terms), True)
    elif metric is MetricId.IG:
        p_p = Np / U
        p_notp = (U - Np) / U
        terms = (
            p_p[:, None] * _xlog2x(J / U)
            + p_notp[:, None] * _xlog2x((Nd - J) / U)
            - _xlog2x(Nd / U)[None, :]
        )
        scores = terms.sum(axis=1)
        sel = _first_arg(terms, True)
    elif metric is MetricId.D:
        ij = np.asarray(joint, dtype=np.int64)
        nd = np.asarray(act_count, dtype=np.int64)
        penalty = (nd[None, :] - ij) + (ij.sum(axis=1)[:, None] - ij)
        scores = penalty.min(axis=1).astype(np.float64)
        sel = _first_arg(penalty, False)
    elif metric is MetricId.DCP:
        p_p_d = J / Nd
        penalty = (1.0 - p_p_d) + (p_p_d.sum(axis=1)[:, None] - p_p_d)
        scores = penalty.min(axis=1)
        sel = _first_arg(penalty, False)
    else:  # pragma: no cover
        raise ValueError(metric)
    # normalizes -0.0
    return scores + 0.0, sel, degenerate


def score_table(table: PhraseTable, metric) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Score every row of ``table``.

    Returns ``(scores, selected_act_indices, ttest_degenerate)`` aligned with
    ``table.phrases``.
    """
    metric = MetricId.parse(metric)
    if len(table) == 0:
        empty = np.zeros(0)
        return empty, empty.astype(np.int64), empty.astype(bool)
    return _evaluate(table.joint, table.act_count, metric)


def _row(table: PhraseTable, phrase: Phrase, metric: MetricId):
    i = table.row(phrase)
    return _evaluate(table.joint[i : i + 1], table.act_count, metric)


def score_phrase(table: PhraseTable, phrase: Phrase, metric) -> float:
    """Score of one phrase; raises ``KeyError`` if the phrase is not in the table."""
    scores, _, _ = _row(table, tuple(phrase), MetricId.parse(metric))
    return float(scores[0])


def selected_act(table: PhraseTable, phrase: Phrase, metric) -> str:
    """The act a phrase is selected for under ``metric``.

    For COOC and CP this is the maximizing act, for D and DCP the minimizing
    candidate, and for the summing metrics the act contributing the largest
    term (for TTEST, the largest term under the square root).
    """
    _, sel, _ = _row(table, tuple(phrase), MetricId.parse(metric))
    return table.acts[int(sel[0])]


def _sort_key(score: float, freq: int, phrase: Phrase, larger_is_better: bool):
    # 12 significant digits: equal scores reached along different
    # floating-point paths (e.g. 1/3 as 1 - 2/3 or as 4/3 - 1) must tie
    s = float(f"{score:.12g}")
    return (-s if larger_is_better else s, -freq, len(phrase), phrase_str(phrase))


def rank_phrases(
    table: PhraseTable, phrases: Iterable[Phrase] | None, metric
) -> list[RankedPhrase]:
    """Rank ``phrases`` (all table phrases when None) best-first under ``metric``.

    Ties fall back to higher frequency, then fewer tokens, then the
    space-joined phrase text.
    """
    metric = MetricId.parse(metric)
    rows = range(len(table)) if phrases is None else sorted({table.row(p) for p in phrases})
    scores, sel, degenerate = score_table(table, metric)
    better = metric.larger_is_better
    entries = []
    for i in rows:
        p = table.phrases[i]
        freq = int(table.phrase_count[i])
        entries.append((_sort_key(float(scores[i]), freq, p, better), i))
    entries.sort()
    n_degenerate = 0
    ranked = []
    for rank, (_, i) in enumerate(entries, 1):
        flags = ()
        if degenerate[i]:
            flags = (TTEST_ZERO_DENOMINATOR,)
            n_degenerate += 1
        ranked.append(
            RankedPhrase(
                phrase=table.phrases[i],
                score=float(scores[i]),
                selected_act=table.acts[int(sel[i])],
                rank=rank,
                freq=int(table.phrase_count[i]),
                metric=metric,
                flags=flags,
            )
        )
    if n_degenerate:
        log.warning("%d phrase(s) had a zero TTEST denominator term; those terms were skipped", n_degenerate)
    return ranked


def cutoff_count(n: int, percent: float) -> int:
    """``ceil(n * percent / 100)`` computed in exact rational arithmetic."""
    if not 0 < percent <= 100:
        raise ValueError("percent must be in (0, 100]")
    frac = Fraction(repr(percent)) if isinstance(percent, float) else Fraction(percent)
    return math.ceil(n * frac / 100)


def cutoff(
    ranked: Sequence[RankedPhrase], percent: float, total: int | None = None
) -> list[RankedPhrase]:
    """Keep the top ``ceil(N * percent / 100)`` entries.

    ``N`` is ``len(ranked)`` unless ``total`` gives the size of the list the
    percentage refers to (e.g. the unfiltered phrase set); a list shorter than
    the resulting count is returned whole.
    """
    n = cutoff_count(len(ranked) if total is None else total, percent)
    return list(ranked[:n])


_HEADER = "rank\tmetric\tscore\tselected_act\tfreq\tphrase"


def format_ranked(ranked: Sequence[RankedPhrase], total: int | None = None) -> str:
    """Ranked-list TSV. ``total`` is recorded as a ``# total=N`` comment."""
    lines = []
    if total is not None:
        lines.append(f"# total={total}")
    lines.append(_HEADER)
    for r in ranked:
        lines.append(
            f"{r.rank}\t{r.metric.value}\t{r.score!r}\t{r.selected_act or ''}\t{r.freq}\t{r.text}"
        )
    return "\n".join(lines) + "\n"


def parse_ranked(stream: TextIO) -> tuple[list[RankedPhrase], int | None]:
    """Read ranked-list TSV; returns the entries and the recorded total (if any)."""
    total = None
    ranked = []
    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("total="):
                total = int(body[len("total=") :])
            continue
        if line == _HEADER:
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            raise ValueError(f"line {lineno}: expected 6 tab-separated fields, got {len(fields)}")
        rank, metric, score, act, freq, text = fields
        ranked.append(
            RankedPhrase(
                phrase=parse_phrase(text),
                score=float(score),
                selected_act=act or None,
                rank=int(rank),
                freq=int(freq),
                metric=MetricId.parse(metric),
            )
        )
    return ranked, total
