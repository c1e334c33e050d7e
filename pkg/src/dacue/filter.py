"""Lexical filtering of ranked phrase lists.

A phrase is dropped when one of its proper contiguous subphrases sits
higher in the input ranking. The modified variant only drops it when both
phrases were selected for the same dialogue act. Comparisons are made
against the whole original ranking, not just against survivors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

from .counts import Phrase, phrase_str
from .metrics import RankedPhrase

__all__ = [
    "FilterMode",
    "Removal",
    "proper_subphrases",
    "lexical_filter",
    "frequency_filter",
    "format_audit",
]


class FilterMode(enum.Enum):
    NONE = "none"
    BASIC = "basic"
    MODIFIED = "modified"

    @classmethod
    def parse(cls, name) -> "FilterMode":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"unknown filter mode {name!r} (expected none, basic or modified)") from None

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Removal:
    removed: RankedPhrase
    blocker: RankedPhrase


def proper_subphrases(phrase: Phrase) -> set[Phrase]:
    phrase = tuple(phrase)
    n = len(phrase)
    return {phrase[i : i + k] for k in range(1, n) for i in range(n - k + 1)}


def lexical_filter(
    ranked: Sequence[RankedPhrase], mode, audit: list[Removal] | None = None
) -> list[RankedPhrase]:
    """Filter ``ranked`` (best first) and renumber the survivors 1..M.

    If ``audit`` is given, one :class:`Removal` per dropped phrase is appended,
    naming the highest-ranked subphrase that blocked it.
    """
    mode = FilterMode.parse(mode)
    if mode is FilterMode.NONE:
        return list(ranked)
    if mode is FilterMode.MODIFIED:
        missing = [r.text for r in ranked if r.selected_act is None]
        if missing:
            raise ValueError(f"modified filter needs a selected act for every phrase; missing for {missing[:3]}")
    position = {}
    for i, r in enumerate(ranked):
        position.setdefault(r.phrase, i)
    kept = []
    for i, r in enumerate(ranked):
        blockers = [
            position[sub]
            for sub in proper_subphrases(r.phrase)
            if position.get(sub, i) < i
            and (mode is FilterMode.BASIC or ranked[position[sub]].selected_act == r.selected_act)
        ]
        if blockers:
            if audit is not None:
                audit.append(Removal(r, ranked[min(blockers)]))
        else:
            kept.append(r)
    return [replace(r, rank=k) for k, r in enumerate(kept, 1)]


def frequency_filter(
    ranked: Sequence[RankedPhrase], min_freq: int | None = None, max_freq: int | None = None
) -> list[RankedPhrase]:
    kept = [
        r
        for r in ranked
        if (min_freq is None or r.freq >= min_freq) and (max_freq is None or r.freq <= max_freq)
    ]
    return [replace(r, rank=k) for k, r in enumerate(kept, 1)]


def format_audit(removals: Sequence[Removal]) -> str:
    lines = ["removed_phrase\tblocking_subphrase\tremoved_rank\tblocking_rank\tremoved_act\tblocking_act"]
    for rm in removals:
        lines.append(
            f"{phrase_str(rm.removed.phrase)}\t{phrase_str(rm.blocker.phrase)}\t"
            f"{rm.removed.rank}\t{rm.blocker.rank}\t"
            f"{rm.removed.selected_act or ''}\t{rm.blocker.selected_act or ''}"
        )
    return "\n".join(lines) + "\n"
