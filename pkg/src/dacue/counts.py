"""Candidate phrase extraction and utterance-level cooccurrence counts."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, Utterance

__all__ = [
    "Phrase",
    "PhraseTable",
    "ngrams",
    "contains",
    "extract_phrases",
    "build_table",
    "phrase_str",
    "parse_phrase",
]

Phrase = tuple[str, ...]


def phrase_str(phrase: Phrase) -> str:
    return " ".join(phrase)


def parse_phrase(text: str) -> Phrase:
    tokens = tuple(text.split())
    if not tokens:
        raise ValueError("empty phrase")
    return tokens


def ngrams(tokens: Sequence[str], max_len: int = 3, min_len: int = 1) -> set[Phrase]:
    """All distinct contiguous runs of ``min_len..max_len`` tokens."""
    tokens = tuple(tokens)
    out = set()
    for n in range(min_len, min(max_len, len(tokens)) + 1):
        for i in range(len(tokens) - n + 1):
            out.add(tokens[i : i + n])
    return out


def contains(utterance: Utterance | Sequence[str], phrase: Phrase) -> bool:
    """True iff ``phrase`` occurs as a contiguous run of the utterance's tokens."""
    tokens = utterance.tokens if isinstance(utterance, Utterance) else tuple(utterance)
    n = len(phrase)
    if n == 0 or n > len(tokens):
        return False
    first = phrase[0]
    for i in range(len(tokens) - n + 1):
        if tokens[i] == first and tokens[i : i + n] == tuple(phrase):
            return True
    return False


def extract_phrases(corpus: Corpus, max_len: int = 3) -> set[Phrase]:
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    phrases: set[Phrase] = set()
    for u in corpus.utterances():
        phrases |= ngrams(u.tokens, max_len)
    return phrases


class PhraseTable:
    """Cooccurrence counts between phrases and dialogue acts.

    ``joint[i, j]`` is the number of utterances labeled ``acts[j]`` that
    contain ``phrases[i]`` at least once. Phrases are stored sorted by token
    tuple; all counts are integers and probabilities are derived on demand.
    """

    def __init__(self, phrases: Sequence[Phrase], acts: Sequence[str], joint, act_count):
        self.phrases: tuple[Phrase, ...] = tuple(phrases)
        self.acts: tuple[str, ...] = tuple(acts)
        self.joint = np.asarray(joint, dtype=np.int64)
        self.act_count = np.asarray(act_count, dtype=np.int64)
        self.phrase_count = self.joint.sum(axis=1)
        self.U = int(self.act_count.sum())
        self.index = {p: i for i, p in enumerate(self.phrases)}
        self.act_index = {a: j for j, a in enumerate(self.acts)}
        self.joint.setflags(write=False)
        self.act_count.setflags(write=False)
        self.phrase_count.setflags(write=False)

    @property
    def D(self) -> int:
        return len(self.acts)

    def __len__(self) -> int:
        return len(self.phrases)

    def __contains__(self, phrase) -> bool:
        return tuple(phrase) in self.index

    def row(self, phrase: Phrase) -> int:
        try:
            return self.index[tuple(phrase)]
        except KeyError:
            raise KeyError(f"phrase {phrase_str(phrase)!r} is not in the table") from None

    def count(self, phrase: Phrase, act: str | None = None) -> int:
        """#(p&d), or #(p) when ``act`` is None."""
        i = self.row(phrase)
        if act is None:
            return int(self.phrase_count[i])
        return int(self.joint[i, self.act_index[act]])

    def not_count(self, phrase: Phrase, act: str | None = None) -> int:
        """#(p̄&d), or #(p̄) when ``act`` is None."""
        if act is None:
            return self.U - self.count(phrase)
        return int(self.act_count[self.act_index[act]]) - self.count(phrase, act)

    def dump(self) -> str:
        """TSV ``phrase, act, count`` for every nonzero cell."""
        lines = ["phrase\tact\tcount\n"]
        rows, cols = np.nonzero(self.joint)
        for i, j in zip(rows, cols):
            lines.append(f"{phrase_str(self.phrases[i])}\t{self.acts[j]}\t{self.joint[i, j]}\n")
        return "".join(lines)


def build_table(corpus: Corpus, phrases: Iterable[Phrase]) -> PhraseTable:
    wanted = {tuple(p) for p in phrases}
    if not wanted:
        raise ValueError("no phrases to count")
    if len(corpus) == 0:
        raise ValueError("cannot count phrases over an empty corpus")
    acts = corpus.act_inventory
    act_index = {a: j for j, a in enumerate(acts)}
    lengths = sorted({len(p) for p in wanted})
    hits: dict[Phrase, np.ndarray] = {}
    act_count = np.zeros(len(acts), dtype=np.int64)
    for u in corpus.utterances():
        j = act_index[u.gold_act]
        act_count[j] += 1
        present = set()
        for n in lengths:
            present |= ngrams(u.tokens, n, n)
        for p in present & wanted:
            row = hits.get(p)
            if row is None:
                row = hits[p] = np.zeros(len(acts), dtype=np.int64)
            row[j] += 1
    kept = sorted(hits)
    joint = np.array([hits[p] for p in kept], dtype=np.int64).reshape(len(kept), len(acts))
    return PhraseTable(kept, acts, joint, act_count)
