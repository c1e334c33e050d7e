"""Reading, tokenizing, clustering and splitting dialogue-act-tagged corpora.

A corpus file is UTF-8 TSV with five columns::

    dialogue_id  turn_index  speaker  act  text

Lines starting with ``#`` are comments. A cluster lexicon file is TSV with
two columns, ``cluster_label`` and ``surface_token``.
"""

from __future__ import annotations

import io
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, TextIO

__all__ = [
    "CorpusError",
    "Utterance",
    "Corpus",
    "ClusterLexicon",
    "tokenize",
    "apply_clusters",
    "parse_corpus",
    "read_corpus",
    "write_corpus",
    "format_corpus",
    "split_corpus",
    "read_lexicon",
]

STRIP_CHARS = '.,!?;:"()'

_NUMERAL = re.compile(r"^\d+(?:[:.]\d+)?$")
_ORDINAL = re.compile(r"^\d+(?:st|nd|rd|th)$")

_ORDINAL_WORDS = frozenset(
    """first second third fourth fifth sixth seventh eighth ninth tenth
    eleventh twelfth thirteenth fourteenth fifteenth sixteenth seventeenth
    eighteenth nineteenth twentieth twenty-first twenty-second twenty-third
    twenty-fourth twenty-fifth twenty-sixth twenty-seventh twenty-eighth
    twenty-ninth thirtieth thirty-first""".split()
)

NUMBER_LABEL = "$number$"
ORDINAL_LABEL = "$ordinal-number$"


class CorpusError(ValueError):
    """Malformed corpus or lexicon input.

    ``line`` is the 1-based line number when the problem is tied to one line.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Utterance:
    dialogue_id: str
    turn_index: int
    speaker: str
    gold_act: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class Corpus:
    """Ordered dialogues of utterances.

    ``act_inventory`` is kept sorted; that order is the tie-break order used
    everywhere an argmax over acts is taken.
    """

    dialogues: tuple[tuple[Utterance, ...], ...]
    act_inventory: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        acts = tuple(sorted({u.gold_act for d in self.dialogues for u in d}))
        object.__setattr__(self, "act_inventory", acts)

    @classmethod
    def from_utterances(cls, utterances: Iterable[Utterance]) -> "Corpus":
        """Group utterances into dialogues in order of first appearance."""
        groups: dict[str, list[Utterance]] = {}
        for u in utterances:
            groups.setdefault(u.dialogue_id, []).append(u)
        dialogues = []
        for did, utts in groups.items():
            utts.sort(key=lambda u: u.turn_index)
            if [u.turn_index for u in utts] != list(range(len(utts))):
                raise CorpusError(f"dialogue {did!r}: turn indices are not 0..{len(utts) - 1}")
            dialogues.append(tuple(utts))
        return cls(tuple(dialogues))

    def utterances(self) -> Iterator[Utterance]:
        for d in self.dialogues:
            yield from d

    def gold(self) -> list[str]:
        return [u.gold_act for u in self.utterances()]

    def __len__(self) -> int:
        return sum(len(d) for d in self.dialogues)


class ClusterLexicon:
    """Maps surface tokens onto semantic cluster labels such as ``$weekday$``.

    Besides the explicit surface sets, two rule-based matchers can be
    switched on: digits (optionally with one internal ``:`` or ``.``) become
    ``$number$``, and ``14th``-style tokens or ordinal words become
    ``$ordinal-number$``. Explicit surface sets take precedence.
    """

    def __init__(
        self,
        clusters: Mapping[str, Iterable[str]] | None = None,
        numbers: bool = True,
        ordinals: bool = True,
    ):
        self.clusters = {label: frozenset(s) for label, s in (clusters or {}).items()}
        self.numbers = numbers
        self.ordinals = ordinals
        self._lookup: dict[str, str] = {}
        for label, surfaces in self.clusters.items():
            if len(label) < 3 or not (label.startswith("$") and label.endswith("$")):
                raise CorpusError(f"cluster label {label!r} must look like $name$")
            for s in surfaces:
                if s in self._lookup:
                    raise CorpusError(
                        f"token {s!r} is in both {self._lookup[s]!r} and {label!r}"
                    )
                if s.startswith("$") and s.endswith("$") and len(s) > 1:
                    raise CorpusError(f"surface token {s!r} looks like a cluster label")
                self._lookup[s] = label

    @classmethod
    def scheduling(cls, proper_names: Iterable[str] = ()) -> "ClusterLexicon":
        """Weekday and month clusters plus the numeral and ordinal matchers."""
        clusters = {
            "$weekday$": "monday tuesday wednesday thursday friday saturday sunday".split(),
            "$month$": (
                "january february march april may june july august september "
                "october november december"
            ).split(),
        }
        names = [n.lower() for n in proper_names]
        if names:
            clusters["$proper-name$"] = names
        return cls(clusters)

    def label(self, token: str) -> str | None:
        hit = self._lookup.get(token)
        if hit is not None:
            return hit
        if self.ordinals and (token in _ORDINAL_WORDS or _ORDINAL.match(token)):
            return ORDINAL_LABEL
        if self.numbers and _NUMERAL.match(token):
            return NUMBER_LABEL
        return None

    def __eq__(self, other):
        if not isinstance(other, ClusterLexicon):
            return NotImplemented
        return (self.clusters, self.numbers, self.ordinals) == (
            other.clusters,
            other.numbers,
            other.ordinals,
        )

    def __repr__(self):
        return f"ClusterLexicon({sorted(self.clusters)}, numbers={self.numbers}, ordinals={self.ordinals})"


def tokenize(text: str) -> list[str]:
    tokens = []
    for raw in text.lower().split():
        tok = raw.strip(STRIP_CHARS)
        if tok:
            tokens.append(tok)
    return tokens


def apply_clusters(tokens: Sequence[str], lexicon: ClusterLexicon | None) -> list[str]:
    if lexicon is None:
        return list(tokens)
    out = []
    for tok in tokens:
        label = lexicon.label(tok)
        out.append(tok if label is None else label)
    return out


def parse_corpus(stream: TextIO | str, lexicon: ClusterLexicon | None = None) -> Corpus:
    """Parse corpus TSV from a text stream (or a string holding the content)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    seen: set[tuple[str, int]] = set()
    utterances = []
    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise CorpusError(f"expected 5 tab-separated fields, got {len(fields)}", lineno)
        did, turn, speaker, act, text = fields
        try:
            turn_index = int(turn)
        except ValueError:
            raise CorpusError(f"turn index {turn!r} is not an integer", lineno) from None
        if turn_index < 0:
            raise CorpusError(f"negative turn index {turn_index}", lineno)
        if not act:
            raise CorpusError("empty dialogue act", lineno)
        if (did, turn_index) in seen:
            raise CorpusError(f"duplicate turn {turn_index} in dialogue {did!r}", lineno)
        seen.add((did, turn_index))
        tokens = apply_clusters(tokenize(text), lexicon)
        if not tokens:
            raise CorpusError("utterance text is empty after tokenization", lineno)
        utterances.append(Utterance(did, turn_index, speaker, act, tuple(tokens)))
    return Corpus.from_utterances(utterances)


def read_corpus(path, lexicon: ClusterLexicon | None = None) -> Corpus:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_corpus(fh, lexicon)


def format_corpus(corpus: Corpus, acts: Sequence[str] | None = None) -> str:
    """Serialize to corpus TSV with tokens space-joined.

    ``acts`` optionally replaces the act column (used to write tagger output).
    """
    utts = list(corpus.utterances())
    if acts is not None and len(acts) != len(utts):
        raise ValueError(f"{len(acts)} tags for {len(utts)} utterances")
    lines = []
    for i, u in enumerate(utts):
        act = u.gold_act if acts is None else acts[i]
        lines.append(f"{u.dialogue_id}\t{u.turn_index}\t{u.speaker}\t{act}\t{' '.join(u.tokens)}\n")
    return "".join(lines)


def write_corpus(corpus: Corpus, path, acts: Sequence[str] | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_corpus(corpus, acts))


def split_corpus(corpus: Corpus, heldout_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Split at dialogue granularity into (train, heldout).

    The held-out side gets ``round(n * heldout_fraction)`` dialogues chosen
    by a seeded shuffle; both sides keep the original dialogue order.
    """
    if not 0.0 < heldout_fraction < 1.0:
        raise ValueError("heldout_fraction must be in (0, 1)")
    n = len(corpus.dialogues)
    n_heldout = round(n * heldout_fraction)
    if n_heldout < 1 or n_heldout > n - 1:
        raise ValueError(
            f"heldout_fraction {heldout_fraction} leaves an empty side with {n} dialogue(s)"
        )
    order = list(range(n))
    random.Random(seed).shuffle(order)
    heldout_idx = set(order[:n_heldout])
    train = tuple(d for i, d in enumerate(corpus.dialogues) if i not in heldout_idx)
    heldout = tuple(d for i, d in enumerate(corpus.dialogues) if i in heldout_idx)
    return Corpus(train), Corpus(heldout)


def read_lexicon(path, numbers: bool = True, ordinals: bool = True) -> ClusterLexicon:
    clusters: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise CorpusError(f"expected 2 tab-separated fields, got {len(fields)}", lineno)
            label, surface = fields[0], fields[1].strip().lower()
            clusters.setdefault(label, set()).add(surface)
    return ClusterLexicon(clusters, numbers=numbers, ordinals=ordinals)
