"""Transformation-Based Learning dialogue act tagger.

Features per utterance: which selected phrases it contains, the current
(preliminary) tag of the preceding utterance in the same dialogue, and
whether the speaker changed. Rules rewrite one tag into another when their
conditions hold; they are applied one at a time, each as a left-to-right
sweep over the corpus in which the previous-tag condition sees rewrites made
earlier in the same sweep (``update="sequential"``). The alternative
``update="simultaneous"`` evaluates every site against the tags as they
stood before the sweep.

Training is the usual greedy loop: instantiate rule templates at the
currently mistagged utterances, score every candidate by its net gain over
the whole training set, keep the best one and repeat until the best gain
drops below the threshold.
"""

from __future__ import annotations

import hashlib
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .corpus import Corpus
from .counts import Phrase, ngrams, parse_phrase, phrase_str

log = logging.getLogger(__name__)

__all__ = [
    "BOD",
    "DEFAULT_TEMPLATES",
    "FeatureView",
    "TransformationRule",
    "TaggerModel",
    "ModelFormatError",
    "initial_tag",
    "featurize",
    "rule_matches",
    "apply_rules",
    "train",
    "phrase_set_hash",
    "format_model",
    "parse_model",
]

BOD = "BOD"

FEATURES = ("phrase", "prev", "cos")

DEFAULT_TEMPLATES: tuple[frozenset[str], ...] = tuple(
    frozenset(t)
    for t in (("phrase",), ("prev",), ("cos",), ("phrase", "prev"), ("phrase", "cos"), ("prev", "cos"))
)

UPDATE_MODES = ("sequential", "simultaneous")


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureView:
    phrase_hits: frozenset[Phrase]
    prev_tag: str
    change_of_speaker: bool


@dataclass(frozen=True)
class TransformationRule:
    from_tag: str
    to_tag: str
    phrase: Phrase | None = None
    prev: str | None = None
    cos: bool | None = None

    def __post_init__(self):
        if self.phrase is None and self.prev is None and self.cos is None:
            raise ValueError("a rule needs at least one condition")
        if self.from_tag == self.to_tag:
            raise ValueError(f"rule rewrites {self.from_tag!r} into itself")
        if self.phrase is not None:
            object.__setattr__(self, "phrase", tuple(self.phrase))

    @property
    def n_conditions(self) -> int:
        return sum(c is not None for c in (self.phrase, self.prev, self.cos))

    def serialize(self) -> str:
        parts = [f"from={self.from_tag}"]
        if self.phrase is not None:
            parts.append(f'phrase="{phrase_str(self.phrase)}"')
        if self.prev is not None:
            parts.append(f"prev={self.prev}")
        if self.cos is not None:
            parts.append(f"cos={'t' if self.cos else 'f'}")
        parts.append(f"to={self.to_tag}")
        return " ".join(parts)

    def __str__(self):
        return self.serialize()


@dataclass
class TaggerModel:
    default_tag: str
    rules: list[TransformationRule]
    phrase_set: frozenset[Phrase]
    acts: tuple[str, ...]
    gains: list[int] = field(default_factory=list)
    train_size: int = 0
    initial_correct: int = 0
    update: str = "sequential"
    phrase_hash: str = ""
    # a loaded model only knows the phrases its rules use, plus the
    # recorded hash and size of the set it was trained with
    phrase_set_size: int | None = None

    def __post_init__(self):
        if not self.phrase_hash:
            self.phrase_hash = phrase_set_hash(self.phrase_set)
        if self.phrase_set_size is None:
            self.phrase_set_size = len(self.phrase_set)

    @property
    def training_trace(self) -> list[tuple[int, float]]:
        """``(net_gain, training_accuracy_after)`` for every learned rule."""
        trace = []
        correct = self.initial_correct
        for g in self.gains:
            correct += g
            trace.append((g, correct / self.train_size))
        return trace

    @property
    def training_accuracy(self) -> float:
        if not self.train_size:
            return float("nan")
        return (self.initial_correct + sum(self.gains)) / self.train_size


def phrase_set_hash(phrases: Iterable[Phrase]) -> str:
    text = "\n".join(sorted(phrase_str(p) for p in phrases))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def initial_tag(corpus: Corpus, default_tag: str) -> list[str]:
    return [default_tag] * len(corpus)


def _phrase_hits(tokens: Sequence[str], phrase_set, lengths) -> set[Phrase]:
    present = set()
    for n in lengths:
        present |= ngrams(tokens, n, n)
    return present & phrase_set


def featurize(corpus: Corpus, phrase_set: Iterable[Phrase], tags: Sequence[str]) -> list[FeatureView]:
    phrase_set = {tuple(p) for p in phrase_set}
    lengths = sorted({len(p) for p in phrase_set})
    if len(tags) != len(corpus):
        raise ValueError(f"{len(tags)} tags for {len(corpus)} utterances")
    views = []
    i = 0
    for dialogue in corpus.dialogues:
        for k, u in enumerate(dialogue):
            if k == 0:
                prev, cos = BOD, True
            else:
                prev, cos = tags[i - 1], u.speaker != dialogue[k - 1].speaker
            views.append(FeatureView(frozenset(_phrase_hits(u.tokens, phrase_set, lengths)), prev, cos))
            i += 1
    return views


def rule_matches(rule: TransformationRule, view: FeatureView, tag: str) -> bool:
    return (
        tag == rule.from_tag
        and (rule.phrase is None or rule.phrase in view.phrase_hits)
        and (rule.prev is None or rule.prev == view.prev_tag)
        and (rule.cos is None or rule.cos == view.change_of_speaker)
    )


class _Encoded:
    """Integer view of a corpus: acts and phrases as indices, BOD as -1."""

    def __init__(self, corpus: Corpus, acts: Sequence[str], phrases: Sequence[Phrase]):
        self.acts = tuple(acts)
        self.act_index = {a: j for j, a in enumerate(self.acts)}
        self.phrases = tuple(phrases)
        self.phrase_index = {p: j for j, p in enumerate(self.phrases)}
        phrase_set = set(self.phrases)
        lengths = sorted({len(p) for p in phrase_set})
        n = len(corpus)
        self.n = n
        self.start = np.zeros(n, dtype=bool)
        self.cos = np.zeros(n, dtype=bool)
        self.hits: list[tuple[int, ...]] = []
        postings = defaultdict(list)
        i = 0
        for dialogue in corpus.dialogues:
            for k, u in enumerate(dialogue):
                self.start[i] = k == 0
                self.cos[i] = k == 0 or u.speaker != dialogue[k - 1].speaker
                hit = tuple(sorted(self.phrase_index[p] for p in _phrase_hits(u.tokens, phrase_set, lengths)))
                self.hits.append(hit)
                for h in hit:
                    postings[h].append(i)
                i += 1
        self.postings = {h: np.array(v, dtype=np.int64) for h, v in postings.items()}
        self._empty = np.zeros(0, dtype=np.int64)

    def encode_rule(self, rule: TransformationRule):
        try:
            f = self.act_index[rule.from_tag]
            t = self.act_index[rule.to_tag]
            p = None if rule.prev is None else (-1 if rule.prev == BOD else self.act_index[rule.prev])
        except KeyError as e:
            raise ValueError(f"rule {rule} uses act {e.args[0]!r} outside the inventory") from None
        h = None if rule.phrase is None else self.phrase_index.get(rule.phrase, -1)
        return f, h, p, (None if rule.cos is None else bool(rule.cos)), t

    def decode_rule(self, f, h, p, c, t) -> TransformationRule:
        return TransformationRule(
            from_tag=self.acts[f],
            to_tag=self.acts[t],
            phrase=None if h is None else self.phrases[h],
            prev=None if p is None else (BOD if p == -1 else self.acts[p]),
            cos=c,
        )

    def sites(self, tags: np.ndarray, f, h, c) -> np.ndarray:
        if h is not None:
            pos = self.postings.get(h, self._empty)
            pos = pos[tags[pos] == f]
        else:
            pos = np.flatnonzero(tags == f)
        if c is not None:
            pos = pos[self.cos[pos] == c]
        return pos

    def prev_tags(self, tags: np.ndarray) -> np.ndarray:
        prev = np.empty_like(tags)
        prev[1:] = tags[:-1]
        prev[self.start] = -1
        return prev

    def fire(self, tags: np.ndarray, rule, update: str) -> np.ndarray:
        """Positions the rule rewrites in one sweep over ``tags`` (not modified)."""
        f, h, p, c, t = rule
        pos = self.sites(tags, f, h, c)
        if p is None or len(pos) == 0:
            return pos
        if update == "simultaneous" or p not in (f, t):
            # the previous tag of a site can only change if it was itself rewritten f -> t
            prev = np.where(self.start[pos], -1, tags[pos - 1])
            return pos[prev == p]
        fired = []
        last = -2
        start = self.start
        for i in pos.tolist():
            if start[i]:
                pv = -1
            elif last == i - 1:
                pv = t
            else:
                pv = tags[i - 1]
            if pv == p:
                fired.append(i)
                last = i
        return np.array(fired, dtype=np.int64)


def _check_update(update: str) -> str:
    if update not in UPDATE_MODES:
        raise ValueError(f"update must be one of {UPDATE_MODES}, got {update!r}")
    return update


def apply_rules(model: TaggerModel, corpus: Corpus) -> list[str]:
    """Tag ``corpus``: default tag everywhere, then every rule in learned order."""
    update = _check_update(model.update)
    phrases = sorted({r.phrase for r in model.rules if r.phrase is not None})
    enc = _Encoded(corpus, model.acts, phrases)
    if model.default_tag not in enc.act_index:
        raise ValueError(f"default tag {model.default_tag!r} is outside the inventory")
    tags = np.full(len(corpus), enc.act_index[model.default_tag], dtype=np.int64)
    for rule in model.rules:
        r = enc.encode_rule(rule)
        tags[enc.fire(tags, r, update)] = r[4]
    return [model.acts[t] for t in tags]


def _templates(templates) -> list[frozenset[str]]:
    out = []
    for t in templates:
        t = frozenset(t)
        if not t or not t <= set(FEATURES):
            raise ValueError(f"bad template {sorted(t)}; use a non-empty subset of {FEATURES}")
        if t not in out:
            out.append(t)
    return out


def _instantiate(templates, f, hits, pv, c):
    """Condition keys ``(from, phrase, prev, cos)`` one utterance supports."""
    keys = []
    for t in templates:
        hp = "phrase" in t
        p = pv if "prev" in t else None
        cc = c if "cos" in t else None
        if hp:
            keys.extend((f, h, p, cc) for h in hits)
        else:
            keys.append((f, None, p, cc))
    return keys


def train(
    corpus: Corpus,
    phrase_set: Iterable[Phrase],
    templates=DEFAULT_TEMPLATES,
    threshold: int = 2,
    update: str = "sequential",
    max_rules: int | None = None,
) -> TaggerModel:
    """Learn a rule sequence on ``corpus`` (gold acts are the targets)."""
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    update = _check_update(update)
    templates = _templates(templates)
    acts = corpus.act_inventory
    if BOD in acts:
        raise ValueError(f"{BOD!r} is reserved for the beginning-of-dialogue marker")
    phrases = sorted({tuple(p) for p in phrase_set})
    enc = _Encoded(corpus, acts, phrases)
    gold = np.array([enc.act_index[a] for a in corpus.gold()], dtype=np.int64)

    counts = np.bincount(gold, minlength=len(acts))
    default = int(np.argmax(counts))  # first (alphabetical) among equally frequent acts
    tags = np.full(enc.n, default, dtype=np.int64)
    correct = int((tags == gold).sum())
    model = TaggerModel(
        default_tag=acts[default],
        rules=[],
        phrase_set=frozenset(phrases),
        acts=acts,
        train_size=enc.n,
        initial_correct=correct,
        update=update,
    )

    while max_rules is None or len(model.rules) < max_rules:
        best = _best_rule(enc, tags, gold, templates, threshold, update)
        if best is None:
            break
        gain, rule = best
        fired = enc.fire(tags, rule, update)
        t = rule[4]
        actual = int((gold[fired] == t).sum() - (gold[fired] == rule[0]).sum())
        if actual != gain:  # pragma: no cover - internal consistency
            raise RuntimeError(f"gain bookkeeping mismatch: predicted {gain}, got {actual}")
        tags[fired] = t
        correct += gain
        model.rules.append(enc.decode_rule(*rule))
        model.gains.append(gain)
        log.debug("rule %d: %s gain=%d acc=%.4f", len(model.rules), model.rules[-1], gain, correct / enc.n)
    return model


def _best_rule(enc: _Encoded, tags, gold, templates, threshold, update):
    prev = enc.prev_tags(tags)
    cos = enc.cos
    hits = enc.hits
    wrong = np.flatnonzero(tags != gold)
    if len(wrong) == 0:
        return None

    good: dict = defaultdict(int)
    static_good: dict = defaultdict(int)
    prev_templates = [t for t in templates if "prev" in t]
    for i in wrong.tolist():
        f, g, pv, c, hit = tags[i], gold[i], prev[i], cos[i], hits[i]
        f = int(f)
        g = int(g)
        pv = int(pv)
        c = bool(c)
        for key in _instantiate(templates, f, hit, pv, c):
            good[key, g] += 1
        if update == "sequential":
            for t in prev_templates:
                cc = c if "cos" in t else None
                if "phrase" in t:
                    for h in hit:
                        static_good[f, h, cc, g] += 1
                else:
                    static_good[f, None, cc, g] += 1

    wanted = {k for k, _ in good}
    bad: dict = defaultdict(int)
    for i in np.flatnonzero(tags == gold).tolist():
        f = int(tags[i])
        for key in _instantiate(templates, f, hits[i], int(prev[i]), bool(cos[i])):
            if key in wanted:
                bad[key] += 1

    best_gain = None
    tied = []
    # Rules whose prev condition is their own from/to tag interact with
    # themselves within a sweep: they can match sites whose prev tag only
    # changes during the sweep, so they are proposed from every
    # (from, phrase, cos, to) error site with both interacting prev values.
    deferred = [
        (bound, (f, h, p, c), t) for (f, h, c, t), bound in static_good.items() for p in (f, t)
    ]
    for (key, t), n_good in good.items():
        f, h, p, c = key
        if update == "sequential" and p is not None and p in (f, t):
            continue
        gain = n_good - bad.get(key, 0)
        if best_gain is None or gain > best_gain:
            best_gain, tied = gain, [(key, t)]
        elif gain == best_gain:
            tied.append((key, t))

    def order(key, t):
        rule = enc.decode_rule(*key, t)
        return (rule.n_conditions, rule.serialize())

    best = None
    if tied:
        key, t = min(tied, key=lambda kt: order(*kt))
        best = (best_gain, order(key, t), key + (t,))

    # a deferred rule's gain is bounded by the corrections available at its
    # sites ignoring prev, so only plausible winners are simulated
    deferred.sort(key=lambda x: -x[0])
    for bound, key, t in deferred:
        floor = threshold if best is None else max(best[0], threshold)
        if bound < floor:
            break
        rule = key + (t,)
        fired = enc.fire(tags, rule, update)
        gain = int((gold[fired] == t).sum() - (gold[fired] == key[0]).sum())
        if best is None or gain > best[0] or (gain == best[0] and order(key, t) < best[1]):
            best = (gain, order(key, t), rule)

    if best is None or best[0] < threshold:
        return None
    return best[0], best[2]


_RULE_RE = re.compile(
    r'^from=(?P<from>\S+)'
    r'(?: phrase="(?P<phrase>.*?)"(?= (?:prev|cos|to)=))?'
    r"(?: prev=(?P<prev>\S+))?"
    r"(?: cos=(?P<cos>[tf]))?"
    r" to=(?P<to>\S+) gain=(?P<gain>-?\d+)$"
)


def format_model(model: TaggerModel) -> str:
    for a in model.acts:
        if not a or any(ch.isspace() for ch in a):
            raise ValueError(f"act {a!r} cannot be written to a model file")
    lines = [
        "# dacue transformation-based tagger",
        f"default_tag={model.default_tag}",
        "acts=" + " ".join(model.acts),
        f"phrase_set_sha256={model.phrase_hash}",
        f"phrase_set_size={model.phrase_set_size}",
        f"update={model.update}",
        f"train_size={model.train_size}",
        f"initial_correct={model.initial_correct}",
    ]
    for rule, gain in zip(model.rules, model.gains):
        lines.append(f"{rule.serialize()} gain={gain}")
    return "\n".join(lines) + "\n"


def parse_model(stream: TextIO) -> TaggerModel:
    header: dict[str, str] = {}
    rules: list[TransformationRule] = []
    gains: list[int] = []
    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        if line.startswith("from="):
            m = _RULE_RE.match(line)
            if not m:
                raise ModelFormatError(f"line {lineno}: cannot parse rule {line!r}")
            cos = m["cos"]
            try:
                rules.append(
                    TransformationRule(
                        from_tag=m["from"],
                        to_tag=m["to"],
                        phrase=None if m["phrase"] is None else parse_phrase(m["phrase"]),
                        prev=m["prev"],
                        cos=None if cos is None else cos == "t",
                    )
                )
            except ValueError as e:
                raise ModelFormatError(f"line {lineno}: {e}") from None
            gains.append(int(m["gain"]))
        else:
            key, sep, value = line.partition("=")
            if not sep:
                raise ModelFormatError(f"line {lineno}: expected key=value, got {line!r}")
            header[key] = value
    for key in ("default_tag", "acts"):
        if key not in header:
            raise ModelFormatError(f"model file lacks {key}")
    acts = tuple(header["acts"].split())
    known = set(acts)
    for rule in rules:
        for a in (rule.from_tag, rule.to_tag):
            if a not in known:
                raise ModelFormatError(f"rule {rule} uses act {a!r} outside the inventory")
        if rule.prev is not None and rule.prev != BOD and rule.prev not in known:
            raise ModelFormatError(f"rule {rule} uses act {rule.prev!r} outside the inventory")
    if header["default_tag"] not in known:
        raise ModelFormatError(f"default tag {header['default_tag']!r} is outside the inventory")
    return TaggerModel(
        default_tag=header["default_tag"],
        rules=rules,
        phrase_set=frozenset(r.phrase for r in rules if r.phrase is not None),
        acts=acts,
        gains=gains,
        train_size=int(header.get("train_size", 0)),
        initial_correct=int(header.get("initial_correct", 0)),
        update=_check_update(header.get("update", "sequential")),
        phrase_hash=header.get("phrase_set_sha256", ""),
        phrase_set_size=int(header["phrase_set_size"]) if "phrase_set_size" in header else None,
    )
