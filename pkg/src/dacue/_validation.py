"""Input coercion shared by the estimators."""

from __future__ import annotations

from typing import Sequence

from .corpus import Corpus, Utterance, tokenize


def check_utterances(X, y=None) -> tuple[list[tuple[str, ...]], list[str] | None]:
    """Coerce ``X`` to token tuples and ``y`` to a list of acts.

    ``X`` may be a :class:`Corpus`, a sequence of :class:`Utterance`, raw
    strings (tokenized here) or token sequences. With a corpus or utterances
    and no ``y``, the gold acts are used.
    """
    if isinstance(X, Corpus):
        X = list(X.utterances())
    X = list(X)
    tokens = []
    gold = []
    for x in X:
        if isinstance(x, Utterance):
            tokens.append(x.tokens)
            gold.append(x.gold_act)
        elif isinstance(x, str):
            tokens.append(tuple(tokenize(x)))
        else:
            tokens.append(tuple(str(t) for t in x))
    if y is None and len(gold) == len(X) and X:
        y = gold
    if y is not None:
        y = [str(a) for a in y]
        if len(y) != len(tokens):
            raise ValueError(f"X has {len(tokens)} utterances but y has {len(y)} labels")
    return tokens, y


def as_corpus(tokens: Sequence[tuple[str, ...]], acts: Sequence[str]) -> Corpus:
    """One-utterance dialogues, for callers that only have (tokens, act) pairs."""
    for i, t in enumerate(tokens):
        if not t:
            raise ValueError(f"utterance {i} has no tokens")
    return Corpus(tuple((Utterance(f"u{i}", 0, "", a, tuple(t)),) for i, (t, a) in enumerate(zip(tokens, acts))))


def check_corpus(X, y=None) -> Corpus:
    """Coerce ``X`` to a :class:`Corpus`, optionally relabeled with ``y``.

    Accepts a corpus, a sequence of dialogues (each a sequence of
    utterances) or a flat sequence of utterances.
    """
    if isinstance(X, Corpus):
        corpus = X
    else:
        items = list(X)
        if items and all(isinstance(u, Utterance) for u in items):
            corpus = Corpus.from_utterances(items)
        else:
            dialogues = tuple(tuple(d) for d in items)
            for d in dialogues:
                for u in d:
                    if not isinstance(u, Utterance):
                        raise TypeError(f"expected Utterance objects, got {type(u).__name__}")
            corpus = Corpus(dialogues)
    if y is not None:
        y = list(y)
        if len(y) != len(corpus):
            raise ValueError(f"X has {len(corpus)} utterances but y has {len(y)} labels")
        it = iter(y)
        corpus = Corpus(
            tuple(
                tuple(Utterance(u.dialogue_id, u.turn_index, u.speaker, str(next(it)), u.tokens) for u in d)
                for d in corpus.dialogues
            )
        )
    return corpus
