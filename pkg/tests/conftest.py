import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dacue.corpus import Corpus, Utterance  # noqa: E402


def make_corpus(rows):
    """Build a corpus from ``(dialogue, speaker, act, text)`` rows; turns are numbered in order."""
    turns = {}
    utts = []
    for did, speaker, act, text in rows:
        k = turns.get(did, 0)
        turns[did] = k + 1
        utts.append(Utterance(did, k, speaker, act, tuple(text.split())))
    return Corpus.from_utterances(utts)


@pytest.fixture
def c1():
    # u1=[a x]:A, u2=[b x]:A, u3=[c]:A, u4=[c d]:B
    return make_corpus(
        [
            ("d1", "S", "A", "a x"),
            ("d1", "S", "A", "b x"),
            ("d1", "S", "A", "c"),
            ("d1", "S", "B", "c d"),
        ]
    )
