import io
import random

import numpy as np
import pytest
from conftest import make_corpus
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import naive_tag, naive_train, random_corpus

from dacue.counts import extract_phrases
from dacue.evaluation import gen_synthetic
from dacue.tbl import (
    BOD,
    DEFAULT_TEMPLATES,
    FeatureView,
    ModelFormatError,
    TaggerModel,
    TransformationRule,
    apply_rules,
    featurize,
    format_model,
    initial_tag,
    parse_model,
    phrase_set_hash,
    rule_matches,
    train,
)

SEE_YOU = ("see", "you")


@pytest.fixture
def scheduling():
    # the closing exchange of a scheduling dialogue
    return make_corpus(
        [
            ("d1", "A", "Init", "hello"),
            ("d1", "B", "Greet", "hi"),
            ("d1", "A", "Suggest", "how about monday"),
            ("d1", "B", "Accept", "monday is fine"),
            ("d1", "B", "Confirm", "so monday at two"),
            ("d1", "B", "Bye", "i'll see you then"),
        ]
    )


def model(default, *rules, acts, update="sequential"):
    return TaggerModel(default, list(rules), frozenset(), tuple(acts), gains=[1] * len(rules), update=update)


def test_featurize(scheduling):
    views = featurize(scheduling, {SEE_YOU}, initial_tag(scheduling, "Suggest"))
    assert views[5].phrase_hits == {SEE_YOU}
    assert views[5].change_of_speaker is False
    assert views[5].prev_tag == "Suggest"
    assert views[0] == FeatureView(frozenset(), BOD, True)
    assert views[1].change_of_speaker is True
    assert all(not v.phrase_hits for v in featurize(scheduling, set(), ["X"] * 6))


def test_initial_tag(scheduling):
    assert initial_tag(scheduling, "Suggest") == ["Suggest"] * 6


def test_rule_matches():
    rule = TransformationRule("Suggest", "Bye", phrase=SEE_YOU)
    view = FeatureView(frozenset({SEE_YOU}), "Accept", False)
    assert rule_matches(rule, view, "Suggest")
    assert not rule_matches(rule, view, "Bye")
    bod = TransformationRule("Suggest", "Greet", prev=BOD)
    assert not rule_matches(bod, FeatureView(frozenset(), "Accept", True), "Suggest")
    assert rule_matches(bod, FeatureView(frozenset(), BOD, True), "Suggest")
    assert not rule_matches(TransformationRule("S", "B", cos=True), view, "S")


def test_rule_validation_and_serialization():
    with pytest.raises(ValueError, match="condition"):
        TransformationRule("A", "B")
    with pytest.raises(ValueError, match="itself"):
        TransformationRule("A", "A", cos=True)
    rule = TransformationRule("Suggest", "Bye", phrase=["see", "you"], prev=BOD, cos=False)
    assert rule.serialize() == 'from=Suggest phrase="see you" prev=BOD cos=f to=Bye'
    assert rule.n_conditions == 3


def test_apply_empty_model_is_identity(scheduling):
    m = model("Suggest", acts=scheduling.act_inventory)
    assert apply_rules(m, scheduling) == ["Suggest"] * 6


def test_apply_phrase_rule_retags_exactly_hits():
    corpus = make_corpus(
        [("d", "A", "Greet", "hello there"), ("d", "B", "Suggest", "monday"), ("e", "A", "Greet", "well hello")]
    )
    m = model("Suggest", TransformationRule("Suggest", "Greet", phrase=("hello",)), acts=corpus.act_inventory)
    assert apply_rules(m, corpus) == ["Greet", "Suggest", "Greet"]


def test_prev_sees_rewrites_from_same_sweep():
    corpus = make_corpus([("d", "A", "X", "hello"), ("d", "B", "Y", "a"), ("d", "A", "Y", "b"), ("d", "B", "Y", "c")])
    acts = corpus.act_inventory
    phrase_first = TransformationRule("X", "G", phrase=("hello",))
    after_greet = TransformationRule("X", "Y", prev="G")
    m = model("X", phrase_first, after_greet, acts=acts + ("G",))
    assert apply_rules(m, corpus) == ["G", "Y", "X", "X"]
    # a rule conditioned on its own target tag propagates along the sweep
    chain = TransformationRule("X", "Y", prev="Y")
    start = TransformationRule("X", "Y", prev=BOD)
    seq = model("X", start, chain, acts=acts)
    assert apply_rules(seq, corpus) == ["Y"] * 4
    sim = model("X", start, chain, acts=acts, update="simultaneous")
    assert apply_rules(sim, corpus) == ["Y", "Y", "X", "X"]


@pytest.mark.parametrize("update", ["sequential", "simultaneous"])
@pytest.mark.parametrize("seed", range(30))
def test_apply_matches_naive(seed, update):
    rng = random.Random(seed)
    corpus = random_corpus(rng, max_acts=3, max_vocab=4)
    # an act no utterance carries, so there are always two to choose from
    acts = corpus.act_inventory + ("Zz",)
    phrases = sorted(extract_phrases(corpus, 2))
    rules = []
    for _ in range(rng.randint(1, 8)):
        f, t = rng.sample(acts, 2)
        kw = {}
        while not kw:
            if rng.random() < 0.5:
                kw["phrase"] = rng.choice(phrases)
            if rng.random() < 0.5:
                kw["prev"] = rng.choice(acts + (BOD,))
            if rng.random() < 0.4:
                kw["cos"] = rng.random() < 0.5
        rules.append(TransformationRule(f, t, **kw))
    m = model(acts[0], *rules, acts=acts, update=update)
    assert apply_rules(m, corpus) == naive_tag(rules, acts[0], corpus, update)


@pytest.mark.parametrize("update", ["sequential", "simultaneous"])
@pytest.mark.parametrize("threshold", [1, 2])
@pytest.mark.parametrize("seed", range(25))
def test_train_matches_exhaustive_search(seed, threshold, update):
    rng = random.Random(seed)
    corpus = random_corpus(rng, max_utts=30, max_acts=3, max_vocab=5, max_len=3)
    phrases = sorted(extract_phrases(corpus, 2))
    phrases = rng.sample(phrases, min(6, len(phrases)))
    m = train(corpus, phrases, DEFAULT_TEMPLATES, threshold, update)
    default, rules, gains = naive_train(corpus, phrases, DEFAULT_TEMPLATES, threshold, update)
    assert (m.default_tag, m.rules, m.gains) == (default, rules, gains)


def planted_corpus(seed=0):
    rng = random.Random(seed)
    acts = ["Accept", "Bye", "Greet", "Suggest"]
    rows = []
    for d in range(12):
        for k in range(rng.randint(2, 6)):
            a = rng.choice(acts)
            words = [rng.choice(["well", "so", "ok", "then"]) for _ in range(rng.randint(0, 2))]
            words.insert(rng.randint(0, len(words)), f"cue{a.lower()}")
            rows.append((f"d{d}", "AB"[k % 2], a, " ".join(words)))
    return make_corpus(rows)


def test_planted_cues_reach_perfect_training_accuracy():
    corpus = planted_corpus()
    cues = {(f"cue{a.lower()}",) for a in corpus.act_inventory}
    m = train(corpus, cues, threshold=1)
    assert m.training_accuracy == 1.0
    assert apply_rules(m, corpus) == corpus.gold()
    assert len(m.rules) == len(corpus.act_inventory) - 1


def test_single_act_corpus_learns_nothing():
    corpus = make_corpus([("d", "A", "Inform", "a b"), ("d", "B", "Inform", "c")])
    m = train(corpus, {("a",)}, threshold=1)
    assert m.rules == [] and m.default_tag == "Inform"
    assert m.training_accuracy == 1.0


def test_default_tag_is_majority_then_alphabetical():
    corpus = make_corpus([("d", "A", "Z", "a"), ("d", "B", "Y", "b"), ("d", "A", "Y", "c"), ("d", "B", "Z", "d")])
    assert train(corpus, set(), threshold=1).default_tag == "Y"


def test_bad_arguments():
    corpus = planted_corpus()
    with pytest.raises(ValueError, match="threshold"):
        train(corpus, set(), threshold=0)
    with pytest.raises(ValueError, match="update"):
        train(corpus, set(), update="batch")
    with pytest.raises(ValueError, match="template"):
        train(corpus, set(), templates=[{"speaker"}])


@pytest.mark.parametrize("threshold", [1, 2, 4])
def test_trace_invariants(threshold):
    corpus = gen_synthetic(12, 5, 0.7, 30, seed=3)
    phrases = extract_phrases(corpus, 2)
    m = train(corpus, phrases, threshold=threshold)
    trace = m.training_trace
    assert trace, "expected some rules on a cue-bearing corpus"
    n = len(corpus)
    acc = m.initial_correct / n
    assert acc == pytest.approx(corpus.gold().count(m.default_tag) / n)
    for gain, after in trace:
        assert gain >= threshold
        assert after > acc
        assert after - acc == pytest.approx(gain / n)
        acc = after
    tags = apply_rules(m, corpus)
    assert sum(a == b for a, b in zip(tags, corpus.gold())) / n == m.training_accuracy


def test_model_round_trip_and_replay():
    corpus = gen_synthetic(10, 4, 0.8, 30, seed=5)
    m = train(corpus, extract_phrases(corpus, 2), threshold=1)
    text = format_model(m)
    loaded = parse_model(io.StringIO(text))
    assert loaded.rules == m.rules and loaded.gains == m.gains
    assert loaded.default_tag == m.default_tag
    assert loaded.phrase_hash == phrase_set_hash(m.phrase_set)
    assert loaded.training_accuracy == m.training_accuracy
    heldout = gen_synthetic(4, 4, 0.8, 30, seed=6)
    assert apply_rules(loaded, heldout) == apply_rules(m, heldout)
    assert format_model(loaded) == text
    lines = text.splitlines()
    assert lines[1] == f"default_tag={m.default_tag}"
    assert all(line.startswith("from=") and " gain=" in line for line in lines[8:])


def test_model_with_unknown_act_is_rejected():
    text = "default_tag=A\nacts=A B\nfrom=A cos=t to=C gain=3\n"
    with pytest.raises(ModelFormatError, match="'C'"):
        parse_model(io.StringIO(text))
    with pytest.raises(ModelFormatError, match="condition"):
        parse_model(io.StringIO("default_tag=A\nacts=A B\nfrom=A to=B gain=3\n"))
    with pytest.raises(ModelFormatError, match="acts"):
        parse_model(io.StringIO("default_tag=A\n"))


def test_phrase_with_quote_like_tokens_round_trips():
    rule = TransformationRule("A", "B", phrase=("how", "'bout", "to=x"), prev="A")
    m = TaggerModel("A", [rule], frozenset({rule.phrase}), ("A", "B"), gains=[2], train_size=4, initial_correct=2)
    assert parse_model(io.StringIO(format_model(m))).rules == [rule]


def test_training_is_deterministic():
    corpus = gen_synthetic(10, 4, 0.7, 30, seed=2)
    phrases = extract_phrases(corpus, 3)
    a = format_model(train(corpus, phrases))
    b = format_model(train(corpus, sorted(phrases, reverse=True)))
    assert a == b


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_replay_reproduces_training_accuracy(seed):
    rng = random.Random(seed)
    corpus = random_corpus(rng, max_utts=40, max_acts=4, max_vocab=8)
    m = train(corpus, extract_phrases(corpus, 2), threshold=1, update=rng.choice(["sequential", "simultaneous"]))
    tags = apply_rules(m, corpus)
    assert np.mean([a == b for a, b in zip(tags, corpus.gold())]) == pytest.approx(m.training_accuracy, abs=0)
