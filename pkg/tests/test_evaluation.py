import io
import math
import random

import pytest
from conftest import make_corpus
from hypothesis import example, given, settings
from hypothesis import strategies as st
from scipy import stats

from dacue.corpus import split_corpus
from dacue.counts import build_table, extract_phrases
from dacue.evaluation import (
    ExperimentResult,
    TBLConfig,
    accuracy,
    compare_to,
    emit_report,
    format_significance,
    gen_synthetic,
    parse_report,
    per_dialogue_accuracy,
    read_phrase_list,
    run_sweep,
    welch_t_test,
)
from dacue.metrics import MetricId, score_phrase


def test_accuracy():
    assert accuracy(["A", "B"], ["A", "B"]) == 1.0
    assert accuracy(["A", "B"], ["B", "A"]) == 0.0
    assert accuracy(["A", "B", "C", "D"], ["A", "B", "C", "X"]) == 0.75
    with pytest.raises(ValueError):
        accuracy(["A"], ["A", "B"])
    with pytest.raises(ValueError):
        accuracy([], [])


def test_per_dialogue_accuracy():
    corpus = make_corpus([("d", "A", "X", "a"), ("d", "B", "Y", "b"), ("e", "A", "X", "c")])
    assert per_dialogue_accuracy(corpus, ["X", "X", "Y"]) == [0.5, 0.0]


def test_welch_identical_samples():
    r = welch_t_test([0.1, 0.5, 0.3], [0.1, 0.5, 0.3])
    assert r.t_statistic == 0.0 and r.p_value == 1.0
    assert not r.significant


def test_welch_reference_example():
    a = [0.8, 0.9, 0.85, 0.95]
    b = [0.5, 0.55, 0.6, 0.45]
    r = welch_t_test(a, b)
    ref = stats.ttest_ind(a, b, equal_var=False)
    # both samples have variance 0.0125/3; the means differ by 0.35
    assert r.t_statistic == pytest.approx(0.35 / math.sqrt(2 * (0.0125 / 3) / 4), rel=1e-12)
    assert r.t_statistic == pytest.approx(7.668115805072328, rel=1e-12)
    assert r.t_statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9)
    assert r.degrees_of_freedom == pytest.approx(6.0)
    assert r.p_value < 0.01 and r.significant


def test_welch_errors():
    with pytest.raises(ValueError, match="at least 2"):
        welch_t_test([0.5], [0.4, 0.6])
    with pytest.raises(ValueError, match="zero variance"):
        welch_t_test([0.5, 0.5], [0.4, 0.4])


@pytest.mark.filterwarnings("ignore:Precision loss")
@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(0, 1), min_size=2, max_size=30),
    st.lists(st.floats(0, 1), min_size=2, max_size=30),
)
# variances near the bottom of the float range
@example([0.0, 0.0], [0.0, 3.960439042337864e-154])
def test_welch_matches_scipy(a, b):
    try:
        r = welch_t_test(a, b)
    except ValueError:
        return
    ref = stats.ttest_ind(a, b, equal_var=False)
    assert 0.0 <= r.p_value <= 1.0
    if math.isfinite(ref.statistic):
        assert r.t_statistic == pytest.approx(ref.statistic, rel=1e-6, abs=1e-9)
        assert r.p_value == pytest.approx(ref.pvalue, rel=1e-6, abs=1e-12)


def test_synthetic_is_deterministic():
    assert gen_synthetic(5, 4, 0.7, 30, seed=9) == gen_synthetic(5, 4, 0.7, 30, seed=9)
    assert gen_synthetic(5, 4, 0.7, 30, seed=9) != gen_synthetic(5, 4, 0.7, 30, seed=10)


def test_synthetic_pure_cues():
    corpus = gen_synthetic(8, 5, cue_strength=1.0, noise_vocab=0, seed=1)
    for u in corpus.utterances():
        k = u.gold_act[-2:]
        assert u.tokens == (f"cue{k}a", f"cue{k}b")


def test_synthetic_structure():
    corpus = gen_synthetic(20, ["Greet", "Suggest", "Bye"], 0.5, 50, seed=4)
    assert set(corpus.act_inventory) <= {"Greet", "Suggest", "Bye"}
    for d in corpus.dialogues:
        assert 10 <= len(d) <= 30
        assert [u.turn_index for u in d] == list(range(len(d)))
        assert d[0].gold_act == "Greet"
    with pytest.raises(ValueError):
        gen_synthetic(2, 1)


def test_planted_cue_scores_perfectly():
    corpus = gen_synthetic(10, 4, 1.0, 40, seed=2)
    table = build_table(corpus, extract_phrases(corpus, 2))
    for act in corpus.act_inventory:
        cue = (f"cue{act[-2:]}a", f"cue{act[-2:]}b")
        for metric in ("d", "dcp", "ent"):
            assert score_phrase(table, cue, metric) == 0.0


@pytest.fixture(scope="module")
def small_split():
    corpus = gen_synthetic(16, 4, 0.8, 40, seed=11, turns=(6, 12))
    return split_corpus(corpus, 0.25, 0)


def test_sweep_grid_size(small_split):
    train, heldout = small_split
    results = run_sweep(train, heldout, ["dcp"], [5, 100], ["modified"])
    assert len(results) == 2
    assert [(r.method, r.filter_mode, r.cutoff_percent) for r in results] == [
        ("dcp", "modified", 5.0),
        ("dcp", "modified", 100.0),
    ]
    r = results[0]
    assert r.phrase_count <= math.ceil(len(extract_phrases(train)) * 0.05)
    assert len(r.per_dialogue_accuracy) == len(heldout.dialogues)
    assert 0.0 <= r.heldout_accuracy <= 1.0


def test_full_metric_grid(small_split):
    train, heldout = small_split
    cutoffs = [1, 5, 10, 25, 50, 100]
    results = run_sweep(train, heldout, list(MetricId), cutoffs, ["basic", "modified"], n_jobs=2)
    assert len(results) == 9 * 6 * 2
    assert len({(r.method, r.filter_mode, r.cutoff_percent) for r in results}) == 108


def test_unfiltered_full_cutoff_equals_all(small_split):
    train, heldout = small_split
    results = run_sweep(train, heldout, ["all", "cooc", "ig", "dcp"], [100], ["none"])
    base = [r for r in results if r.method == "all"][0]
    assert base.phrase_count == len(extract_phrases(train))
    for r in results:
        assert r.heldout_accuracy == base.heldout_accuracy
        assert r.phrase_count == base.phrase_count


def test_sweep_invariant_to_method_order(small_split):
    train, heldout = small_split
    a = run_sweep(train, heldout, ["dcp", "ent", "all"], [10, 50], ["modified", "none"])
    b = run_sweep(train, heldout, ["all", "ent", "dcp"], [50, 10], ["none", "modified"])
    assert a == b
    assert [r.method for r in a][0] == "all"


def test_filtered_list_shorter_than_cutoff(small_split):
    train, heldout = small_split
    (r,) = run_sweep(train, heldout, ["cooc"], [100], ["basic"])
    assert r.phrase_count < len(extract_phrases(train))


def test_lit_baseline(small_split, tmp_path):
    train, heldout = small_split
    with pytest.raises(ValueError, match="lit"):
        run_sweep(train, heldout, ["lit"], [5], ["none"])
    path = tmp_path / "lit.txt"
    path.write_text("# cues\ncue00a cue00b\n\ncue01a\n")
    lit = read_phrase_list(path)
    assert lit == [("cue00a", "cue00b"), ("cue01a",)]
    (r,) = run_sweep(train, heldout, ["lit"], [5], ["modified"], lit_phrases=lit)
    assert (r.method, r.filter_mode, r.cutoff_percent, r.phrase_count) == ("lit", "none", 100.0, 2)


def test_sweep_rejects_overlap(small_split):
    train, _ = small_split
    with pytest.raises(ValueError, match="share"):
        run_sweep(train, train, ["all"], [100], ["none"])


def test_parallel_sweep_is_identical(small_split):
    train, heldout = small_split
    grid = (["all", "dcp", "mi"], [5, 25], ["basic", "modified"])
    assert run_sweep(train, heldout, *grid, n_jobs=1) == run_sweep(train, heldout, *grid, n_jobs=3)


def test_tbl_config_is_used(small_split):
    train, heldout = small_split
    (loose,) = run_sweep(train, heldout, ["all"], [100], ["none"], TBLConfig(threshold=1))
    (strict,) = run_sweep(train, heldout, ["all"], [100], ["none"], TBLConfig(threshold=50))
    assert strict.n_rules < loose.n_rules


def test_compare_to(small_split):
    train, heldout = small_split
    results = run_sweep(train, heldout, ["all", "dcp"], [5], ["modified"])
    (rep,) = compare_to(results)
    assert (rep.a, rep.b) == ("dcp/modified/5.0", "all/none/100.0")
    assert 0.0 <= rep.p_value <= 1.0
    assert format_significance([rep]).splitlines()[0] == "a,b,t_statistic,df,p_value,significant"
    with pytest.raises(ValueError):
        compare_to(results, "lit")


def test_report_empty_and_small():
    assert emit_report([]) == "method,filter,cutoff_percent,phrase_count,accuracy\n"
    results = [
        ExperimentResult("dcp", "modified", 5.0, 10, 0.9),
        ExperimentResult("all", "none", 100.0, 200, 0.8),
    ]
    text = emit_report(results)
    lines = text.splitlines()
    assert len(lines) == 3
    assert lines[1] == "all,none,100.0,200,0.8"
    out = io.StringIO()
    emit_report(results, out)
    assert out.getvalue() == text


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_report_round_trip(seed):
    rng = random.Random(seed)
    results = []
    seen = set()
    for _ in range(rng.randint(0, 12)):
        key = (rng.choice([m.value for m in MetricId]), rng.choice(["none", "basic", "modified"]), rng.choice([1.0, 2.5, 5.0, 100.0]))
        if key in seen:
            continue
        seen.add(key)
        results.append(ExperimentResult(*key, rng.randint(0, 999), rng.random()))
    parsed = parse_report(emit_report(results))
    assert parsed == sorted(results, key=ExperimentResult.sort_key)
    assert emit_report(parsed) == emit_report(results)


def test_parse_report_rejects_other_columns():
    with pytest.raises(ValueError, match="columns"):
        parse_report("a,b\n1,2\n")
