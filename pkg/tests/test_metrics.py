import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harcnn.crossval import crossval, plan_folds
from harcnn.data import build_dataset, get_config, get_group
from harcnn.errors import ConfigError, DataError, FoldError
from harcnn.metrics import EvalReport, confusion_matrix, evaluate, row_normalized, scores
from harcnn.nn.network import NetworkSpec, init_state
from harcnn.optim import TrainConfig


def tally(truth, pred, m):
    """Per-class P, R, F by direct counting."""
    P, R, F = [], [], []
    for c in range(m):
        tp = sum(1 for t, p in zip(truth, pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(truth, pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(truth, pred) if t == c and p != c)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        P.append(p)
        R.append(r)
        F.append(2 * p * r / (p + r) if p + r else 0.0)
    return P, R, F


labelled = st.integers(2, 6).flatmap(
    lambda m: st.tuples(
        st.just(m),
        st.lists(st.tuples(st.integers(0, m - 1), st.integers(0, m - 1)), min_size=1, max_size=60),
    )
)


def test_perfect_predictor():
    y = [0, 1, 2, 2, 1]
    r = EvalReport.from_predictions(("a", "b", "c"), y, y)
    np.testing.assert_array_equal(r.confusion, np.diag([1, 2, 2]))
    np.testing.assert_array_equal(r.fscore, 1.0)
    assert r.accuracy == 1.0 and r.macro_f == 1.0


def test_all_one_class_predictor():
    r = EvalReport.from_predictions(("a", "b"), [0, 0, 1, 1], [0, 0, 0, 0])
    assert r.recall[0] == 1.0 and r.precision[0] == 0.5
    assert r.fscore[1] == 0.0 and r.precision[1] == 0.0 and r.recall[1] == 0.0


@given(labelled)
@settings(max_examples=200, deadline=None)
def test_scores_match_tally(case):
    m, pairs = case
    truth, pred = zip(*pairs)
    cm = confusion_matrix(truth, pred, m)
    assert cm.sum() == len(pairs) and (cm >= 0).all()
    P, R, F = scores(cm)
    tp, tr, tf = tally(truth, pred, m)
    assert P.tolist() == tp and R.tolist() == tr
    np.testing.assert_allclose(F, tf, rtol=1e-15)


@given(labelled)
@settings(max_examples=200, deadline=None)
def test_metric_identities(case):
    m, pairs = case
    truth, pred = zip(*pairs)
    r = EvalReport.from_predictions(tuple(map(str, range(m))), truth, pred)
    micro_recall = np.diag(r.confusion).sum() / r.support.sum()
    assert micro_recall == pytest.approx(r.accuracy, abs=1e-15)
    lo, hi = np.minimum(r.precision, r.recall), np.maximum(r.precision, r.recall)
    assert np.all(lo - 1e-12 <= r.fscore) and np.all(r.fscore <= hi + 1e-12)
    for arr in (r.precision, r.recall, r.fscore):
        assert np.all((arr >= 0) & (arr <= 1))
    rows = r.normalized().sum(axis=1)
    nonempty = r.support > 0
    np.testing.assert_allclose(rows[nonempty], 1.0, atol=1e-9)
    assert not rows[~nonempty].any()


def test_row_normalized_example():
    np.testing.assert_allclose(row_normalized([[3, 1], [0, 0]]), [[0.75, 0.25], [0, 0]])


def test_confusion_rejects_bad_labels():
    with pytest.raises(ValueError):
        confusion_matrix([0, 3], [0, 1], 3)


def test_pooled_sums_counts():
    a = EvalReport.from_predictions(("x", "y"), [0, 1, 1], [0, 1, 0])
    b = EvalReport.from_predictions(("x", "y"), [0, 0, 1], [1, 0, 1])
    pooled = EvalReport.pooled([a, b])
    np.testing.assert_array_equal(pooled.confusion, a.confusion + b.confusion)
    # pooling uses counts, not the mean of per-fold scores
    assert pooled.recall[0] == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        EvalReport.pooled([])


# -- fold planning ------------------------------------------------------------


def test_folds_over_nineteen_subjects():
    plan = plan_folds(range(1, 20), k=5, seed=0)
    assert [len(t) for t in plan.test_sets] == [4, 4, 4, 4, 3]
    assert sorted(s for t in plan.test_sets for s in t) == list(range(1, 20))
    for train, test in plan:
        assert not set(train) & set(test)
        assert sorted(train + test) == list(range(1, 20))
    assert "4, 4, 4, 4, 3" in plan.note


def test_folds_leave_one_out():
    plan = plan_folds([10, 20, 30, 40, 50], k=5)
    assert sorted(t[0] for t in plan.test_sets) == [10, 20, 30, 40, 50]
    assert all(len(t) == 1 and len(tr) == 4 for tr, t in plan)


def test_folds_fixed_test_size():
    plan = plan_folds(range(1, 20), k=5, test_size=4)
    assert all(len(t) == 4 for t in plan.test_sets)
    assert len({s for t in plan.test_sets for s in t}) == 19
    assert all(not set(tr) & set(t) for tr, t in plan)


@given(st.integers(5, 40), st.integers(2, 5), st.integers(0, 1000))
@settings(max_examples=100, deadline=None)
def test_fold_plan_properties(n, k, seed):
    plan = plan_folds(range(n), k=k, seed=seed)
    assert plan.test_sets == plan_folds(range(n), k=k, seed=seed).test_sets
    sizes = [len(t) for t in plan.test_sets]
    assert max(sizes) - min(sizes) <= 1
    for i, a in enumerate(plan.test_sets):
        for b in plan.test_sets[i + 1 :]:
            assert not set(a) & set(b)


def test_folds_need_enough_subjects():
    with pytest.raises(ValueError):
        plan_folds([1, 2, 3, 4], k=5)


# -- evaluation and cross-validation -----------------------------------------

SMALL = TrainConfig(batch_size=64, epochs=1, seed=0)


def test_evaluate_rejects_empty(small_cohort):
    ds = build_dataset([], get_group("walk"), get_config("LS"))
    spec = NetworkSpec.small(1, 3)
    with pytest.raises(DataError):
        evaluate(init_state(spec), spec, ds)


def test_evaluate_is_deterministic(small_cohort):
    ds = build_dataset(small_cohort, get_group("walk"), get_config("LS")).thin(10)
    spec = NetworkSpec.small(1, 3)
    a = evaluate(init_state(spec, 1), spec, ds, batch_size=64)
    b = evaluate(init_state(spec, 1), spec, ds, batch_size=17)
    np.testing.assert_array_equal(a.confusion, b.confusion)
    assert a.total == len(ds)


@pytest.fixture(scope="module")
def small_run(small_cohort):
    spec = NetworkSpec.small(1, 3)
    return crossval(get_group("walk"), get_config("LS"), small_cohort, SMALL, spec=spec, train_thin=4)


def test_crossval_cardinality_and_pooling(small_run):
    assert len(small_run.folds) == 5
    np.testing.assert_array_equal(small_run.pooled.confusion, sum(small_run.reports[i].confusion for i in range(5)))
    assert small_run.pooled.meta["fold"] == "pooled"
    assert [r.meta["fold"] for r in small_run.reports] == ["1", "2", "3", "4", "5"]


def test_crossval_subject_isolation(small_run, small_cohort):
    seen = set()
    for f in small_run.folds:
        assert f.train_subjects and f.test_subjects
        assert not f.train_subjects & f.test_subjects
        seen |= f.test_subjects
    assert seen == {r.subject_id for r in small_cohort}


def test_crossval_is_deterministic(small_run, small_cohort):
    again = crossval(get_group("walk"), get_config("LS"), small_cohort, SMALL, spec=NetworkSpec.small(1, 3), train_thin=4)
    for a, b in zip(small_run.reports, again.reports):
        np.testing.assert_array_equal(a.confusion, b.confusion)


def test_crossval_rejects_inapplicable(small_cohort):
    with pytest.raises(ConfigError):
        crossval(get_group("strength"), get_config("RFLF"), small_cohort, SMALL)


def test_crossval_fold_error_names_fold(small_cohort):
    bad = NetworkSpec.small(1, 2)  # too few outputs for three walk labels
    with pytest.raises(FoldError, match="fold 1") as info:
        crossval(get_group("walk"), get_config("LS"), small_cohort, SMALL, spec=bad)
    assert info.value.fold == 1
    assert isinstance(info.value.cause, DataError)
