import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from adeffect.analysis import (
    UndefinedCorrelation,
    coefficient_of_variation,
    correlation_columns,
    correlation_report,
    extremes_distribution,
    flow_entropy,
    pearson,
    reliability_report,
)
from adeffect.data_model import AnnotationSet, CleanVideoRecord, RawVideoRecord

finite = st.floats(-1e3, 1e3, allow_nan=False)


def raw(vid, eff, sentiments=(0,) * 5, duration=10.0, statements=()):
    return RawVideoRecord(vid, tuple(AnnotationSet(e, 0, s, 0, 0, 0) for e, s in zip(eff, sentiments)),
                          duration, statements=statements)


def clean(vid, eff, topic=0, sentiment=0, mean=None, duration=10.0):
    return CleanVideoRecord(vid, eff, topic, sentiment, 0, 0, 0, duration, float(eff if mean is None else mean))


def test_pearson_examples():
    assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0)
    # closed form: s_xy = 5, s_xx = 2, s_yy = 114/9
    assert pearson([1, 2, 3], [2, 4, 7]) == pytest.approx(15 / math.sqrt(228), rel=1e-12)


def test_pearson_zero_variance():
    with pytest.raises(UndefinedCorrelation):
        pearson([1, 1, 1], [1, 2, 3])


@given(st.lists(st.tuples(finite, finite), min_size=3, max_size=30),
       st.floats(0.1, 10), finite, st.floats(0.1, 10))
@settings(max_examples=100)
def test_pearson_affine_invariance(pairs, a, b, c):
    x, y = map(np.array, zip(*pairs))
    assume(np.ptp(x) > 1e-3 and np.ptp(y) > 1e-3)
    r = pearson(x, y)
    assert abs(r) <= 1
    assert pearson(a * x + b, y) == pytest.approx(r, abs=1e-9)
    assert pearson(-c * x, y) == pytest.approx(-r, abs=1e-9)


def test_coefficient_of_variation_examples():
    assert coefficient_of_variation([4, 4, 4, 4, 4]) == 0.0
    assert coefficient_of_variation([5, 3, 3, 4, 5]) == pytest.approx(100 * math.sqrt(0.8) / 4)
    assert coefficient_of_variation([5, 3, 3, 4, 5]) == pytest.approx(22.36, abs=0.01)
    assert coefficient_of_variation([2, 4]) == pytest.approx(100 / 3)


def test_reliability_fractions():
    rep = reliability_report([raw("a", [5, 3, 3, 4, 5])])
    assert [rep.fractions[t] for t in (30.0, 40.0, 50.0)] == [1.0, 1.0, 1.0]
    rep = reliability_report([raw("a", [5, 3, 3, 4, 5]), raw("b", [2, 2, 2, 2, 2])])
    assert [rep.fractions[t] for t in (30.0, 40.0, 50.0)] == [1.0, 1.0, 1.0]
    rep = reliability_report([raw("a", [1, 5, 1, 5, 1]), raw("b", [3, 3, 3, 3, 3])])
    assert rep.counts[50.0] == 1


@given(st.lists(st.lists(st.integers(1, 5), min_size=5, max_size=5), min_size=1, max_size=30))
def test_reliability_monotone_in_threshold(all_ratings):
    rep = reliability_report([raw(f"v{i}", r) for i, r in enumerate(all_ratings)])
    f = [rep.fractions[t] for t in rep.thresholds]
    assert f == sorted(f)


def test_entropy_examples():
    assert flow_entropy(np.full(30, 1 / 30)) == pytest.approx(math.log(30))
    assert flow_entropy([0.5, 0.5] + [0] * 28) == pytest.approx(math.log(2))
    assert flow_entropy([1.0] + [0] * 29) == 0.0
    with pytest.raises(ValueError):
        flow_entropy([0.5, 0.2])


@given(st.lists(st.floats(0, 1), min_size=30, max_size=30), st.permutations(range(30)))
def test_entropy_bounded_and_permutation_invariant(w, perm):
    w = np.array(w)
    assume(w.sum() > 1e-6)
    p = w / w.sum()
    h = flow_entropy(p)
    assert h <= math.log(30) + 1e-12
    assert flow_entropy(p[list(perm)]) == pytest.approx(h, abs=1e-12)


def test_lift_equal_share_is_one():
    # topic 1 is 5% of both the corpus and the top group
    recs = []
    for i in range(400):
        topic = 1 if i % 20 == 0 else 2
        recs.append(clean(f"v{i:04d}", 3, topic=topic, mean=float(i)))
    rep = extremes_distribution(recs, 200, "topic")
    top = {s.group: s for s in rep.top}
    assert top[1].extreme_share == pytest.approx(0.05)
    assert top[1].lift == pytest.approx(1.0)
    assert top[0].lift == 0.0


def test_single_topic_lift():
    rep = extremes_distribution([clean(f"v{i}", 3, topic=4, mean=i % 5) for i in range(20)], 5, "topic")
    assert rep.top[4].lift == pytest.approx(1.0)
    assert rep.bottom[4].lift == pytest.approx(1.0)


def test_extremes_k_too_large():
    with pytest.raises(ValueError):
        extremes_distribution([clean("a", 1), clean("b", 2)], 2, "topic")


@given(st.lists(st.tuples(st.integers(0, 37), st.floats(1, 5)), min_size=4, max_size=80),
       st.integers(1, 40))
@settings(max_examples=60)
def test_weighted_lifts_average_to_one(rows, k):
    assume(2 * k <= len(rows))
    recs = [clean(f"v{i:03d}", 3, topic=t, mean=m) for i, (t, m) in enumerate(rows)]
    rep = extremes_distribution(recs, k, "topic")
    for shares in (rep.top, rep.bottom):
        assert sum(s.dataset_share * s.lift for s in shares) == pytest.approx(1.0)


def test_duration_equal_to_effectiveness_correlates_perfectly():
    cleaned = [clean(f"v{i}", e, duration=float(e)) for i, e in enumerate([1, 2, 3, 4, 5, 2])]
    cols, target = correlation_columns([], cleaned)
    rows = {r.feature: r for r in correlation_report(cols, target)}
    assert rows["duration"].r == pytest.approx(1.0)
    assert rows["duration"].n == 6
    assert math.isnan(rows["exciting"].r)
