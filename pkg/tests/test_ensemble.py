import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adeffect.ensemble import (
    FALLBACK_INDEX,
    CLASSIFIER_TABLE,
    UNSEEN,
    EnsembleModel,
    FeatureBinding,
    MissingFeatureBlock,
    assemble,
    count_bins,
    ensemble_predict,
    ensemble_predict_many,
    fit_bins,
    load_ensemble,
    predict_all,
    save_ensemble,
    select_classifier,
)
from adeffect.learners import TreeModel


def threshold_tree(n_features=1):
    # predicts 1 when x[0] > 0.5, else 0
    return TreeModel([{"feature": 0, "threshold": 0.5, "left": 1, "right": 2}, {"label": 0}, {"label": 1}],
                     n_features, 2)


def specialist_scenario(n, seed):
    """Topic-1 videos carry the label in block a, topic-2 videos in block b.

    The other block holds the flipped label, so each specialist is right on
    its own topic and wrong on the other one.
    """
    r = np.random.default_rng(seed)
    topics = np.where(np.arange(n) % 2 == 0, 1, 2)
    sentiments = r.integers(0, 5, size=n)
    y = r.integers(0, 2, size=n)
    samples = []
    for t, label in zip(topics, y):
        a, b = (label, 1 - label) if t == 1 else (1 - label, label)
        samples.append({"a": [float(a)], "b": [float(b)]})
    return samples, y, topics, sentiments


SPECIALISTS = [FeatureBinding("tree", "A", ("a",)), FeatureBinding("tree", "B", ("b",))]


def two_specialist_result(n_train=200, n_test=200):
    clfs = [threshold_tree(), threshold_tree()]
    tr, y_tr, t_tr, s_tr = specialist_scenario(n_train, 0)
    te, y_te, t_te, s_te = specialist_scenario(n_test, 1)
    topic_acc, sent_acc = fit_bins(clfs, SPECIALISTS, tr, y_tr, t_tr, s_tr)
    model = EnsembleModel(clfs, SPECIALISTS, topic_acc, sent_acc, fallback_index=0)
    routed = ensemble_predict_many(model, te, t_te, s_te)
    individual = [float(np.mean(c.predict_many(np.array([s[b.blocks[0]] for s in te])) == y_te))
                  for c, b in zip(clfs, SPECIALISTS)]
    return float(np.mean(routed == y_te)), individual, model


def test_two_specialists_ensemble_is_perfect():
    acc, individual, model = two_specialist_result()
    assert acc == 1.0
    assert max(individual) <= 0.75
    assert model.topic_acc[0, 1] == 1.0 and model.topic_acc[0, 2] == 0.0
    assert model.topic_acc[1, 2] == 1.0


def test_two_specialists_brute_force_agreement():
    # route by brute force over every classifier on every test sample
    _, _, model = two_specialist_result()
    te, y_te, t_te, s_te = specialist_scenario(50, 2)
    for s, label, t, m in zip(te, y_te, t_te, s_te):
        scores = [max(model.topic_acc[k, t], model.sent_acc[k, m]) for k in range(2)]
        k = scores.index(max(scores))
        assert ensemble_predict(model, s, int(t), int(m)) == int(model.classifiers[k].predict_many(
            np.array([s[SPECIALISTS[k].blocks[0]]]))[0]) == label


def test_bin_counting_example():
    preds = np.array([[7, 0, 7, 0]])
    counts = count_bins(preds, [7, 7, 7, 7], [7, 7, 7, 7], [0, 0, 1, 1])
    assert counts.topic_acc[0, 7] == 0.5
    assert counts.topic_acc[0, 0] == UNSEEN
    assert counts.sent_acc[0, 0] == 0.5


def test_bin_totals_reconcile_with_training_accuracy(rng):
    n, k = 300, 6
    preds = rng.integers(0, 5, size=(k, n))
    y = rng.integers(0, 5, size=n)
    counts = count_bins(preds, y, rng.integers(0, 38, size=n), rng.integers(0, 30, size=n))
    overall = (preds == y).sum(axis=1)
    np.testing.assert_array_equal(counts.topic_correct.sum(axis=1), overall)
    np.testing.assert_array_equal(counts.sent_correct.sum(axis=1), overall)
    assert counts.topic_total.sum(axis=1).tolist() == [n] * k
    assert counts.topic_acc.shape[1] + counts.sent_acc.shape[1] == 68


def constructed_model(topic_acc, sent_acc, k):
    clfs = [TreeModel([{"label": i % 2}], 1, 2) for i in range(k)]
    binds = [FeatureBinding("tree", f"c{i}", ("x",)) for i in range(k)]
    return EnsembleModel(clfs, binds, np.asarray(topic_acc, float), np.asarray(sent_acc, float),
                         fallback_index=min(FALLBACK_INDEX, k - 1))


def test_select_best_bin():
    topic = np.full((5, 38), 0.5)
    sent = np.full((5, 30), 0.8)
    topic[3, 4] = 0.9
    assert select_classifier(constructed_model(topic, sent, 5), 4, 0) == 3


def test_select_tie_goes_to_lowest_index():
    topic = np.full((4, 38), 0.7)
    sent = np.full((4, 30), 0.1)
    assert select_classifier(constructed_model(topic, sent, 4), 0, 0) == 0


def test_select_falls_back_when_unseen():
    topic = np.full((25, 38), UNSEEN)
    sent = np.full((25, 30), UNSEEN)
    assert select_classifier(constructed_model(topic, sent, 25), 3, 3) == FALLBACK_INDEX == 20


@given(st.integers(0, 2**32 - 1), st.sampled_from(["cube", "exp", "affine", "sqrt"]))
@settings(max_examples=50)
def test_select_invariant_to_monotone_transform(seed, kind):
    r = np.random.default_rng(seed)
    topic = np.round(r.uniform(size=(6, 38)), 2)
    sent = np.round(r.uniform(size=(6, 30)), 2)
    topic[r.uniform(size=topic.shape) < 0.2] = UNSEEN
    f = {"cube": lambda v: v ** 3, "exp": np.exp, "affine": lambda v: 3 * v + 2, "sqrt": np.sqrt}[kind]

    def transform(a):
        return np.where(a == UNSEEN, UNSEEN, f(np.clip(a, 0, None)))

    m1 = constructed_model(topic, sent, 6)
    m2 = constructed_model(transform(topic), transform(sent), 6)
    for t in range(38):
        for s in range(0, 30, 7):
            assert select_classifier(m1, t, s) == select_classifier(m2, t, s)


def test_table_shape():
    assert len(CLASSIFIER_TABLE) == 25
    assert CLASSIFIER_TABLE[FALLBACK_INDEX].feature == "All Features Aggregated"
    assert [b.classifier for b in CLASSIFIER_TABLE].count("svm") == 22
    assert CLASSIFIER_TABLE[-1].classifier == "logreg"


def test_assemble_missing_block():
    with pytest.raises(MissingFeatureBlock):
        assemble({"a": [1.0]}, ("a", "b"))
    np.testing.assert_array_equal(assemble({"a": [1.0], "b": [2.0, 3.0]}, ("b", "a")), [2, 3, 1])


def test_ensemble_round_trip(tmp_path, rng):
    _, _, model = two_specialist_result()
    save_ensemble(model, tmp_path)
    loaded = load_ensemble(tmp_path)
    samples = [{"a": [float(a)], "b": [float(b)]} for a, b in rng.uniform(-1, 2, size=(1000, 2))]
    topics, sents = rng.integers(0, 38, size=1000), rng.integers(0, 30, size=1000)
    np.testing.assert_array_equal(
        ensemble_predict_many(loaded, samples, topics, sents,
                              predict_all(loaded.classifiers, loaded.bindings, samples)),
        ensemble_predict_many(model, samples, topics, sents))
    np.testing.assert_array_equal(loaded.topic_acc, model.topic_acc)
