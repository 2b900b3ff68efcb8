import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adeffect.learners import (
    LabeledSet,
    TrainingError,
    gini,
    load_model,
    logistic_loss_and_grad,
    poly2_expand,
    predict,
    save_model,
    train_logreg,
    train_svm,
    train_tree,
)


def numeric_grad(f, theta, h=1e-6):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e.flat[i] = h
        g.flat[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def random_logistic_instance(r):
    n, d, c = int(r.integers(5, 30)), int(r.integers(1, 6)), int(r.integers(2, 5))
    Z = r.standard_normal((n, d))
    y = r.integers(0, c, size=n)
    Y = np.eye(c)[y]
    return r.standard_normal((c, d)), r.standard_normal(c), Z, Y, float(r.uniform(0, 0.5))


def logistic_gradient_errors(n_instances=20, seed=7):
    r = np.random.default_rng(seed)
    errors = []
    for _ in range(n_instances):
        W, b, Z, Y, lam = random_logistic_instance(r)
        _, dW, db = logistic_loss_and_grad(W, b, Z, Y, lam)
        c, d = W.shape

        def f(theta):
            return logistic_loss_and_grad(theta[:c * d].reshape(c, d), theta[c * d:], Z, Y, lam)[0]

        analytic = np.concatenate([dW.ravel(), db])
        numeric = numeric_grad(f, np.concatenate([W.ravel(), b]))
        errors.append(np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12))
    return errors


def blobs(n_per=20, classes=2, seed=0, spread=0.3):
    r = np.random.default_rng(seed)
    centres = np.array([[0, 0], [4, 4], [0, 5], [5, 0]])[:classes]
    X = np.vstack([c + spread * r.standard_normal((n_per, 2)) for c in centres])
    y = np.repeat(np.arange(classes), n_per)
    return LabeledSet(X, y)


def brute_force_split(x, y, n_classes):
    """Smallest midpoint threshold minimising the weighted child Gini."""
    xs = np.unique(x)
    best, best_thr = np.inf, None
    for lo, hi in zip(xs[:-1], xs[1:]):
        thr = (lo + hi) / 2
        left, right = y[x <= thr], y[x > thr]
        imp = (len(left) * gini(np.bincount(left, minlength=n_classes))
               + len(right) * gini(np.bincount(right, minlength=n_classes))) / len(y)
        if imp < best - 1e-12:
            best, best_thr = imp, thr
    return best_thr


def brute_force_split_mismatches(n_instances=50, seed=3):
    r = np.random.default_rng(seed)
    bad = []
    for i in range(n_instances):
        n = int(r.integers(4, 40))
        x = r.integers(0, 15, size=n).astype(float)
        y = r.integers(0, 3, size=n)
        if len(np.unique(x)) < 2 or len(np.unique(y)) < 2:
            x[0], x[1], y[0], y[1] = 0.0, 20.0, 0, 1
        tree = train_tree(LabeledSet(x[:, None], y, n_classes=3), max_depth=1)
        expected = brute_force_split(x, y, 3)
        if tree.nodes[0].get("threshold") != expected:
            bad.append(i)
    return bad


def test_logistic_gradient_matches_finite_differences():
    assert max(logistic_gradient_errors()) < 1e-5


def test_svm_separable_blobs():
    for classes in (2, 3, 4):
        data = blobs(classes=classes, seed=classes)
        model = train_svm(data, seed=1)
        assert np.all(model.predict_many(data.X) == data.y)


def test_logreg_separable_blobs():
    for classes in (2, 3):
        data = blobs(classes=classes, seed=classes)
        model = train_logreg(data)
        assert np.all(model.predict_many(data.X) == data.y)


def test_svm_history_non_increasing():
    r = np.random.default_rng(2)
    data = LabeledSet(r.standard_normal((60, 3)), r.integers(0, 3, size=60))
    hist = train_svm(data, epochs=20, seed=4).history
    assert len(hist) == 20
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_svm_deterministic_per_seed():
    data = blobs(classes=3, seed=9, spread=2.0)
    a, b = train_svm(data, seed=5), train_svm(data, seed=5)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_svm_needs_two_classes():
    with pytest.raises(TrainingError):
        train_svm(LabeledSet(np.ones((4, 2)), np.zeros(4, dtype=int), n_classes=2))


def test_degree_two_svm_learns_xor_like_rings():
    r = np.random.default_rng(0)
    X = r.uniform(-1, 1, size=(200, 2))
    y = (np.hypot(X[:, 0], X[:, 1]) > 0.6).astype(int)
    model = train_svm(LabeledSet(X, y), degree=2, seed=0)
    assert np.mean(model.predict_many(X) == y) > 0.9


def test_poly2_expand():
    np.testing.assert_allclose(poly2_expand(np.array([[2.0, 3.0]])), [[2, 3, 4, 6, 9]])


def test_tree_simple_split():
    tree = train_tree(LabeledSet([[1.0], [2.0], [3.0], [4.0]], [0, 0, 1, 1]), min_split=2)
    assert tree.nodes[0]["threshold"] == 2.5
    assert tree.depth() == 1
    assert list(tree.predict_many([[1.0], [2.0], [3.0], [4.0]])) == [0, 0, 1, 1]


def test_tree_matches_brute_force_split():
    assert brute_force_split_mismatches() == []


def test_tree_pure_leaf_and_min_split():
    tree = train_tree(LabeledSet([[1.0], [2.0], [3.0]], [1, 1, 1], n_classes=2))
    assert tree.nodes == [{"label": 1}]
    tree = train_tree(LabeledSet([[1.0], [2.0], [3.0]], [0, 1, 0]), min_split=4)
    assert tree.nodes == [{"label": 0}]


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(0, 2)), min_size=2, max_size=40))
@settings(max_examples=40, deadline=None)
def test_tree_is_valid_binary_tree(rows):
    X = np.array([[a, b] for a, b, _ in rows], dtype=float)
    y = np.array([c for _, _, c in rows])
    tree = train_tree(LabeledSet(X, y, n_classes=3), max_depth=4)
    reached = set()

    def walk(i):
        reached.add(i)
        node = tree.nodes[i]
        if "label" in node:
            assert 0 <= node["label"] < 3
            return
        walk(node["left"])
        walk(node["right"])

    walk(0)
    assert reached == set(range(len(tree.nodes)))
    assert tree.depth() <= 4


def test_linear_models_invariant_to_feature_scaling():
    data = blobs(classes=3, seed=1, spread=1.5)
    scaled = LabeledSet(data.X * np.array([1000.0, 0.001]) + 7.0, data.y)
    a = train_logreg(data).predict_many(data.X)
    b = train_logreg(scaled).predict_many(scaled.X)
    np.testing.assert_array_equal(a, b)


def test_predict_single_point_on_training_fixture():
    data = blobs(classes=2, seed=2)
    model = train_svm(data, seed=0)
    assert predict(model, data.X[0]) == data.y[0]
    assert predict(model, data.X[-1]) == data.y[-1]


def test_models_round_trip(tmp_path):
    r = np.random.default_rng(11)
    data = LabeledSet(r.standard_normal((80, 4)), r.integers(0, 3, size=80))
    probe = r.standard_normal((1000, 4)) * 3
    for i, model in enumerate([train_svm(data), train_svm(data, degree=2), train_logreg(data),
                               train_tree(data)]):
        path = tmp_path / f"m{i}.json"
        save_model(model, path)
        np.testing.assert_array_equal(load_model(path).predict_many(probe), model.predict_many(probe))


def test_labeled_set_rejects_nonfinite():
    with pytest.raises(TrainingError):
        LabeledSet([[np.nan]], [0])
