"""From-scratch multiclass learners: one-vs-rest linear SVM and logistic regression, Gini CART.

All tie-breaks resolve to the smallest index (class, feature, threshold) so
training and prediction are reproducible bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .data_model import make_rng

MODEL_FORMAT_VERSION = 1


class TrainingError(ValueError):
    pass


@dataclass
class LabeledSet:
    X: np.ndarray
    y: np.ndarray
    feature_name: str = ""
    n_classes: int | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise TrainingError(f"X rows ({self.X.shape[0]}) != labels ({self.y.shape[0]})")
        if not np.all(np.isfinite(self.X)):
            raise TrainingError(f"{self.feature_name or 'data'}: non-finite feature values")
        if self.y.size and self.y.min() < 0:
            raise TrainingError("labels must be non-negative")
        if self.n_classes is None:
            self.n_classes = int(self.y.max()) + 1 if self.y.size else 0
        elif self.y.size and self.y.max() >= self.n_classes:
            raise TrainingError("label outside 0..n_classes-1")


def poly2_expand(Z: np.ndarray) -> np.ndarray:
    """Explicit degree-2 polynomial map: [z, z_i * z_j for i <= j]."""
    Z = np.atleast_2d(Z)
    iu, ju = np.triu_indices(Z.shape[1])
    return np.hstack([Z, Z[:, iu] * Z[:, ju]])


@dataclass
class LinearModel:
    """One-vs-rest linear scorer over standardised (optionally degree-2) features."""

    kind: str  # "svm" | "logreg"
    weights: np.ndarray  # (C, d')
    bias: np.ndarray  # (C,)
    mean: np.ndarray
    scale: np.ndarray
    degree: int = 1
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    history: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.mean)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        Z = (np.atleast_2d(np.asarray(X, dtype=np.float64)) - self.mean) / self.scale
        return poly2_expand(Z) if self.degree == 2 else Z

    def scores(self, X: np.ndarray) -> np.ndarray:
        return self.transform(X) @ self.weights.T + self.bias

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        # argmax returns the first maximum: ties go to the smallest class
        return np.argmax(self.scores(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "degree": self.degree,
            "hyperparameters": self.hyperparameters,
            "seed": self.seed,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
        }


@dataclass
class TreeModel:
    """Binary tree as a flat node list; node 0 is the root.

    Internal nodes: {"feature", "threshold", "left", "right"}; leaves: {"label"}.
    A sample goes left when x[feature] <= threshold.
    """

    nodes: list[dict]
    n_features: int
    n_classes: int
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    kind: str = "tree"
    seed: int = 0

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.empty(X.shape[0], dtype=np.int64)
        for i, x in enumerate(X):
            node = self.nodes[0]
            while "label" not in node:
                node = self.nodes[node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]]
            out[i] = node["label"]
        return out

    def depth(self) -> int:
        def walk(i):
            n = self.nodes[i]
            return 0 if "label" in n else 1 + max(walk(n["left"]), walk(n["right"]))
        return walk(0)

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "hyperparameters": self.hyperparameters,
            "seed": self.seed,
            "nodes": self.nodes,
        }


TrainedClassifier = LinearModel | TreeModel


def predict(model: TrainedClassifier, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    return int(model.predict_many(x[None, :])[0])


def _standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def _sign_targets(y: np.ndarray, n_classes: int) -> np.ndarray:
    """(N, C) matrix of +1 for the row's class, -1 elsewhere."""
    Y = -np.ones((len(y), n_classes))
    Y[np.arange(len(y)), y] = 1.0
    return Y


def svm_objective(W: np.ndarray, Z1: np.ndarray, Y: np.ndarray, lam: float) -> float:
    """Sum over classes of the regularised mean hinge loss (bias column included in W)."""
    margins = Y * (Z1 @ W.T)
    hinge = np.maximum(0.0, 1.0 - margins).mean(axis=0)
    return float((0.5 * lam * (W * W).sum(axis=1) + hinge).sum())


def train_svm(
    data: LabeledSet,
    lam: float = 1e-2,
    epochs: int = 50,
    seed: int = 0,
    batch_size: int = 16,
    degree: int = 1,
) -> LinearModel:
    """One-vs-rest hinge-loss SVMs by mini-batch Pegasos (step 1/(lam t), ball projection).

    The bias rides along as a constant input feature. From the second half of
    the epochs on, iterates are also averaged. At every epoch end the current
    iterate and the running average are scored on the training objective and
    the best state seen so far is kept, so ``history`` never increases.
    """
    if lam <= 0:
        raise TrainingError("lam must be positive")
    C = data.n_classes
    if C < 2 or len(np.unique(data.y)) < 2:
        raise TrainingError(f"{data.feature_name or 'data'}: SVM needs at least two classes present")
    if degree not in (1, 2):
        raise TrainingError("degree must be 1 or 2")
    mean, scale = _standardization(data.X)
    Z = (data.X - mean) / scale
    if degree == 2:
        Z = poly2_expand(Z)
    N = Z.shape[0]
    Z1 = np.hstack([Z, np.ones((N, 1))])
    Y = _sign_targets(data.y, C)
    rng = make_rng(seed)
    W = np.zeros((C, Z1.shape[1]))
    avg = np.zeros_like(W)
    n_avg = 0
    best_W, best_obj = None, np.inf
    history = []
    radius = 1.0 / np.sqrt(lam)
    t = 0
    for epoch in range(epochs):
        order = rng.permutation(N)
        for start in range(0, N, batch_size):
            idx = order[start:start + batch_size]
            t += 1
            eta = 1.0 / (lam * t)
            Zb, Yb = Z1[idx], Y[idx]
            viol = (Yb * (Zb @ W.T)) < 1.0  # (b, C)
            W = (1.0 - eta * lam) * W + eta * (((viol * Yb).T @ Zb) / len(idx))
            norms = np.linalg.norm(W, axis=1)
            W = W * np.minimum(1.0, radius / np.maximum(norms, 1e-300))[:, None]
            if 2 * epoch >= epochs:
                avg += W
                n_avg += 1
        candidates = [W] if n_avg == 0 else [W, avg / n_avg]
        for cand in candidates:
            obj = svm_objective(cand, Z1, Y, lam)
            if obj < best_obj:
                best_W, best_obj = cand.copy(), obj
        history.append(best_obj)
    if best_W is None:
        best_W = W
    return LinearModel(
        kind="svm",
        weights=best_W[:, :-1].copy(),
        bias=best_W[:, -1].copy(),
        mean=mean,
        scale=scale,
        degree=degree,
        hyperparameters={"lam": lam, "epochs": epochs, "batch_size": batch_size, "degree": degree},
        seed=seed,
        history=history,
    )


def logistic_loss_and_grad(W, b, Z, Y01, lam):
    """Summed one-vs-rest L2-regularised mean logistic loss and its gradient.

    W: (C, d); b: (C,); Z: (N, d); Y01: (N, C) 0/1 targets. The bias is not
    regularised. Returns (loss, dW, db).
    """
    S = Z @ W.T + b
    # log(1 + exp(-s)) for y=1 and log(1 + exp(s)) for y=0, computed stably
    signed = np.where(Y01 > 0, -S, S)
    loss = np.logaddexp(0.0, signed).mean(axis=0).sum() + 0.5 * lam * float((W * W).sum())
    P = 0.5 * (1.0 + np.tanh(0.5 * S))
    R = (P - Y01) / Z.shape[0]
    dW = R.T @ Z + lam * W
    db = R.sum(axis=0)
    return float(loss), dW, db


def train_logreg(
    data: LabeledSet,
    lam: float = 1e-4,
    epochs: int = 200,
    step: float = 0.5,
    seed: int = 0,
    degree: int = 1,
) -> LinearModel:
    """One-vs-rest logistic regression by full-batch proximal gradient descent.

    The L2 term is applied as a proximal shrink, which stays stable for any
    lam; a non-finite loss (step too large) raises TrainingError.
    """
    C = data.n_classes
    if C < 2:
        raise TrainingError("logistic regression needs at least two classes")
    mean, scale = _standardization(data.X)
    Z = (data.X - mean) / scale
    if degree == 2:
        Z = poly2_expand(Z)
    Y01 = (_sign_targets(data.y, C) > 0).astype(np.float64)
    W = np.zeros((C, Z.shape[1]))
    b = np.zeros(C)
    history = []
    for _ in range(epochs):
        loss, dW, db = logistic_loss_and_grad(W, b, Z, Y01, 0.0)
        if not np.isfinite(loss):
            raise TrainingError("non-finite logistic loss; reduce the step size")
        W = (W - step * dW) / (1.0 + step * lam)
        b = b - step * db
        history.append(loss + 0.5 * lam * float((W * W).sum()))
    final, _, _ = logistic_loss_and_grad(W, b, Z, Y01, lam)
    if not (np.isfinite(final) and np.all(np.isfinite(W))):
        raise TrainingError("non-finite logistic loss; reduce the step size")
    return LinearModel(
        kind="logreg",
        weights=W,
        bias=b,
        mean=mean,
        scale=scale,
        degree=degree,
        hyperparameters={"lam": lam, "epochs": epochs, "step": step, "degree": degree},
        seed=seed,
        history=history,
    )


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p * p).sum())


def _best_split(X: np.ndarray, y: np.ndarray, n_classes: int):
    """Exhaustive (feature, midpoint) search minimising weighted child Gini.

    Minimising the weighted Gini is maximising sum_child sum_k n_ck^2 / n_child;
    that score is compared exactly (as a fraction) among float near-ties so the
    first optimum in (feature, threshold) order wins.
    """
    N = len(y)
    onehot = np.zeros((N, n_classes), dtype=np.int64)
    onehot[np.arange(N), y] = 1
    total = onehot.sum(axis=0)
    candidates = []  # (score_float, feature, threshold, left_counts, n_left)
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cum = np.cumsum(onehot[order], axis=0)
        cut = np.nonzero(xs[:-1] < xs[1:])[0]  # split after position i
        if cut.size == 0:
            continue
        left = cum[cut]
        n_left = cut + 1
        right = total - left
        n_right = N - n_left
        score = (left.astype(np.float64) ** 2).sum(axis=1) / n_left + \
                (right.astype(np.float64) ** 2).sum(axis=1) / n_right
        thresholds = (xs[cut] + xs[cut + 1]) / 2.0
        for j in range(len(cut)):
            candidates.append((score[j], f, thresholds[j], left[j], int(n_left[j])))
    if not candidates:
        return None
    top = max(c[0] for c in candidates)
    tol = 1e-9 * max(1.0, abs(top))
    best, best_exact = None, None
    for cand in candidates:  # already in (feature, threshold) order
        if cand[0] < top - tol:
            continue
        left, nl = cand[3], cand[4]
        right, nr = total - left, N - nl
        exact = Fraction(int((left * left).sum()), nl) + Fraction(int((right * right).sum()), nr)
        if best_exact is None or exact > best_exact:
            best, best_exact = cand, exact
    return best[1], float(best[2])


def train_tree(data: LabeledSet, min_split: int = 2, max_depth: int = 8) -> TreeModel:
    """CART classification tree on Gini impurity."""
    if data.X.shape[0] == 0:
        raise TrainingError("cannot train a tree on empty data")
    if min_split < 2:
        raise TrainingError("min_split must be >= 2")
    C = data.n_classes
    nodes: list[dict] = []

    def build(idx: np.ndarray, depth: int) -> int:
        y = data.y[idx]
        counts = np.bincount(y, minlength=C)
        node_id = len(nodes)
        nodes.append({})
        pure = np.count_nonzero(counts) <= 1
        split = None
        if not pure and len(idx) >= min_split and depth < max_depth:
            split = _best_split(data.X[idx], y, C)
        if split is None:
            nodes[node_id] = {"label": int(np.argmax(counts))}
            return node_id
        f, thr = split
        go_left = data.X[idx, f] <= thr
        left = build(idx[go_left], depth + 1)
        right = build(idx[~go_left], depth + 1)
        nodes[node_id] = {"feature": int(f), "threshold": thr, "left": left, "right": right}
        return node_id

    build(np.arange(data.X.shape[0]), 0)
    return TreeModel(
        nodes=nodes,
        n_features=data.X.shape[1],
        n_classes=C,
        hyperparameters={"min_split": min_split, "max_depth": max_depth},
    )


def model_from_dict(obj: dict) -> TrainedClassifier:
    version = obj.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    if obj["kind"] == "tree":
        return TreeModel(
            nodes=[dict(n) for n in obj["nodes"]],
            n_features=int(obj["n_features"]),
            n_classes=int(obj["n_classes"]),
            hyperparameters=dict(obj.get("hyperparameters", {})),
            seed=int(obj.get("seed", 0)),
        )
    if obj["kind"] in ("svm", "logreg"):
        return LinearModel(
            kind=obj["kind"],
            weights=np.asarray(obj["weights"], dtype=np.float64).reshape(len(obj["bias"]), -1),
            bias=np.asarray(obj["bias"], dtype=np.float64),
            mean=np.asarray(obj["mean"], dtype=np.float64),
            scale=np.asarray(obj["scale"], dtype=np.float64),
            degree=int(obj.get("degree", 1)),
            hyperparameters=dict(obj.get("hyperparameters", {})),
            seed=int(obj.get("seed", 0)),
        )
    raise ValueError(f"unknown model kind {obj['kind']!r}")


def save_model(model: TrainedClassifier, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedClassifier:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
