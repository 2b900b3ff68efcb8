"""Hybrid per-topic / per-sentiment classifier routing.

Each base classifier gets an accuracy per topic and per sentiment on the
training set. A test video is handed to the classifier with the best
accuracy on its topic or its sentiment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data_model import N_SENTIMENTS, N_TOPICS
from .learners import TrainedClassifier, load_model, save_model

UNSEEN = -1.0
ENSEMBLE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeatureBinding:
    classifier: str  # "svm" | "tree" | "logreg"
    feature: str  # row label
    blocks: tuple[str, ...]


_TEXT_BLOCKS = ("text_length", "word_count", "meaningful_words", "avg_word_length",
                "avg_sentence_length", "sentiment_polarity", "common_word")
ALL_FEATURE_BLOCKS = (
    "topic", "sentiment", "exciting", "funny", "language", "memorability", "duration",
    "avg_hue", "median_hue", "avg_intensity", "intensity_mid30", "intensity_mid60",
    "shot_boundaries", "flow_hist", *_TEXT_BLOCKS,
    "audio", "objects", "places", "expressions", "emotions", "climax",
)

CLASSIFIER_TABLE = (
    FeatureBinding("svm", "Topics", ("topic",)),
    FeatureBinding("svm", "Sentiments", ("sentiment",)),
    FeatureBinding("svm", "Memorability", ("memorability",)),
    FeatureBinding("svm", "Optical Flow", ("flow_hist",)),
    FeatureBinding("svm", "Cropped 30%", ("intensity_mid30",)),
    FeatureBinding("svm", "Cropped 60%", ("intensity_mid60",)),
    FeatureBinding("svm", "Average Hue", ("avg_hue",)),
    FeatureBinding("svm", "Median Hue", ("median_hue",)),
    FeatureBinding("svm", "Duration", ("duration",)),
    FeatureBinding("svm", "Text Length", ("text_length",)),
    FeatureBinding("svm", "Meaningful Words", ("meaningful_words",)),
    FeatureBinding("svm", "Average Word Length", ("avg_word_length",)),
    FeatureBinding("svm", "Word Count", ("word_count",)),
    FeatureBinding("svm", "Sentiment Analysis", ("sentiment_polarity",)),
    FeatureBinding("svm", "Audio", ("audio",)),
    FeatureBinding("svm", "Objects", ("objects",)),
    FeatureBinding("svm", "Places", ("places",)),
    FeatureBinding("svm", "Expressions", ("expressions",)),
    FeatureBinding("svm", "Emotions", ("emotions",)),
    FeatureBinding("svm", "Climax", ("climax",)),
    FeatureBinding("svm", "All Features Aggregated", ALL_FEATURE_BLOCKS),
    FeatureBinding("svm", "All Text Features Aggregated", _TEXT_BLOCKS),
    FeatureBinding("tree", "Topics", ("topic_index",)),
    FeatureBinding("tree", "Sentiments", ("sentiment_index",)),
    FeatureBinding("logreg", "Exciting", ("exciting",)),
)
FALLBACK_INDEX = 20  # the all-features SVM


class MissingFeatureBlock(KeyError):
    pass


def assemble(features: Mapping[str, Sequence[float]], blocks: Sequence[str]) -> np.ndarray:
    missing = [b for b in blocks if b not in features]
    if missing:
        raise MissingFeatureBlock(f"missing feature block(s): {', '.join(missing)}")
    return np.concatenate([np.asarray(features[b], dtype=np.float64).ravel() for b in blocks])


def design_matrix(samples: Sequence[Mapping[str, Sequence[float]]], blocks: Sequence[str]) -> np.ndarray:
    return np.vstack([assemble(s, blocks) for s in samples])


@dataclass
class BinCounts:
    topic_correct: np.ndarray  # (K, n_topics)
    topic_total: np.ndarray
    sent_correct: np.ndarray  # (K, n_sentiments)
    sent_total: np.ndarray

    @staticmethod
    def _rate(correct, total):
        acc = np.full(correct.shape, UNSEEN)
        seen = total > 0
        acc[seen] = correct[seen] / total[seen]
        return acc

    @property
    def topic_acc(self) -> np.ndarray:
        return self._rate(self.topic_correct, self.topic_total)

    @property
    def sent_acc(self) -> np.ndarray:
        return self._rate(self.sent_correct, self.sent_total)

    def __add__(self, other: "BinCounts") -> "BinCounts":
        return BinCounts(self.topic_correct + other.topic_correct, self.topic_total + other.topic_total,
                         self.sent_correct + other.sent_correct, self.sent_total + other.sent_total)


def count_bins(predictions: np.ndarray, y, topics, sentiments,
               n_topics: int = N_TOPICS, n_sentiments: int = N_SENTIMENTS) -> BinCounts:
    """Correct/total counters per (classifier, topic) and (classifier, sentiment).

    predictions: (K, N) predicted classes of K classifiers on N samples.
    """
    predictions = np.atleast_2d(predictions)
    y = np.asarray(y)
    topics = np.asarray(topics)
    sentiments = np.asarray(sentiments)
    K, N = predictions.shape
    if N == 0:
        raise ValueError("cannot fit bins on an empty training set")
    correct = (predictions == y[None, :]).astype(np.int64)
    tc = np.zeros((K, n_topics), dtype=np.int64)
    sc = np.zeros((K, n_sentiments), dtype=np.int64)
    for k in range(K):
        tc[k] = np.bincount(topics, weights=correct[k], minlength=n_topics).astype(np.int64)
        sc[k] = np.bincount(sentiments, weights=correct[k], minlength=n_sentiments).astype(np.int64)
    tt = np.tile(np.bincount(topics, minlength=n_topics), (K, 1))
    st = np.tile(np.bincount(sentiments, minlength=n_sentiments), (K, 1))
    return BinCounts(tc, tt, sc, st)


def predict_all(classifiers: Sequence[TrainedClassifier], bindings: Sequence[FeatureBinding],
                samples: Sequence[Mapping[str, Sequence[float]]]) -> np.ndarray:
    """(K, N) matrix of every classifier's prediction on every sample."""
    return np.vstack([
        clf.predict_many(design_matrix(samples, b.blocks)) for clf, b in zip(classifiers, bindings)
    ])


def fit_bins(classifiers, bindings, samples, y, topics, sentiments,
             n_topics: int = N_TOPICS, n_sentiments: int = N_SENTIMENTS):
    """Resubstitution accuracies per topic and per sentiment: (topic_acc, sent_acc).

    Bins with no training samples hold UNSEEN (-1).
    """
    if len(samples) == 0:
        raise ValueError("cannot fit bins on an empty training set")
    counts = count_bins(predict_all(classifiers, bindings, samples), y, topics, sentiments,
                        n_topics, n_sentiments)
    return counts.topic_acc, counts.sent_acc


@dataclass
class EnsembleModel:
    classifiers: list[TrainedClassifier]
    bindings: list[FeatureBinding]
    topic_acc: np.ndarray
    sent_acc: np.ndarray
    fallback_index: int = FALLBACK_INDEX

    def __post_init__(self):
        K = len(self.classifiers)
        if len(self.bindings) != K:
            raise ValueError("every classifier needs exactly one feature binding")
        if self.topic_acc.shape[0] != K or self.sent_acc.shape[0] != K:
            raise ValueError("accuracy tables must have one row per classifier")
        if not 0 <= self.fallback_index < K:
            raise ValueError("fallback_index out of range")


def select_classifier(model: EnsembleModel, topic: int, sentiment: int) -> int:
    """Smallest index maximising max(topic accuracy, sentiment accuracy); UNSEEN counts as -1."""
    scores = np.maximum(model.topic_acc[:, topic], model.sent_acc[:, sentiment])
    best = scores.max()
    if best == UNSEEN:
        return model.fallback_index
    return int(np.argmax(scores))


def ensemble_predict(model: EnsembleModel, features: Mapping[str, Sequence[float]],
                     topic: int, sentiment: int) -> int:
    i = select_classifier(model, topic, sentiment)
    x = assemble(features, model.bindings[i].blocks)
    return int(model.classifiers[i].predict_many(x[None, :])[0])


def ensemble_predict_many(model: EnsembleModel, samples, topics, sentiments,
                          all_predictions: np.ndarray | None = None) -> np.ndarray:
    """Vectorised routing; reuses a precomputed (K, N) prediction matrix when given."""
    if all_predictions is None:
        return np.array([ensemble_predict(model, s, t, m) for s, t, m in zip(samples, topics, sentiments)],
                        dtype=np.int64)
    chosen = [select_classifier(model, t, m) for t, m in zip(topics, sentiments)]
    return all_predictions[chosen, np.arange(len(chosen))]


def _table_to_json(acc: np.ndarray) -> list[list[float | None]]:
    return [[None if v == UNSEEN else float(v) for v in row] for row in acc]


def _table_from_json(rows) -> np.ndarray:
    return np.array([[UNSEEN if v is None else float(v) for v in row] for row in rows], dtype=np.float64)


def save_ensemble(model: EnsembleModel, directory: str | Path) -> Path:
    """Write ensemble.json plus one JSON file per classifier."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (clf, b) in enumerate(zip(model.classifiers, model.bindings)):
        name = f"classifier_{i:02d}.json"
        save_model(clf, directory / name)
        entries.append({"file": name, "classifier": b.classifier, "feature": b.feature, "blocks": list(b.blocks)})
    doc = {
        "format_version": ENSEMBLE_FORMAT_VERSION,
        "fallback_index": model.fallback_index,
        "classifiers": entries,
        "topic_acc": _table_to_json(model.topic_acc),
        "sentiment_acc": _table_to_json(model.sent_acc),
    }
    path = directory / "ensemble.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def load_ensemble(directory: str | Path) -> EnsembleModel:
    directory = Path(directory)
    doc = json.loads((directory / "ensemble.json").read_text(encoding="utf-8"))
    if doc.get("format_version") != ENSEMBLE_FORMAT_VERSION:
        raise ValueError(f"unsupported ensemble format {doc.get('format_version')!r}")
    return EnsembleModel(
        classifiers=[load_model(directory / e["file"]) for e in doc["classifiers"]],
        bindings=[FeatureBinding(e["classifier"], e["feature"], tuple(e["blocks"])) for e in doc["classifiers"]],
        topic_acc=_table_from_json(doc["topic_acc"]),
        sent_acc=_table_from_json(doc["sentiment_acc"]),
        fallback_index=int(doc["fallback_index"]),
    )
