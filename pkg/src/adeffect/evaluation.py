"""Classification tasks, metrics and the multi-seed train/route/evaluate experiment."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import detection_features as det
from .data_model import DataError, make_rng, split_dataset
from .ensemble import (
    FALLBACK_INDEX,
    CLASSIFIER_TABLE,
    EnsembleModel,
    FeatureBinding,
    count_bins,
    design_matrix,
    ensemble_predict_many,
    predict_all,
)
from .learners import LabeledSet, TrainedClassifier, train_logreg, train_svm, train_tree


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    label_map: Mapping[int, int | None]  # effectiveness -> class, None = dropped

    @property
    def n_classes(self) -> int:
        return len({c for c in self.label_map.values() if c is not None})

    @property
    def baseline(self) -> float:
        return 1.0 / self.n_classes

    def map(self, effectiveness: int) -> int | None:
        return self.label_map[effectiveness]


TASKS = {
    "binary": TaskSpec("binary", {1: 0, 2: 0, 3: None, 4: 1, 5: 1}),
    "four_way": TaskSpec("four_way", {1: 0, 2: 1, 3: None, 4: 2, 5: 3}),
    "five_way": TaskSpec("five_way", {1: 0, 2: 1, 3: 2, 4: 3, 5: 4}),
}
TASK_ALIASES = {"binary": "binary", "four": "four_way", "four_way": "four_way",
                "five": "five_way", "five_way": "five_way"}


def get_task(name: str) -> TaskSpec:
    try:
        return TASKS[TASK_ALIASES[name]]
    except KeyError:
        raise ValueError(f"unknown task {name!r}; choose from binary, four, five") from None


def accuracy(true: Sequence[int], predicted: Sequence[int]) -> float:
    true, predicted = np.asarray(true), np.asarray(predicted)
    if true.shape != predicted.shape:
        raise ValueError("true and predicted differ in length")
    if true.size == 0:
        raise ValueError("accuracy of an empty set is undefined")
    return float(np.count_nonzero(true == predicted)) / true.size


def confusion(true: Sequence[int], predicted: Sequence[int], n_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    true, predicted = np.asarray(true, dtype=np.int64), np.asarray(predicted, dtype=np.int64)
    if true.shape != predicted.shape:
        raise ValueError("true and predicted differ in length")
    for arr in (true, predicted):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"label outside 0..{n_classes - 1}")
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (true, predicted), 1)
    return m


@dataclass
class Sample:
    video_id: str
    effectiveness: int
    topic: int
    sentiment: int
    blocks: dict[str, np.ndarray]
    # raw detection label counts per family; ratio blocks are derived per split
    detection_counts: dict[str, np.ndarray] | None = None


@dataclass
class LearnerConfig:
    svm: dict = field(default_factory=lambda: {"lam": 1e-2, "epochs": 50, "batch_size": 16, "degree": 1})
    tree: dict = field(default_factory=lambda: {"min_split": 2, "max_depth": 8})
    logreg: dict = field(default_factory=lambda: {"lam": 1e-4, "epochs": 200, "step": 0.5})
    # per-classifier overrides keyed by classifier-table row index (as a string)
    overrides: dict = field(default_factory=dict)

    def params_for(self, index: int, kind: str) -> dict:
        base = dict(getattr(self, kind))
        base.update(self.overrides.get(str(index), {}))
        return base


def train_binding(binding: FeatureBinding, X: np.ndarray, y: np.ndarray, n_classes: int,
                  params: dict, seed: int) -> TrainedClassifier:
    data = LabeledSet(X, y, binding.feature, n_classes)
    if binding.classifier == "svm":
        return train_svm(data, seed=seed, **params)
    if binding.classifier == "tree":
        return train_tree(data, **params)
    if binding.classifier == "logreg":
        return train_logreg(data, seed=seed, **params)
    raise ValueError(f"unknown classifier kind {binding.classifier!r}")


def train_all(bindings, blocks, y, n_classes, learners: LearnerConfig, seed: int) -> list[TrainedClassifier]:
    return [
        train_binding(b, design_matrix(blocks, b.blocks), y, n_classes,
                      learners.params_for(i, b.classifier), seed * 1000 + i)
        for i, b in enumerate(bindings)
    ]


def resolve_blocks(samples: Sequence[Sample], priors: det.PriorTable | None) -> list[dict]:
    out = []
    for s in samples:
        blocks = dict(s.blocks)
        if s.detection_counts is not None and priors is not None:
            for fam in det.FAMILIES:
                blocks[fam] = det.ratio_from_counts(s.detection_counts[fam], priors[fam])
        out.append(blocks)
    return out


@dataclass
class SeedResult:
    seed: int
    classifier_accuracy: np.ndarray  # (K,)
    ensemble_accuracy: float
    confusion: np.ndarray
    model: EnsembleModel
    test_ids: list[str]
    test_predictions: np.ndarray


@dataclass
class ExperimentReport:
    task: TaskSpec
    bindings: list[FeatureBinding]
    seeds: list[int]
    results: list[SeedResult]

    @property
    def classifier_accuracy(self) -> np.ndarray:
        """(K, S) per-classifier, per-seed test accuracy."""
        return np.column_stack([r.classifier_accuracy for r in self.results])

    @property
    def classifier_mean(self) -> np.ndarray:
        return self.classifier_accuracy.mean(axis=1)

    @property
    def ensemble_accuracy(self) -> np.ndarray:
        return np.array([r.ensemble_accuracy for r in self.results])

    @property
    def ensemble_mean(self) -> float:
        return float(self.ensemble_accuracy.mean())

    @property
    def confusion(self) -> np.ndarray:
        return sum(r.confusion for r in self.results)


def _out_of_fold_counts(bindings, blocks, y, topics, sentiments, n_classes, learners, seed, folds=5):
    order = make_rng(seed + 7919).permutation(len(y))
    parts = np.array_split(order, folds)
    total = None
    for f, held in enumerate(parts):
        keep = np.setdiff1d(order, held)
        clfs = train_all(bindings, [blocks[i] for i in keep], y[keep], n_classes, learners, seed * 10 + f)
        preds = predict_all(clfs, bindings, [blocks[i] for i in held])
        c = count_bins(preds, y[held], topics[held], sentiments[held])
        total = c if total is None else total + c
    return total


def run_seed(samples: Sequence[Sample], task: TaskSpec, seed: int, learners: LearnerConfig | None = None,
             bindings: Sequence[FeatureBinding] = CLASSIFIER_TABLE, fraction: float = 0.8,
             priors_on_full_dataset: bool = False, out_of_fold_bins: bool = False,
             fallback_index: int = FALLBACK_INDEX) -> SeedResult:
    learners = learners or LearnerConfig()
    kept = [s for s in samples if task.map(s.effectiveness) is not None]
    labels = {s.video_id: task.map(s.effectiveness) for s in kept}
    split = split_dataset([s.video_id for s in kept], fraction, seed)
    by_id = {s.video_id: s for s in kept}
    train = [by_id[v] for v in split.train]
    test = [by_id[v] for v in split.test]

    priors = None
    if any(s.detection_counts is not None for s in kept):
        source = kept if priors_on_full_dataset else train
        priors = det.priors_from_counts(s.detection_counts for s in source if s.detection_counts is not None)
    train_blocks, test_blocks = resolve_blocks(train, priors), resolve_blocks(test, priors)

    y_train = np.array([labels[s.video_id] for s in train])
    y_test = np.array([labels[s.video_id] for s in test])
    t_train = np.array([s.topic for s in train])
    m_train = np.array([s.sentiment for s in train])
    C = task.n_classes

    classifiers = train_all(bindings, train_blocks, y_train, C, learners, seed)
    if out_of_fold_bins:
        counts = _out_of_fold_counts(bindings, train_blocks, y_train, t_train, m_train, C, learners, seed)
    else:
        counts = count_bins(predict_all(classifiers, bindings, train_blocks), y_train, t_train, m_train)
    model = EnsembleModel(list(classifiers), list(bindings), counts.topic_acc, counts.sent_acc,
                          fallback_index=min(fallback_index, len(bindings) - 1))

    test_preds = predict_all(classifiers, bindings, test_blocks)
    per_clf = np.array([accuracy(y_test, p) for p in test_preds])
    routed = ensemble_predict_many(model, test_blocks, [s.topic for s in test], [s.sentiment for s in test],
                                   all_predictions=test_preds)
    return SeedResult(
        seed=seed,
        classifier_accuracy=per_clf,
        ensemble_accuracy=accuracy(y_test, routed),
        confusion=confusion(y_test, routed, C),
        model=model,
        test_ids=[s.video_id for s in test],
        test_predictions=routed,
    )


def run_experiment(samples: Sequence[Sample], task: TaskSpec, seeds: Sequence[int],
                   learners: LearnerConfig | None = None, bindings: Sequence[FeatureBinding] = CLASSIFIER_TABLE,
                   workers: int = 1, **kwargs) -> ExperimentReport:
    """Split, train, route and score once per seed; results are kept in seed order."""
    kept = [s for s in samples if task.map(s.effectiveness) is not None]
    present = {task.map(s.effectiveness) for s in kept}
    missing = sorted(set(range(task.n_classes)) - present)
    if missing:
        raise DataError(f"{task.kind}: class(es) {missing} absent after label mapping")
    if not seeds:
        raise ValueError("need at least one seed")
    args = [(samples, task, s, learners, bindings) for s in seeds]
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            futures = [pool.submit(run_seed, *a, **kwargs) for a in args]
            results = [f.result() for f in futures]
    else:
        results = [run_seed(*a, **kwargs) for a in args]
    return ExperimentReport(task, list(bindings), list(seeds), results)


TABLE_COLUMNS = ("binary", "four_way", "five_way")


def write_table_csv(path: str | Path, reports: Mapping[str, ExperimentReport]) -> None:
    """Accuracy table CSV: one row per classifier, then ensemble and baseline rows."""
    any_report = next(iter(reports.values()))
    bindings = any_report.bindings
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["classifier", "feature", *TABLE_COLUMNS])
        names = {"svm": "SVM", "tree": "Decision Tree", "logreg": "Logistic Regression"}
        for i, b in enumerate(bindings):
            w.writerow([names[b.classifier], b.feature,
                        *[f"{reports[t].classifier_mean[i]:.4f}" if t in reports else "" for t in TABLE_COLUMNS]])
        w.writerow(["Combined Ensemble", "",
                    *[f"{reports[t].ensemble_mean:.4f}" if t in reports else "" for t in TABLE_COLUMNS]])
        w.writerow(["Baseline", "", *[f"{TASKS[t].baseline:.4f}" if t in reports else "" for t in TABLE_COLUMNS]])


def confusion_document(report: ExperimentReport) -> dict:
    classes = sorted({c for c in report.task.label_map.values() if c is not None})
    members = {c: sorted(e for e, m in report.task.label_map.items() if m == c) for c in classes}
    return {
        "task": report.task.kind,
        "classes": [{"index": c, "effectiveness": members[c]} for c in classes],
        "seeds": report.seeds,
        "matrix": report.confusion.tolist(),
        "per_seed": [r.confusion.tolist() for r in report.results],
        "ensemble_accuracy_per_seed": [round(float(a), 12) for a in report.ensemble_accuracy],
    }


def write_confusion_json(path: str | Path, report: ExperimentReport) -> None:
    Path(path).write_text(json.dumps(confusion_document(report), indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")


def format_report(report: ExperimentReport) -> str:
    lines = [f"task: {report.task.kind}  seeds: {report.seeds}"]
    for b, acc in zip(report.bindings, report.classifier_mean):
        lines.append(f"  {b.classifier:<7} {b.feature:<30} {acc:.4f}")
    lines.append(f"  {'ensemble':<38} {report.ensemble_mean:.4f}")
    lines.append(f"  {'baseline':<38} {report.task.baseline:.4f}")
    return "\n".join(lines)
