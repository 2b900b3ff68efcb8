"""Prior-ratio features from precomputed object/place/expression/emotion detections."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

VOCAB_SIZES = {"objects": 80, "places": 365, "expressions": 8, "emotions": 26}
FAMILIES = tuple(VOCAB_SIZES)


@dataclass
class DetectionFile:
    objects: list[int] = field(default_factory=list)
    places: list[int] = field(default_factory=list)
    expressions: list[int] = field(default_factory=list)
    emotions: list[int] = field(default_factory=list)
    audio: list[float] = field(default_factory=list)
    climaxes: list[float] = field(default_factory=list)

    def __post_init__(self):
        for fam, size in VOCAB_SIZES.items():
            labels = getattr(self, fam)
            if any(not 0 <= int(k) < size for k in labels):
                raise ValueError(f"{fam} label outside vocabulary of size {size}")

    def counts(self) -> dict[str, np.ndarray]:
        return {
            fam: np.bincount(np.asarray(getattr(self, fam), dtype=np.int64), minlength=size)
            for fam, size in VOCAB_SIZES.items()
        }


@dataclass
class DetectionFeatureBlock:
    objects_ratio: np.ndarray
    places_ratio: np.ndarray
    expressions_ratio: np.ndarray
    emotions_ratio: np.ndarray
    audio_loudness: float
    climax_count: int


PriorTable = dict  # family -> probability vector


def load_detections(path: str | Path) -> DetectionFile:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return DetectionFile(
        **{fam: [int(k) for k in obj.get(fam, [])] for fam in FAMILIES},
        audio=[float(a) for a in obj.get("audio", [])],
        climaxes=[float(c) for c in obj.get("climaxes", [])],
    )


def priors_from_counts(count_tables: Iterable[Mapping[str, np.ndarray]]) -> PriorTable:
    totals = {fam: np.zeros(size, dtype=np.int64) for fam, size in VOCAB_SIZES.items()}
    for counts in count_tables:
        for fam in FAMILIES:
            totals[fam] += np.asarray(counts[fam], dtype=np.int64)
    priors = {}
    for fam, tot in totals.items():
        n = int(tot.sum())
        priors[fam] = tot / n if n else np.zeros(len(tot))
    return priors


def compute_priors(files: Sequence[DetectionFile]) -> PriorTable:
    """Corpus-wide label frequencies per detection family."""
    return priors_from_counts(f.counts() for f in files)


def ratio_from_counts(counts: np.ndarray, prior: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    out = np.zeros(len(prior))
    if total == 0:
        return out
    seen = prior > 0
    # (c / total) / prior with a single rounding in the division
    out[seen] = counts[seen] / (total * prior[seen])
    return out


def audio_loudness(audio: Sequence[float]) -> float:
    if len(audio) == 0:
        return 0.0
    return math.fsum(abs(a) for a in audio) / len(audio)


def ratio_features(det: DetectionFile, priors: PriorTable) -> DetectionFeatureBlock:
    counts = det.counts()
    ratios = {fam: ratio_from_counts(counts[fam], priors[fam]) for fam in FAMILIES}
    return DetectionFeatureBlock(
        objects_ratio=ratios["objects"],
        places_ratio=ratios["places"],
        expressions_ratio=ratios["expressions"],
        emotions_ratio=ratios["emotions"],
        audio_loudness=audio_loudness(det.audio),
        climax_count=len(det.climaxes),
    )
