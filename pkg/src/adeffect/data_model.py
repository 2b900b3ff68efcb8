"""Dataset records, label aggregation, class balancing and train/test splitting."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

N_ANNOTATORS = 5
N_TOPICS = 38
N_SENTIMENTS = 30
EFFECTIVENESS_CLASSES = (1, 2, 3, 4, 5)

# inclusive legal ranges of every annotated field
FIELD_RANGES = {
    "effectiveness": (1, 5),
    "topic": (0, N_TOPICS - 1),
    "sentiment": (0, N_SENTIMENTS - 1),
    "exciting": (0, 1),
    "funny": (0, 1),
    "language": (-1, 1),
}
LABEL_FIELDS = tuple(FIELD_RANGES)
ASSET_KINDS = ("frames", "transcript", "detections", "memorability", "audio")


class DataError(ValueError):
    """Malformed or out-of-contract dataset input."""


def make_rng(seed: int) -> np.random.Generator:
    """The single PRNG used everywhere: PCG64 with a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class AnnotationSet:
    effectiveness: int
    topic: int
    sentiment: int
    exciting: int
    funny: int
    language: int

    def __post_init__(self):
        for name, (lo, hi) in FIELD_RANGES.items():
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise DataError(f"{name} must be an integer, got {value!r}")
            if not lo <= value <= hi:
                raise DataError(f"{name}={value} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class RawVideoRecord:
    video_id: str
    ratings: tuple[AnnotationSet, ...]
    duration_seconds: float
    assets: dict[str, str] = field(default_factory=dict)
    # free-text action/reason statements ("I should ... because ..."), optional
    statements: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.ratings) != N_ANNOTATORS:
            raise DataError(
                f"video {self.video_id}: expected {N_ANNOTATORS} annotation sets, got {len(self.ratings)}"
            )
        if not (self.duration_seconds > 0 and math.isfinite(self.duration_seconds)):
            raise DataError(f"video {self.video_id}: duration_seconds must be > 0")
        unknown = set(self.assets) - set(ASSET_KINDS)
        if unknown:
            raise DataError(f"video {self.video_id}: unknown asset kinds {sorted(unknown)}")

    def values(self, name: str) -> list[int]:
        return [getattr(r, name) for r in self.ratings]

    @property
    def mean_effectiveness(self) -> float:
        return sum(self.values("effectiveness")) / N_ANNOTATORS

    @classmethod
    def from_dict(cls, obj: dict) -> "RawVideoRecord":
        try:
            ratings = tuple(AnnotationSet(**{k: r[k] for k in LABEL_FIELDS}) for r in obj["ratings"])
            return cls(
                video_id=str(obj["video_id"]),
                ratings=ratings,
                duration_seconds=float(obj["duration_seconds"]),
                assets={k: str(v) for k, v in (obj.get("assets") or {}).items() if v is not None},
                statements=tuple(obj.get("statements") or ()),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed record: {exc!r}") from exc

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "ratings": [asdict(r) for r in self.ratings],
            "duration_seconds": self.duration_seconds,
            "assets": dict(sorted(self.assets.items())),
            "statements": list(self.statements),
        }


@dataclass(frozen=True)
class CleanVideoRecord:
    video_id: str
    effectiveness: int
    topic: int
    sentiment: int
    exciting: int
    funny: int
    language: int
    duration_seconds: float
    # mean of the raw effectiveness ratings; used only for ranking in the analysis
    mean_effectiveness: float
    assets: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, obj: dict) -> "CleanVideoRecord":
        return cls(
            video_id=str(obj["video_id"]),
            effectiveness=int(obj["effectiveness"]),
            topic=int(obj["topic"]),
            sentiment=int(obj["sentiment"]),
            exciting=int(obj["exciting"]),
            funny=int(obj["funny"]),
            language=int(obj["language"]),
            duration_seconds=float(obj["duration_seconds"]),
            mean_effectiveness=float(obj["mean_effectiveness"]),
            assets=dict(obj.get("assets") or {}),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["assets"] = dict(sorted(self.assets.items()))
        return d


@dataclass(frozen=True)
class DatasetSplit:
    train: list[str]
    test: list[str]
    seed: int


def aggregate_mode(values: Sequence[int]) -> int:
    """Most frequent of the five annotator values; ties go to the smallest value."""
    if len(values) != N_ANNOTATORS:
        raise DataError(f"expected {N_ANNOTATORS} values, got {len(values)}")
    counts = Counter(int(v) for v in values)
    best = max(counts.values())
    return min(v for v, c in counts.items() if c == best)


def clean_record(raw: RawVideoRecord) -> CleanVideoRecord:
    labels = {name: aggregate_mode(raw.values(name)) for name in LABEL_FIELDS}
    return CleanVideoRecord(
        video_id=raw.video_id,
        duration_seconds=raw.duration_seconds,
        mean_effectiveness=raw.mean_effectiveness,
        assets=dict(raw.assets),
        **labels,
    )


def class_counts(records: Iterable[CleanVideoRecord]) -> dict[int, int]:
    counts = {c: 0 for c in EFFECTIVENESS_CLASSES}
    for r in records:
        counts[r.effectiveness] += 1
    return counts


def balance_classes(records: Sequence[CleanVideoRecord], seed: int) -> list[CleanVideoRecord]:
    """Undersample every effectiveness class to the size of the rarest one.

    Sampling is without replacement from each class's records sorted by
    video_id, so the result depends only on the record set and the seed.
    """
    by_class: dict[int, list[CleanVideoRecord]] = {c: [] for c in EFFECTIVENESS_CLASSES}
    for r in records:
        by_class[r.effectiveness].append(r)
    empty = [c for c, rs in by_class.items() if not rs]
    if empty:
        raise DataError(f"effectiveness class(es) {empty} have no records")
    m = min(len(rs) for rs in by_class.values())
    rng = make_rng(seed)
    out = []
    for c in EFFECTIVENESS_CLASSES:
        pool = sorted(by_class[c], key=lambda r: r.video_id)
        picked = rng.choice(len(pool), size=m, replace=False)
        out.extend(sorted((pool[i] for i in picked), key=lambda r: r.video_id))
    return out


def split_dataset(records: Sequence, fraction: float = 0.8, seed: int = 0) -> DatasetSplit:
    """Shuffle video ids (canonically sorted first) and cut at round(fraction * N)."""
    if not 0 < fraction < 1:
        raise DataError(f"fraction must be in (0, 1), got {fraction}")
    ids = sorted(r if isinstance(r, str) else r.video_id for r in records)
    if len(ids) < 2:
        raise DataError("need at least 2 records to split")
    if len(set(ids)) != len(ids):
        raise DataError("duplicate video ids")
    perm = make_rng(seed).permutation(len(ids))
    cut = round_half_up(fraction * len(ids))
    shuffled = [ids[i] for i in perm]
    return DatasetSplit(train=shuffled[:cut], test=shuffled[cut:], seed=seed)


def read_raw_jsonl(path: str | Path) -> list[RawVideoRecord]:
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = RawVideoRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, DataError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if rec.video_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate video_id {rec.video_id}")
            seen.add(rec.video_id)
            records.append(rec)
    return records


def read_clean_jsonl(path: str | Path) -> list[CleanVideoRecord]:
    with open(path, encoding="utf-8") as fh:
        return [CleanVideoRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def write_jsonl(path: str | Path, records: Iterable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
