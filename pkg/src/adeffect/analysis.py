"""Exploratory statistics: correlations, rating reliability, flow entropy, extreme-ad lifts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data_model import N_SENTIMENTS, N_TOPICS, CleanVideoRecord, RawVideoRecord
from .text_features import split_statement

CV_THRESHOLDS = (30.0, 40.0, 50.0)

# Correlation rows, in report order
CORRELATION_FEATURES = (
    "duration",
    "exciting",
    "language",
    "funny",
    "climax_count",
    "unique_sentiments",
    "shot_boundaries",
    "flow_entropy",
    "action_length",
    "audio",
    "reason_length",
)


class UndefinedCorrelation(ValueError):
    pass


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two equal-length vectors of length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelation("zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def coefficient_of_variation(ratings: Sequence[float]) -> float:
    """Population std over mean, in percent."""
    r = np.asarray(ratings, dtype=np.float64)
    mu = r.mean()
    if mu <= 0:
        raise ValueError("coefficient of variation needs a positive mean")
    return float(r.std() / mu * 100.0)


@dataclass
class ReliabilityReport:
    per_video: dict[str, float]
    thresholds: tuple[float, ...]
    counts: dict[float, int] = field(default_factory=dict)
    fractions: dict[float, float] = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [
            {"threshold_percent": t, "count": self.counts[t], "fraction": self.fractions[t],
             "n_videos": len(self.per_video)}
            for t in self.thresholds
        ]


def reliability_report(records: Sequence[RawVideoRecord], thresholds=CV_THRESHOLDS) -> ReliabilityReport:
    cv = {r.video_id: coefficient_of_variation(r.values("effectiveness")) for r in records}
    n = len(cv)
    rep = ReliabilityReport(per_video=cv, thresholds=tuple(sorted(thresholds)))
    for t in rep.thresholds:
        rep.counts[t] = sum(v <= t for v in cv.values())
        rep.fractions[t] = rep.counts[t] / n if n else 0.0
    return rep


def flow_entropy(flow_hist: Sequence[float], atol: float = 1e-9) -> float:
    """Shannon entropy in nats of a probability vector (0 ln 0 = 0)."""
    p = np.asarray(flow_hist, dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > atol:
        raise ValueError("flow histogram is not a probability distribution")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


@dataclass
class GroupShare:
    group: int
    extreme_count: int
    extreme_share: float
    dataset_share: float
    lift: float


@dataclass
class ExtremesReport:
    group_by: str
    k: int
    top: list[GroupShare]
    bottom: list[GroupShare]


def _shares(records, key, n_groups, full_share) -> list[GroupShare]:
    counts = np.bincount([getattr(r, key) for r in records], minlength=n_groups)
    out = []
    for g in range(n_groups):
        share = counts[g] / len(records)
        lift = share / full_share[g] if full_share[g] > 0 else 0.0
        out.append(GroupShare(g, int(counts[g]), float(share), float(full_share[g]), float(lift)))
    return out


def extremes_distribution(records: Sequence[CleanVideoRecord], k: int, group_by: str) -> ExtremesReport:
    """Group shares of the k most and k least effective videos relative to the whole set."""
    if group_by not in ("topic", "sentiment"):
        raise ValueError("group_by must be 'topic' or 'sentiment'")
    if k < 1 or 2 * k > len(records):
        raise ValueError(f"k={k} needs at least {2 * k} records, have {len(records)}")
    n_groups = N_TOPICS if group_by == "topic" else N_SENTIMENTS
    ranked = sorted(records, key=lambda r: (-r.mean_effectiveness, r.video_id))
    bottom = sorted(records, key=lambda r: (r.mean_effectiveness, r.video_id))[:k]
    full = np.bincount([getattr(r, group_by) for r in records], minlength=n_groups) / len(records)
    return ExtremesReport(
        group_by=group_by,
        k=k,
        top=_shares(ranked[:k], group_by, n_groups, full),
        bottom=_shares(bottom, group_by, n_groups, full),
    )


def statement_lengths(raw: RawVideoRecord) -> tuple[float, float] | None:
    """Mean action and reason token counts over a video's statements."""
    if not raw.statements:
        return None
    halves = [split_statement(s) for s in raw.statements]
    return (
        sum(len(a) for a, _ in halves) / len(halves),
        sum(len(b) for _, b in halves) / len(halves),
    )


def correlation_columns(
    raw: Sequence[RawVideoRecord],
    clean: Sequence[CleanVideoRecord],
    features: Mapping[str, Mapping] | None = None,
) -> tuple[dict[str, dict[str, float]], dict[str, float]]:
    """Per-feature {video_id: value} columns plus the effectiveness target."""
    features = features or {}
    raw_by_id = {r.video_id: r for r in raw}
    cols: dict[str, dict[str, float]] = {name: {} for name in CORRELATION_FEATURES}
    target = {}
    for rec in clean:
        vid = rec.video_id
        target[vid] = float(rec.effectiveness)
        cols["duration"][vid] = rec.duration_seconds
        cols["exciting"][vid] = rec.exciting
        cols["language"][vid] = rec.language
        cols["funny"][vid] = rec.funny
        r = raw_by_id.get(vid)
        if r is not None:
            cols["unique_sentiments"][vid] = len(set(r.values("sentiment")))
            lengths = statement_lengths(r)
            if lengths is not None:
                cols["action_length"][vid], cols["reason_length"][vid] = lengths
        f = features.get(vid)
        if f is not None:
            blocks = f["blocks"]
            present = set(f.get("present", blocks))
            if "frames" in present:
                cols["shot_boundaries"][vid] = blocks["shot_boundaries"][0]
                cols["flow_entropy"][vid] = flow_entropy(blocks["flow_hist"])
            if "detections" in present:
                cols["climax_count"][vid] = blocks["climax"][0]
                cols["audio"][vid] = blocks["audio"][0]
    return cols, target


@dataclass
class CorrelationRow:
    feature: str
    r: float
    n: int


def correlation_report(columns: Mapping[str, Mapping[str, float]], target: Mapping[str, float]) -> list[CorrelationRow]:
    rows = []
    for name in columns:
        ids = sorted(set(columns[name]) & set(target))
        x = [columns[name][i] for i in ids]
        y = [target[i] for i in ids]
        try:
            r = pearson(x, y)
        except (UndefinedCorrelation, ValueError):
            r = float("nan")
        rows.append(CorrelationRow(name, r, len(ids)))
    return rows


def _fmt(v: float) -> str:
    return "nan" if isinstance(v, float) and math.isnan(v) else f"{v:.6f}"


def write_correlation_csv(path: str | Path, rows: Sequence[CorrelationRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "pearson_r", "n"])
        for row in rows:
            w.writerow([row.feature, _fmt(row.r), row.n])


def write_reliability_csv(path: str | Path, rep: ReliabilityReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold_percent", "count", "fraction", "n_videos"])
        for row in rep.rows():
            w.writerow([f"{row['threshold_percent']:g}", row["count"], _fmt(row["fraction"]), row["n_videos"]])


def write_extremes_csv(path: str | Path, rep: ExtremesReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["extreme", rep.group_by, "count", "extreme_share", "dataset_share", "lift"])
        for label, shares in (("top", rep.top), ("bottom", rep.bottom)):
            for s in shares:
                w.writerow([label, s.group, s.extreme_count, _fmt(s.extreme_share),
                            _fmt(s.dataset_share), _fmt(s.lift)])


def format_correlations(rows: Sequence[CorrelationRow]) -> str:
    width = max(len(r.feature) for r in rows)
    lines = [f"{'feature':<{width}}  {'r':>8}  {'n':>6}"]
    lines += [f"{r.feature:<{width}}  {_fmt(r.r):>8}  {r.n:>6}" for r in rows]
    return "\n".join(lines)
