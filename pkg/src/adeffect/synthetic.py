"""Synthetic corpora with planted signal, at the asset level and at the feature level."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import detection_features as det
from .data_model import N_SENTIMENTS, N_TOPICS, make_rng
from .evaluation import Sample
from .features import BLOCK_DIMS

_WORDS_NEUTRAL = ("car", "phone", "shoes", "coffee", "family", "summer", "city", "water",
                  "drive", "music", "ticket", "store", "offer", "today", "bank", "pizza")
_WORDS_POSITIVE = ("great", "happy", "free", "best", "love", "fresh", "win")
_WORDS_NEGATIVE = ("bad", "sad", "danger", "pain", "terrible", "risk")


def write_ppm(path: Path, frame: np.ndarray) -> None:
    h, w, _ = frame.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(frame, dtype=np.uint8).tobytes())


def moving_square_frames(n_frames: int, motion_pairs, height: int = 16, width: int = 48,
                         square: int = 8, step: int = 4, background=(20, 20, 20),
                         cuts=(), cut_colors=None) -> np.ndarray:
    """Frames with a white square that moves `step` px horizontally only in `motion_pairs`.

    A pair index j means motion between frames j and j+1. Frames listed in
    `cuts` switch the background colour (hard cut) from that frame on.
    """
    frames = np.empty((n_frames, height, width, 3), dtype=np.uint8)
    x, direction = 0, 1
    bg = np.array(background, dtype=np.uint8)
    cut_colors = list(cut_colors or [])
    moving = set(motion_pairs)
    y0 = (height - square) // 2
    for f in range(n_frames):
        if f in cuts and cut_colors:
            bg = np.array(cut_colors.pop(0), dtype=np.uint8)
        if f > 0 and (f - 1) in moving:
            if not 0 <= x + direction * step <= width - square:
                direction = -direction
            x += direction * step
        frames[f] = bg
        frames[f, y0:y0 + square, x:x + square] = 255
    return frames


def _mode_preserving_ratings(rng, value: int, lo: int, hi: int) -> list[int]:
    vals = [value] * 3 + [int(v) for v in rng.integers(lo, hi + 1, size=2)]
    return [vals[i] for i in rng.permutation(5)]


def generate_project(root: str | Path, n_per_class: int = 193, seed: int = 0, n_frames: int = 31,
                     height: int = 16, width: int = 48, label_noise: float = 0.2,
                     topic_only: bool = False, config_overrides: dict | None = None) -> Path:
    """Write raw.jsonl, per-video assets and config.json under root.

    Effectiveness is the quintile of a latent score built from the topic,
    the duration and the optical-flow entropy (motion in k of the pairs gives
    entropy ln k); a `label_noise` fraction of labels is then shuffled,
    which keeps every class at exactly n_per_class videos.

    With `topic_only`, topics come from the first ten labels and effectiveness
    is simply topic % 5 + 1, with no noise (class sizes are then only roughly
    equal).
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = make_rng(seed)
    n = 5 * n_per_class
    n_pairs = n_frames - 1
    topic_score = rng.permutation(np.linspace(-1.0, 1.0, N_TOPICS))
    topics = rng.integers(0, 10 if topic_only else N_TOPICS, size=n)
    durations = np.round(rng.uniform(5.0, 60.0, size=n), 2)
    k_motion = rng.integers(1, n_pairs + 1, size=n)
    ent = np.log(k_motion)

    def z(v):
        return (v - v.mean()) / v.std()

    latent = 3.0 * topic_score[topics] + 0.6 * z(durations) + 0.6 * z(ent) + 0.2 * rng.standard_normal(n)
    order = np.argsort(latent, kind="stable")
    labels = np.empty(n, dtype=np.int64)
    labels[order] = np.repeat(np.arange(1, 6), n_per_class)
    noisy = rng.choice(n, size=int(round(label_noise * n)), replace=False)
    labels[noisy] = labels[rng.permutation(noisy)]
    if topic_only:
        labels = topics % 5 + 1

    lines = []
    for i in range(n):
        vid = f"v{i:05d}"
        adir = root / "assets" / vid
        fdir = adir / "frames"
        fdir.mkdir(parents=True, exist_ok=True)
        motion = rng.choice(n_pairs, size=int(k_motion[i]), replace=False)
        n_cuts = int(rng.integers(0, 4))
        cuts = sorted(int(c) for c in rng.choice(np.arange(1, n_frames), size=n_cuts, replace=False))
        colors = [tuple(int(c) for c in rng.integers(0, 120, size=3)) for _ in cuts]
        frames = moving_square_frames(n_frames, motion, height, width,
                                      background=tuple(int(c) for c in rng.integers(0, 120, size=3)),
                                      cuts=cuts, cut_colors=colors)
        for f, frame in enumerate(frames):
            write_ppm(fdir / f"{f:04d}.ppm", frame)
        (adir / "memorability.txt").write_text(
            "".join(f"{v:.4f}\n" for v in rng.uniform(0.3, 0.9, size=n_frames)), encoding="utf-8")
        vocab = _WORDS_NEUTRAL + _WORDS_POSITIVE + _WORDS_NEGATIVE
        transcript = []
        for j, fr in enumerate(range(0, n_frames, 6)):
            words = [vocab[w] for w in rng.integers(0, len(vocab), size=int(rng.integers(0, 6)))]
            transcript.append({"frame": fr, "text": (" ".join(words) + ".") if words else ""})
        (adir / "transcript.json").write_text(json.dumps(transcript), encoding="utf-8")
        detections = {
            fam: [int(v) for v in rng.integers(0, min(size, 12), size=int(rng.integers(0, 30)))]
            for fam, size in det.VOCAB_SIZES.items()
        }
        detections["audio"] = [round(float(a), 4) for a in rng.normal(0, 0.3, size=n_frames)]
        detections["climaxes"] = [round(float(c), 2) for c in np.sort(rng.uniform(0, durations[i], size=int(rng.integers(0, 4))))]
        (adir / "detections.json").write_text(json.dumps(detections), encoding="utf-8")

        sentiment = int(rng.integers(0, N_SENTIMENTS))
        ratings = {
            "effectiveness": _mode_preserving_ratings(rng, int(labels[i]), 1, 5),
            "topic": _mode_preserving_ratings(rng, int(topics[i]), 0, N_TOPICS - 1),
            "sentiment": _mode_preserving_ratings(rng, sentiment, 0, N_SENTIMENTS - 1),
            "exciting": _mode_preserving_ratings(rng, int(rng.integers(0, 2)), 0, 1),
            "funny": _mode_preserving_ratings(rng, int(rng.integers(0, 2)), 0, 1),
            "language": _mode_preserving_ratings(rng, int(rng.integers(-1, 2)), -1, 1),
        }
        record = {
            "video_id": vid,
            "ratings": [{k: v[a] for k, v in ratings.items()} for a in range(5)],
            "duration_seconds": float(durations[i]),
            "assets": {
                "frames": f"assets/{vid}/frames",
                "transcript": f"assets/{vid}/transcript.json",
                "detections": f"assets/{vid}/detections.json",
                "memorability": f"assets/{vid}/memorability.txt",
            },
            "statements": [
                "I should buy this " + vocab[int(rng.integers(0, len(_WORDS_NEUTRAL)))]
                + " because it is " + " ".join(vocab[int(w)] for w in rng.integers(0, len(vocab), size=int(rng.integers(1, 5))))
                for _ in range(5)
            ],
        }
        lines.append(json.dumps(record, sort_keys=True))
    (root / "raw.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")

    config = {
        "paths": {"raw_records": "raw.jsonl", "assets_root": ".", "output_dir": "out"},
        "seeds": [0, 1, 2, 3, 4],
        "extremes_k": min(200, n // 4),
    }
    config.update(config_overrides or {})
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return cfg_path


def random_samples(n: int, seed: int = 0, label_fn=None) -> list[Sample]:
    """Feature-level samples with every block random.

    Labels are uniform on 1..5 unless label_fn(topic, sentiment, rng) is given.
    """
    rng = make_rng(seed)
    out = []
    for i in range(n):
        topic = int(rng.integers(0, N_TOPICS))
        sentiment = int(rng.integers(0, N_SENTIMENTS))
        blocks = {name: rng.standard_normal(dim) for name, dim in BLOCK_DIMS.items()
                  if name not in det.FAMILIES}
        blocks["topic"] = np.eye(N_TOPICS)[topic]
        blocks["topic_index"] = np.array([float(topic)])
        blocks["sentiment"] = np.eye(N_SENTIMENTS)[sentiment]
        blocks["sentiment_index"] = np.array([float(sentiment)])
        blocks["exciting"] = np.array([float(rng.integers(0, 2))])
        flow = rng.uniform(size=30)
        blocks["flow_hist"] = flow / flow.sum()
        counts = {fam: np.bincount(rng.integers(0, size, size=int(rng.integers(1, 20))), minlength=size)
                  for fam, size in det.VOCAB_SIZES.items()}
        label = int(label_fn(topic, sentiment, rng)) if label_fn else int(rng.integers(1, 6))
        out.append(Sample(f"s{i:05d}", label, topic, sentiment, blocks, counts))
    return out


def planted_topic_label(topic: int, sentiment: int, rng) -> int:
    """Deterministic effectiveness from the topic alone."""
    return topic % 5 + 1


def flow_entropy_of_k(k: int) -> float:
    return math.log(k)
