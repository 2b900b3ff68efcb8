"""Per-video feature files: named fixed-dimension blocks assembled from every extractor."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import detection_features as det
from . import text_features as txt
from . import visual_features as vis
from .data_model import N_SENTIMENTS, N_TOPICS, CleanVideoRecord

FEATURE_FORMAT_VERSION = 1

# block name -> dimension; blocks derived from detections are filled per split
BLOCK_DIMS = {
    "topic": N_TOPICS,
    "topic_index": 1,
    "sentiment": N_SENTIMENTS,
    "sentiment_index": 1,
    "exciting": 1,
    "funny": 1,
    "language": 1,
    "duration": 1,
    "memorability": 1,
    "avg_hue": 3,
    "median_hue": 3,
    "avg_intensity": 1,
    "intensity_mid30": 1,
    "intensity_mid60": 1,
    "shot_boundaries": 1,
    "flow_hist": vis.FLOW_BINS,
    "text_length": 1,
    "word_count": 1,
    "meaningful_words": 1,
    "avg_word_length": 1,
    "avg_sentence_length": 1,
    "sentiment_polarity": 1,
    "common_word": txt.HASH_BUCKETS,
    "audio": 1,
    "climax": 1,
    "objects": det.VOCAB_SIZES["objects"],
    "places": det.VOCAB_SIZES["places"],
    "expressions": det.VOCAB_SIZES["expressions"],
    "emotions": det.VOCAB_SIZES["emotions"],
}
DETECTION_RATIO_BLOCKS = det.FAMILIES


class FeatureError(RuntimeError):
    """A video's features could not be extracted."""


@dataclass
class FeatureParams:
    flow_block: int = 16
    flow_radius: int = 8
    shot_threshold: float = 0.4
    hist_bins_per_channel: int = 8
    hash_buckets: int = 32
    frame_rate: float = 24.0


@dataclass
class VideoFeatures:
    video_id: str
    blocks: dict[str, list[float]]
    detection_counts: dict[str, list[int]]
    present: list[str]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format_version": FEATURE_FORMAT_VERSION,
            "video_id": self.video_id,
            "blocks": {k: self.blocks[k] for k in sorted(self.blocks)},
            "detection_counts": {k: self.detection_counts[k] for k in sorted(self.detection_counts)},
            "present": sorted(self.present),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "VideoFeatures":
        if obj.get("format_version") != FEATURE_FORMAT_VERSION:
            raise FeatureError(f"unsupported feature file version {obj.get('format_version')!r}")
        return cls(
            video_id=obj["video_id"],
            blocks={k: list(v) for k, v in obj["blocks"].items()},
            detection_counts={k: list(v) for k, v in obj["detection_counts"].items()},
            present=list(obj["present"]),
            warnings=list(obj.get("warnings", [])),
        )


def _onehot(i: int, n: int) -> list[float]:
    v = [0.0] * n
    v[i] = 1.0
    return v


def _resolve(root: Path | None, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() or root is None else root / p


def label_blocks(rec: CleanVideoRecord) -> dict[str, list[float]]:
    return {
        "topic": _onehot(rec.topic, N_TOPICS),
        "topic_index": [float(rec.topic)],
        "sentiment": _onehot(rec.sentiment, N_SENTIMENTS),
        "sentiment_index": [float(rec.sentiment)],
        "exciting": [float(rec.exciting)],
        "funny": [float(rec.funny)],
        "language": [float(rec.language)],
        "duration": [float(rec.duration_seconds)],
    }


def extract_video(rec: CleanVideoRecord, assets_root: Path | None, params: FeatureParams) -> VideoFeatures:
    """Compute every block for one video.

    Missing optional assets give zero blocks and a warning; an asset that is
    present but unreadable raises FeatureError.
    """
    blocks = label_blocks(rec)
    warnings: list[str] = []
    present: list[str] = []

    memo = None
    if "memorability" in rec.assets:
        try:
            memo = vis.read_memorability(_resolve(assets_root, rec.assets["memorability"]))
            blocks["memorability"] = [vis.average_memorability(memo)]
            present.append("memorability")
        except (OSError, ValueError) as exc:
            raise FeatureError(f"{rec.video_id}: memorability: {exc}") from exc
    else:
        blocks["memorability"] = [0.0]
        warnings.append("missing memorability")

    if "frames" in rec.assets:
        try:
            frames = vis.load_frames(_resolve(assets_root, rec.assets["frames"]), params.frame_rate)
            vb = vis.visual_block(
                frames, None, rec.duration_seconds,
                block=params.flow_block, radius=params.flow_radius,
                shot_threshold=params.shot_threshold, bins_per_channel=params.hist_bins_per_channel,
            )
        except (OSError, ValueError) as exc:
            raise FeatureError(f"{rec.video_id}: frames: {exc}") from exc
        blocks.update({
            "avg_hue": vb.avg_hue.tolist(),
            "median_hue": vb.median_hue.tolist(),
            "avg_intensity": [vb.avg_intensity],
            "intensity_mid30": [vb.avg_intensity_mid30],
            "intensity_mid60": [vb.avg_intensity_mid60],
            "shot_boundaries": [float(vb.shot_boundary_count)],
            "flow_hist": vb.flow_hist.tolist(),
        })
        present.append("frames")
    else:
        for name in ("avg_hue", "median_hue", "avg_intensity", "intensity_mid30",
                     "intensity_mid60", "shot_boundaries"):
            blocks[name] = [0.0] * BLOCK_DIMS[name]
        blocks["flow_hist"] = [1.0 / vis.FLOW_BINS] * vis.FLOW_BINS
        warnings.append("missing frames")

    if "transcript" in rec.assets:
        try:
            tb = txt.text_block(txt.load_transcript(_resolve(assets_root, rec.assets["transcript"])),
                                params.hash_buckets)
        except (OSError, ValueError, KeyError) as exc:
            raise FeatureError(f"{rec.video_id}: transcript: {exc}") from exc
        present.append("transcript")
    else:
        tb = txt.TextFeatureBlock(common_word_hash=np.zeros(params.hash_buckets))
        warnings.append("missing transcript")
    blocks.update({
        "text_length": [float(tb.text_length)],
        "word_count": [float(tb.word_count)],
        "meaningful_words": [float(tb.meaningful_word_count)],
        "avg_word_length": [tb.avg_word_length],
        "avg_sentence_length": [tb.avg_sentence_length],
        "sentiment_polarity": [tb.sentiment_polarity],
        "common_word": tb.common_word_hash.tolist(),
    })

    if "detections" in rec.assets:
        try:
            d = det.load_detections(_resolve(assets_root, rec.assets["detections"]))
        except (OSError, ValueError, KeyError) as exc:
            raise FeatureError(f"{rec.video_id}: detections: {exc}") from exc
        present.append("detections")
    else:
        d = det.DetectionFile()
        warnings.append("missing detections")
    if "audio" in rec.assets:
        try:
            d.audio = vis.read_memorability(_resolve(assets_root, rec.assets["audio"]))
        except (OSError, ValueError) as exc:
            raise FeatureError(f"{rec.video_id}: audio: {exc}") from exc
        present.append("audio")
    blocks["audio"] = [det.audio_loudness(d.audio)]
    blocks["climax"] = [float(len(d.climaxes))]
    counts = {fam: c.tolist() for fam, c in d.counts().items()}

    return VideoFeatures(rec.video_id, blocks, counts, present, warnings)


def with_detection_ratios(vf: VideoFeatures, priors: det.PriorTable) -> dict[str, np.ndarray]:
    """All blocks as arrays, with the prior-ratio blocks filled in."""
    out = {k: np.asarray(v, dtype=np.float64) for k, v in vf.blocks.items()}
    for fam in DETECTION_RATIO_BLOCKS:
        out[fam] = det.ratio_from_counts(vf.detection_counts[fam], priors[fam])
    return out


def write_features(path: str | Path, vf: VideoFeatures) -> None:
    Path(path).write_text(json.dumps(vf.to_dict(), sort_keys=True) + "\n", encoding="utf-8")


def read_features(path: str | Path) -> VideoFeatures:
    return VideoFeatures.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
