"""Frame-derived features: colour statistics, shot boundaries, optical-flow histogram."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .data_model import round_half_up

FLOW_BINS = 30
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
FRAME_SUFFIXES = (".ppm", ".png")


class FrameError(ValueError):
    pass


@dataclass
class FrameSequence:
    frames: np.ndarray  # (T, H, W, 3) uint8
    frame_rate: float = 24.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise FrameError(f"frames must have shape (T, H, W, 3), got {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise FrameError("frame sequence is empty")
        if self.frames.dtype != np.uint8:
            raise FrameError("frames must be 8-bit per channel")

    def __len__(self):
        return self.frames.shape[0]


@dataclass
class VisualFeatureBlock:
    avg_hue: np.ndarray
    median_hue: np.ndarray
    avg_intensity: float
    avg_intensity_mid30: float
    avg_intensity_mid60: float
    shot_boundary_count: int
    flow_hist: np.ndarray
    avg_memorability: float
    duration_seconds: float


def _as_frames(frames) -> np.ndarray:
    arr = frames.frames if isinstance(frames, FrameSequence) else np.asarray(frames)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[0] == 0 or arr.shape[-1] != 3:
        raise FrameError("need a non-empty (T, H, W, 3) frame array")
    return arr


def load_frames(directory: str | Path, frame_rate: float = 24.0) -> FrameSequence:
    """Read numerically ordered PPM/PNG frames from a directory."""
    directory = Path(directory)
    files = [p for p in directory.iterdir() if p.suffix.lower() in FRAME_SUFFIXES]
    if not files:
        raise FrameError(f"no frame files in {directory}")

    def frame_number(p: Path) -> int:
        digits = re.findall(r"\d+", p.stem)
        if not digits:
            raise FrameError(f"frame file without index: {p.name}")
        return int(digits[-1])

    files.sort(key=lambda p: (frame_number(p), p.name))
    frames = []
    for p in files:
        try:
            with Image.open(p) as im:
                frames.append(np.asarray(im.convert("RGB"), dtype=np.uint8))
        except (OSError, ValueError) as exc:
            raise FrameError(f"unreadable frame {p}: {exc}") from exc
    if len({f.shape for f in frames}) != 1:
        raise FrameError(f"frames in {directory} differ in size")
    return FrameSequence(np.stack(frames), frame_rate)


def average_hue(frames) -> np.ndarray:
    arr = _as_frames(frames)
    return arr.reshape(-1, 3).mean(axis=0, dtype=np.float64)


def median_hue(frames) -> np.ndarray:
    """Per-channel median over all pixels; even counts take the lower median."""
    flat = _as_frames(frames).reshape(-1, 3)
    k = (flat.shape[0] - 1) // 2
    return np.partition(flat, k, axis=0)[k].astype(np.float64)


def luma(frames) -> np.ndarray:
    return _as_frames(frames).astype(np.float64) @ LUMA_WEIGHTS


def average_intensity(frames, crop_fraction: float = 1.0) -> float:
    """Mean grey level over a centred window of each frame."""
    arr = _as_frames(frames)
    if not 0 < crop_fraction <= 1:
        raise FrameError(f"crop_fraction must be in (0, 1], got {crop_fraction}")
    _, h, w, _ = arr.shape
    ch, cw = round_half_up(crop_fraction * h), round_half_up(crop_fraction * w)
    if ch == 0 or cw == 0:
        raise FrameError(f"crop {crop_fraction} of {w}x{h} frames is empty")
    y0, x0 = (h - ch) // 2, (w - cw) // 2
    grey = luma(arr[:, y0:y0 + ch, x0:x0 + cw])
    return float(min(255.0, grey.mean()))


def color_histograms(frames, bins_per_channel: int = 8) -> np.ndarray:
    """Joint RGB histogram per frame, L1-normalised: shape (T, bins**3)."""
    arr = _as_frames(frames)
    q = (arr.astype(np.int64) * bins_per_channel) // 256
    idx = (q[..., 0] * bins_per_channel + q[..., 1]) * bins_per_channel + q[..., 2]
    idx = idx.reshape(arr.shape[0], -1)
    n_bins = bins_per_channel ** 3
    hists = np.stack([np.bincount(row, minlength=n_bins) for row in idx]).astype(np.float64)
    return hists / idx.shape[1]


def shot_boundaries(frames, threshold: float = 0.4, bins_per_channel: int = 8) -> int:
    """Count consecutive-frame histogram L1 distances strictly above threshold."""
    arr = _as_frames(frames)
    if arr.shape[0] < 2:
        return 0
    if not 0 < threshold <= 2:
        raise FrameError(f"threshold must be in (0, 2], got {threshold}")
    hists = color_histograms(arr, bins_per_channel)
    dists = np.abs(np.diff(hists, axis=0)).sum(axis=1)
    return int(np.count_nonzero(dists > threshold))


def _directed_flow(a: np.ndarray, b: np.ndarray, block: int, radius: int) -> float:
    """Mean best-match displacement length of a's blocks searched in b.

    Sum-of-absolute-differences over RGB; ties go to the shortest
    displacement, then to the smallest (dy, dx).
    """
    h, w, _ = a.shape
    ny, nx = h // block, w // block
    a = a.astype(np.int64)
    b = b.astype(np.int64)
    total = 0.0
    for by in range(ny):
        for bx in range(nx):
            y0, x0 = by * block, bx * block
            ref = a[y0:y0 + block, x0:x0 + block]
            dy_lo, dy_hi = max(-radius, -y0), min(radius, h - block - y0)
            dx_lo, dx_hi = max(-radius, -x0), min(radius, w - block - x0)
            region = b[y0 + dy_lo:y0 + dy_hi + block, x0 + dx_lo:x0 + dx_hi + block]
            windows = np.lib.stride_tricks.sliding_window_view(region, (block, block), axis=(0, 1))
            # windows: (ndy, ndx, 3, block, block)
            sad = np.abs(windows - ref.transpose(2, 0, 1)).sum(axis=(2, 3, 4))
            dy, dx = np.meshgrid(np.arange(dy_lo, dy_hi + 1), np.arange(dx_lo, dx_hi + 1), indexing="ij")
            sq = dy * dy + dx * dx
            order = np.lexsort((dx.ravel(), dy.ravel(), sq.ravel(), sad.ravel()))
            best = order[0]
            total += math.sqrt(sq.ravel()[best])
    return total / (ny * nx)


def pair_flow_magnitude(a: np.ndarray, b: np.ndarray, block: int = 16, radius: int = 8) -> float:
    """Average motion magnitude between two frames (symmetric in its arguments)."""
    if a.shape != b.shape:
        raise FrameError("frame pair differs in shape")
    h, w, _ = a.shape
    if h < block or w < block:
        raise FrameError(f"frames {w}x{h} smaller than the {block}px matching block")
    if np.array_equal(a, b):
        return 0.0
    return 0.5 * (_directed_flow(a, b, block, radius) + _directed_flow(b, a, block, radius))


def bin_sizes(n_items: int, n_bins: int = FLOW_BINS) -> list[int]:
    base, extra = divmod(n_items, n_bins)
    return [base + 1] * extra + [base] * (n_bins - extra)


def optical_flow_hist(frames, block: int = 16, radius: int = 8, n_bins: int = FLOW_BINS) -> np.ndarray:
    """Per-pair flow magnitudes summed into contiguous temporal bins, L1-normalised.

    Zero total motion gives the uniform vector.
    """
    arr = _as_frames(frames)
    if arr.shape[0] < 2:
        raise FrameError("optical flow needs at least 2 frames")
    mags = [pair_flow_magnitude(arr[i], arr[i + 1], block, radius) for i in range(arr.shape[0] - 1)]
    hist = np.zeros(n_bins)
    start = 0
    for i, size in enumerate(bin_sizes(len(mags), n_bins)):
        hist[i] = math.fsum(mags[start:start + size])
        start += size
    total = math.fsum(hist)
    if total == 0:
        return np.full(n_bins, 1.0 / n_bins)
    return hist / total


def average_memorability(scores: Sequence[float]) -> float:
    scores = [float(s) for s in scores]
    if not scores:
        raise ValueError("no memorability scores")
    if any(not 0 <= s <= 1 for s in scores):
        raise ValueError("memorability scores must lie in [0, 1]")
    return math.fsum(scores) / len(scores)


def read_memorability(path: str | Path) -> list[float]:
    with open(path, encoding="utf-8") as fh:
        return [float(line) for line in fh if line.strip()]


def visual_block(
    frames: FrameSequence,
    memorability: Sequence[float] | None,
    duration_seconds: float,
    block: int = 16,
    radius: int = 8,
    shot_threshold: float = 0.4,
    bins_per_channel: int = 8,
) -> VisualFeatureBlock:
    return VisualFeatureBlock(
        avg_hue=average_hue(frames),
        median_hue=median_hue(frames),
        avg_intensity=average_intensity(frames, 1.0),
        avg_intensity_mid30=average_intensity(frames, 0.3),
        avg_intensity_mid60=average_intensity(frames, 0.6),
        shot_boundary_count=shot_boundaries(frames, shot_threshold, bins_per_channel),
        flow_hist=(optical_flow_hist(frames, block, radius) if len(frames) >= 2
                   else np.full(FLOW_BINS, 1.0 / FLOW_BINS)),
        avg_memorability=average_memorability(memorability) if memorability else 0.0,
        duration_seconds=float(duration_seconds),
    )
