"""Energy + zero-crossing voice activity detection and fixed-length clipping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip
from .errors import ClipTooShort


@dataclass(frozen=True)
class VadConfig:
    frame_len: int = 400
    hop: int = 160
    energy_ratio: float = 0.1
    zcr_ceiling: float = 0.3
    hangover_frames: int = 5
    min_segment: float = 0.3

    def __post_init__(self):
        if not 0.0 < self.energy_ratio < 1.0:
            raise ValueError("energy_ratio must lie in (0, 1)")
        if not (self.frame_len >= self.hop > 0):
            raise ValueError("need frame_len >= hop > 0")
        if self.min_segment <= 0:
            raise ValueError("min_segment must be positive")


@dataclass(frozen=True)
class Segment:
    start: int
    end: int

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"empty segment [{self.start}, {self.end})")

    def __len__(self):
        return self.end - self.start


def _frames(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    n = 1 + (x.size - frame_len) // hop
    view = np.lib.stride_tricks.sliding_window_view(x, frame_len)
    return view[: n * hop : hop]


def short_time_energy(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    f = _frames(x, frame_len, hop)
    return np.einsum("ij,ij->i", f, f)


def zero_crossing_rate(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Fraction of adjacent sample pairs per frame whose signs differ."""
    sign = np.sign(x)
    # exact zeros never count as a crossing
    crossings = (sign[1:] * sign[:-1]) < 0
    padded = np.append(crossings, False).astype(np.float64)
    f = _frames(padded, frame_len, hop)[:, : frame_len - 1]
    return f.sum(axis=1) / (frame_len - 1)


def speech_mask(clip: AudioClip, cfg: VadConfig) -> np.ndarray:
    x = clip.samples
    energy = short_time_energy(x, cfg.frame_len, cfg.hop)
    peak = energy.max()
    if peak <= 0.0:
        return np.zeros(energy.size, dtype=bool)
    zcr = zero_crossing_rate(x, cfg.frame_len, cfg.hop)
    return (energy >= cfg.energy_ratio * peak) & (zcr <= cfg.zcr_ceiling)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive (first, last) frame index pairs of consecutive True runs."""
    idx = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(np.int8), [0]])))
    return [(int(a), int(b) - 1) for a, b in zip(idx[::2], idx[1::2])]


def detect_voice_activity(clip: AudioClip, cfg: VadConfig | None = None) -> list[Segment]:
    """Return ordered, disjoint voiced segments of ``clip``.

    A frame is speech when its energy reaches ``energy_ratio`` of the loudest
    frame and its zero-crossing rate stays under ``zcr_ceiling``. Runs split
    by at most ``hangover_frames`` silent frames are merged. Each frame owns
    the hop-wide span centred in it, so boundaries land within a hop of the
    true onset rather than a full frame early.
    """
    cfg = cfg or VadConfig()
    if len(clip) < cfg.frame_len:
        raise ClipTooShort(f"{len(clip)} samples is shorter than one frame ({cfg.frame_len})")
    mask = speech_mask(clip, cfg)
    runs = _runs(mask)

    merged: list[list[int]] = []
    for first, last in runs:
        if merged and first - merged[-1][1] - 1 <= cfg.hangover_frames:
            merged[-1][1] = last
        else:
            merged.append([first, last])

    lead = (cfg.frame_len - cfg.hop) // 2
    min_len = cfg.min_segment * clip.sample_rate
    n = len(clip)
    out = []
    for first, last in merged:
        start = 0 if first == 0 else first * cfg.hop + lead
        end = n if last == mask.size - 1 else min(n, last * cfg.hop + lead + cfg.hop)
        if end - start >= min_len and end > start:
            out.append(Segment(start, end))
    return out


def segment_clip(clip: AudioClip, segments, clip_len: float = 0.5) -> list[AudioClip]:
    """Tile each segment into non-overlapping ``clip_len`` windows, dropping remainders."""
    width = int(round(clip_len * clip.sample_rate))
    out = []
    for seg in segments:
        if seg.end > len(clip):
            raise ValueError(f"segment {seg} exceeds clip length {len(clip)}")
        for k in range(len(seg) // width):
            a = seg.start + k * width
            out.append(AudioClip(clip.samples[a : a + width], clip.sample_rate, clip.source_id))
    return out
