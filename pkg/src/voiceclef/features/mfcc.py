"""Log-Mel spectrogram and MFCC extraction for fixed-geometry clips."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from functools import lru_cache

import numpy as np

from ..audio import DEFAULT_SAMPLE_RATE, AudioClip, resample
from ..errors import SignalTooShort
from .dsp import (apply_window, dct_cepstrum, delta_coefficients, fft_power_spectrum,
                  frame_signal, hamming_window, pre_emphasize)
from .mel import MelFilterBank, apply_filterbank, build_mel_filterbank

SWEEP_MFCC_ORDERS = (13, 40, 50, 128)


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = DEFAULT_SAMPLE_RATE
    pre_emphasis: float | None = 0.97
    win: int = 400
    inc: int = 160
    n_fft: int = 2048
    n_mels: int = 128
    fmin: float = 0.0
    fmax: float | None = None
    n_mfcc: int = 128
    deltas: int = 0
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.pre_emphasis is not None and not 0.0 <= self.pre_emphasis < 1.0:
            raise ValueError("pre_emphasis must be in [0, 1) or None")
        if self.win > self.n_fft:
            raise ValueError(f"win {self.win} exceeds n_fft {self.n_fft}")
        if self.n_fft <= 0 or self.n_fft & (self.n_fft - 1):
            raise ValueError(f"n_fft {self.n_fft} is not a power of two")
        if not 1 <= self.n_mfcc <= self.n_mels:
            raise ValueError(f"n_mfcc must be in [1, n_mels={self.n_mels}]")
        if self.deltas not in (0, 1, 2):
            raise ValueError("deltas must be 0, 1 or 2")
        if not self.fmin < self.upper_freq <= self.sample_rate / 2:
            raise ValueError("need fmin < fmax <= sample_rate / 2")
        if self.inc <= 0 or self.win < 2:
            raise ValueError("invalid framing geometry")

    @property
    def upper_freq(self) -> float:
        return self.sample_rate / 2.0 if self.fmax is None else float(self.fmax)

    @property
    def n_rows(self) -> int:
        return self.n_mfcc * (1 + self.deltas)

    def n_frames(self, n_samples: int) -> int:
        return (n_samples - self.win + self.inc) // self.inc

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "FeatureConfig":
        d = self.to_dict()
        d.update(changes)
        return FeatureConfig(**d)


@dataclass(frozen=True, eq=False)
class MfccTensor:
    coeffs: np.ndarray  # [n_mfcc * (1 + deltas), frames]
    config_digest: str
    source_id: str = ""

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 2:
            raise ValueError("coefficients must be a 2-D matrix")
        if not np.all(np.isfinite(c)):
            raise ValueError("MFCC tensor holds non-finite values")
        object.__setattr__(self, "coeffs", c)

    @property
    def shape(self):
        return self.coeffs.shape


@lru_cache(maxsize=16)
def _filterbank(n_mels, n_fft, sample_rate, fmin, fmax) -> MelFilterBank:
    return build_mel_filterbank(n_mels, n_fft, sample_rate, fmin, fmax)


def filterbank_for(cfg: FeatureConfig) -> MelFilterBank:
    return _filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate, float(cfg.fmin), cfg.upper_freq)


def _conform(clip: AudioClip, cfg: FeatureConfig) -> np.ndarray:
    if clip.sample_rate != cfg.sample_rate:
        clip = resample(clip, cfg.sample_rate)
    if len(clip) < cfg.win:
        raise SignalTooShort(f"clip has {len(clip)} samples, one frame needs {cfg.win}")
    return clip.samples


def mel_energies(clip: AudioClip, cfg: FeatureConfig) -> np.ndarray:
    """Filterbank energies per frame, ``[frames, n_mels]`` (before the log)."""
    x = _conform(clip, cfg)
    if cfg.pre_emphasis:
        x = pre_emphasize(x, cfg.pre_emphasis)
    frames = apply_window(frame_signal(x, cfg.win, cfg.inc), hamming_window(cfg.win))
    power = fft_power_spectrum(frames, cfg.n_fft)
    return apply_filterbank(power, filterbank_for(cfg))


def log_mel_spectrogram(clip: AudioClip, cfg: FeatureConfig | None = None) -> np.ndarray:
    """Floored natural-log Mel spectrogram, ``[n_mels, frames]``."""
    cfg = cfg or FeatureConfig()
    energies = mel_energies(clip, cfg)
    return np.log(np.maximum(energies, cfg.log_floor)).T


def extract_mfcc(clip: AudioClip, cfg: FeatureConfig | None = None) -> MfccTensor:
    cfg = cfg or FeatureConfig()
    log_mel = log_mel_spectrogram(clip, cfg)
    static = dct_cepstrum(log_mel.T, cfg.n_mfcc).T
    blocks = [static]
    if cfg.deltas >= 1:
        blocks.append(delta_coefficients(static, 1))
    if cfg.deltas == 2:
        blocks.append(delta_coefficients(static, 2))
    return MfccTensor(np.vstack(blocks), cfg.digest(), clip.source_id)
