"""Triangular Mel filterbank snapped to FFT bins."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, TooManyFilters


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True, eq=False)
class MelFilterBank:
    weights: np.ndarray  # [n_mels, n_fft // 2 + 1]
    center_freqs: np.ndarray  # Hz, after snapping
    bin_points: np.ndarray  # n_mels + 2 FFT bin indices

    def __post_init__(self):
        for arr in (self.weights, self.center_freqs, self.bin_points):
            arr.setflags(write=False)

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]


def build_mel_filterbank(n_mels: int, n_fft: int, sample_rate: int,
                         fmin: float = 0.0, fmax: float | None = None) -> MelFilterBank:
    """Build ``n_mels`` unit-peak triangles between ``fmin`` and ``fmax``.

    ``n_mels + 2`` points are spaced evenly on the Mel scale, converted back
    to Hz and rounded to the nearest FFT bin. Filter m rises linearly from
    point m-1 to a peak of exactly 1 at point m and falls to zero at m+1.
    """
    if fmax is None:
        fmax = sample_rate / 2.0
    if not 0.0 <= fmin < fmax <= sample_rate / 2.0:
        raise ValueError(f"need 0 <= fmin < fmax <= {sample_rate / 2}, got {fmin}, {fmax}")
    mel_pts = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    hz_pts[0], hz_pts[-1] = fmin, fmax
    bins = np.round(hz_pts * n_fft / sample_rate).astype(np.int64)
    if np.any(np.diff(bins) <= 0):
        clash = int(np.argmin(np.diff(bins)))
        raise TooManyFilters(
            f"{n_mels} filters do not fit in {n_fft // 2 + 1} bins: "
            f"points {clash} and {clash + 1} share bin {bins[clash]}"
        )

    n_bins = n_fft // 2 + 1
    k = np.arange(n_bins)[None, :]
    left, center, right = bins[:-2, None], bins[1:-1, None], bins[2:, None]
    rise = (k - left) / (center - left)
    fall = (right - k) / (right - center)
    weights = np.clip(np.minimum(rise, fall), 0.0, None)
    centers = bins[1:-1] * sample_rate / n_fft
    return MelFilterBank(weights, centers.astype(np.float64), bins)


def apply_filterbank(power, bank: MelFilterBank) -> np.ndarray:
    """Y[m] = sum_k H_m(k) P[k]; accepts a single spectrum or ``[frames, bins]``."""
    power = np.asarray(power, dtype=np.float64)
    if power.shape[-1] != bank.weights.shape[1]:
        raise DimensionMismatch(
            f"power spectrum has {power.shape[-1]} bins, filterbank expects {bank.weights.shape[1]}"
        )
    return power @ bank.weights.T
