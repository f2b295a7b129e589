"""Framing, windowing, radix-2 FFT and DCT-II kernels.

Everything here is written against plain numpy arrays; no FFT or DCT
routine from numpy/scipy is used.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, NotPowerOfTwo, OrderTooHigh, SignalTooShort, TooFewFrames


def pre_emphasize(samples, a: float = 0.97) -> np.ndarray:
    """First-order high-pass: y[0] = x[0], y[n] = x[n] - a*x[n-1]."""
    if not 0.0 <= a < 1.0:
        raise ValueError(f"pre-emphasis coefficient must be in [0, 1), got {a}")
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0 or a == 0.0:
        return x.copy()
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - a * x[:-1]
    return y


def frame_count(n: int, win: int, inc: int) -> int:
    return (n - win + inc) // inc


def frame_signal(samples, win: int, inc: int) -> np.ndarray:
    """Split into frames of ``win`` samples every ``inc`` samples.

    Returns a ``[frame_num, win]`` copy. A trailing partial frame is dropped.
    """
    x = np.asarray(samples, dtype=np.float64)
    if win <= 0 or inc <= 0:
        raise ValueError("win and inc must be positive")
    if x.size < win:
        raise SignalTooShort(f"{x.size} samples < frame length {win}")
    n = frame_count(x.size, win, inc)
    view = np.lib.stride_tricks.sliding_window_view(x, win)
    return view[: (n - 1) * inc + 1 : inc].copy()


def hamming_window(win: int) -> np.ndarray:
    """Symmetric Hamming window of length ``win``."""
    if win < 2:
        raise ValueError("window length must be >= 2")
    i = np.arange(win)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * i / (win - 1))


def apply_window(frames, window) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    window = np.asarray(window, dtype=np.float64)
    if frames.shape[-1] != window.size:
        raise DimensionMismatch(f"frame length {frames.shape[-1]} != window length {window.size}")
    return frames * window


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft(x) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT along the last axis.

    Leading axes are treated as a batch, so a whole frame matrix is
    transformed in one call.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    if not _is_pow2(n):
        raise NotPowerOfTwo(f"FFT length {n} is not a power of two")
    a = x[..., _bit_reverse_permutation(n)].astype(np.complex128)
    batch = a.shape[:-1]
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(batch + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * tw
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(batch + (n,))
        size *= 2
    return a


def fft_power_spectrum(frame, n_fft: int) -> np.ndarray:
    """|X[k]|^2 for k = 0..n_fft/2 of the zero-padded frame(s)."""
    if not _is_pow2(n_fft):
        raise NotPowerOfTwo(f"n_fft {n_fft} is not a power of two")
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] > n_fft:
        raise DimensionMismatch(f"frame length {frame.shape[-1]} exceeds n_fft {n_fft}")
    pad = [(0, 0)] * (frame.ndim - 1) + [(0, n_fft - frame.shape[-1])]
    spec = fft(np.pad(frame, pad))[..., : n_fft // 2 + 1]
    return spec.real ** 2 + spec.imag ** 2


def _dct_basis(n_out: int, m: int, start: int = 0) -> np.ndarray:
    n = np.arange(start, start + n_out)[:, None]
    k = np.arange(m)[None, :]
    return np.cos(np.pi * n * (k + 0.5) / m)


def dct2(x, norm: str | None = None) -> np.ndarray:
    """Full-order DCT-II along the last axis; ``norm='ortho'`` makes it orthonormal."""
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[-1]
    basis = _dct_basis(m, m)
    if norm == "ortho":
        basis = basis * np.sqrt(2.0 / m)
        basis[0] /= np.sqrt(2.0)
    return x @ basis.T


def idct2(c, norm: str = "ortho") -> np.ndarray:
    """Inverse of :func:`dct2` (orthonormal form only)."""
    if norm != "ortho":
        raise ValueError("only the orthonormal inverse is provided")
    c = np.asarray(c, dtype=np.float64)
    m = c.shape[-1]
    basis = _dct_basis(m, m) * np.sqrt(2.0 / m)
    basis[0] /= np.sqrt(2.0)
    return c @ basis


def dct_cepstrum(log_energies, n_mfcc: int) -> np.ndarray:
    """Cepstral coefficients 1..n_mfcc of log filterbank energies.

    c(n) = sum_m s(m) cos(pi*n*(m + 1/2)/M); the DC term n = 0 is not
    returned. Works on a vector or on a ``[frames, M]`` matrix.
    """
    s = np.asarray(log_energies, dtype=np.float64)
    m = s.shape[-1]
    if n_mfcc < 1 or n_mfcc > m:
        raise OrderTooHigh(f"n_mfcc {n_mfcc} must be in [1, {m}]")
    return s @ _dct_basis(n_mfcc, m, start=1).T


def delta_coefficients(coeffs, order: int = 1, width: int = 2) -> np.ndarray:
    """Regression deltas along the time axis (columns) of ``[rows, frames]``.

    d_t = sum_k k*(c[t+k] - c[t-k]) / (2*sum_k k^2), with edge frames
    replicated. ``order=2`` applies the same filter to the first deltas.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    c = np.asarray(coeffs, dtype=np.float64)
    if c.shape[-1] < 2 * width + 1:
        raise TooFewFrames(f"need at least {2 * width + 1} frames, got {c.shape[-1]}")
    for _ in range(order):
        t = c.shape[-1]
        padded = np.pad(c, [(0, 0)] * (c.ndim - 1) + [(width, width)], mode="edge")
        num = np.zeros_like(c)
        for k in range(1, width + 1):
            num += k * (padded[..., width + k : width + k + t] - padded[..., width - k : width - k + t])
        c = num / (2.0 * sum(k * k for k in range(1, width + 1)))
    return c
