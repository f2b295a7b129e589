"""WAV decoding/encoding and resampling into normalized mono buffers.

Only RIFF/WAVE with PCM16 (format tag 1) or IEEE float32 (format tag 3)
payloads are accepted. Output files are always PCM16 mono.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import EmptyData, IoFailure, MalformedHeader, UnsupportedEncoding

DEFAULT_SAMPLE_RATE = 16000

WAVE_FORMAT_PCM = 1
WAVE_FORMAT_IEEE_FLOAT = 3
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Immutable mono sample buffer in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if x.size and (x.max() > 1.0 or x.min() < -1.0):
            raise ValueError("samples must lie in [-1, 1]")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _iter_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        yield cid, body
        pos += 8 + size + (size & 1)


def decode_wav(data: bytes, source_id: str = "") -> AudioClip:
    """Decode an in-memory RIFF/WAVE byte string."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeader("not a RIFF/WAVE container")

    fmt = None
    payload = None
    for cid, body in _iter_chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise MalformedHeader("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == WAVE_FORMAT_EXTENSIBLE and len(body) >= 26:
                # the real tag sits in the first two bytes of the subformat GUID
                sub = struct.unpack_from("<H", body, 24)[0]
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            payload = body
    if fmt is None:
        raise MalformedHeader("missing fmt chunk")
    if payload is None:
        raise MalformedHeader("missing data chunk")

    tag, channels, rate, _, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{channels} channels")
    if rate <= 0:
        raise MalformedHeader("sample rate is zero")
    if tag == WAVE_FORMAT_PCM and bits == 16:
        dtype = np.dtype("<i2")
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedEncoding(f"format tag {tag} with {bits} bits per sample")

    n_frames = len(payload) // (dtype.itemsize * channels)
    if n_frames == 0:
        raise EmptyData("data chunk holds no samples")
    raw = np.frombuffer(payload[: n_frames * dtype.itemsize * channels], dtype=dtype)
    raw = raw.reshape(n_frames, channels)

    if tag == WAVE_FORMAT_PCM:
        x = raw.astype(np.float64) / 32768.0
    else:
        x = raw.astype(np.float64)
        x[~np.isfinite(x)] = 0.0
        np.clip(x, -1.0, 1.0, out=x)
    x = x.mean(axis=1) if channels == 2 else x[:, 0]
    return AudioClip(x, rate, source_id)


def read_wav(path) -> AudioClip:
    """Read a WAV file and return a mono clip; stereo is channel-averaged."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        data = fh.read()
    stem = os.path.splitext(os.path.basename(path))[0]
    return decode_wav(data, source_id=stem)


def quantize_pcm16(samples) -> np.ndarray:
    # scale by 32768 to mirror the decoder; +1.0 saturates at 32767
    x = np.asarray(samples, dtype=np.float64)
    return np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")


def encode_wav(clip: AudioClip) -> bytes:
    pcm = quantize_pcm16(clip.samples).tobytes()
    rate = clip.sample_rate
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, WAVE_FORMAT_PCM, 1, rate, rate * 2, 2, 16,
        b"data", len(pcm),
    )
    return header + pcm


def write_wav(clip: AudioClip, path) -> None:
    """Write a clip as 16-bit PCM mono."""
    try:
        with open(path, "wb") as fh:
            fh.write(encode_wav(clip))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resampling to ``target_rate``."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return clip
    n_in = len(clip)
    n_out = int(round(n_in * target_rate / clip.sample_rate))
    if n_out < 1:
        n_out = 1
    t = np.arange(n_out) * (clip.sample_rate / target_rate)
    y = np.interp(t, np.arange(n_in), clip.samples)
    return AudioClip(y, target_rate, clip.source_id)
