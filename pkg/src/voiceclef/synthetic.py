"""Synthetic four-class "voice" corpus: two-formant sinusoid mixtures in noise.

Each class owns a pair of formant frequencies. Every synthetic patient
jitters that pair slightly, and every clip draws fresh phases, amplitude
balance and white noise at a fixed SNR. ``separation`` scales the distance
between class formants, so 0 makes the classes indistinguishable.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .audio import AudioClip, write_wav
from .nn import make_rng

BASE_FORMANTS = (600.0, 1700.0)
CLASS_OFFSETS = ((-250.0, -700.0), (250.0, -350.0), (-100.0, 450.0), (350.0, 900.0))


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 4
    patients_per_class: int = 25
    clips_per_patient: int = 4
    clip_seconds: float = 0.5
    sample_rate: int = 16000
    snr_db: float = 20.0
    separation: float = 1.0
    patient_jitter: float = 0.03
    seed: int = 0


def class_formants(label: int, separation: float = 1.0) -> tuple[float, float]:
    off = CLASS_OFFSETS[label % len(CLASS_OFFSETS)]
    return (BASE_FORMANTS[0] + separation * off[0], BASE_FORMANTS[1] + separation * off[1])


def synth_clip(f1: float, f2: float, rng: np.random.Generator, n: int, sample_rate: int,
               snr_db: float) -> np.ndarray:
    t = np.arange(n) / sample_rate
    balance = rng.uniform(0.6, 1.0)
    tone = (np.sin(2 * np.pi * f1 * t + rng.uniform(0, 2 * np.pi))
            + balance * np.sin(2 * np.pi * f2 * t + rng.uniform(0, 2 * np.pi)))
    p_sig = np.mean(tone ** 2)
    noise = rng.normal(0.0, np.sqrt(p_sig / 10 ** (snr_db / 10)), n)
    x = tone + noise
    return 0.5 * x / np.max(np.abs(x))


@dataclass(frozen=True)
class SyntheticItem:
    clip: AudioClip
    label: int
    patient_id: str


def generate(spec: SyntheticSpec = SyntheticSpec()) -> list[SyntheticItem]:
    rng = make_rng(spec.seed)
    n = int(round(spec.clip_seconds * spec.sample_rate))
    items = []
    for label in range(spec.n_classes):
        f1, f2 = class_formants(label, spec.separation)
        for p in range(spec.patients_per_class):
            pid = f"c{label}p{p:03d}"
            jf1 = f1 * (1 + spec.patient_jitter * rng.standard_normal())
            jf2 = f2 * (1 + spec.patient_jitter * rng.standard_normal())
            for k in range(spec.clips_per_patient):
                x = synth_clip(jf1, jf2, rng, n, spec.sample_rate, spec.snr_db)
                items.append(SyntheticItem(AudioClip(x, spec.sample_rate, f"{pid}_{k}"), label, pid))
    return items


def write_corpus(root, spec: SyntheticSpec = SyntheticSpec(), label_names=None) -> str:
    """Write the corpus as WAV files plus ``manifest.csv``; returns the manifest path."""
    from .classifier import DEFAULT_LABELS

    label_names = list(label_names or DEFAULT_LABELS[: spec.n_classes])
    os.makedirs(os.path.join(root, "audio"), exist_ok=True)
    manifest = os.path.join(root, "manifest.csv")
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "patient_id", "label", "phoneme"])
        for item in generate(spec):
            rel = f"audio/{item.clip.source_id}.wav"
            write_wav(item.clip, os.path.join(root, rel))
            w.writerow([rel, item.patient_id, label_names[item.label], "a"])
    return manifest
