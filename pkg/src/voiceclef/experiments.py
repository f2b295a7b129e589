"""End-to-end runs shared by the CLI and the acceptance suite."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import classifier as clf
from . import nn
from .features import FeatureConfig, extract_mfcc
from .metrics import EvalReport, evaluate, split_indices

log = logging.getLogger(__name__)


def derive_seed(base: int, *keys: int) -> int:
    """Independent 32-bit seed for a (base, keys...) cell."""
    ss = np.random.SeedSequence(entropy=int(base), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1)[0])


def thread_cap() -> int:
    raw = os.environ.get("VOICECLEF_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def extract_all(clips, cfg: FeatureConfig, threads: int | None = None) -> np.ndarray:
    """MFCC matrices for ``clips`` stacked as ``[N, rows, frames]`` (input order)."""
    threads = threads or thread_cap()
    work = lambda c: extract_mfcc(c, cfg).coeffs  # noqa: E731
    if threads == 1 or len(clips) < 2:
        mats = [work(c) for c in clips]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            mats = list(pool.map(work, clips))
    return np.stack(mats) if mats else np.zeros((0, cfg.n_rows, 0))


@dataclass
class PipelineResult:
    model: clf.Model
    train_report: clf.TrainReport
    eval_report: EvalReport
    split: tuple


def train_and_evaluate(x, y, groups, arch: clf.ArchConfig, train_cfg: clf.TrainConfig,
                       label_names=None, split_seed: int = 0, ratios=(0.8, 0.1, 0.1),
                       grouped: bool = True, init_seed: int | None = None,
                       feature_config: FeatureConfig | None = None) -> PipelineResult:
    """Split by patient, train with validation selection, evaluate on test."""
    x = np.asarray(x)
    y = np.asarray(y, dtype=np.int64)
    groups = list(groups)
    tr, va, te = split_indices(len(x), ratios, split_seed, groups, grouped)
    arch = replace(arch, input_shape=(1,) + x.shape[1:])
    init = derive_seed(train_cfg.seed, 1) if init_seed is None else init_seed
    model = clf.build_model(arch, nn.make_rng(init), label_names)
    if feature_config is not None:
        model.feature_config = feature_config.to_dict()
    model, report = clf.train(model, (x[tr], y[tr]), (x[va], y[va]), train_cfg,
                              test_set=(x[te], y[te]) if len(te) else None)
    test = te if len(te) else va
    ev = evaluate(model, x[test], y[test], [groups[i] for i in test])
    return PipelineResult(model, report, ev, (tr, va, te))


@dataclass
class ContrastResult:
    tanh: clf.TrainReport
    relu: clf.TrainReport
    window: tuple

    def variance(self, which: str) -> float:
        rep = getattr(self, which)
        lo, hi = self.window
        return float(np.var(rep.val_acc[lo - 1 : hi]))

    def first_epoch_reaching(self, which: str, level: float):
        for i, v in enumerate(getattr(self, which).val_acc, start=1):
            if v >= level:
                return i
        return None


def activation_contrast(x, y, groups, arch: clf.ArchConfig, train_cfg: clf.TrainConfig,
                        split_seed: int = 0, epochs: int = 50, window=(10, 50)) -> ContrastResult:
    """Train the tanh and ReLU conv variants on identical data, seeds and split.

    Early stopping is disabled so both curves cover every epoch.
    """
    x = np.asarray(x)
    y = np.asarray(y, dtype=np.int64)
    tr, va, _ = split_indices(len(x), (0.8, 0.1, 0.1), split_seed, list(groups))
    cfg = replace(train_cfg, epochs=epochs, early_stop_patience=None)
    reports = {}
    for act in ("tanh", "relu"):
        a = replace(arch, input_shape=(1,) + x.shape[1:], conv_activation=act)
        model = clf.build_model(a, nn.make_rng(derive_seed(cfg.seed, 1)))
        _, reports[act] = clf.train(model, (x[tr], y[tr]), (x[va], y[va]), cfg)
    return ContrastResult(reports["tanh"], reports["relu"], tuple(window))


def parse_phoneme_sets(text: str) -> list:
    """``"i|a,i|a,i,u"`` -> [("i",), ("a", "i"), ("a", "i", "u")]."""
    sets = []
    for chunk in text.split("|"):
        items = tuple(p.strip() for p in chunk.split(",") if p.strip())
        if items:
            sets.append(items)
    if not sets:
        raise ValueError(f"no phoneme sets in {text!r}")
    return sets


SWEEP_COLUMNS = ("mfcc", "phonemes", "repeat", "clip_acc", "patient_acc")


def run_sweep(dataset, load_clip, mfcc_list, phoneme_sets, repeats: int, base_features: FeatureConfig,
              arch: clf.ArchConfig, train_cfg: clf.TrainConfig, seed: int = 0, on_row=None,
              ratios=(0.8, 0.1, 0.1), grouped: bool = True):
    """Grid of extract -> train -> evaluate cells over MFCC orders and phoneme sets.

    ``load_clip`` maps a manifest entry to an :class:`AudioClip`. Repeat ``r``
    uses ``derive_seed(seed, r)`` for split, init and shuffling, so cells with
    the same repeat index are paired across MFCC orders. ``on_row`` is called
    with each finished row so callers can flush results as they arrive.
    """
    from .dataset import filter_phonemes

    rows = []
    clip_cache = {}
    for phonemes in phoneme_sets:
        subset = filter_phonemes(dataset, phonemes)
        clips = []
        for e in subset.entries:
            if e.path not in clip_cache:
                clip_cache[e.path] = load_clip(e)
            clips.append(clip_cache[e.path])
        y = np.array(subset.labels)
        groups = subset.patient_ids
        for n_mfcc in mfcc_list:
            fcfg = base_features.replace(n_mfcc=int(n_mfcc), n_mels=max(base_features.n_mels, int(n_mfcc)))
            x = extract_all(clips, fcfg)
            for r in range(repeats):
                s = derive_seed(seed, r)
                res = train_and_evaluate(x, y, groups, arch, replace(train_cfg, seed=s),
                                         subset.label_names, split_seed=s, ratios=ratios,
                                         grouped=grouped)
                row = {"mfcc": int(n_mfcc), "phonemes": "+".join(phonemes), "repeat": r,
                       "clip_acc": res.eval_report.clip_accuracy,
                       "patient_acc": res.eval_report.patient_accuracy}
                log.info("sweep cell %s", row)
                rows.append(row)
                if on_row is not None:
                    on_row(row)
    return rows
