"""Command-line entry point.

Exit codes: 0 success, 2 input error, 3 configuration error, 4 training
divergence, 5 no voiced audio found.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import classifier as clf
from .audio import AudioClip, read_wav, resample, write_wav
from .config import RunConfig, resolve_config
from .errors import ConfigError, DivergedLoss, ShapeMismatch, VoiceClefError
from .features import FeatureConfig, MfccTensor, extract_mfcc, read_archive, write_archive
from .vad import detect_voice_activity, segment_clip

log = logging.getLogger("voiceclef")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_DIVERGED = 4
EXIT_NO_VOICE = 5


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- helpers

def _stem(path: str) -> str:
    return os.path.splitext(path)[0]


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _provenance(out_path: str, command: str, cfg: RunConfig, **extra) -> str:
    path = out_path + ".provenance.json"
    _write_json(path, {"command": command, "tool_version": __version__, "seed": cfg.seed,
                       "config": cfg.to_dict(), "config_digest": cfg.digest(), **extra})
    return path


def _read_provenance(path: str) -> dict:
    try:
        with open(path + ".provenance.json", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        return {}


def _config(args) -> RunConfig:
    overrides = {
        "seed": getattr(args, "seed", None),
        "features.n_mfcc": getattr(args, "mfcc", None),
        "train.epochs": getattr(args, "epochs", None),
        "arch.preset": getattr(args, "preset", None),
    }
    if overrides["features.n_mfcc"] is not None:
        overrides["features.n_mels"] = max(128, overrides["features.n_mfcc"])
    if getattr(args, "seed", None) is not None:
        overrides["train.seed"] = args.seed
    return resolve_config(getattr(args, "config", None), overrides)


def _wav_inputs(path: str) -> list:
    if os.path.isdir(path):
        files = sorted(f for f in os.listdir(path) if f.lower().endswith(".wav"))
        return [os.path.join(path, f) for f in files]
    if os.path.isfile(path):
        return [path]
    raise CliError(f"input {path!r} not found")


def _load(path: str, rate: int) -> AudioClip:
    try:
        return resample(read_wav(path), rate)
    except (OSError, VoiceClefError) as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc


def _fixed_length(clip: AudioClip, n: int) -> AudioClip:
    if len(clip) < n:
        raise CliError(f"{clip.source_id}: {len(clip)} samples, need {n}")
    if len(clip) == n:
        return clip
    return AudioClip(clip.samples[:n], clip.sample_rate, clip.source_id)


def _align(ds, tensors):
    """Match archive tensors to manifest entries by source id (manifest path)."""
    by_id = {t.source_id: t for t in tensors}
    if any(e.path in by_id for e in ds.entries):
        pairs = [(e, by_id[e.path]) for e in ds.entries if e.path in by_id]
        if len(pairs) != len(tensors):
            raise CliError(f"{len(tensors) - len(pairs)} archive tensors have no manifest row")
        return pairs
    if len(tensors) != len(ds.entries):
        raise CliError(f"archive holds {len(tensors)} tensors but manifest has {len(ds.entries)} rows")
    return list(zip(ds.entries, tensors))


def _manifest_for_archive(manifest: str, features: str, label_names=None):
    from .dataset import filter_phonemes, load_manifest

    ds = load_manifest(manifest, label_names=label_names, strict=label_names is not None,
                       check_files=False)
    prov = _read_provenance(features)
    if prov.get("phonemes"):
        ds = filter_phonemes(ds, prov["phonemes"])
    tensors = read_archive(features, prov.get("feature_digest", ""))
    return ds, _align(ds, tensors), prov


# --------------------------------------------------------------- commands

def cmd_vad(args) -> int:
    cfg = _config(args)
    inputs = _wav_inputs(args.input)
    os.makedirs(args.out, exist_ok=True)
    seg_path = os.path.join(args.out, "segments.csv")
    n_clips = 0
    with open(seg_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "segment", "start", "end", "start_s", "end_s", "clips"])
        for path in inputs:
            clip = _load(path, cfg.features.sample_rate)
            if len(clip) < cfg.vad.frame_len:
                log.warning("%s shorter than one VAD frame, skipped", path)
                continue
            stem = os.path.splitext(os.path.basename(path))[0]
            index = 0
            for s_i, seg in enumerate(detect_voice_activity(clip, cfg.vad)):
                pieces = segment_clip(clip, [seg], cfg.clip_len)
                w.writerow([stem, s_i, seg.start, seg.end, f"{seg.start / clip.sample_rate:.6f}",
                            f"{seg.end / clip.sample_rate:.6f}", len(pieces)])
                for piece in pieces:
                    write_wav(piece, os.path.join(args.out, f"{stem}_{index}.wav"))
                    index += 1
            n_clips += index
    _provenance(os.path.join(args.out, "vad"), "vad", cfg, inputs=[os.path.basename(p) for p in inputs],
                clips=n_clips)
    print(f"{n_clips} clip(s) from {len(inputs)} file(s) -> {args.out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    from .dataset import filter_phonemes, load_manifest
    from .experiments import thread_cap

    cfg = _config(args)
    ds = load_manifest(args.manifest, strict=not args.lenient, check_files=not args.lenient)
    phonemes = None
    if args.phonemes:
        phonemes = [p.strip() for p in args.phonemes.split(",") if p.strip()]
        ds = filter_phonemes(ds, phonemes)
    fcfg = cfg.features
    n = int(round(cfg.clip_len * fcfg.sample_rate))

    def work(entry):
        try:
            clip = _fixed_length(_load(ds.resolve(entry), fcfg.sample_rate), n)
            t = extract_mfcc(clip, fcfg)
        except (CliError, VoiceClefError) as exc:
            return exc
        return MfccTensor(t.coeffs, t.config_digest, entry.path)

    threads = thread_cap()
    if threads > 1 and len(ds.entries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, ds.entries))
    else:
        results = [work(e) for e in ds.entries]
    tensors, failures = [], 0
    for e, r in zip(ds.entries, results):
        if isinstance(r, Exception):
            failures += 1
            log.error("%s: %s", e.path, r)
        else:
            tensors.append(r)
    if failures and not args.lenient:
        raise CliError(f"{failures} file(s) failed to extract")
    write_archive(args.out, tensors)
    _provenance(args.out, "extract", cfg, manifest=os.path.abspath(args.manifest),
                phonemes=phonemes, feature_digest=fcfg.digest(), features=fcfg.to_dict(),
                tensors=len(tensors), failures=failures)
    print(f"wrote {len(tensors)} tensor(s) to {args.out}" + (f" ({failures} failed)" if failures else ""))
    return EXIT_OK


def _curves_csv(path, report: clf.TrainReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_acc", "val_acc", "train_loss", "val_loss"])
        for row in report.curve_rows():
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def cmd_train(args) -> int:
    from .experiments import train_and_evaluate
    from .metrics import roc_to_csv

    cfg = _config(args)
    ds, pairs, prov = _manifest_for_archive(args.manifest, args.features)
    if not pairs:
        raise CliError("no training data")
    shapes = {t.shape for _, t in pairs}
    if len(shapes) != 1:
        raise CliError(f"feature tensors differ in shape: {sorted(shapes)}")
    x = np.stack([t.coeffs for _, t in pairs])
    y = np.array([ds.label_names.index(e.label) for e, _ in pairs])
    groups = [e.patient_id for e, _ in pairs]
    fcfg = FeatureConfig.from_dict(prov["features"]) if prov.get("features") else None

    try:
        res = train_and_evaluate(x, y, groups, cfg.arch, cfg.train, ds.label_names,
                                 split_seed=cfg.seed, ratios=cfg.split.ratios, grouped=cfg.split.grouped,
                                 feature_config=fcfg)
    except DivergedLoss as exc:
        raise CliError(f"training diverged: {exc}", EXIT_DIVERGED) from exc

    stem = _stem(args.out)
    clf.save_model(res.model, args.out)
    rep = res.train_report.to_dict()
    rep["test_clip_accuracy"] = res.eval_report.clip_accuracy
    rep["test_patient_accuracy"] = res.eval_report.patient_accuracy
    rep["split_sizes"] = [int(len(s)) for s in res.split]
    _write_json(stem + ".report.json", rep)
    _curves_csv(stem + ".curves.csv", res.train_report)
    with open(stem + ".split.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "patient_id", "split"])
        names = {}
        for split_name, idx in zip(("train", "val", "test"), res.split):
            for i in idx:
                names[int(i)] = split_name
        for i, (e, _) in enumerate(pairs):
            w.writerow([e.path, e.patient_id, names[i]])
    _write_json(stem + ".test.json", res.eval_report.to_dict())
    with open(stem + ".test.roc.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(roc_to_csv(res.eval_report))
    if not args.no_figures:
        from . import plotting
        plotting.training_curves(res.train_report, stem + ".curves.png")
        plotting.confusion(res.eval_report, stem + ".test.confusion.png")
        plotting.roc(res.eval_report, stem + ".test.roc.png")
    _provenance(args.out, "train", cfg, features=os.path.abspath(args.features),
                manifest=os.path.abspath(args.manifest))
    print(f"epochs {res.train_report.epochs_run} (best {res.train_report.best_epoch}); "
          f"test clip accuracy {res.eval_report.clip_accuracy:.4f}, "
          f"patient accuracy {res.eval_report.patient_accuracy:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .metrics import evaluate, roc_to_csv

    try:
        model = clf.load_model(args.model)
    except (OSError, VoiceClefError) as exc:
        raise CliError(f"cannot load model {args.model}: {exc}") from exc
    ds, pairs, prov = _manifest_for_archive(args.manifest, args.features, model.label_names)
    want = FeatureConfig.from_dict(model.feature_config).digest() if model.feature_config else None
    have = prov.get("feature_digest")
    if want and have and want != have:
        raise CliError(f"features were extracted with config {have}, model expects {want}")
    if args.split_file:
        with open(args.split_file, newline="", encoding="utf-8") as fh:
            member = {r["path"]: r["split"] for r in csv.DictReader(fh)}
        pairs = [(e, t) for e, t in pairs if member.get(e.path) == args.split]
    if not pairs:
        raise CliError("nothing to evaluate")
    x = np.stack([t.coeffs for _, t in pairs])
    y = [model.label_names.index(e.label) for e, _ in pairs]
    try:
        report = evaluate(model, x, y, [e.patient_id for e, _ in pairs])
    except ShapeMismatch as exc:
        raise CliError(str(exc)) from exc
    _write_json(args.report, report.to_dict())
    stem = _stem(args.report)
    with open(stem + ".roc.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(roc_to_csv(report))
    if not args.no_figures:
        from . import plotting
        plotting.confusion(report, stem + ".confusion.png")
        plotting.roc(report, stem + ".roc.png")
    cfg = resolve_config(None, {})
    _provenance(args.report, "eval", cfg, model=os.path.abspath(args.model),
                features=os.path.abspath(args.features), split=args.split if args.split_file else "all")
    print(f"clip accuracy {report.clip_accuracy:.4f}; patient accuracy {report.patient_accuracy:.4f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    from .metrics import patient_vote

    try:
        model = clf.load_model(args.model)
    except (OSError, VoiceClefError) as exc:
        raise CliError(f"cannot load model {args.model}: {exc}") from exc
    cfg = _config(args)
    fcfg = FeatureConfig.from_dict(model.feature_config) if model.feature_config else cfg.features
    clip = _load(args.input, fcfg.sample_rate)
    n = int(round(cfg.clip_len * fcfg.sample_rate))
    pieces = []
    if len(clip) >= cfg.vad.frame_len:
        pieces = segment_clip(clip, detect_voice_activity(clip, cfg.vad), cfg.clip_len)
    if not pieces:
        raise CliError(f"{args.input}: no voiced audio found", EXIT_NO_VOICE)
    results = []
    for piece in pieces:
        label, probs = clf.predict(model, extract_mfcc(_fixed_length(piece, n), fcfg))
        results.append((label, probs))
    voted = patient_vote(results)
    names = model.label_names
    if args.json:
        out = {
            "clips": [{"index": i, "label": names[lab],
                       "probabilities": {names[k]: float(p[k]) for k in range(len(names))}}
                      for i, (lab, p) in enumerate(results)],
            "voted": names[voted],
        }
        print(json.dumps(out, indent=2))
    else:
        for i, (lab, p) in enumerate(results):
            print(f"clip {i}: {names[lab]} (p={p[lab]:.4f})")
        print(f"voted: {names[voted]}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .dataset import load_manifest
    from .experiments import SWEEP_COLUMNS, parse_phoneme_sets, run_sweep

    cfg = _config(args)
    ds = load_manifest(args.manifest)
    try:
        mfcc_list = [int(v) for v in args.mfcc_list.split(",") if v.strip()]
        sets = parse_phoneme_sets(args.phoneme_sets)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    n = int(round(cfg.clip_len * cfg.features.sample_rate))
    load = lambda e: _fixed_length(_load(ds.resolve(e), cfg.features.sample_rate), n)  # noqa: E731

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        fh.flush()

        def flush(row):
            w.writerow({**row, "clip_acc": repr(row["clip_acc"]), "patient_acc": repr(row["patient_acc"])})
            fh.flush()

        try:
            rows = run_sweep(ds, load, mfcc_list, sets, args.repeats, cfg.features, cfg.arch, cfg.train,
                             seed=cfg.seed, on_row=flush, ratios=cfg.split.ratios, grouped=cfg.split.grouped)
        except DivergedLoss as exc:
            raise CliError(f"training diverged: {exc}", EXIT_DIVERGED) from exc
    if not args.no_figures and rows:
        from . import plotting
        plotting.sweep(rows, _stem(args.out) + ".png")
    _provenance(args.out, "sweep", cfg, manifest=os.path.abspath(args.manifest), mfcc_list=mfcc_list,
                phoneme_sets=[list(s) for s in sets], repeats=args.repeats)
    print(f"{len(rows)} cell(s) -> {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import SyntheticSpec, write_corpus

    spec = SyntheticSpec(patients_per_class=args.patients, clips_per_patient=args.clips,
                         separation=args.separation, snr_db=args.snr, seed=args.seed)
    manifest = write_corpus(args.out, spec)
    print(f"wrote {4 * spec.patients_per_class * spec.clips_per_patient} clip(s); manifest {manifest}")
    return EXIT_OK


def _parse_label_map(text: str) -> dict:
    if os.path.isfile(text):
        with open(text, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or not {"diagnosis", "label"} <= set(reader.fieldnames):
                raise CliError(f"{text}: label map CSV needs columns diagnosis,label", EXIT_CONFIG)
            return {r["diagnosis"].strip(): r["label"].strip() for r in reader}
    out = {}
    for pair in text.split(","):
        if "=" not in pair:
            raise CliError(f"bad label-map entry {pair!r}; expected CODE=label", EXIT_CONFIG)
        k, v = pair.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_import_avfad(args) -> int:
    from .dataset import AVFAD_PATTERN, import_avfad, read_subject_metadata

    cfg = _config(args)
    meta = read_subject_metadata(args.metadata) if args.metadata else None
    res = import_avfad(args.root, args.vowels.split(","), _parse_label_map(args.label_map), args.out,
                       cfg.vad, cfg.clip_len, cfg.features.sample_rate, args.pattern or AVFAD_PATTERN, meta)
    print(f"{len(res.dataset)} clip(s) -> {res.manifest_path}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="voiceclef", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="TOML run configuration")
        if seed:
            sp.add_argument("--seed", type=int)

    sp = sub.add_parser("vad", help="cut voiced audio into 0.5 s clips")
    sp.add_argument("--input", required=True, help="WAV file or directory of WAVs")
    sp.add_argument("--out", required=True)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_vad)

    sp = sub.add_parser("extract", help="MFCC features for every manifest row")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True, help="output .vmfc archive")
    sp.add_argument("--mfcc", type=int, help="number of MFCCs (13, 40, 50, 128, ...)")
    sp.add_argument("--phonemes", help="comma-separated phoneme filter, e.g. a,i,u")
    sp.add_argument("--lenient", action="store_true", help="skip unreadable files instead of failing")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("train", help="split, train and save a model")
    sp.add_argument("--features", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True, help="output .vclf model")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--preset", choices=sorted(clf.PRESETS))
    sp.add_argument("--no-figures", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a model on extracted features")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--report", required=True, help="output JSON report")
    sp.add_argument("--split-file", help="split CSV written by train")
    sp.add_argument("--split", default="test", choices=("train", "val", "test"))
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("predict", help="classify one recording and vote over its clips")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--json", action="store_true")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("sweep", help="MFCC-count x phoneme-set experiment grid")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--mfcc-list", default="13,40,50,128")
    sp.add_argument("--phoneme-sets", default="i|a,i|a,i,u")
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--out", default="sweep.csv")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--no-figures", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("synth", help="write the synthetic four-class corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--patients", type=int, default=25, help="patients per class")
    sp.add_argument("--clips", type=int, default=4, help="clips per patient")
    sp.add_argument("--separation", type=float, default=1.0)
    sp.add_argument("--snr", type=float, default=20.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("import-avfad", help="segment AVFAD vowel recordings into a manifest")
    sp.add_argument("--root", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--vowels", default="a,i,u")
    sp.add_argument("--label-map", required=True, help="CODE=label,... or a diagnosis,label CSV")
    sp.add_argument("--metadata", help="subject,diagnosis CSV")
    sp.add_argument("--pattern", help="regex with named groups subject and vowel")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_import_avfad)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergedLoss as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (VoiceClefError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
