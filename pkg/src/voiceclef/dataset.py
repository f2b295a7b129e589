"""Manifest-driven datasets and an importer for AVFAD-style recordings.

A manifest is a UTF-8 CSV with header ``path,patient_id,label,phoneme``;
paths are relative to the manifest's directory. An optional
``phoneme_display`` column keeps the original glyph of folded tags.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import re
import unicodedata
from dataclasses import dataclass, field, replace

from .errors import (DuplicatePath, EmptyResult, MissingColumn, NoMatchingFiles, RootNotFound,
                     UnknownLabel, UnmappedDiagnosis, UnreadableFile)

log = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("path", "patient_id", "label", "phoneme")
PHONEMES = ("a", "o", "e", "i", "u", "v", "w", "ei")

# reference corpus: clips per phoneme for each class (8 phonemes each)
REFERENCE_COUNTS = {
    "spasmodic_dysphonia": 36,
    "vocal_cord_paralysis": 54,
    "vocal_cord_nodules": 33,
    "vocal_cord_polyps": 60,
}

_FOLD = {"ü": "v", "Ü": "v"}


def fold_phoneme(tag: str) -> str:
    """ASCII-fold a phoneme tag; ``ü`` maps to ``v`` as in pinyin input."""
    tag = tag.strip()
    tag = "".join(_FOLD.get(ch, ch) for ch in tag)
    tag = unicodedata.normalize("NFKD", tag).encode("ascii", "ignore").decode("ascii")
    return tag.strip("/").lower()


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    patient_id: str
    label: str
    phoneme: str
    phoneme_display: str = ""


@dataclass
class Dataset:
    entries: list
    label_names: tuple
    root: str = "."
    strict: bool = True

    def __post_init__(self):
        self.label_names = tuple(self.label_names)
        self.validate()

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def validate(self) -> "Dataset":
        known = set(self.label_names)
        seen = set()
        for i, e in enumerate(self.entries):
            if e.label not in known:
                raise UnknownLabel(f"entry {i} ({e.path}): label {e.label!r} not in {self.label_names}")
            if e.path in seen:
                raise DuplicatePath(f"entry {i}: duplicate path {e.path!r}")
            seen.add(e.path)
        return self

    def resolve(self, entry: ManifestEntry) -> str:
        return os.path.normpath(os.path.join(self.root, entry.path))

    def label_index(self, entry: ManifestEntry) -> int:
        return self.label_names.index(entry.label)

    @property
    def labels(self) -> list:
        return [self.label_index(e) for e in self.entries]

    @property
    def patient_ids(self) -> list:
        return [e.patient_id for e in self.entries]

    def class_counts(self) -> dict:
        counts = {name: 0 for name in self.label_names}
        for e in self.entries:
            counts[e.label] += 1
        return counts


def load_manifest(csv_path, label_names=None, strict: bool = True, check_files: bool = True) -> Dataset:
    """Read and validate a manifest CSV, keeping file order.

    ``label_names`` pins the class list and its order; otherwise labels are
    taken in order of first appearance. In strict mode a missing audio file
    raises, every configured label must occur, and unknown labels raise; in
    lenient mode missing files are skipped with a warning.
    """
    csv_path = os.fspath(csv_path)
    root = os.path.dirname(os.path.abspath(csv_path))
    try:
        fh = open(csv_path, newline="", encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"cannot open manifest {csv_path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{csv_path}: missing column(s) {', '.join(missing)}")
        rows = list(reader)

    inferred = []
    entries = []
    seen = set()
    for lineno, row in enumerate(rows, start=2):
        label = row["label"].strip()
        if label_names is not None and label not in label_names:
            raise UnknownLabel(f"{csv_path}:{lineno}: unknown label {label!r}")
        if label not in inferred:
            inferred.append(label)
        path = row["path"].strip()
        if path in seen:
            raise DuplicatePath(f"{csv_path}:{lineno}: duplicate path {path!r}")
        seen.add(path)
        raw_ph = row["phoneme"]
        entry = ManifestEntry(path, row["patient_id"].strip(), label, fold_phoneme(raw_ph),
                              (row.get("phoneme_display") or raw_ph).strip())
        if check_files and not os.path.isfile(os.path.join(root, path)):
            if strict:
                raise UnreadableFile(f"{csv_path}:{lineno}: audio file {path!r} not found")
            log.warning("%s:%d: skipping missing file %s", csv_path, lineno, path)
            continue
        entries.append(entry)

    names = tuple(label_names) if label_names is not None else tuple(inferred)
    ds = Dataset(entries, names, root, strict)
    if strict and label_names is not None:
        absent = [n for n, c in ds.class_counts().items() if c == 0]
        if absent:
            raise EmptyResult(f"{csv_path}: no entries for label(s) {', '.join(absent)}")
    return ds


def write_manifest(path, entries) -> None:
    entries = list(entries)
    with_display = any(e.phoneme_display and e.phoneme_display != e.phoneme for e in entries)
    cols = list(MANIFEST_COLUMNS) + (["phoneme_display"] if with_display else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for e in entries:
            row = [e.path, e.patient_id, e.label, e.phoneme]
            if with_display:
                row.append(e.phoneme_display or e.phoneme)
            w.writerow(row)


def filter_phonemes(ds: Dataset, phonemes) -> Dataset:
    wanted = {fold_phoneme(p) for p in phonemes}
    if not wanted:
        raise ValueError("phoneme set must be non-empty")
    kept = [e for e in ds.entries if e.phoneme in wanted]
    if ds.strict and not kept:
        raise EmptyResult(f"no entries with phoneme in {sorted(wanted)}")
    return replace(ds, entries=kept)


def reference_entries(label_names=None) -> list:
    """Synthetic manifest rows mirroring the reference corpus layout (no audio attached)."""
    names = list(label_names or REFERENCE_COUNTS)
    glyphs = ("a", "o", "e", "i", "u", "ü", "w", "ei")
    entries = []
    for name, per_phoneme in zip(names, REFERENCE_COUNTS.values()):
        for glyph in glyphs:
            ph = fold_phoneme(glyph)
            for k in range(per_phoneme):
                # three readings per phoneme per patient
                pid = f"{name}-{k // 3:03d}"
                entries.append(ManifestEntry(f"{name}/{ph}/{k:03d}.wav", pid, name, ph, glyph))
    return entries


# -------------------------------------------------------------------- AVFAD

AVFAD_PATTERN = r"^(?P<subject>[A-Za-z]+\d+)[_-]?(?P<vowel>[aiu])\d*$"


@dataclass
class AvfadImport:
    dataset: Dataset
    manifest_path: str
    provenance_path: str
    skipped: list = field(default_factory=list)


def _diagnosis_of(subject: str, metadata: dict | None) -> str:
    if metadata is not None:
        return metadata.get(subject, "")
    return re.match(r"[A-Za-z]+", subject).group(0).upper()


def read_subject_metadata(path) -> dict:
    """``subject,diagnosis`` CSV -> dict."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"subject", "diagnosis"} <= set(reader.fieldnames):
            raise MissingColumn(f"{path}: need columns subject,diagnosis")
        return {r["subject"].strip(): r["diagnosis"].strip() for r in reader}


def import_avfad(root_dir, vowels, label_map: dict, out_dir, vad_cfg=None, clip_len: float = 0.5,
                 sample_rate: int = 16000, pattern: str = AVFAD_PATTERN, metadata: dict | None = None,
                 label_names=None) -> AvfadImport:
    """Segment sustained-vowel recordings into clips and write a manifest.

    Recording stems are matched against ``pattern`` (named groups
    ``subject`` and ``vowel``). The diagnosis code comes from ``metadata``
    (subject -> code) or, failing that, the subject's leading letters, and
    ``label_map`` turns it into a class label. Clips go to
    ``out_dir/clips``; ``out_dir/manifest.generated.csv`` and a provenance
    sidecar are rewritten on every run.
    """
    from . import __version__
    from .audio import read_wav, resample, write_wav
    from .vad import VadConfig, detect_voice_activity, segment_clip

    root_dir = os.fspath(root_dir)
    if not os.path.isdir(root_dir):
        raise RootNotFound(f"AVFAD root {root_dir!r} is not a directory")
    vowels = {fold_phoneme(v) for v in vowels}
    rx = re.compile(pattern)
    found = []
    for dirpath, dirnames, filenames in os.walk(root_dir):
        dirnames.sort()
        for name in sorted(filenames):
            stem, ext = os.path.splitext(name)
            if ext.lower() != ".wav":
                continue
            m = rx.match(stem)
            if m and m.group("vowel").lower() in vowels:
                found.append((os.path.join(dirpath, name), m.group("subject"), m.group("vowel").lower()))
    if not found:
        raise NoMatchingFiles(f"no recordings for vowels {sorted(vowels)} under {root_dir}")

    vad_cfg = vad_cfg or VadConfig()
    clip_dir = os.path.join(out_dir, "clips")
    os.makedirs(clip_dir, exist_ok=True)
    entries = []
    skipped = []
    for path, subject, vowel in found:
        diagnosis = _diagnosis_of(subject, metadata)
        if diagnosis not in label_map:
            raise UnmappedDiagnosis(f"{path}: diagnosis {diagnosis!r} has no entry in the label map")
        label = label_map[diagnosis]
        clip = resample(read_wav(path), sample_rate)
        if len(clip) < vad_cfg.frame_len:
            skipped.append(path)
            continue
        pieces = segment_clip(clip, detect_voice_activity(clip, vad_cfg), clip_len)
        if not pieces:
            skipped.append(path)
        stem = os.path.splitext(os.path.basename(path))[0]
        for i, piece in enumerate(pieces):
            rel = f"clips/{stem}_{i}.wav"
            write_wav(piece, os.path.join(out_dir, rel))
            entries.append(ManifestEntry(rel, subject, label, vowel))

    names = tuple(label_names) if label_names else tuple(dict.fromkeys(label_map.values()))
    manifest = os.path.join(out_dir, "manifest.generated.csv")
    write_manifest(manifest, entries)
    provenance = os.path.join(out_dir, "manifest.generated.provenance.json")
    with open(provenance, "w", encoding="utf-8") as fh:
        json.dump({
            "root": os.path.abspath(root_dir),
            "vowels": sorted(vowels),
            "label_map": dict(sorted(label_map.items())),
            "clip_len": clip_len,
            "sample_rate": sample_rate,
            "pattern": pattern,
            "vad": vad_cfg.__dict__,
            "recordings": len(found),
            "clips": len(entries),
            "skipped": [os.path.relpath(p, root_dir) for p in skipped],
            "tool_version": __version__,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    ds = Dataset(entries, names, os.path.abspath(out_dir), strict=False)
    return AvfadImport(ds, manifest, provenance, skipped)
