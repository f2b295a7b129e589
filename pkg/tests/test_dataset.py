import numpy as np
import pytest

from voiceclef.audio import AudioClip, write_wav
from voiceclef.classifier import DEFAULT_LABELS
from voiceclef.config import resolve_config
from voiceclef.dataset import (Dataset, filter_phonemes, fold_phoneme, import_avfad, load_manifest,
                               reference_entries, write_manifest)
from voiceclef.errors import (ConfigError, DuplicatePath, EmptyResult, MissingColumn, NoMatchingFiles,
                              RootNotFound, UnknownLabel, UnmappedDiagnosis, UnreadableFile)


def write_csv(path, rows, header="path,patient_id,label,phoneme"):
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return path


def reference_manifest(tmp_path):
    path = tmp_path / "reference.csv"
    write_manifest(path, reference_entries())
    return load_manifest(path, DEFAULT_LABELS, check_files=False)


def test_four_row_manifest(tmp_path):
    rows = [f"c{i}.wav,p{i},{name},a" for i, name in enumerate(DEFAULT_LABELS)]
    for i in range(4):
        (tmp_path / f"c{i}.wav").write_bytes(b"")
    ds = load_manifest(write_csv(tmp_path / "m.csv", rows), DEFAULT_LABELS)
    assert len(ds) == 4 and ds.labels == [0, 1, 2, 3]
    assert ds.resolve(ds.entries[0]) == str(tmp_path / "c0.wav")


def test_unknown_label_names_row(tmp_path):
    path = write_csv(tmp_path / "m.csv", ["a.wav,p1,vocal_cord_polyps,a", "b.wav,p2,cyst,a"])
    with pytest.raises(UnknownLabel, match=r"m\.csv:3.*cyst"):
        load_manifest(path, DEFAULT_LABELS, check_files=False)


def test_manifest_errors(tmp_path):
    with pytest.raises(MissingColumn):
        load_manifest(write_csv(tmp_path / "a.csv", ["x.wav,p,l"], "path,patient_id,label"))
    with pytest.raises(DuplicatePath):
        load_manifest(write_csv(tmp_path / "b.csv", ["x.wav,p,l,a", "x.wav,q,l,a"]), check_files=False)
    with pytest.raises(UnreadableFile):
        load_manifest(write_csv(tmp_path / "c.csv", ["gone.wav,p,l,a"]))
    with pytest.raises(UnreadableFile):
        load_manifest(tmp_path / "nope.csv")
    lenient = load_manifest(tmp_path / "c.csv", strict=False)
    assert len(lenient) == 0
    with pytest.raises(EmptyResult):
        load_manifest(write_csv(tmp_path / "d.csv", ["x.wav,p,vocal_cord_polyps,a"]), DEFAULT_LABELS,
                      check_files=False)


def test_reference_layout_counts(tmp_path):
    ds = reference_manifest(tmp_path)
    assert len(ds) == 1464
    assert list(ds.class_counts().values()) == [288, 432, 264, 480]
    assert ds.validate() is ds
    assert {e.phoneme for e in ds} == {"a", "o", "e", "i", "u", "v", "w", "ei"}
    assert any(e.phoneme_display == "ü" for e in ds)


def test_phoneme_filters(tmp_path):
    ds = reference_manifest(tmp_path)
    only_a = filter_phonemes(ds, ["a"])
    assert len(only_a) == 183
    assert len(filter_phonemes(ds, ["a", "o", "e", "i", "u", "ü", "w", "ei"])) == len(ds)
    aiu = filter_phonemes(ds, ["a", "i", "u"]).class_counts()
    assert aiu == {k: 3 * v for k, v in only_a.class_counts().items()}
    assert fold_phoneme("/Ü/") == "v"
    with pytest.raises(EmptyResult):
        filter_phonemes(ds, ["x"])


def test_dataset_revalidation_is_idempotent(tmp_path):
    ds = reference_manifest(tmp_path)
    again = Dataset(list(ds.entries), ds.label_names, ds.root)
    assert again.entries == ds.entries


def _recording(seconds_voiced, path, sr=16000):
    t = np.arange(int(seconds_voiced * sr)) / sr
    pad = np.zeros(int(0.4 * sr))
    write_wav(AudioClip(np.concatenate([pad, 0.5 * np.sin(2 * np.pi * 220 * t), pad]), sr), path)


def test_avfad_import(tmp_path):
    root = tmp_path / "avfad"
    root.mkdir()
    _recording(2.1, root / "SD001_a.wav")
    _recording(1.0, root / "SD001_o.wav")  # vowel not requested
    out = tmp_path / "out"
    res = import_avfad(root, ["a"], {"SD": "spasmodic_dysphonia"}, out)
    assert len(res.dataset) == 4
    assert {e.patient_id for e in res.dataset} == {"SD001"}
    ds = load_manifest(res.manifest_path)
    assert [e.path for e in ds] == [f"clips/SD001_a_{i}.wav" for i in range(4)]
    first = (out / "manifest.generated.csv").read_bytes()
    prov = (out / "manifest.generated.provenance.json").read_bytes()
    import_avfad(root, ["a"], {"SD": "spasmodic_dysphonia"}, out)
    assert (out / "manifest.generated.csv").read_bytes() == first
    assert (out / "manifest.generated.provenance.json").read_bytes() == prov


def test_avfad_errors(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(NoMatchingFiles):
        import_avfad(empty, ["a"], {}, tmp_path / "o")
    with pytest.raises(RootNotFound):
        import_avfad(tmp_path / "missing", ["a"], {}, tmp_path / "o")
    _recording(0.6, empty / "XX1_a.wav")
    with pytest.raises(UnmappedDiagnosis):
        import_avfad(empty, ["a"], {"SD": "spasmodic_dysphonia"}, tmp_path / "o")


# ------------------------------------------------------------------ config

def test_config_defaults_and_overrides(tmp_path):
    cfg = resolve_config()
    assert cfg.arch.input_shape == (1, 128, 48)
    path = tmp_path / "run.toml"
    path.write_text('seed = 7\n[features]\nn_mfcc = 40\npre_emphasis = false\n[train]\nepochs = 3\n')
    cfg = resolve_config(path, {"train.epochs": 9, "features.n_fft": None})
    assert cfg.seed == 7 and cfg.train.seed == 7
    assert cfg.features.n_mfcc == 40 and cfg.features.pre_emphasis is None
    assert cfg.train.epochs == 9
    assert cfg.arch.input_shape == (1, 40, 48)
    assert resolve_config(path).digest() == resolve_config(path).digest()
    assert resolve_config(overrides={"arch.preset": "paper-8192"}).arch.flatten_size == 8192


@pytest.mark.parametrize("text", ["[feature]\nn_mfcc=3\n", "[train]\nepoch = 3\n", "[arch]\npreset='big'\n",
                                  "[split]\nratios=[0.5,0.5,0.5]\n", "seed = [", "[features]\nn_fft=100\n"])
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        resolve_config(path)
