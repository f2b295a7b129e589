import numpy as np
import pytest

from voiceclef.classifier import ArchConfig, TrainConfig
from voiceclef.experiments import derive_seed, extract_all, parse_phoneme_sets, train_and_evaluate
from voiceclef.features import FeatureConfig
from voiceclef.synthetic import SyntheticSpec, class_formants, generate


def test_seed_derivation():
    seeds = [derive_seed(0, r) for r in range(5)]
    assert len(set(seeds)) == 5
    assert derive_seed(0, 3) == seeds[3]
    assert derive_seed(1, 3) != seeds[3]


def test_phoneme_set_parsing():
    assert parse_phoneme_sets("i|a,i|a,i,u") == [("i",), ("a", "i"), ("a", "i", "u")]
    with pytest.raises(ValueError):
        parse_phoneme_sets("|")


def test_generator_layout():
    items = generate(SyntheticSpec(patients_per_class=3, clips_per_patient=2))
    assert len(items) == 24
    assert {i.label for i in items} == {0, 1, 2, 3}
    assert all(len(i.clip) == 8000 and np.max(np.abs(i.clip.samples)) <= 0.5 + 1e-12 for i in items)
    assert len({class_formants(k) for k in range(4)}) == 4
    again = generate(SyntheticSpec(patients_per_class=3, clips_per_patient=2))
    assert all(np.array_equal(a.clip.samples, b.clip.samples) for a, b in zip(items, again))


def test_threaded_extraction_matches_serial(small_corpus):
    clips = [i.clip for i in small_corpus[:8]]
    cfg = FeatureConfig(n_mfcc=13)
    np.testing.assert_array_equal(extract_all(clips, cfg, threads=1), extract_all(clips, cfg, threads=3))


@pytest.mark.slow
def test_accuracy_tracks_separability():
    cfg = FeatureConfig(n_mfcc=13)
    arch = ArchConfig(input_shape=(1, 13, 48), hidden_sizes=(32, 16))
    means = []
    for sep in (0.0, 0.05, 0.15, 1.0):
        items = generate(SyntheticSpec(patients_per_class=10, clips_per_patient=2, separation=sep, seed=11))
        x = extract_all([i.clip for i in items], cfg)
        y = [i.label for i in items]
        groups = [i.patient_id for i in items]
        accs = [train_and_evaluate(x, y, groups, arch, TrainConfig(epochs=15, seed=r), split_seed=r,
                                   ratios=(0.6, 0.2, 0.2)).eval_report.clip_accuracy for r in range(3)]
        means.append(np.mean(accs))
    assert all(a <= b for a, b in zip(means, means[1:])), means
    assert means[-1] > means[0]
