import numpy as np
import pytest

from voiceclef import classifier as clf
from voiceclef import nn
from voiceclef.errors import BadMagic, InvalidArch, ShapeMismatch, TruncatedFile, VersionMismatch
from voiceclef.features import FeatureConfig

SMALL = clf.ArchConfig(input_shape=(1, 13, 12), conv_channels=4, hidden_sizes=(16, 8))


def test_flatten_size():
    assert clf.ArchConfig().flatten_size == 8 * 126 * 46 == 46368
    assert clf.PRESETS["paper-8192"].flatten_size == 8192


@pytest.mark.parametrize("kw", [{"input_shape": (1, 2, 10)}, {"n_classes": 1}, {"kernel": 5},
                                {"conv_activation": "sigmoid"}, {"dropout_p": 1.0}])
def test_invalid_arch(kw):
    with pytest.raises(InvalidArch):
        clf.ArchConfig(**kw)


def test_layout():
    model = clf.build_model(clf.ArchConfig(), nn.make_rng(0))
    kinds = [type(l).__name__ for l in model.network.layers]
    assert kinds == ["Conv2D", "Tanh", "Dropout", "Flatten", "Dense", "ReLU", "Dense", "ReLU", "Dense"]
    assert kinds.count("Conv2D") == 1
    assert model.network.layers[0].kernels.shape == (8, 1, 3, 3)
    assert model.network.layers[-1].weights.shape == (64, 4)
    assert len(model.label_names) == 4


def test_init_is_seeded():
    a = clf.build_model(SMALL, nn.make_rng(9)).parameters()
    b = clf.build_model(SMALL, nn.make_rng(9)).parameters()
    c = clf.build_model(SMALL, nn.make_rng(10)).parameters()
    for k in a:
        assert a[k].tobytes() == b[k].tobytes()
    assert any(a[k].tobytes() != c[k].tobytes() for k in a)


def test_forward_contract(rng):
    model = clf.build_model(SMALL, nn.make_rng(0))
    x = rng.normal(size=(13, 12))
    p = clf.forward(model, x)
    assert p.shape == (4,) and np.all((p > 0) & (p < 1)) and p.sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(clf.forward(model, x), p)
    label, probs = clf.predict(model, x)
    assert label == int(np.argmax(clf.forward(model, x)))
    noisy = clf.ArchConfig(input_shape=(1, 13, 12), conv_channels=4, hidden_sizes=(16, 8), dropout_p=0.5)
    m2 = clf.build_model(noisy, nn.make_rng(0))
    a = clf.forward(m2, x, training=True, rng=nn.make_rng(1))
    b = clf.forward(m2, x, training=True, rng=nn.make_rng(2))
    assert not np.array_equal(a, b)
    with pytest.raises(ShapeMismatch):
        clf.forward(model, np.zeros((13, 11)))


def test_argmax_ties_go_low():
    model = clf.build_model(SMALL, nn.make_rng(0))
    last = model.network.layers[-1]
    last.weights[:] = 0
    last.bias[:] = [0.0, 3.0, 0.0, 0.0]
    assert clf.predict(model, np.zeros((13, 12)))[0] == 1
    last.bias[:] = 0
    label, probs = clf.predict(model, np.zeros((13, 12)))
    assert label == 0
    np.testing.assert_allclose(probs, 0.25)


def test_memorizes_four_samples(rng):
    x = rng.normal(size=(4, 13, 12))
    y = np.arange(4)
    model = clf.build_model(SMALL, nn.make_rng(0))
    cfg = clf.TrainConfig(epochs=200, batch_size=4, early_stop_patience=None)
    model, rep = clf.train(model, (x, y), (x, y), cfg)
    assert max(rep.train_acc) == 1.0
    assert clf.predict_batch(model, x)[0].tolist() == [0, 1, 2, 3]


def test_training_is_deterministic(rng):
    x = rng.normal(size=(24, 13, 12))
    y = rng.integers(0, 4, 24)
    cfg = clf.TrainConfig(epochs=5, batch_size=8)
    runs = []
    for _ in range(2):
        model = clf.build_model(SMALL, nn.make_rng(3))
        model, rep = clf.train(model, (x[:16], y[:16]), (x[16:], y[16:]), cfg)
        runs.append((clf.model_to_bytes(model), rep.to_dict()))
    assert runs[0] == runs[1]


def test_report_has_one_entry_per_epoch(rng):
    x = rng.normal(size=(12, 13, 12))
    y = rng.integers(0, 4, 12)
    model = clf.build_model(SMALL, nn.make_rng(0))
    _, rep = clf.train(model, (x, y), (x, y), clf.TrainConfig(epochs=7, early_stop_patience=None))
    assert rep.epochs_run == 7 == len(rep.val_acc) == len(rep.train_loss) == len(list(rep.curve_rows()))
    assert 1 <= rep.best_epoch <= 7


def _trained(rng):
    model = clf.build_model(SMALL, nn.make_rng(0), label_names=("a", "b", "c", "d"))
    model.feature_config = FeatureConfig(n_mfcc=13).to_dict()
    x = rng.normal(size=(8, 13, 12))
    model, _ = clf.train(model, (x, np.arange(8) % 4), (x, np.arange(8) % 4), clf.TrainConfig(epochs=2))
    return model


def test_save_load_roundtrip(tmp_path, rng):
    model = _trained(rng)
    path = tmp_path / "m.vclf"
    clf.save_model(model, path)
    back = clf.load_model(path)
    assert back.arch == model.arch
    assert back.label_names == model.label_names
    assert back.feature_config == model.feature_config
    for k, v in model.parameters().items():
        assert back.parameters()[k].tobytes() == v.tobytes()
    np.testing.assert_array_equal(back.norm_mean, model.norm_mean)
    x = rng.normal(size=(13, 12))
    np.testing.assert_array_equal(clf.forward(back, x), clf.forward(model, x))
    assert clf.model_to_bytes(back) == path.read_bytes()


def test_corrupt_files(rng):
    data = clf.model_to_bytes(_trained(rng))
    with pytest.raises(BadMagic):
        clf.model_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(VersionMismatch):
        clf.model_from_bytes(data[:4] + (99).to_bytes(4, "little") + data[8:])
    for cut in (6, 40, len(data) - 1):
        with pytest.raises(TruncatedFile):
            clf.model_from_bytes(data[:cut])


def test_inference_ignores_dropout_rate(rng):
    x = rng.normal(size=(3, 13, 12))
    outs = []
    for p in (0.0, 0.3, 0.9):
        arch = clf.ArchConfig(input_shape=(1, 13, 12), conv_channels=4, hidden_sizes=(16, 8), dropout_p=p)
        outs.append(clf.forward(clf.build_model(arch, nn.make_rng(0)), x))
    np.testing.assert_array_equal(outs[0], outs[1])
    np.testing.assert_array_equal(outs[0], outs[2])
