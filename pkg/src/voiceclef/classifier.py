"""Single-convolution voice classifier: build, train, predict, serialize.

Layer order: conv 3x3 -> tanh -> dropout -> flatten -> dense+ReLU ->
dense+ReLU -> dense -> softmax.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .errors import (BadMagic, DivergedLoss, EmptyDataset, InvalidArch, ShapeMismatch,
                     TruncatedFile, VersionMismatch)

log = logging.getLogger(__name__)

DEFAULT_LABELS = (
    "spasmodic_dysphonia",
    "vocal_cord_paralysis",
    "vocal_cord_nodules",
    "vocal_cord_polyps",
)

MODEL_MAGIC = b"VCLF"
MODEL_VERSION = 1
_ACTIVATIONS = ("tanh", "relu")


@dataclass(frozen=True)
class ArchConfig:
    input_shape: tuple = (1, 128, 48)
    conv_channels: int = 8
    kernel: int = 3
    dropout_p: float = 0.1
    hidden_sizes: tuple = (256, 64)
    n_classes: int = 4
    # swap only for the activation-contrast experiment
    conv_activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "hidden_sizes", tuple(int(v) for v in self.hidden_sizes))
        if len(self.input_shape) != 3 or self.input_shape[0] != 1:
            raise InvalidArch(f"input_shape must be (1, rows, frames), got {self.input_shape}")
        if self.kernel != 3:
            raise InvalidArch("the convolution kernel is fixed at 3x3")
        if self.conv_channels < 1:
            raise InvalidArch("conv_channels must be >= 1")
        if self.flatten_size <= 0:
            raise InvalidArch(f"input {self.input_shape} too small for a 3x3 valid convolution")
        if self.n_classes < 2:
            raise InvalidArch("need at least two classes")
        if len(self.hidden_sizes) != 2 or min(self.hidden_sizes) < 1:
            raise InvalidArch("hidden_sizes must hold two positive widths")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidArch("dropout_p must be in [0, 1)")
        if self.conv_activation not in _ACTIVATIONS:
            raise InvalidArch(f"conv_activation must be one of {_ACTIVATIONS}")

    @property
    def conv_out_shape(self) -> tuple:
        _, h, w = self.input_shape
        return (self.conv_channels, h - self.kernel + 1, w - self.kernel + 1)

    @property
    def flatten_size(self) -> int:
        c, h, w = self.conv_out_shape
        return c * h * w if h > 0 and w > 0 else 0

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "conv_channels": self.conv_channels,
            "kernel": self.kernel,
            "dropout_p": self.dropout_p,
            "hidden_sizes": list(self.hidden_sizes),
            "n_classes": self.n_classes,
            "conv_activation": self.conv_activation,
        }


# input 1x34x34 with 8 channels flattens to 8*32*32 = 8192
PRESETS = {
    "default": ArchConfig(),
    "paper-8192": ArchConfig(input_shape=(1, 34, 34), conv_channels=8),
}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    optimizer: str = "adam"
    lr: float = 1e-3
    seed: int = 0
    early_stop_patience: int | None = 15

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class TrainReport:
    train_acc: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0
    test_accuracy: float | None = None

    @property
    def epochs_run(self) -> int:
        return len(self.train_acc)

    def to_dict(self) -> dict:
        return {
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "test_accuracy": self.test_accuracy,
            "train_acc": self.train_acc,
            "val_acc": self.val_acc,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
        }

    def curve_rows(self):
        for i in range(self.epochs_run):
            yield (i + 1, self.train_acc[i], self.val_acc[i], self.train_loss[i], self.val_loss[i])


@dataclass(eq=False)
class Model:
    arch: ArchConfig
    network: nn.Network
    label_names: tuple
    feature_config: dict | None = None
    norm_mean: np.ndarray | None = None
    norm_std: np.ndarray | None = None

    def __post_init__(self):
        self.label_names = tuple(self.label_names)
        if len(self.label_names) != self.arch.n_classes:
            raise InvalidArch(f"{len(self.label_names)} label names for {self.arch.n_classes} classes")

    def parameters(self) -> dict:
        return self.network.parameters()

    @property
    def conv_layers(self):
        return [l for l in self.network.layers if isinstance(l, nn.Conv2D)]

    def set_normalization(self, mean, std) -> None:
        self.norm_mean = np.asarray(mean, dtype=np.float32)
        self.norm_std = np.asarray(std, dtype=np.float32)


def build_model(arch: ArchConfig, rng: np.random.Generator, label_names=None,
                dtype=np.float32) -> Model:
    """Glorot-initialised network for ``arch``; biases start at zero."""
    c_in = arch.input_shape[0]
    k = arch.kernel
    c_out = arch.conv_channels
    kernels = nn.glorot_uniform(rng, (c_out, c_in, k, k), c_in * k * k, c_out * k * k, dtype)
    act = nn.Tanh() if arch.conv_activation == "tanh" else nn.ReLU()
    layers = [nn.Conv2D(kernels, np.zeros(c_out, dtype), input_grad=False), act,
              nn.Dropout(arch.dropout_p), nn.Flatten()]
    widths = [arch.flatten_size, *arch.hidden_sizes, arch.n_classes]
    for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        w = nn.glorot_uniform(rng, (n_in, n_out), n_in, n_out, dtype)
        layers.append(nn.Dense(w, np.zeros(n_out, dtype)))
        if i < len(widths) - 2:
            layers.append(nn.ReLU())
    if label_names is None:
        if arch.n_classes == len(DEFAULT_LABELS):
            label_names = DEFAULT_LABELS
        else:
            label_names = tuple(f"class_{i}" for i in range(arch.n_classes))
    return Model(arch, nn.Network(layers), label_names)


def _as_batch(model: Model, x) -> np.ndarray:
    """Normalise and reshape features to ``[B, 1, rows, frames]``."""
    if hasattr(x, "coeffs"):
        x = x.coeffs
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim == 4:
        x = x[:, 0]
    _, rows, frames = model.arch.input_shape
    if x.shape[1:] != (rows, frames):
        raise ShapeMismatch(f"features {x.shape[1:]} do not match model input {(rows, frames)}")
    if model.norm_mean is not None:
        x = (x - model.norm_mean[:, None]) / model.norm_std[:, None]
    return x[:, None]


def forward(model: Model, x, training: bool = False, rng=None) -> np.ndarray:
    """Class probabilities for one tensor (vector) or a batch (rows)."""
    batch = _as_batch(model, x)
    probs = model.network.forward(batch, training=training, rng=rng)
    single = hasattr(x, "coeffs") or np.ndim(x) == 2
    return probs[0] if single else probs


def predict(model: Model, x):
    """(label index, probabilities); ties resolve to the lowest index."""
    probs = forward(model, x, training=False)
    return int(np.argmax(probs)), probs


def predict_batch(model: Model, xs, batch_size: int = 256):
    xs = np.asarray([getattr(x, "coeffs", x) for x in xs], dtype=np.float64)
    out = [forward(model, xs[i : i + batch_size]) for i in range(0, len(xs), batch_size)]
    probs = np.concatenate(out) if out else np.zeros((0, model.arch.n_classes))
    return probs.argmax(axis=1), probs


def fit_normalization(x: np.ndarray):
    """Per-row mean/std over every sample and frame of ``[N, rows, frames]``."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=(0, 2))
    std = x.std(axis=(0, 2))
    std[std < 1e-8] = 1.0
    return mean, std


def _evaluate(model: Model, x, y) -> tuple[float, float]:
    _, probs = predict_batch(model, x)
    acc = float(np.mean(probs.argmax(axis=1) == y))
    return acc, nn.cross_entropy_loss(probs, y)


def train(model: Model, train_set, val_set, cfg: TrainConfig | None = None, test_set=None):
    """Minibatch training with validation-accuracy model selection.

    Each set is an ``(X, y)`` pair with ``X`` shaped ``[N, rows, frames]``.
    Returns the model rolled back to its best validation epoch and the
    per-epoch report.
    """
    cfg = cfg or TrainConfig()
    x_tr, y_tr = np.asarray(train_set[0], dtype=np.float64), np.asarray(train_set[1], dtype=np.int64)
    x_va, y_va = np.asarray(val_set[0], dtype=np.float64), np.asarray(val_set[1], dtype=np.int64)
    if len(x_tr) == 0 or len(x_va) == 0:
        raise EmptyDataset("training and validation sets must be non-empty")
    if model.norm_mean is None:
        model.set_normalization(*fit_normalization(x_tr))

    rng = nn.make_rng(cfg.seed)
    opt = nn.make_optimizer(cfg.optimizer, cfg.lr)
    net = model.network
    report = TrainReport()
    best = (-1.0, math.inf)
    best_params = {k: v.copy() for k, v in net.parameters().items()}
    stale = 0

    xb_all = _as_batch(model, x_tr)
    n = len(xb_all)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        losses, correct = [], 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss = net.loss(xb_all[idx], y_tr[idx], training=True, rng=rng)
            if not np.isfinite(loss):
                raise DivergedLoss(f"loss became {loss} at epoch {epoch}")
            correct += int(np.sum(net._probs.argmax(axis=1) == y_tr[idx]))
            losses.append(loss * len(idx))
            grads = net.backward()
            net.set_parameters(opt.step(net.parameters(), grads))

        val_acc, val_loss = _evaluate(model, x_va, y_va)
        report.train_loss.append(float(sum(losses) / n))
        report.train_acc.append(correct / n)
        report.val_acc.append(val_acc)
        report.val_loss.append(val_loss)
        log.debug("epoch %d train_loss %.4f val_acc %.4f", epoch, report.train_loss[-1], val_acc)

        if (val_acc, -val_loss) > (best[0], -best[1]):
            best = (val_acc, val_loss)
            best_params = {k: v.copy() for k, v in net.parameters().items()}
            report.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if cfg.early_stop_patience is not None and stale >= cfg.early_stop_patience:
                break

    net.set_parameters(best_params)
    if test_set is not None and len(test_set[0]):
        report.test_accuracy, _ = _evaluate(model, np.asarray(test_set[0]), np.asarray(test_set[1]))
    return model, report


# ------------------------------------------------------------ serialization

def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def model_to_bytes(model: Model) -> bytes:
    a = model.arch
    out = [MODEL_MAGIC, struct.pack("<I", MODEL_VERSION)]
    out.append(struct.pack("<4I", *a.input_shape, a.conv_channels))
    out.append(struct.pack("<Id", a.kernel, a.dropout_p))
    out.append(struct.pack("<I", len(a.hidden_sizes)))
    out.append(struct.pack(f"<{len(a.hidden_sizes)}I", *a.hidden_sizes))
    out.append(struct.pack("<I", a.n_classes))
    out.append(_pack_str(a.conv_activation))
    out.append(struct.pack("<I", len(model.label_names)))
    out += [_pack_str(name) for name in model.label_names]
    fc = json.dumps(model.feature_config, sort_keys=True) if model.feature_config else ""
    out.append(_pack_str(fc))
    if model.norm_mean is None:
        out.append(struct.pack("<B", 0))
    else:
        out.append(struct.pack("<B", 1))
        out.append(np.asarray(model.norm_mean, dtype="<f4").tobytes())
        out.append(np.asarray(model.norm_std, dtype="<f4").tobytes())
    for value in model.parameters().values():
        out.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return b"".join(out)


def save_model(model: Model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(f"need {n} bytes at offset {self.pos}, file has {len(self.data)}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (n,) = self.unpack("<I")
        return self.take(n).decode("utf-8")

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<f4").astype(np.float32)


def model_from_bytes(data: bytes) -> Model:
    r = _Reader(data)
    if r.take(4) != MODEL_MAGIC:
        raise BadMagic("not a VCLF model file")
    (version,) = r.unpack("<I")
    if version != MODEL_VERSION:
        raise VersionMismatch(f"model version {version}, expected {MODEL_VERSION}")
    c, rows, frames, channels = r.unpack("<4I")
    kernel, dropout_p = r.unpack("<Id")
    (n_hidden,) = r.unpack("<I")
    hidden = r.unpack(f"<{n_hidden}I")
    (n_classes,) = r.unpack("<I")
    activation = r.string()
    arch = ArchConfig((c, rows, frames), channels, kernel, dropout_p, hidden, n_classes, activation)
    (n_labels,) = r.unpack("<I")
    labels = [r.string() for _ in range(n_labels)]
    fc = r.string()
    (has_norm,) = r.unpack("<B")
    mean = std = None
    if has_norm:
        mean, std = r.floats(rows), r.floats(rows)

    model = build_model(arch, nn.make_rng(0), labels)
    params = {}
    for key, value in model.parameters().items():
        params[key] = r.floats(value.size).reshape(value.shape)
    model.network.set_parameters(params)
    model.feature_config = json.loads(fc) if fc else None
    if has_norm:
        model.set_normalization(mean, std)
    return model


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())


def with_activation(arch: ArchConfig, activation: str) -> ArchConfig:
    return replace(arch, conv_activation=activation)
