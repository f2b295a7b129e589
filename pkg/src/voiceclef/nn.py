"""Small numpy neural-network engine: valid 3x3 convolution, activations,
inverted dropout, dense layers, softmax cross-entropy and SGD/Adam.

Parameters may be stored as float32; every layer computes in float64 so
reductions accumulate at double precision.
"""

from __future__ import annotations

import numpy as np

from .errors import IndexOutOfRange, NoForwardPass, ShapeMismatch

F64 = np.float64


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic 64-bit generator (PCG64)."""
    return np.random.Generator(np.random.PCG64(seed))


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype=np.float32):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


# ---------------------------------------------------------------- operators

def _patches(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """[B, C, H, W] -> [B, H', W', C*kh*kw] im2col matrix."""
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    b, c, ho, wo = win.shape[:4]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(b, ho, wo, c * kh * kw)


def conv2d_forward(x, kernels, bias) -> np.ndarray:
    """Valid, stride-1 cross-correlation plus per-channel bias.

    ``x`` is ``[C_in, H, W]`` or a batch ``[B, C_in, H, W]``; kernels are
    ``[C_out, C_in, kh, kw]``.
    """
    x = np.asarray(x, dtype=F64)
    single = x.ndim == 3
    if single:
        x = x[None]
    k = np.asarray(kernels, dtype=F64)
    if x.ndim != 4 or k.ndim != 4 or x.shape[1] != k.shape[1]:
        raise ShapeMismatch(f"input {x.shape} incompatible with kernels {k.shape}")
    if x.shape[2] < k.shape[2] or x.shape[3] < k.shape[3]:
        raise ShapeMismatch(f"input {x.shape[2:]} smaller than kernel {k.shape[2:]}")
    if np.shape(bias) != (k.shape[0],):
        raise ShapeMismatch(f"bias shape {np.shape(bias)} != ({k.shape[0]},)")
    cols = _patches(x, k.shape[2], k.shape[3])
    y = cols @ k.reshape(k.shape[0], -1).T + np.asarray(bias, dtype=F64)
    y = y.transpose(0, 3, 1, 2)
    return y[0] if single else y


def conv2d_backward(dy, x, kernels, need_input_grad: bool = True):
    """Gradients (dx, dkernels, dbias) for a batched :func:`conv2d_forward`.

    ``dx`` is None when ``need_input_grad`` is false.
    """
    x = np.asarray(x, dtype=F64)
    k = np.asarray(kernels, dtype=F64)
    o, c, kh, kw = k.shape
    cols = _patches(x, kh, kw)
    dy_t = dy.transpose(0, 2, 3, 1)  # [B, H', W', O]
    dk = np.tensordot(dy_t, cols, axes=([0, 1, 2], [0, 1, 2])).reshape(k.shape)
    db = dy.sum(axis=(0, 2, 3))
    if not need_input_grad:
        return None, dk, db
    dx = np.zeros_like(x)
    ho, wo = dy.shape[2], dy.shape[3]
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i : i + ho, j : j + wo] += np.einsum("bohw,oc->bchw", dy, k[:, :, i, j])
    return dx, dk, db


def tanh_forward(x) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=F64))


def relu_forward(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=F64), 0.0)


def dropout_forward(x, p: float, rng: np.random.Generator | None, training: bool):
    """Inverted dropout; returns ``(output, mask)``.

    In training, each unit survives with probability ``1 - p`` and survivors
    are scaled by ``1 / (1 - p)``. Outside training the layer is an identity
    and the mask is all ones.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    x = np.asarray(x, dtype=F64)
    if not training or p == 0.0:
        return x.copy(), np.ones(x.shape, dtype=bool)
    mask = rng.random(x.shape) >= p
    return x * mask / (1.0 - p), mask


def dense_forward(x, w, b) -> np.ndarray:
    x = np.asarray(x, dtype=F64)
    w = np.asarray(w, dtype=F64)
    if x.shape[-1] != w.shape[0] or np.shape(b) != (w.shape[1],):
        raise ShapeMismatch(f"x {x.shape}, W {w.shape}, b {np.shape(b)}")
    return x @ w + np.asarray(b, dtype=F64)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=F64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_loss(probs, true_class) -> float:
    """Mean of -log(max(p[true], 1e-12)) over a vector or a batch of rows."""
    p = np.atleast_2d(np.asarray(probs, dtype=F64))
    y = np.atleast_1d(np.asarray(true_class))
    if y.shape[0] != p.shape[0]:
        raise ShapeMismatch("one label per probability row is required")
    if np.any(y < 0) or np.any(y >= p.shape[1]):
        raise IndexOutOfRange(f"labels must lie in [0, {p.shape[1]})")
    picked = p[np.arange(p.shape[0]), y]
    return float(np.mean(-np.log(np.maximum(picked, 1e-12))))


# ------------------------------------------------------------------- layers

class Layer:
    params: tuple[str, ...] = ()

    def forward(self, x, training, rng):
        raise NotImplementedError

    def backward(self, dy, store):
        raise NotImplementedError


class Conv2D(Layer):
    params = ("kernels", "bias")

    def __init__(self, kernels, bias, input_grad: bool = True):
        self.kernels = kernels
        self.bias = bias
        self.input_grad = input_grad

    def forward(self, x, training, rng):
        self._x = x
        return conv2d_forward(x, self.kernels, self.bias)

    def backward(self, dy, store):
        dx, dk, db = conv2d_backward(dy, self._x, self.kernels, self.input_grad)
        store["kernels"], store["bias"] = dk, db
        return dx


class Tanh(Layer):
    def forward(self, x, training, rng):
        self._y = tanh_forward(x)
        return self._y

    def backward(self, dy, store):
        return dy * (1.0 - self._y ** 2)


class ReLU(Layer):
    def forward(self, x, training, rng):
        self._mask = x > 0
        return relu_forward(x)

    def backward(self, dy, store):
        return dy * self._mask


class Dropout(Layer):
    def __init__(self, p: float):
        self.p = p

    def forward(self, x, training, rng):
        y, self._mask = dropout_forward(x, self.p, rng, training)
        self._scale = 1.0 / (1.0 - self.p) if training and self.p > 0 else 1.0
        return y

    def backward(self, dy, store):
        return dy * self._mask * self._scale


class Flatten(Layer):
    def forward(self, x, training, rng):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy, store):
        return dy.reshape(self._shape)


class Dense(Layer):
    params = ("weights", "bias")

    def __init__(self, weights, bias):
        self.weights = weights
        self.bias = bias

    def forward(self, x, training, rng):
        self._x = x
        return dense_forward(x, self.weights, self.bias)

    def backward(self, dy, store):
        store["weights"] = self._x.T @ dy
        store["bias"] = dy.sum(axis=0)
        return dy @ np.asarray(self.weights, dtype=F64).T


class Network:
    """Layer stack ending in logits; the loss is softmax cross-entropy."""

    def __init__(self, layers):
        self.layers = list(layers)
        self._recorded = False

    def named_parameters(self):
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                yield f"{i}.{name}", layer, name

    def parameters(self) -> dict:
        return {key: getattr(layer, name) for key, layer, name in self.named_parameters()}

    def set_parameters(self, values: dict) -> None:
        for key, layer, name in self.named_parameters():
            setattr(layer, name, values[key])

    def logits(self, x, training: bool = False, rng=None) -> np.ndarray:
        h = np.asarray(x, dtype=F64)
        for layer in self.layers:
            h = layer.forward(h, training, rng)
        self._recorded = True
        return h

    def forward(self, x, training: bool = False, rng=None) -> np.ndarray:
        return softmax(self.logits(x, training, rng))

    def loss(self, x, labels, training: bool = False, rng=None) -> float:
        self._probs = self.forward(x, training, rng)
        self._labels = np.asarray(labels)
        return cross_entropy_loss(self._probs, self._labels)

    def backward(self, labels=None) -> dict:
        """Gradients of mean cross-entropy w.r.t. every parameter.

        Uses the activations and dropout masks recorded by the most recent
        :meth:`loss` (or :meth:`forward`) call.
        """
        if not self._recorded or not hasattr(self, "_probs"):
            raise NoForwardPass("call loss() before backward()")
        labels = self._labels if labels is None else np.asarray(labels)
        probs = self._probs
        n = probs.shape[0]
        dy = probs.copy()
        dy[np.arange(n), labels] -= 1.0
        dy /= n
        grads = {}
        for i in range(len(self.layers) - 1, -1, -1):
            store = {}
            dy = self.layers[i].backward(dy, store)
            for name, g in store.items():
                grads[f"{i}.{name}"] = g
        self._recorded = False
        return grads


def backward(network: Network, inputs, labels, rng=None, training: bool = True) -> dict:
    """Forward ``inputs`` in training mode, then return all parameter gradients."""
    network.loss(inputs, labels, training=training, rng=rng)
    return network.backward()


# --------------------------------------------------------------- optimizers

class SGD:
    def __init__(self, lr: float = 0.01):
        self.lr = lr

    def step(self, params: dict, grads: dict) -> dict:
        for key, g in grads.items():
            p = params[key]
            if p.shape != g.shape:
                raise ShapeMismatch(f"{key}: param {p.shape} vs grad {g.shape}")
            params[key] = (p.astype(F64) - self.lr * g).astype(p.dtype)
        return params


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, params: dict, grads: dict) -> dict:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for key, g in grads.items():
            p = params[key]
            if p.shape != g.shape:
                raise ShapeMismatch(f"{key}: param {p.shape} vs grad {g.shape}")
            m = self.m.get(key)
            if m is None:
                m = self.m[key] = np.zeros(p.shape, dtype=F64)
                self.v[key] = np.zeros(p.shape, dtype=F64)
            v = self.v[key]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)
            params[key] = (p.astype(F64) - update).astype(p.dtype)
        return params


def make_optimizer(name: str, lr: float):
    name = name.lower()
    if name == "adam":
        return Adam(lr)
    if name == "sgd":
        return SGD(lr)
    raise ValueError(f"unknown optimizer {name!r}")
