"""Layer primitives with hand-derived forward and backward passes.

Everything runs in float64 on arrays shaped (batch, channels, length) for the
convolutional stack and (batch, features) after flattening. Each layer
exposes forward/backward as pure array functions plus parameter
initialization, so gradients can be verified against finite differences
element by element.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeMismatch(Exception):
    """Input shape does not compose with a layer's declared geometry."""


KIND_CONV1D = "conv1d"
KIND_RELU = "relu"
KIND_MAXPOOL1D = "maxpool1d"
KIND_FLATTEN = "flatten"
KIND_DENSE = "dense"
KIND_DROPOUT = "dropout"

ALL_KINDS = (KIND_CONV1D, KIND_RELU, KIND_MAXPOOL1D, KIND_FLATTEN, KIND_DENSE, KIND_DROPOUT)


@dataclass(frozen=True)
class LayerSpec:
    """Geometry of one layer; padding is zeros on both ends.

    Only the fields relevant to `kind` are meaningful; the factory
    functions below are the intended constructors.
    """

    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel_size: int = 0
    stride: int = 1
    padding: int = 0
    pool_size: int = 0
    in_features: int = 0
    out_features: int = 0
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == KIND_CONV1D:
            if min(self.in_channels, self.out_channels, self.kernel_size, self.stride) < 1:
                raise ValueError("conv1d dimensions must be positive")
            if self.padding < 0:
                raise ValueError("conv1d padding must be non-negative")
        elif self.kind == KIND_MAXPOOL1D:
            if self.pool_size < 1:
                raise ValueError("pool_size must be positive")
        elif self.kind == KIND_DENSE:
            if min(self.in_features, self.out_features) < 1:
                raise ValueError("dense dimensions must be positive")
        elif self.kind == KIND_DROPOUT:
            if not 0.0 <= self.rate < 1.0:
                raise ValueError("dropout rate must be in [0, 1)")


def conv1d(in_channels: int, out_channels: int, kernel_size: int,
           stride: int = 1, padding: int | None = None) -> LayerSpec:
    """Conv spec; padding defaults to (kernel_size - 1) // 2 ('same' for stride 1)."""
    if padding is None:
        padding = (kernel_size - 1) // 2
    return LayerSpec(KIND_CONV1D, in_channels=in_channels, out_channels=out_channels,
                     kernel_size=kernel_size, stride=stride, padding=padding)


def relu() -> LayerSpec:
    return LayerSpec(KIND_RELU)


def maxpool1d(pool_size: int = 2) -> LayerSpec:
    return LayerSpec(KIND_MAXPOOL1D, pool_size=pool_size)


def flatten() -> LayerSpec:
    return LayerSpec(KIND_FLATTEN)


def dense(in_features: int, out_features: int) -> LayerSpec:
    return LayerSpec(KIND_DENSE, in_features=in_features, out_features=out_features)


def dropout(rate: float = 0.5) -> LayerSpec:
    return LayerSpec(KIND_DROPOUT, rate=rate)


def conv_output_length(in_len: int, kernel_size: int, stride: int, padding: int) -> int:
    out = (in_len + 2 * padding - kernel_size) // stride + 1
    if out < 1:
        raise ShapeMismatch(
            f"conv over length {in_len} with k={kernel_size} s={stride} p={padding} is empty"
        )
    return out


def conv1d_input_grad(dy: np.ndarray, weight: np.ndarray, in_len: int,
                      stride: int, padding: int) -> np.ndarray:
    """Gradient of a conv output w.r.t. its input; also the LRP transpose op.

    dy: (B, Cout, Lout); weight: (Cout, Cin, K). Returns (B, Cin, in_len).
    """
    batch, _, out_len = dy.shape
    _, in_ch, kernel = weight.shape
    padded = np.zeros((batch, in_ch, in_len + 2 * padding))
    for k in range(kernel):
        seg = np.einsum("bol,oi->bil", dy, weight[:, :, k], optimize=True)
        padded[:, :, k:k + stride * out_len:stride] += seg
    if padding:
        return padded[:, :, padding:padding + in_len]
    return padded


class Layer:
    """Runtime layer: spec plus (possibly empty) parameter arrays."""

    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self.params: dict[str, np.ndarray] = {}

    def init_params(self, rng: np.random.Generator) -> None:
        pass

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(self, dy: np.ndarray, x: np.ndarray, y: np.ndarray,
                 aux: Any) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        raise NotImplementedError


class Conv1D(Layer):
    def init_params(self, rng):
        s = self.spec
        fan_in = s.in_channels * s.kernel_size
        scale = np.sqrt(2.0 / fan_in)
        self.params = {
            "weight": scale * rng.standard_normal((s.out_channels, s.in_channels, s.kernel_size)),
            "bias": np.zeros(s.out_channels),
        }

    def out_shape(self, in_shape):
        if len(in_shape) != 2 or in_shape[0] != self.spec.in_channels:
            raise ShapeMismatch(f"conv1d expects ({self.spec.in_channels}, L), got {in_shape}")
        out_len = conv_output_length(in_shape[1], self.spec.kernel_size,
                                     self.spec.stride, self.spec.padding)
        return (self.spec.out_channels, out_len)

    def _windows(self, x: np.ndarray) -> np.ndarray:
        s = self.spec
        if s.padding:
            x = np.pad(x, ((0, 0), (0, 0), (s.padding, s.padding)))
        win = sliding_window_view(x, s.kernel_size, axis=2)
        return win[:, :, ::s.stride, :]

    def forward(self, x, train=False, rng=None):
        s = self.spec
        out_len = conv_output_length(x.shape[2], s.kernel_size, s.stride, s.padding)
        win = self._windows(x)[:, :, :out_len, :]
        y = np.einsum("bilk,oik->bol", win, self.params["weight"], optimize=True)
        y += self.params["bias"][None, :, None]
        return y, None

    def backward(self, dy, x, y, aux):
        s = self.spec
        win = self._windows(x)[:, :, :dy.shape[2], :]
        grads = {
            "weight": np.einsum("bilk,bol->oik", win, dy, optimize=True),
            "bias": dy.sum(axis=(0, 2)),
        }
        dx = conv1d_input_grad(dy, self.params["weight"], x.shape[2], s.stride, s.padding)
        return dx, grads


class ReLU(Layer):
    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, train=False, rng=None):
        return np.maximum(x, 0.0), None

    def backward(self, dy, x, y, aux):
        return dy * (x > 0.0), {}


class MaxPool1D(Layer):
    """Non-overlapping max pooling; a trailing remainder shorter than the
    pool is dropped and receives zero gradient."""

    def out_shape(self, in_shape):
        if len(in_shape) != 2:
            raise ShapeMismatch(f"maxpool1d expects (C, L), got {in_shape}")
        out_len = in_shape[1] // self.spec.pool_size
        if out_len < 1:
            raise ShapeMismatch(f"length {in_shape[1]} shorter than pool {self.spec.pool_size}")
        return (in_shape[0], out_len)

    def forward(self, x, train=False, rng=None):
        g = self.spec.pool_size
        batch, ch, length = x.shape
        out_len = length // g
        tiles = x[:, :, :out_len * g].reshape(batch, ch, out_len, g)
        idx = tiles.argmax(axis=3)
        y = np.take_along_axis(tiles, idx[..., None], axis=3)[..., 0]
        return y, idx

    def backward(self, dy, x, y, aux):
        g = self.spec.pool_size
        batch, ch, length = x.shape
        out_len = length // g
        tiles = np.zeros((batch, ch, out_len, g))
        np.put_along_axis(tiles, aux[..., None], dy[..., None], axis=3)
        dx = np.zeros_like(x)
        dx[:, :, :out_len * g] = tiles.reshape(batch, ch, out_len * g)
        return dx, {}


class Flatten(Layer):
    def out_shape(self, in_shape):
        size = 1
        for d in in_shape:
            size *= d
        return (size,)

    def forward(self, x, train=False, rng=None):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, x, y, aux):
        return dy.reshape(aux), {}


class Dense(Layer):
    def init_params(self, rng):
        s = self.spec
        scale = np.sqrt(2.0 / s.in_features)
        self.params = {
            "weight": scale * rng.standard_normal((s.out_features, s.in_features)),
            "bias": np.zeros(s.out_features),
        }

    def out_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.spec.in_features:
            raise ShapeMismatch(f"dense expects ({self.spec.in_features},), got {in_shape}")
        return (self.spec.out_features,)

    def forward(self, x, train=False, rng=None):
        return x @ self.params["weight"].T + self.params["bias"], None

    def backward(self, dy, x, y, aux):
        grads = {"weight": dy.T @ x, "bias": dy.sum(axis=0)}
        return dy @ self.params["weight"], grads


class Dropout(Layer):
    """Inverted dropout: active only in train mode, identity in eval."""

    def forward(self, x, train=False, rng=None):
        rate = self.spec.rate
        if not train or rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("dropout in train mode needs an explicit rng")
        mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
        return x * mask, mask

    def out_shape(self, in_shape):
        return in_shape

    def backward(self, dy, x, y, aux):
        if aux is None:
            return dy, {}
        return dy * aux, {}


_LAYER_CLASSES = {
    KIND_CONV1D: Conv1D,
    KIND_RELU: ReLU,
    KIND_MAXPOOL1D: MaxPool1D,
    KIND_FLATTEN: Flatten,
    KIND_DENSE: Dense,
    KIND_DROPOUT: Dropout,
}


def build_layer(spec: LayerSpec) -> Layer:
    return _LAYER_CLASSES[spec.kind](spec)
