"""Network container: composition checking, traced forward, exact backward."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

from ..severity import N_CLASSES, Severity
from ..signal_io import WINDOW_FRAMES, Window
from .layers import (
    KIND_CONV1D,
    KIND_DENSE,
    Layer,
    LayerSpec,
    ShapeMismatch,
    build_layer,
    conv1d,
    dense,
    dropout,
    flatten,
    maxpool1d,
    relu,
)


class StaleTrace(Exception):
    """The trace was recorded before the network's parameters changed."""


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class Prediction:
    """Classifier output for one window."""

    logits: np.ndarray
    probabilities: np.ndarray
    predicted_class: Severity
    confidence: float

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "Prediction":
        logits = np.asarray(logits, dtype=np.float64).reshape(N_CLASSES)
        probs = softmax(logits)
        k = int(np.argmax(probs))
        return cls(logits, probs, Severity(k), float(probs[k]))

    def to_dict(self) -> dict:
        return {
            "logits": [float(v) for v in self.logits],
            "probabilities": [float(v) for v in self.probabilities],
            "predicted_class": self.predicted_class.label,
            "confidence": self.confidence,
        }


@dataclass
class TraceStep:
    x: np.ndarray
    y: np.ndarray
    aux: Any


@dataclass
class ActivationTrace:
    """Every intermediate activation of one forward pass, for backprop and
    attribution. Tied to the parameter version it was computed under."""

    input: np.ndarray
    steps: list[TraceStep]
    logits: np.ndarray
    net_version: int
    train_mode: bool


@dataclass
class GradientSet:
    """Gradients of one scalar logit w.r.t. parameters and activations.

    activation_grads[i] is the gradient at the *output* of layer i;
    input_grad is the gradient at the network input.
    """

    target_class: Severity
    param_grads: list[dict[str, np.ndarray]]
    activation_grads: list[np.ndarray]
    input_grad: np.ndarray


class Network:
    """An ordered stack of layers ending in a 4-way dense head.

    Composition is validated against `input_shape` at construction when the
    shape is known, otherwise on first forward. Any in-place parameter
    update must go through `bump_version` so stale traces are refused.
    """

    def __init__(self, specs: Sequence[LayerSpec],
                 input_shape: tuple[int, int] | None = (1, WINDOW_FRAMES),
                 seed: int = 0, init: bool = True):
        if not specs:
            raise ValueError("network needs at least one layer")
        last = specs[-1]
        if last.kind != KIND_DENSE or last.out_features != N_CLASSES:
            raise ValueError(f"final layer must be dense with {N_CLASSES} outputs")
        self.specs = list(specs)
        self.layers: list[Layer] = [build_layer(s) for s in specs]
        self.input_shape = input_shape
        self.version = 0
        if init:
            rng = np.random.default_rng(seed)
            for layer in self.layers:
                layer.init_params(rng)
        if input_shape is not None:
            self.out_shapes(input_shape)

    def out_shapes(self, input_shape: tuple[int, ...]) -> list[tuple[int, ...]]:
        """Walk the stack symbolically; raises ShapeMismatch if it breaks."""
        shapes = []
        shape = tuple(input_shape)
        for layer in self.layers:
            shape = layer.out_shape(shape)
            shapes.append(shape)
        return shapes

    def bump_version(self) -> None:
        self.version += 1

    def parameters(self) -> Iterator[tuple[int, str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                yield i, name, arr

    def get_state(self) -> list[dict[str, np.ndarray]]:
        return [{k: v.copy() for k, v in layer.params.items()} for layer in self.layers]

    def set_state(self, state: list[dict[str, np.ndarray]]) -> None:
        for layer, params in zip(self.layers, state):
            for k in layer.params:
                layer.params[k] = params[k].copy()
        self.bump_version()

    def forward_batch(self, x: np.ndarray, train: bool = False,
                      rng: np.random.Generator | None = None
                      ) -> tuple[np.ndarray, ActivationTrace]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim < 2:
            raise ShapeMismatch(f"batched input must have a leading batch axis, got {x.shape}")
        if self.input_shape is not None and tuple(x.shape[1:]) != tuple(self.input_shape):
            raise ShapeMismatch(f"input shape {x.shape[1:]} != declared {self.input_shape}")
        self.out_shapes(x.shape[1:])
        steps = []
        out = x
        for layer in self.layers:
            y, aux = layer.forward(out, train=train, rng=rng)
            steps.append(TraceStep(out, y, aux))
            out = y
        trace = ActivationTrace(x, steps, out, self.version, train)
        return out, trace

    def forward(self, window: Window | np.ndarray) -> tuple[Prediction, ActivationTrace]:
        """Eval-mode forward of a single window."""
        values = window.values if isinstance(window, Window) else np.asarray(window)
        if values.ndim != 1:
            raise ShapeMismatch(f"expected a 1-D window, got shape {values.shape}")
        x = values.reshape(1, 1, values.shape[0]).astype(np.float64)
        logits, trace = self.forward_batch(x, train=False)
        return Prediction.from_logits(logits[0]), trace

    def _backprop(self, trace: ActivationTrace, dout: np.ndarray
                  ) -> tuple[list[dict[str, np.ndarray]], list[np.ndarray], np.ndarray]:
        param_grads: list[dict[str, np.ndarray]] = [dict() for _ in self.layers]
        act_grads: list[np.ndarray] = [np.empty(0)] * len(self.layers)
        grad = dout
        for i in range(len(self.layers) - 1, -1, -1):
            act_grads[i] = grad
            step = trace.steps[i]
            grad, grads = self.layers[i].backward(grad, step.x, step.y, step.aux)
            param_grads[i] = grads
        return param_grads, act_grads, grad

    def backward_logit(self, trace: ActivationTrace,
                       target_class: Severity | int) -> GradientSet:
        """Gradients of one class logit, from a previously recorded trace."""
        if trace.net_version != self.version:
            raise StaleTrace(
                f"trace from version {trace.net_version}, network at {self.version}"
            )
        target = Severity(target_class) if isinstance(target_class, int) else target_class
        dout = np.zeros_like(trace.logits)
        dout[:, target.value] = 1.0
        param_grads, act_grads, input_grad = self._backprop(trace, dout)
        return GradientSet(target, param_grads, act_grads, input_grad)

    def backward_loss(self, trace: ActivationTrace,
                      dlogits: np.ndarray) -> list[dict[str, np.ndarray]]:
        """Parameter gradients for an arbitrary loss gradient at the logits."""
        if trace.net_version != self.version:
            raise StaleTrace(
                f"trace from version {trace.net_version}, network at {self.version}"
            )
        param_grads, _, _ = self._backprop(trace, dlogits)
        return param_grads

    def conv_layer_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.specs) if s.kind == KIND_CONV1D]


def make_default_network(
    dropout_rate: float = 0.5,
    seed: int = 0,
    conv_channels: Sequence[int] = (16, 32, 64, 64, 64),
    kernel_size: int = 9,
    dense_units: Sequence[int] = (256, 64),
    input_len: int = WINDOW_FRAMES,
) -> Network:
    """The reference geometry: five conv/pool blocks and a three-layer head."""
    specs: list[LayerSpec] = []
    in_ch, length = 1, input_len
    for ch in conv_channels:
        specs.extend([conv1d(in_ch, ch, kernel_size), relu(), maxpool1d(2)])
        in_ch = ch
        length //= 2
    specs.append(flatten())
    in_features = in_ch * length
    for units in dense_units:
        specs.extend([dense(in_features, units), relu(), dropout(dropout_rate)])
        in_features = units
    specs.append(dense(in_features, N_CLASSES))
    return Network(specs, input_shape=(1, input_len), seed=seed)
