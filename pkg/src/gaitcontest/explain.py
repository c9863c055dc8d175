"""Saliency maps over input windows: gradient-weighted activations and
epsilon-rule relevance propagation.

Both methods emit a map of 1000 values in [0, 1] aligned with the input
frames, so downstream comparison is pointwise. Relevance propagation keeps
an exact books-balance: the bias and stabilizer share of every unit is
redistributed onto its in-bounds receptive field, so summed input relevance
reproduces the explained logit to float precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn.layers import (
    KIND_CONV1D,
    KIND_DENSE,
    KIND_DROPOUT,
    KIND_FLATTEN,
    KIND_MAXPOOL1D,
    KIND_RELU,
    conv1d_input_grad,
)
from .nn.network import ActivationTrace, Network, Prediction
from .severity import Severity
from .signal_io import WINDOW_FRAMES, Window

DEFAULT_EPSILON = 1e-6

METHOD_GRADCAM = "gradcam"
METHOD_LRP = "lrp"


class NotAConvLayer(Exception):
    """The requested attribution layer is not a convolution."""


@dataclass(frozen=True)
class ExplanationMap:
    """A normalized per-frame saliency map for one target class."""

    method: str
    target_class: Severity
    values: np.ndarray
    source_layer: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.shape != (WINDOW_FRAMES,):
            raise ValueError(f"map must hold {WINDOW_FRAMES} values, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("map contains non-finite values")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError("map values must lie in [0, 1]")


def normalize_map(raw: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; an exactly constant map becomes all zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def upsample_map(values: np.ndarray, length: int = WINDOW_FRAMES,
                 mode: str = "linear") -> np.ndarray:
    """Stretch a coarse map to input resolution.

    Linear interpolation aligns sample centers (bin i sits at
    (i + 0.5) * length / n - 0.5) and clamps beyond the end bins; nearest
    repeats each bin's value across its span.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if n == length:
        return values.copy()
    targets = np.arange(length, dtype=np.float64)
    if mode == "linear":
        centers = (np.arange(n) + 0.5) * (length / n) - 0.5
        return np.interp(targets, centers, values)
    if mode == "nearest":
        idx = np.minimum(((targets + 0.5) * n / length).astype(np.int64), n - 1)
        return values[idx]
    raise ValueError(f"unknown upsampling mode {mode!r}")


def _resolve_trace(net: Network, window: Window | np.ndarray,
                   trace: ActivationTrace | None) -> ActivationTrace:
    if trace is None:
        _, trace = net.forward(window)
    if trace.train_mode:
        raise ValueError("attribution requires an eval-mode trace")
    return trace


def grad_cam(
    net: Network,
    window: Window | np.ndarray,
    target_class: Severity | int,
    conv_layer: int | None = None,
    trace: ActivationTrace | None = None,
    interpolation: str = "linear",
) -> ExplanationMap:
    """Gradient-weighted activation map at one conv layer, upsampled to input size.

    Channel weights are the time-averaged gradient of the target logit with
    respect to the layer's output; the weighted activation sum is rectified,
    stretched to 1000 frames, and min-max normalized.
    """
    conv_indices = net.conv_layer_indices()
    if conv_layer is None:
        if not conv_indices:
            raise NotAConvLayer("network has no convolutional layers")
        conv_layer = conv_indices[-1]
    elif conv_layer not in conv_indices:
        raise NotAConvLayer(f"layer {conv_layer} is not a convolution")

    trace = _resolve_trace(net, window, trace)
    target = Severity(target_class) if isinstance(target_class, int) else target_class
    grads = net.backward_logit(trace, target)
    activation = trace.steps[conv_layer].y[0]          # (C, Lf)
    gradient = grads.activation_grads[conv_layer][0]   # (C, Lf)
    weights = gradient.mean(axis=1)
    cam = np.maximum((weights[:, None] * activation).sum(axis=0), 0.0)
    values = normalize_map(upsample_map(cam, WINDOW_FRAMES, interpolation))
    return ExplanationMap(METHOD_GRADCAM, target, values, conv_layer)


def _lrp_dense(layer, x: np.ndarray, z: np.ndarray, rel: np.ndarray,
               eps: float) -> np.ndarray:
    weight = layer.params["weight"]
    bias = layer.params["bias"]
    sign = np.where(z >= 0.0, 1.0, -1.0)
    scaled = rel / (z + eps * sign)
    share = float(((bias + eps * sign) * scaled).sum()) / weight.shape[1]
    return x * (scaled @ weight) + share


def _lrp_conv(layer, x: np.ndarray, z: np.ndarray, rel: np.ndarray,
              eps: float) -> np.ndarray:
    spec = layer.spec
    weight = layer.params["weight"]
    bias = layer.params["bias"]
    in_ch, in_len = x.shape
    out_len = z.shape[1]
    sign = np.where(z >= 0.0, 1.0, -1.0)
    scaled = rel / (z + eps * sign)
    direct = x * conv1d_input_grad(scaled[None], weight, in_len,
                                   spec.stride, spec.padding)[0]
    # bias + stabilizer mass is shared equally over each unit's in-bounds
    # receptive cells, so nothing escapes through the padding
    t = np.arange(out_len)
    lo = t * spec.stride - spec.padding
    hi = lo + spec.kernel_size - 1
    valid = np.minimum(hi, in_len - 1) - np.maximum(lo, 0) + 1
    cells = in_ch * valid
    pooled = (bias[:, None] + eps * sign) * scaled / cells[None, :]
    spread = conv1d_input_grad(pooled[None], np.ones_like(weight), in_len,
                               spec.stride, spec.padding)[0]
    return direct + spread


def lrp_relevance(
    net: Network,
    window: Window | np.ndarray,
    target_class: Severity | int,
    trace: ActivationTrace | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> np.ndarray:
    """Signed per-frame relevance whose sum equals the target logit.

    Propagation rules: epsilon-stabilized proportional split for dense and
    conv layers (with the bias/stabilizer mass redistributed as above),
    winner-take-all through max pooling, identity through ReLU, dropout
    (eval), and flatten.
    """
    trace = _resolve_trace(net, window, trace)
    if trace.net_version != net.version:
        from .nn.network import StaleTrace

        raise StaleTrace(f"trace from version {trace.net_version}, network at {net.version}")
    target = Severity(target_class) if isinstance(target_class, int) else target_class

    rel = np.zeros_like(trace.logits[0])
    rel[target.value] = trace.logits[0, target.value]

    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        step = trace.steps[i]
        kind = layer.spec.kind
        if kind == KIND_DENSE:
            rel = _lrp_dense(layer, step.x[0], step.y[0], rel, epsilon)
        elif kind == KIND_CONV1D:
            rel = _lrp_conv(layer, step.x[0], step.y[0], rel, epsilon)
        elif kind == KIND_MAXPOOL1D:
            rel = layer.backward(rel[None], step.x, step.y, step.aux)[0][0]
        elif kind == KIND_FLATTEN:
            rel = rel.reshape(step.x[0].shape)
        elif kind in (KIND_RELU, KIND_DROPOUT):
            pass
        else:
            raise ValueError(f"no relevance rule for layer kind {kind!r}")
    # input is single-channel: (1, frames) -> (frames,)
    return rel.reshape(-1) if rel.ndim == 1 else rel.sum(axis=0)


def lrp(
    net: Network,
    window: Window | np.ndarray,
    target_class: Severity | int,
    trace: ActivationTrace | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> ExplanationMap:
    """Relevance magnitude map: |per-frame relevance|, min-max normalized."""
    target = Severity(target_class) if isinstance(target_class, int) else target_class
    raw = lrp_relevance(net, window, target, trace=trace, epsilon=epsilon)
    return ExplanationMap(METHOD_LRP, target, normalize_map(np.abs(raw)), None)


@dataclass(frozen=True)
class ExplanationPair:
    prediction: Prediction
    gradcam: ExplanationMap
    lrp: ExplanationMap


def explanation_pair(
    net: Network,
    window: Window | np.ndarray,
    target_class: Severity | int | None = None,
    conv_layer: int | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> ExplanationPair:
    """Both saliency maps for one window from a single shared forward pass.

    The target defaults to the predicted class, which is the case under
    review in the contest workflow.
    """
    prediction, trace = net.forward(window)
    target = prediction.predicted_class if target_class is None else (
        Severity(target_class) if isinstance(target_class, int) else target_class
    )
    cam = grad_cam(net, window, target, conv_layer=conv_layer, trace=trace)
    rel = lrp(net, window, target, trace=trace, epsilon=epsilon)
    return ExplanationPair(prediction, cam, rel)
