"""Real NVP density model for anomaly scoring.

A model is a stack of affine coupling layers over an even-dimensional
input. Each layer passes one half of the coordinates through untouched
(selected by a boolean mask) and transforms the other half:

    y_u = x_u * exp(s(x_m)) + t(x_m)

where s and t are small fully-connected nets applied to the masked
half. The scale net ends in tanh, the translation net ends linear, and
hidden layers are ReLU. Masks alternate halves layer to layer, so every
coordinate is transformed by every other layer.

Log-density under a standard normal base distribution:

    log p(x) = -d/2 * log(2*pi) - ||z||^2 / 2 + sum of log-determinants

with z the forward transform of x and each layer contributing sum(s).
All arithmetic is float32 with pinned order (see numeric module), so a
given model and input always produce the same bits. Non-finite values
introduced by faults propagate through to the final log-density.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigurationError
from .numeric import ActivationKind, F32, dot_self_last_axis, fc_forward, sum_last_axis

LOG_2PI = math.log(2.0 * math.pi)

# Prediction codes used by the batch path and the metrics module.
PRED_NOMINAL = 0
PRED_ANOMALOUS = 1
PRED_DUE = 2


class Label(enum.Enum):
    NOMINAL = 0
    ANOMALOUS = 1


class _Due:
    """Sentinel for a detected unrecoverable error (non-finite score)."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "DUE"


DUE = _Due()


@dataclass
class FcLayer:
    weights: np.ndarray  # (out, in) float32
    bias: np.ndarray  # (out,) float32
    activation: ActivationKind

    def copy(self) -> "FcLayer":
        return FcLayer(self.weights.copy(), self.bias.copy(), self.activation)


@dataclass
class CouplingLayer:
    mask: np.ndarray  # (d,) bool, True = passed through unchanged
    scale_net: tuple[FcLayer, ...]
    translation_net: tuple[FcLayer, ...]

    def copy(self) -> "CouplingLayer":
        return CouplingLayer(
            self.mask.copy(),
            tuple(l.copy() for l in self.scale_net),
            tuple(l.copy() for l in self.translation_net),
        )


@dataclass(frozen=True)
class ModelDefinition:
    input_dim: int
    n_coupling: int
    fc_depth: int
    units: int

    def validate(self) -> None:
        if self.input_dim < 2 or self.input_dim % 2 != 0:
            raise ConfigurationError(
                f"input_dim must be even and >= 2, got {self.input_dim}"
            )
        if self.n_coupling < 1:
            raise ConfigurationError(f"n_coupling must be >= 1, got {self.n_coupling}")
        if self.fc_depth < 2:
            raise ConfigurationError(f"fc_depth must be >= 2, got {self.fc_depth}")
        if self.units < 1:
            raise ConfigurationError(f"units must be >= 1, got {self.units}")

    @property
    def half_dim(self) -> int:
        return self.input_dim // 2


@dataclass
class ModelState:
    definition: ModelDefinition
    layers: tuple[CouplingLayer, ...]
    threshold: float | None = None

    def copy(self) -> "ModelState":
        return ModelState(
            self.definition, tuple(l.copy() for l in self.layers), self.threshold
        )

    def with_threshold(self, threshold: float) -> "ModelState":
        return replace(self, threshold=float(threshold))

    def validate(self) -> None:
        d = self.definition
        d.validate()
        if len(self.layers) != d.n_coupling:
            raise ConfigurationError(
                f"model has {len(self.layers)} coupling layers, expected {d.n_coupling}"
            )
        for ci, layer in enumerate(self.layers):
            expected = alternating_mask(d.input_dim, ci)
            if layer.mask.dtype != np.bool_ or layer.mask.shape != (d.input_dim,):
                raise ConfigurationError(f"coupling {ci}: mask must be ({d.input_dim},) bool")
            if not np.array_equal(layer.mask, expected):
                raise ConfigurationError(
                    f"coupling {ci}: mask does not alternate halves"
                )
            _validate_net(layer.scale_net, d, ActivationKind.TANH, f"coupling {ci} scale net")
            _validate_net(
                layer.translation_net, d, ActivationKind.LINEAR,
                f"coupling {ci} translation net",
            )

    def param_count(self) -> int:
        return sum(
            l.weights.size + l.bias.size for _, _, _, l in iter_fc_layers(self)
        )


def alternating_mask(input_dim: int, coupling_index: int) -> np.ndarray:
    """Even coupling layers pass the first half, odd layers the second."""
    mask = np.zeros(input_dim, dtype=np.bool_)
    half = input_dim // 2
    if coupling_index % 2 == 0:
        mask[:half] = True
    else:
        mask[half:] = True
    return mask


def _validate_net(
    net: Sequence[FcLayer], d: ModelDefinition, final: ActivationKind, where: str
) -> None:
    if len(net) != d.fc_depth:
        raise ConfigurationError(f"{where}: has {len(net)} layers, expected {d.fc_depth}")
    half = d.half_dim
    in_dim = half
    for fi, layer in enumerate(net):
        last = fi == len(net) - 1
        out_dim = half if last else d.units
        if layer.weights.shape != (out_dim, in_dim):
            raise ConfigurationError(
                f"{where} fc {fi}: weights shape {layer.weights.shape}, "
                f"expected {(out_dim, in_dim)}"
            )
        if layer.bias.shape != (out_dim,):
            raise ConfigurationError(
                f"{where} fc {fi}: bias shape {layer.bias.shape}, expected {(out_dim,)}"
            )
        if layer.weights.dtype != np.float32 or layer.bias.dtype != np.float32:
            raise ConfigurationError(f"{where} fc {fi}: parameters must be float32")
        want = final if last else ActivationKind.RELU
        if layer.activation is not want:
            raise ConfigurationError(
                f"{where} fc {fi}: activation {layer.activation.value}, "
                f"expected {want.value}"
            )
        in_dim = out_dim


def iter_fc_layers(model: ModelState) -> Iterator[tuple[int, str, int, FcLayer]]:
    """Canonical parameter order: coupling asc, scale before translation, fc asc."""
    for ci, layer in enumerate(model.layers):
        for net_name, net in (("scale", layer.scale_net), ("translation", layer.translation_net)):
            for fi, fc in enumerate(net):
                yield ci, net_name, fi, fc


def net_apply(net: Sequence[FcLayer], x: np.ndarray) -> np.ndarray:
    h = x
    for layer in net:
        h = fc_forward(layer.weights, layer.bias, h, layer.activation)
    return h


def coupling_forward(layer: CouplingLayer, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward map of one coupling layer.

    Returns (y, log_det) where log_det is the float32 sum of the scale
    net output, shaped like the batch (scalar for a single vector).
    """
    pass_idx = np.nonzero(layer.mask)[0]
    trans_idx = np.nonzero(~layer.mask)[0]
    xm = x[..., pass_idx]
    xu = x[..., trans_idx]
    s = net_apply(layer.scale_net, xm)
    t = net_apply(layer.translation_net, xm)
    yu = xu * np.exp(s) + t
    y = np.empty_like(x)
    y[..., pass_idx] = xm
    y[..., trans_idx] = yu
    return y, sum_last_axis(s)


def coupling_inverse(layer: CouplingLayer, y: np.ndarray) -> np.ndarray:
    pass_idx = np.nonzero(layer.mask)[0]
    trans_idx = np.nonzero(~layer.mask)[0]
    ym = y[..., pass_idx]
    yu = y[..., trans_idx]
    s = net_apply(layer.scale_net, ym)
    t = net_apply(layer.translation_net, ym)
    xu = (yu - t) * np.exp(np.negative(s))
    x = np.empty_like(y)
    x[..., pass_idx] = ym
    x[..., trans_idx] = xu
    return x


def transform(model: ModelState, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run the full stack; returns (z, summed log-determinant)."""
    z = x
    total = np.zeros(x.shape[:-1], dtype=np.float32)
    for layer in model.layers:
        z, log_det = coupling_forward(layer, z)
        total = total + log_det
    return z, total


def inverse_transform(model: ModelState, z: np.ndarray) -> np.ndarray:
    x = z
    for layer in reversed(model.layers):
        x = coupling_inverse(layer, x)
    return x


def log_prob(model: ModelState, x: np.ndarray) -> np.ndarray:
    """Float32 log-density; x is a vector (d,) or batch (n, d).

    The batched result is bit-identical to scoring rows one at a time.
    Scores that come out NaN carry the canonical quiet-NaN payload, so
    the bits do not depend on which operand a two-NaN op propagated.
    """
    if x.shape[-1] != model.definition.input_dim:
        raise ConfigurationError(
            f"input width {x.shape[-1]} != model input_dim {model.definition.input_dim}"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        z, log_det = transform(model, x)
        base = F32(-0.5 * model.definition.input_dim * LOG_2PI)
        lp = (base - F32(0.5) * dot_self_last_axis(z)) + log_det
    lp = np.asarray(lp)
    np.copyto(lp, F32(np.nan), where=np.isnan(lp))
    return lp if lp.ndim else F32(lp)


def _require_threshold(model: ModelState) -> np.float32:
    if model.threshold is None:
        raise ConfigurationError("model has no decision threshold set")
    return F32(model.threshold)


def classify(model: ModelState, x: np.ndarray) -> Label | _Due:
    """Label one sample; scores on the threshold count as nominal."""
    thr = _require_threshold(model)
    lp = log_prob(model, x)
    if not np.isfinite(lp):
        return DUE
    return Label.NOMINAL if lp >= thr else Label.ANOMALOUS


def codes_from_scores(scores: np.ndarray, threshold: float) -> np.ndarray:
    """Prediction codes (PRED_*) from log-density scores, int8."""
    thr = F32(threshold)
    codes = np.where(scores < thr, PRED_ANOMALOUS, PRED_NOMINAL).astype(np.int8)
    codes[~np.isfinite(scores)] = PRED_DUE
    return codes


def predict_batch(model: ModelState, x: np.ndarray) -> np.ndarray:
    """Prediction codes (PRED_*) for a batch, int8 of shape (n,)."""
    thr = _require_threshold(model)
    return codes_from_scores(log_prob(model, x), float(thr))
