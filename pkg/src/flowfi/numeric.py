"""Binary32 dense kernels.

Everything here computes strictly in float32 with a pinned operation
order, so results are bit-reproducible and a batched call is
bit-identical to looping rows one at a time.

Reductions are written as explicit left-to-right loops built from
IEEE-exact elementwise ops (multiply, add). numpy's fused reduction
kernels (einsum, sum, add.reduce, dot) pick SIMD groupings based on
buffer addresses, so logically identical data in differently aligned
buffers can sum to results one ulp apart; that would break the
row-of-a-batch == single-row guarantee. Keep them out of this module.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import ConfigurationError

F32 = np.float32


class ActivationKind(enum.Enum):
    RELU = "relu"
    TANH = "tanh"
    LINEAR = "linear"

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self is ActivationKind.RELU:
            # np.maximum propagates NaN, which the fault engine relies on.
            return np.maximum(x, F32(0.0))
        if self is ActivationKind.TANH:
            return np.tanh(x)
        return x


def require_f32(name: str, a: np.ndarray, ndim: int | None = None) -> np.ndarray:
    if not isinstance(a, np.ndarray) or a.dtype != np.float32:
        raise ConfigurationError(f"{name} must be a float32 ndarray")
    if ndim is not None and a.ndim != ndim:
        raise ConfigurationError(f"{name} must be {ndim}-D, got {a.ndim}-D")
    return a


def fc_forward(
    weights: np.ndarray,
    bias: np.ndarray,
    x: np.ndarray,
    activation: ActivationKind,
) -> np.ndarray:
    """One fully-connected layer: activation(weights @ x + bias).

    ``weights`` is (out, in), ``bias`` is (out,), ``x`` is a vector (in,)
    or a batch (n, in). The weighted sum accumulates over input index 0,
    1, 2, ... in that order, then the bias is added, then the activation
    applied, all in float32.
    """
    require_f32("weights", weights, 2)
    require_f32("bias", bias, 1)
    require_f32("x", x)
    if x.ndim not in (1, 2):
        raise ConfigurationError(f"x must be 1-D or 2-D, got {x.ndim}-D")
    if bias.shape[0] != weights.shape[0]:
        raise ConfigurationError(
            f"bias length {bias.shape[0]} != weight rows {weights.shape[0]}"
        )
    if x.shape[-1] != weights.shape[1]:
        raise ConfigurationError(
            f"input width {x.shape[-1]} != weight cols {weights.shape[1]}"
        )
    n_in = weights.shape[1]
    # Injected faults legitimately drive values to inf/NaN; IEEE non-stop
    # semantics apply, so the overflow/invalid flags are just noise here.
    with np.errstate(over="ignore", invalid="ignore"):
        acc = np.multiply(x[..., 0, None], weights[:, 0])
        if n_in > 1:
            tmp = np.empty_like(acc)
            for j in range(1, n_in):
                np.multiply(x[..., j, None], weights[:, j], out=tmp)
                acc += tmp
        acc += bias
        return activation.apply(acc)


def sum_last_axis(a: np.ndarray) -> np.ndarray:
    """Float32 reduction over the last axis, left to right."""
    with np.errstate(over="ignore", invalid="ignore"):
        acc = a[..., 0].copy()
        for j in range(1, a.shape[-1]):
            acc += a[..., j]
        return acc


def dot_self_last_axis(a: np.ndarray) -> np.ndarray:
    """Float32 sum of squares over the last axis, left to right."""
    with np.errstate(over="ignore", invalid="ignore"):
        acc = np.multiply(a[..., 0], a[..., 0])
        if a.shape[-1] > 1:
            tmp = np.empty_like(acc)
            for j in range(1, a.shape[-1]):
                np.multiply(a[..., j], a[..., j], out=tmp)
                acc += tmp
        return acc
