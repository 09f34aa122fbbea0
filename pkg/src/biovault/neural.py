"""Minimal float64 neural primitives: valid convolution, ReLU, 2x2 max pooling,
a dense layer, and the logistic sigmoid.

Everything operates on plain numpy arrays. conv2d_valid is the single-channel
primitive,

    out[i, j] = sum_k sum_l input[i + k, j + l] * kernel[k, l],

and conv2d_multi is the multi-channel composition the face stages need (it is
pinned by tests to equal summing conv2d_valid over channel pairs).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, KernelTooLarge


def conv2d_valid(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid (no padding, stride 1) cross-correlation of a 2-D image and kernel.

    Output shape is (H - K + 1, W - L + 1). Implemented as one shifted
    multiply-add per kernel tap, so the work is vectorized over the image.
    """
    image = np.asarray(image, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if image.ndim != 2 or kernel.ndim != 2:
        raise DimensionMismatch("conv2d_valid expects 2-D arrays")
    kh, kw = kernel.shape
    ih, iw = image.shape
    if kh > ih or kw > iw:
        raise KernelTooLarge(f"kernel {kernel.shape} exceeds image {image.shape}")
    oh, ow = ih - kh + 1, iw - kw + 1
    out = np.zeros((oh, ow))
    for k in range(kh):
        for l in range(kw):
            out += kernel[k, l] * image[k:k + oh, l:l + ow]
    return out


def conv2d_multi(stack: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Multi-channel valid convolution.

    stack: (C_in, H, W); kernels: (C_out, C_in, KH, KW). Returns
    (C_out, H - KH + 1, W - KW + 1), where each output map is the sum over
    input channels of the single-channel convolution.
    """
    stack = np.asarray(stack, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    if stack.ndim != 3 or kernels.ndim != 4:
        raise DimensionMismatch("conv2d_multi expects (C,H,W) and (O,C,KH,KW)")
    if kernels.shape[1] != stack.shape[0]:
        raise DimensionMismatch(
            f"kernel expects {kernels.shape[1]} input channels, got {stack.shape[0]}"
        )
    c_out, c_in, kh, kw = kernels.shape
    _, ih, iw = stack.shape
    if kh > ih or kw > iw:
        raise KernelTooLarge(f"kernel {(kh, kw)} exceeds image {(ih, iw)}")
    oh, ow = ih - kh + 1, iw - kw + 1
    out = np.zeros((c_out, oh, ow))
    for k in range(kh):
        for l in range(kw):
            patch = stack[:, k:k + oh, l:l + ow]
            out += np.tensordot(kernels[:, :, k, l], patch, axes=([1], [0]))
    return out


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(x, 0); idempotent, shape-preserving."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def max_pool_2x2(x: np.ndarray) -> np.ndarray:
    """Non-overlapping 2x2 max pooling with stride 2 on the last two axes.

    Odd trailing rows/columns are truncated, matching the valid-window rule.
    Works on a single 2-D map or a channel stack (..., H, W).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise DimensionMismatch("max_pool_2x2 expects at least 2 dimensions")
    h, w = x.shape[-2], x.shape[-1]
    if h < 2 or w < 2:
        raise DimensionMismatch(f"max_pool_2x2 needs at least a 2x2 input, got {(h, w)}")
    oh, ow = h // 2, w // 2
    trimmed = x[..., : oh * 2, : ow * 2]
    shaped = trimmed.reshape(*x.shape[:-2], oh, 2, ow, 2)
    return shaped.max(axis=(-3, -1))


def dense(weights: np.ndarray, features: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map z = W f + b.

    features may be a single vector (n,) or a batch (m, n); the batch case
    returns (m, out).
    """
    weights = np.asarray(weights, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if weights.ndim != 2:
        raise DimensionMismatch("dense expects a 2-D weight matrix")
    if weights.shape[0] != bias.shape[0]:
        raise DimensionMismatch("bias length must match the weight row count")
    if features.ndim == 1:
        if features.shape[0] != weights.shape[1]:
            raise DimensionMismatch(
                f"dense expects {weights.shape[1]} features, got {features.shape[0]}"
            )
        return weights @ features + bias
    if features.ndim == 2:
        if features.shape[1] != weights.shape[1]:
            raise DimensionMismatch(
                f"dense expects {weights.shape[1]} features, got {features.shape[1]}"
            )
        return features @ weights.T + bias
    raise DimensionMismatch("dense expects a vector or a batch of vectors")


def sigmoid(z):
    """Logistic function 1 / (1 + e^-z), numerically stable for large |z|.

    Accepts a scalar or an ndarray and returns the matching type; values lie
    strictly inside (0, 1) and sigmoid(0) == 0.5 exactly.
    """
    z_arr = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z_arr)
    pos = z_arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z_arr[pos]))
    ez = np.exp(z_arr[~pos])
    out[~pos] = ez / (1.0 + ez)
    if np.isscalar(z) or np.ndim(z) == 0:
        return float(out)
    return out
