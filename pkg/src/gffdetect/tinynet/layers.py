"""
Layer primitives with explicit backward passes.

Every ``*_forward`` returns ``(out, cache)`` and the matching
``*_backward`` takes the upstream gradient and that cache.  Convolutions
are cross-correlations with "same" padding: a kernel of size ``k`` gets
``(k - 1) // 2`` zeros before and the rest after, so the output keeps the
input length.  All arithmetic is float64.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


__all__ = [
    "same_padding",
    "conv2d_same_forward",
    "conv2d_same_backward",
    "conv1d_same_forward",
    "conv1d_same_backward",
    "relu_forward",
    "relu_backward",
    "pool_forward",
    "pool_backward",
    "dense_forward",
    "dense_backward",
    "sigmoid",
    "SIGMOID_EPS",
]


#: Sigmoid outputs are kept this far from 0 and 1.
SIGMOID_EPS = 1e-15


def same_padding(k):
    """
    Zeros added before and after an axis for a kernel of size ``k``.

    Examples
    --------
    >>> same_padding(1), same_padding(2), same_padding(3), same_padding(8)
    ((0, 0), (0, 1), (1, 1), (3, 4))
    """
    before = (k - 1) // 2
    return before, k - 1 - before


def conv2d_same_forward(x, w, b):
    """
    Single input channel 2D convolution with square kernels.

    Parameters
    ----------
    x : ndarray
        ``(L, C)`` input.
    w : ndarray
        ``(F, k, k)`` filters.
    b : ndarray
        ``(F,)`` biases.

    Returns
    -------
    out : ndarray
        ``(F, L, C)``.
    cache : tuple
    """
    k = w.shape[1]
    before, after = same_padding(k)
    xp = np.pad(x, ((before, after), (before, after)))
    patches = sliding_window_view(xp, (k, k))
    out = np.tensordot(w, patches, axes=([1, 2], [2, 3])) + b[:, None, None]
    return out, (patches, w)


def conv2d_same_backward(dout, cache):
    """
    Gradients of `conv2d_same_forward` with respect to the filters and
    biases.  The input is data, so its gradient is not computed.

    Returns
    -------
    dw, db : ndarray
    """
    patches, w = cache
    dw = np.tensordot(dout, patches, axes=([1, 2], [0, 1]))
    db = dout.sum(axis=(1, 2))
    return dw, db


def conv1d_same_forward(x, w, b):
    """
    Multi-channel 1D convolution over time.

    Parameters
    ----------
    x : ndarray
        ``(C_in, L)``.
    w : ndarray
        ``(F, C_in, k)``.
    b : ndarray
        ``(F,)``.

    Returns
    -------
    out : ndarray
        ``(F, L)``.
    cache : tuple
    """
    k = w.shape[2]
    before, after = same_padding(k)
    xp = np.pad(x, ((0, 0), (before, after)))
    windows = sliding_window_view(xp, k, axis=1)
    out = np.tensordot(w, windows, axes=([1, 2], [0, 2])) + b[:, None]
    return out, (windows, w, x.shape[1], before)


def conv1d_same_backward(dout, cache):
    """
    Returns
    -------
    dx, dw, db : ndarray
    """
    windows, w, length, before = cache
    k = w.shape[2]
    dw = np.tensordot(dout, windows, axes=([1], [1]))
    db = dout.sum(axis=1)
    # dwin[c, j, t] flows back to padded position t + j
    dwin = np.tensordot(w, dout, axes=([0], [0]))
    dxp = np.zeros((w.shape[1], length + k - 1))
    for j in range(k):
        dxp[:, j:j + length] += dwin[:, j, :]
    return dxp[:, before:before + length], dw, db


def relu_forward(x):
    return np.maximum(x, 0.0), x


def relu_backward(dout, cache):
    """Subgradient 0 at 0."""
    return dout * (cache > 0)


def pool_forward(x, axis, kind):
    """
    Collapse ``axis`` of ``x`` by averaging or taking the maximum.

    Max pooling keeps the first index among ties.

    Returns
    -------
    out : ndarray
    cache : tuple
    """
    if kind == "avg":
        return x.mean(axis=axis), (kind, axis, x.shape, None)
    if kind == "max":
        index = np.expand_dims(x.argmax(axis=axis), axis)
        out = np.take_along_axis(x, index, axis=axis)
        return np.squeeze(out, axis=axis), (kind, axis, x.shape, index)
    raise ValueError(f"Unknown pooling {kind!r}")


def pool_backward(dout, cache):
    kind, axis, shape, index = cache
    grad = np.expand_dims(dout, axis)
    if kind == "avg":
        return np.broadcast_to(grad / shape[axis], shape).copy()
    dx = np.zeros(shape)
    np.put_along_axis(dx, index, grad, axis=axis)
    return dx


def dense_forward(x, w, b):
    """
    ``w @ x + b`` for one sample; ``w`` is ``(out, in)``.
    """
    return w @ x + b, (x, w)


def dense_backward(dout, cache):
    """
    Returns
    -------
    dx, dw, db : ndarray
    """
    x, w = cache
    return w.T @ dout, np.outer(dout, x), dout.copy()


def sigmoid(z):
    """
    Logistic function, clipped to ``[SIGMOID_EPS, 1 - SIGMOID_EPS]``.

    Examples
    --------
    >>> float(sigmoid(0.0))
    0.5
    """
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    s = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return np.clip(s, SIGMOID_EPS, 1.0 - SIGMOID_EPS)
