"""
Forward and backward passes of the group classifier and the video
aggregator.

The convolutional block maps one ``(L, C)`` GFF matrix to a score:

1. for every kernel size ``k``: ``k x k`` same-padded convolution with
   ``conv1_filters`` maps, ReLU, pooling over the column axis;
2. the pooled series of all sizes are stacked into
   ``len(kernel_sizes) * conv1_filters`` channels; for every ``k``: width
   ``k`` convolution over time to ``conv2_filters`` channels and ReLU,
   the outputs of all sizes stacked again; repeated for layers 2 to
   ``num_layers``, then global pooling over time (only the pooling with
   ``num_layers=1``);
3. dense layer with ReLU, then a single sigmoid neuron.

The aggregator sorts the group scores in decreasing order, pads them with
zeros or truncates them to ``max_groups`` and runs a two-layer network
with a sigmoid output; in max mode it returns the largest score.
"""

import math

import numpy as np

from ..exceptions import ShapeMismatch, EmptyGroupList
from . import layers


__all__ = [
    "cnnblock_forward",
    "cnnblock_backward",
    "aggregator_forward",
    "aggregator_backward",
    "model_forward",
    "model_backward",
    "bce_loss",
    "bce_grad",
    "smoothed_target",
    "BCE_CLAMP",
]


BCE_CLAMP = 1e-12


def cnnblock_forward(gff, params, expected_shape=None):
    """
    Score one GFF matrix.

    Parameters
    ----------
    gff : GffMatrix or ndarray
        ``(L, C)`` matrix.
    params : CnnBlockParams
    expected_shape : tuple, optional
        Shape the weights were trained for.

    Returns
    -------
    score : float
        In (0, 1).
    cache : tuple
        For `cnnblock_backward`.

    Raises
    ------
    ShapeMismatch
    """
    x = np.asarray(getattr(gff, "data", gff), dtype=np.float64)
    if x.ndim != 2 or (expected_shape is not None and x.shape != tuple(expected_shape)):
        raise ShapeMismatch(f"GFF matrix of shape {x.shape} does not match the expected {expected_shape}")
    cfg = params.config
    t = params.tensors

    first = []
    pooled = []
    for k in cfg.kernel_sizes:
        z, conv_cache = layers.conv2d_same_forward(x, t[f"conv1.k{k}.weight"], t[f"conv1.k{k}.bias"])
        a, relu_cache = layers.relu_forward(z)
        p, pool_cache = layers.pool_forward(a, 2, cfg.column_pool)
        first.append((conv_cache, relu_cache, pool_cache))
        pooled.append(p)
    h = np.concatenate(pooled, axis=0)

    time_layers = []
    for layer in range(2, cfg.num_layers + 1):
        last = layer == cfg.num_layers
        outputs = []
        caches = []
        for k in cfg.kernel_sizes:
            name = f"conv{layer}.k{k}"
            z, conv_cache = layers.conv1d_same_forward(h, t[f"{name}.weight"], t[f"{name}.bias"])
            a, relu_cache = layers.relu_forward(z)
            pool_cache = None
            if last:
                a, pool_cache = layers.pool_forward(a, 1, cfg.time_pool)
            caches.append((conv_cache, relu_cache, pool_cache))
            outputs.append(a)
        time_layers.append(caches)
        h = np.concatenate(outputs, axis=0)
    time_pool_cache = None
    if cfg.num_layers == 1:
        h, time_pool_cache = layers.pool_forward(h, 1, cfg.time_pool)

    d, dense_cache = layers.dense_forward(h, t["dense.weight"], t["dense.bias"])
    r, relu_cache = layers.relu_forward(d)
    z = float(t["out.weight"] @ r + t["out.bias"][0])
    score = float(layers.sigmoid(z))
    cache = (cfg, first, time_layers, time_pool_cache, dense_cache, relu_cache, r, t["out.weight"], score)
    return score, cache


def cnnblock_backward(dscore, cache):
    """
    Gradients of every CNN block tensor given ``dL/dscore``.

    Returns
    -------
    dict
        Same names and shapes as ``CnnBlockParams.tensors``.
    """
    cfg, first, time_layers, time_pool_cache, dense_cache, relu_cache, r, w_out, score = cache
    grads = {}
    dz = dscore * score * (1.0 - score)
    grads["out.weight"] = dz * r
    grads["out.bias"] = np.array([dz])
    dd = layers.relu_backward(dz * w_out, relu_cache)
    dv, grads["dense.weight"], grads["dense.bias"] = layers.dense_backward(dd, dense_cache)

    n_k = len(cfg.kernel_sizes)
    if cfg.num_layers == 1:
        dh = layers.pool_backward(dv, time_pool_cache)
    else:
        dh = dv
    for layer in range(cfg.num_layers, 1, -1):
        dprev = None
        for k, (conv_cache, relu_c, pool_cache), dpart in zip(cfg.kernel_sizes, time_layers[layer - 2],
                                                              np.split(dh, n_k)):
            da = dpart if pool_cache is None else layers.pool_backward(dpart, pool_cache)
            dzk = layers.relu_backward(da, relu_c)
            dx, grads[f"conv{layer}.k{k}.weight"], grads[f"conv{layer}.k{k}.bias"] = \
                layers.conv1d_same_backward(dzk, conv_cache)
            dprev = dx if dprev is None else dprev + dx
        dh = dprev

    for k, (conv_cache, relu_c, pool_cache), dp in zip(cfg.kernel_sizes, first, np.split(dh, n_k)):
        da = layers.pool_backward(dp, pool_cache)
        dzk = layers.relu_backward(da, relu_c)
        grads[f"conv1.k{k}.weight"], grads[f"conv1.k{k}.bias"] = layers.conv2d_same_backward(dzk, conv_cache)
    return grads


def aggregator_forward(group_scores, params):
    """
    Video score from the scores of its GFF groups.

    Parameters
    ----------
    group_scores : sequence of float
    params : AggregatorParams

    Returns
    -------
    score : float
    cache : tuple

    Raises
    ------
    EmptyGroupList
        In max mode, when there are no scores.
    """
    s = np.asarray(group_scores, dtype=np.float64).reshape(-1)
    if params.mode == "max":
        if s.size == 0:
            raise EmptyGroupList("Max aggregation needs at least one group score")
        winner = int(np.argmax(s))
        return float(s[winner]), ("max", s.size, winner)

    t = params.tensors
    G = params.config.max_groups
    order = np.argsort(-s, kind="stable")[:G]
    x = np.zeros(G)
    x[:order.size] = s[order]
    h, hidden_cache = layers.dense_forward(x, t["hidden.weight"], t["hidden.bias"])
    a, relu_cache = layers.relu_forward(h)
    z = float(t["out.weight"] @ a + t["out.bias"][0])
    score = float(layers.sigmoid(z))
    return score, ("fc", s.size, order, hidden_cache, relu_cache, a, t["out.weight"], score)


def aggregator_backward(dscore, cache):
    """
    Returns
    -------
    dgroups : ndarray
        Gradient with respect to each input group score.
    grads : dict
        Gradients of the aggregator tensors (empty in max mode).
    """
    if cache[0] == "max":
        _, n, winner = cache
        dgroups = np.zeros(n)
        dgroups[winner] = dscore
        return dgroups, {}
    _, n, order, hidden_cache, relu_cache, a, w_out, score = cache
    grads = {}
    dz = dscore * score * (1.0 - score)
    grads["out.weight"] = dz * a
    grads["out.bias"] = np.array([dz])
    dh = layers.relu_backward(dz * w_out, relu_cache)
    dx, grads["hidden.weight"], grads["hidden.bias"] = layers.dense_backward(dh, hidden_cache)
    dgroups = np.zeros(n)
    dgroups[order] = dx[:order.size]
    return dgroups, grads


def model_forward(gff_stack, model):
    """
    Score a video from its stacked GFF matrices.

    Parameters
    ----------
    gff_stack : ndarray
        ``(G, L, C)``.
    model : ModelParams

    Returns
    -------
    video_score : float
    group_scores : list of float
    cache : tuple
    """
    caches = []
    group_scores = []
    for gff in gff_stack:
        score, cache = cnnblock_forward(gff, model.cnnblock, model.input_shape)
        group_scores.append(score)
        caches.append(cache)
    video_score, agg_cache = aggregator_forward(group_scores, model.aggregator)
    return video_score, group_scores, (caches, agg_cache)


def model_backward(dvideo, cache):
    """
    Gradients of every model tensor given ``dL/dvideo_score``.

    Returns
    -------
    dict
        Flat names as in `ModelParams.flat`.
    """
    caches, agg_cache = cache
    dgroups, agg_grads = aggregator_backward(dvideo, agg_cache)
    grads = {}
    for dg, group_cache in zip(dgroups, caches):
        for name, g in cnnblock_backward(float(dg), group_cache).items():
            key = f"cnn.{name}"
            grads[key] = g if key not in grads else grads[key] + g
    grads.update({f"agg.{name}": g for name, g in agg_grads.items()})
    return grads


def smoothed_target(label, eps):
    """
    Examples
    --------
    >>> smoothed_target(1, 0.0), smoothed_target(0, 0.5)
    (1.0, 0.25)
    """
    return label * (1.0 - eps) + eps / 2.0


def bce_loss(pred, label, eps=0.0):
    """
    Binary cross entropy against a symmetrically smoothed target.

    Examples
    --------
    >>> round(bce_loss(0.5, 1), 6)
    0.693147
    """
    p = min(max(float(pred), BCE_CLAMP), 1.0 - BCE_CLAMP)
    y = smoothed_target(label, eps)
    return -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))


def bce_grad(pred, label, eps=0.0):
    """``d bce_loss / d pred``."""
    p = min(max(float(pred), BCE_CLAMP), 1.0 - BCE_CLAMP)
    y = smoothed_target(label, eps)
    return (p - y) / (p * (1.0 - p))
