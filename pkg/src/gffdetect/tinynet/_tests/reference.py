"""
Loop-nest references for the layer primitives and the convolutional block.
"""
import math


def conv2d_reference(x, w, b):
    """``(L, C)`` input, ``(F, k, k)`` filters, same padding, loop nest."""
    L, C = len(x), len(x[0])
    F, k = len(w), len(w[0])
    before = (k - 1) // 2
    out = [[[0.0] * C for _ in range(L)] for _ in range(F)]
    for f in range(F):
        for i in range(L):
            for j in range(C):
                acc = b[f]
                for u in range(k):
                    for v in range(k):
                        ii, jj = i + u - before, j + v - before
                        if 0 <= ii < L and 0 <= jj < C:
                            acc += w[f][u][v] * x[ii][jj]
                out[f][i][j] = acc
    return out


def conv1d_reference(x, w, b):
    """``(C_in, L)`` input, ``(F, C_in, k)`` filters, same padding, loop nest."""
    c_in, L = len(x), len(x[0])
    F, k = len(w), len(w[0][0])
    before = (k - 1) // 2
    out = [[0.0] * L for _ in range(F)]
    for f in range(F):
        for t in range(L):
            acc = b[f]
            for c in range(c_in):
                for j in range(k):
                    tt = t + j - before
                    if 0 <= tt < L:
                        acc += w[f][c][j] * x[c][tt]
            out[f][t] = acc
    return out


def sigmoid_reference(z):
    return 1.0 / (1.0 + math.exp(-z))


def _relu(v):
    return v if v > 0 else 0.0


def _pool(values, kind):
    return max(values) if kind == "max" else sum(values) / len(values)


def cnnblock_reference(x, tensors, cfg):
    """Score of one ``(L, C)`` matrix with every layer written as loops over lists."""
    t = {name: value.tolist() for name, value in tensors.items()}
    h = []
    for k in cfg.kernel_sizes:
        for fmap in conv2d_reference(x, t[f"conv1.k{k}.weight"], t[f"conv1.k{k}.bias"]):
            h.append([_pool([_relu(v) for v in row], cfg.column_pool) for row in fmap])
    for layer in range(2, cfg.num_layers + 1):
        out = []
        for k in cfg.kernel_sizes:
            for series in conv1d_reference(h, t[f"conv{layer}.k{k}.weight"], t[f"conv{layer}.k{k}.bias"]):
                out.append([_relu(v) for v in series])
        h = out
    features = [_pool(series, cfg.time_pool) for series in h]
    hidden = []
    for row, bias in zip(t["dense.weight"], t["dense.bias"]):
        hidden.append(_relu(bias + sum(w * v for w, v in zip(row, features))))
    z = t["out.bias"][0] + sum(w * a for w, a in zip(t["out.weight"], hidden))
    return sigmoid_reference(z)
