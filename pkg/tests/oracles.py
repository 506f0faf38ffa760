"""Independent reference implementations used as test oracles.

Deliberately naive: plain Python loops over scalars, no numpy vectorization,
no code shared with the package.
"""

import math


def conv2d(x, w, b, pad):
    # x[c][i][j], w[o][c][u][v]
    c_in, h, wd = len(x), len(x[0]), len(x[0][0])
    k = len(w[0][0])
    h2, w2 = h + 2 * pad - k + 1, wd + 2 * pad - k + 1
    out = []
    for o in range(len(w)):
        plane = []
        for i in range(h2):
            row = []
            for j in range(w2):
                s = b[o]
                for c in range(c_in):
                    for u in range(k):
                        for v in range(k):
                            ii, jj = i + u - pad, j + v - pad
                            if 0 <= ii < h and 0 <= jj < wd:
                                s += w[o][c][u][v] * x[c][ii][jj]
                row.append(s)
            plane.append(row)
        out.append(plane)
    return out


def relu(x):
    return [[[max(v, 0.0) for v in row] for row in plane] for plane in x]


def maxpool(x, s):
    return [
        [[max(plane[i * s + u][j * s + v] for u in range(s) for v in range(s)) for j in range(len(plane[0]) // s)] for i in range(len(plane) // s)]
        for plane in x
    ]


def flatten(x):
    return [v for plane in x for row in plane for v in row]


def dense(x, w, b):
    return [b[o] + sum(w[o][i] * x[i] for i in range(len(x))) for o in range(len(w))]


def forward(arch, tensors, image):
    """image as nested [c][i][j] lists; tensors as name -> nested lists."""
    x = image
    n_conv = n_dense = 0
    for layer in arch.layers:
        if layer.kind == "conv":
            n_conv += 1
            x = conv2d(x, tensors[f"conv{n_conv}.weight"], tensors[f"conv{n_conv}.bias"], layer.pad)
        elif layer.kind == "relu":
            x = relu(x) if isinstance(x[0], list) else [max(v, 0.0) for v in x]
        elif layer.kind == "maxpool":
            x = maxpool(x, layer.size)
        elif layer.kind == "flatten":
            x = flatten(x)
        elif layer.kind == "dense":
            n_dense += 1
            x = dense(x, tensors[f"dense{n_dense}.weight"], tensors[f"dense{n_dense}.bias"])
    return x


def softmax(z):
    m = max(z)
    e = [math.exp(v - m) for v in z]
    s = sum(e)
    return [v / s for v in e]
