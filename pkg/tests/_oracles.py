"""Independent reference implementations used to pin expected values.

Everything here is written from the operation definitions with plain
loops, deliberately sharing no code with the library paths it checks.
"""

from __future__ import annotations

import numpy as np


def conv2d_ref(x, w, stride):
    """Nested-loop convolution, zero padding p = k // 2."""
    cin, h, wd = x.shape
    cout = w.shape[0]
    k = w.shape[-1]
    p = k // 2
    ho = (h + 2 * p - k) // stride + 1
    wo = (wd + 2 * p - k) // stride + 1
    out = np.zeros((cout, ho, wo))
    for o in range(cout):
        for i in range(ho):
            for j in range(wo):
                acc = 0.0
                for c in range(cin):
                    for a in range(k):
                        for b in range(k):
                            y = i * stride + a - p
                            xx = j * stride + b - p
                            if 0 <= y < h and 0 <= xx < wd:
                                acc += x[c, y, xx] * w[o, c, a, b]
                out[o, i, j] = acc
    return out


def tconv2d_ref(x, w, stride):
    """Nested-loop transposed convolution with output side = in * stride.

    Each input element (c, i, j) scatters w[o, c, :, :] around output
    position (i * stride, j * stride), offset by -p.
    """
    cin, h, wd = x.shape
    cout = w.shape[0]
    k = w.shape[-1]
    p = k // 2
    ho, wo = h * stride, wd * stride
    out = np.zeros((cout, ho, wo))
    for o in range(cout):
        for c in range(cin):
            for i in range(h):
                for j in range(wd):
                    for a in range(k):
                        for b in range(k):
                            y = i * stride + a - p
                            xx = j * stride + b - p
                            if 0 <= y < ho and 0 <= xx < wo:
                                out[o, y, xx] += x[c, i, j] * w[o, c, a, b]
    return out


def block_mean_ref(m, cells):
    """Per-cell mean over (side/cells) x (side/cells) blocks, plain loops."""
    side = m.shape[0]
    b = side // cells
    out = np.zeros((cells, cells))
    for i in range(cells):
        for j in range(cells):
            acc = 0.0
            for y in range(b):
                for x in range(b):
                    acc += m[i * b + y, j * b + x]
            out[i, j] = acc / (b * b)
    return out


def round_half_away_ref(v):
    import math

    return math.floor(v + 0.5) if v >= 0 else math.ceil(v - 0.5)


def priority_order_ref(scores):
    """Sort flat indices by (-score, flat index) with python sorted()."""
    flat = scores.reshape(-1)
    return sorted(range(flat.size), key=lambda i: (-flat[i], i))


def upsample_nn_ref(cells, side):
    b = side // cells.shape[0]
    out = np.zeros((side, side))
    for y in range(side):
        for x in range(side):
            out[y, x] = cells[y // b, x // b]
    return out


def cubic_integral_ref(xs, ys, lo, hi):
    """Definite integral of the least-squares cubic through (xs, ys) using
    an independent Vandermonde solve + exact monomial integration."""
    v = np.vander(xs, 4, increasing=True)  # [1, x, x^2, x^3]
    coef, *_ = np.linalg.lstsq(v, ys, rcond=None)

    def anti(t):
        return coef[0] * t + coef[1] * t**2 / 2 + coef[2] * t**3 / 3 + coef[3] * t**4 / 4

    return anti(hi) - anti(lo)
