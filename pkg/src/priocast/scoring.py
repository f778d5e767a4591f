"""Priority scoring of latent positions from a saliency map.

Every latent position (channel i, row j, col k) receives

    score = map[j, k] + g * offset(i)

where ``offset`` is the channel index (ascending mode) or its mirror
L-1-i (descending mode, the default: channel 0 outranks later channels).
Sorting all L*K*K scores gives a total transmission order; dropping the
lowest-scored p% is the partial-data primitive used by the experiment
harnesses.
"""

from __future__ import annotations

import math
from enum import IntEnum

import numpy as np

from .errors import ShapeError


class ChannelOrder(IntEnum):
    DESCENDING = 0  # channel 0 gets the largest offset
    ASCENDING = 1


def gradual_scoring(
    saliency: np.ndarray,
    channels: int,
    g: float,
    channel_order: ChannelOrder = ChannelOrder.DESCENDING,
) -> np.ndarray:
    """Build the L x K x K score tensor from a K x K map.

    g must be >= 0; g = 0 scores by saliency alone, while large g makes
    the channel offset dominate.
    """
    m = np.asarray(saliency, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"saliency map must be square, got {m.shape}")
    if not (g >= 0.0):
        raise ValueError(f"g must be non-negative, got {g}")
    idx = np.arange(channels, dtype=np.float64)
    if channel_order == ChannelOrder.DESCENDING:
        idx = idx[::-1]
    return m[None, :, :] + (g * idx)[:, None, None]


def priority_order(scores: np.ndarray) -> np.ndarray:
    """Permutation of flat indices, highest score first.

    Stable: ties are broken by ascending (channel, row, col), i.e. by flat
    index. Deterministic for identical score bytes.
    """
    flat = np.asarray(scores, dtype=np.float64).reshape(-1)
    if not np.isfinite(flat).all():
        raise ValueError("scores must be finite")
    return np.argsort(-flat, kind="stable")


def drop_lowest(latent: np.ndarray, scores: np.ndarray, percent: float) -> np.ndarray:
    """Zero out the floor(percent/100 * n) lowest-scored positions.

    Equivalent to zeroing everything and copying back the top (100-p)% of
    the priority order; ties follow priority_order's tie-break.
    """
    z = np.asarray(latent, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if z.shape != s.shape:
        raise ShapeError(f"latent shape {z.shape} != scores shape {s.shape}")
    if not 0.0 <= percent <= 100.0:
        raise ValueError(f"percent must be in [0, 100], got {percent}")
    n = z.size
    n_drop = int(math.floor(percent * n / 100.0))
    if n_drop == 0:
        return z.copy()
    order = priority_order(s)
    out = z.reshape(-1).copy()
    out[order[n - n_drop :]] = 0.0
    return out.reshape(z.shape)
