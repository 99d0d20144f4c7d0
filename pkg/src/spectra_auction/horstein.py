"""Horstein (posterior matching) transmission of a K-level message.

The message ``theta`` in ``{0, ..., K-1}`` is the point ``(theta + 0.5) / K``.
The receiver's posterior lives on a grid with ``oversample`` steps per
message level, i.e. step ``1 / (K * oversample)``.  With ``oversample=1``
a single grid cell can hold more than half of the posterior mass, and the
split ``b >= median`` then never separates it from the cells above; the
median freezes and the frame error rate stays high.  A finer posterior
grid removes that artefact.

Every comparison is done on integers: with ``s = oversample``, the message
sits at ``(2 theta + 1) s / 2`` grid steps.
"""
from __future__ import annotations

import numpy as np

from .channel import BscChannel
from .grid import PriceGrid, prior_uniform
from .posterior import SegmentBank

DEFAULT_OVERSAMPLE = 20


def _check(K, n, oversample):
    if K < 2:
        raise ValueError(f"need at least two message levels, got {K}")
    if n < 1:
        raise ValueError(f"need at least one transmission, got {n}")
    if oversample < 1:
        raise ValueError(f"oversample must be a positive integer, got {oversample}")


def decode_batch(K: int, n: int, p: float, thetas, flips, oversample: int = DEFAULT_OVERSAMPLE):
    """Run many independent transmissions at once.

    ``flips`` is an ``(n, rows)`` boolean array of channel flips.  Returns
    ``(theta_hat, frame_error)`` arrays.
    """
    _check(K, n, oversample)
    thetas = np.asarray(thetas, dtype=np.int64)
    flips = np.asarray(flips, dtype=bool)
    s = oversample
    grid = PriceGrid(1.0 / (K * s))
    bank = SegmentBank(grid, [prior_uniform(grid)] * len(thetas), p)
    twice_msg = (2 * thetas + 1) * s
    for t in range(n):
        x = twice_msg >= 2 * bank.medians
        bank.update(x ^ flips[t])
    m = bank.medians
    theta_hat = np.minimum(m // s, K - 1)
    return theta_hat, np.abs(twice_msg - 2 * m) > s


def horstein_decode(K: int, n: int, p: float, true_theta: int, channel: BscChannel,
                    oversample: int = DEFAULT_OVERSAMPLE) -> tuple[int, bool]:
    if not 0 <= true_theta < K:
        raise ValueError(f"message level {true_theta} outside [0, {K})")
    if channel.p != p:
        raise ValueError("channel crossover differs from the decoder's p")
    flips = channel.flips(n)[:, None]
    hat, err = decode_batch(K, n, p, [true_theta], flips, oversample)
    return int(hat[0]), bool(err[0])


def code_rate(K: int, n: int) -> float:
    return float(np.log2(K) / n)
