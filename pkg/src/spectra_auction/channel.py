"""Binary symmetric uplinks and the noiseless downlink.

Noise is counter-based: the flip decision of a channel in round ``t`` is
the ``t``-th draw of a Philox stream keyed by ``(trial seed, user, role,
sub-index)``.  Two schemes run with the same seed therefore see the same
uplink noise on every channel they share, however many feedback bits each
one sends.
"""
from __future__ import annotations

from enum import IntEnum
from typing import Sequence

import numpy as np


class Role(IntEnum):
    UPLINK = 1
    BID = 2
    DRIFT = 3
    MESSAGE = 4


def stream(seed: int, user: int, role: int, sub: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, user, role, sub) key."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(user), int(role), int(sub)))
    return np.random.Generator(np.random.Philox(ss))


class BscChannel:
    """BSC_p from one user to the clearing authority."""

    _CHUNK = 256

    def __init__(self, p: float, seed: int, user: int, sub: int = 0):
        if not 0 <= p < 0.5:
            raise ValueError(f"p must be in [0, 0.5), got {p}")
        self.p = p
        self.key = (seed, user, int(Role.UPLINK), sub)
        self._gen = stream(seed, user, Role.UPLINK, sub)
        self._u = np.empty(0)

    def _uniforms(self, upto: int) -> np.ndarray:
        if upto > len(self._u):
            need = max(upto - len(self._u), self._CHUNK)
            self._u = np.concatenate([self._u, self._gen.random(need)])
        return self._u

    def flips(self, rounds: int) -> np.ndarray:
        """Flip indicators for rounds ``1..rounds``."""
        return self._uniforms(rounds)[:rounds] < self.p

    def transmit(self, bit: int, t: int) -> int:
        if t < 1:
            raise ValueError("rounds are numbered from 1")
        return int(bit) ^ int(self._uniforms(t)[t - 1] < self.p)


def flip_matrix(channels: Sequence[BscChannel], rounds: int) -> np.ndarray:
    """(channels, rounds) boolean array of flip indicators."""
    return np.stack([c.flips(rounds) for c in channels])


def feedback(bits):
    """Clearing-authority-to-user path.  Noiseless, so the identity.

    Arrays come back as arrays (a copy), anything else as a tuple.
    """
    if isinstance(bits, np.ndarray):
        return bits.copy()
    return tuple(bits)
