"""Multi-unit Vickrey allocation and payments.

Works on any numeric value profiles (true bids, or posterior medians as
grid indices).  Each row of ``values`` is one user's marginal values,
non-increasing along the row.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np


@dataclass(frozen=True)
class VickreyOutcome:
    units: np.ndarray        # units won per user
    payments: np.ndarray     # amount charged per user
    payoffs: np.ndarray      # value of won units minus payment
    won: np.ndarray          # (N, K) boolean, marginal k of user i won

    @property
    def revenue(self):
        return self.payments.sum()


def top_k_mask(values: np.ndarray, K: int) -> np.ndarray:
    """Boolean mask of the K largest entries.

    Ties go to the lower user id, then to the lower marginal index, so a
    user's k-th unit never wins ahead of its (k-1)-th.
    """
    values = np.asarray(values)
    N, M = values.shape
    users, ks = np.meshgrid(np.arange(N), np.arange(M), indexing="ij")
    order = np.lexsort((ks.ravel(), users.ravel(), -values.ravel()))
    mask = np.zeros(N * M, dtype=bool)
    mask[order[:K]] = True
    return mask.reshape(N, M)


def losing_prices(values: np.ndarray, won: np.ndarray) -> tuple[list, np.ndarray]:
    """Per-user charge (sum of its ``k_i`` highest losing bids of others).

    Also returns, for every user, the highest losing bid overall; that is the
    price a user with no units would face for its first unit.
    """
    values = np.asarray(values)
    N = values.shape[0]
    units = won.sum(axis=1)
    charges = []
    for i in range(N):
        others = np.delete(values, i, axis=0)
        lost = np.sort(others[~np.delete(won, i, axis=0)])[::-1]
        k = int(units[i])
        charges.append(lost[:k].sum() if k else values.dtype.type(0))
    losers = values[~won]
    first = losers.max() if losers.size else values.dtype.type(0)
    return charges, first


def vickrey_outcome(values, K: int) -> VickreyOutcome:
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError("values must be (users, marginals)")
    if np.any(np.diff(values, axis=1) > 0):
        raise ValueError("marginal values must be non-increasing")
    if K > values.size:
        raise ValueError("more units than marginal bids")
    won = top_k_mask(values, K)
    charges, _ = losing_prices(values, won)
    payments = np.asarray(charges, dtype=float)
    gained = np.where(won, values, 0).sum(axis=1)
    return VickreyOutcome(won.sum(axis=1), payments, gained - payments, won)


def _best_allocation(values: np.ndarray, K: int, skip: int | None = None):
    """Exhaustive search over unit counts maximising reported surplus."""
    N = values.shape[0]
    cum = np.concatenate([np.zeros((N, 1)), np.cumsum(values, axis=1)], axis=1)
    best, best_units = -np.inf, None
    ranges = [range(0, 1) if i == skip else range(0, values.shape[1] + 1) for i in range(N)]
    for units in product(*ranges):
        if sum(units) != min(K, sum(len(r) - 1 for r in ranges)):
            continue
        surplus = sum(cum[i, k] for i, k in enumerate(units))
        if surplus > best:
            best, best_units = surplus, units
    return best, np.asarray(best_units)


def brute_force_vcg(values, K: int) -> tuple[np.ndarray, np.ndarray]:
    """(units, payments) from exhaustive search and Clarke pivot payments."""
    values = np.asarray(values, dtype=float)
    N = values.shape[0]
    cum = np.concatenate([np.zeros((N, 1)), np.cumsum(values, axis=1)], axis=1)
    _, units = _best_allocation(values, K)
    payments = np.zeros(N)
    for i in range(N):
        without_i, _ = _best_allocation(values, K, skip=i)
        others_now = sum(cum[j, units[j]] for j in range(N) if j != i)
        payments[i] = without_i - others_now
    return units, payments
