"""Price grids, grid-indexed CDFs and the discrete median rule.

All prices in the simulator are stored as integer indices into a
:class:`PriceGrid`; ``index * delta`` is the price value.  A grid with
``n`` points is also treated as a partition of ``[0, p_max]`` into ``n``
equal-width cells, and analytic distributions are projected onto the grid
by cell mass (see :func:`cell_cdf`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, NamedTuple

import numpy as np

# cum >= 1/2 is tested with this slack so that floating noise in long
# cumulative sums does not move the median off an exact tie
MEDIAN_TOL = 1e-10
CDF_TOL = 1e-9


@dataclass(frozen=True)
class PriceGrid:
    """Discretisation of ``[0, p_max]`` with step ``delta``."""

    delta: float
    p_max: float = 1.0
    n_points: int = field(init=False)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.p_max > 0:
            raise ValueError(f"p_max must be positive, got {self.p_max}")
        steps = round(self.p_max / self.delta)
        if abs(steps * self.delta - self.p_max) > 1e-9 * max(1.0, self.p_max):
            raise ValueError(
                f"p_max={self.p_max} is not an integer multiple of delta={self.delta}")
        if steps < 1:
            raise ValueError("grid needs at least two points")
        object.__setattr__(self, "n_points", int(steps) + 1)

    def value(self, index):
        return index * self.delta

    def values(self) -> np.ndarray:
        return np.arange(self.n_points) * self.delta

    def index_of(self, value) -> int:
        """Nearest grid index to ``value`` (clamped to the grid)."""
        k = int(round(value / self.delta))
        return min(max(k, 0), self.n_points - 1)

    def price(self, index: int) -> "GridPrice":
        if not 0 <= index < self.n_points:
            raise IndexError(f"grid index {index} outside [0, {self.n_points})")
        return GridPrice(int(index), index * self.delta)


class GridPrice(NamedTuple):
    index: int
    value: float


class GridCdf:
    """Cumulative distribution over the points of a :class:`PriceGrid`.

    ``cum[k]`` is ``P{X <= k * delta}``.  Construction validates the CDF
    invariants (bounded, non-decreasing, terminal value 1).
    """

    __slots__ = ("grid", "cum")

    def __init__(self, grid: PriceGrid, cum, validate: bool = True):
        cum = np.asarray(cum, dtype=float)
        if cum.shape != (grid.n_points,):
            raise ValueError(
                f"cum has shape {cum.shape}, grid has {grid.n_points} points")
        self.grid = grid
        self.cum = cum
        if validate:
            self.check()

    @classmethod
    def from_pmf(cls, grid: PriceGrid, pmf) -> "GridCdf":
        pmf = np.asarray(pmf, dtype=float)
        total = pmf.sum()
        if not total > 0:
            raise ValueError("pmf has no mass")
        cum = np.cumsum(pmf / total)
        cum[-1] = 1.0
        return cls(grid, np.minimum(cum, 1.0))

    @property
    def pmf(self) -> np.ndarray:
        return np.diff(self.cum, prepend=0.0)

    def check(self) -> None:
        cum = self.cum
        if cum.min() < -CDF_TOL or cum.max() > 1 + CDF_TOL:
            raise ValueError("CDF values outside [0, 1]")
        if np.any(np.diff(cum) < -CDF_TOL):
            raise ValueError("CDF is not non-decreasing")
        if abs(cum[-1] - 1.0) > CDF_TOL:
            raise ValueError(f"CDF terminal value {cum[-1]!r} != 1")

    def __call__(self, index: int) -> float:
        """``F`` at a grid index; indices below the grid give 0."""
        return 0.0 if index < 0 else float(self.cum[min(index, len(self.cum) - 1)])

    def __repr__(self):
        return f"GridCdf(n_points={self.grid.n_points}, delta={self.grid.delta})"


def median_index(cum: np.ndarray, pmf: np.ndarray | None = None) -> int:
    """Index of the discrete median of a cumulative vector.

    Smallest ``m`` with ``cum[m] >= 1/2``, moved upward to the first point
    carrying strictly positive mass.  For such ``m``, ``P{X >= m} >= 1/2``
    holds automatically because ``cum[m-1] < 1/2``.
    """
    k = int(np.searchsorted(cum, 0.5 - MEDIAN_TOL, side="left"))
    k = min(k, len(cum) - 1)
    if pmf is None:
        pmf = np.diff(cum, prepend=0.0)
    if pmf[k] <= 0:
        nz = np.flatnonzero(pmf[k:] > 0)
        if len(nz):
            k += int(nz[0])
    return k


def median(cdf: GridCdf) -> GridPrice:
    return cdf.grid.price(median_index(cdf.cum, cdf.pmf))


def cell_cdf(grid: PriceGrid, cdf_fn: Callable[[np.ndarray], np.ndarray]) -> GridCdf:
    """Project a continuous CDF on ``[0, p_max]`` onto ``grid`` by cell mass.

    Grid point ``j`` owns the cell ``[j, j+1) * p_max / n``, so ``cum[j]`` is
    the continuous CDF at the cell's right edge.  Point ``j * delta`` lies
    inside its own cell, and a uniform law gives every point mass ``1/n``.
    """
    n = grid.n_points
    edges = np.arange(1, n + 1) / n * grid.p_max
    cum = np.clip(np.asarray(cdf_fn(edges), dtype=float), 0.0, 1.0)
    cum = np.maximum.accumulate(cum)
    cum[-1] = 1.0
    return GridCdf(grid, cum)


def prior_uniform(grid: PriceGrid) -> GridCdf:
    n = grid.n_points
    return GridCdf(grid, np.arange(1, n + 1) / n)


def order_statistic_cdf(k: int, K: int) -> Callable[[np.ndarray], np.ndarray]:
    """CDF of the k-th largest of K iid uniforms on [0, 1].

    ``P{k-th largest <= b}`` is the probability that at least ``K - k + 1``
    of the K draws fall at or below ``b``.
    """
    if not 1 <= k <= K:
        raise ValueError(f"rank k={k} must satisfy 1 <= k <= K={K}")

    def cdf(b):
        b = np.asarray(b, dtype=float)
        out = np.zeros_like(b)
        for j in range(K - k + 1, K + 1):
            out += comb(K, j) * b**j * (1.0 - b) ** (K - j)
        return out

    return cdf


def prior_order_statistic(grid: PriceGrid, k: int, K: int) -> GridCdf:
    """Marginal prior of the k-th marginal bid (``v_1 >= ... >= v_K``)."""
    if abs(grid.p_max - 1.0) > 1e-12:
        raise ValueError("order-statistic priors live on [0, 1]")
    return cell_cdf(grid, order_statistic_cdf(k, K))
