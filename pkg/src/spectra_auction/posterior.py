"""Posterior-matching updates on a price grid.

A bidder (or a virtual user) answers one question per round: is my value
at least the current posterior median?  The receiver folds the noisy
answer into its posterior.  For grid index ``b`` and split point ``m``
(the median before the update) a received bit ``y`` has likelihood
``r = P{y | x=0}`` on cells ``b < m`` and ``1 - r`` on cells ``b >= m``,
so every update multiplies the two sides of the split by constants.

Three implementations of the same update live here:

* :func:`update_cdf_equations` evaluates the closed-form four-case CDF
  recursion pointwise; it is the reference formula.
* :func:`update_distribution` works on pmf cells of a dense
  :class:`~spectra_auction.grid.GridCdf` (single posterior, readable).
* :class:`DenseBank` and :class:`SegmentBank` update many posteriors at
  once.  ``SegmentBank`` stores each posterior as a base distribution times
  a piecewise-constant weight, so its cost grows with the number of rounds
  rather than with the grid size.  This is what makes 10^5-point grids
  affordable.

:func:`brute_force_posterior` recomputes a posterior from scratch by
enumerating the likelihood of the whole observation history; tests use it
as the independent oracle for all three.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import MEDIAN_TOL, GridCdf, GridPrice, PriceGrid, median, median_index


class InconsistentObservation(ValueError):
    """Received bits have zero likelihood under the current posterior."""


def user_bit(bid: GridPrice | int, med: GridPrice | int) -> int:
    """1 if the bid is at least the posterior median."""
    b = bid.index if isinstance(bid, GridPrice) else bid
    m = med.index if isinstance(med, GridPrice) else med
    return int(b >= m)


def _likelihoods(y, p):
    """(P{y | x=0}, P{y | x=1}) for received bit(s) ``y`` on a BSC_p."""
    y = np.asarray(y, dtype=bool)
    r = np.where(y, p, 1.0 - p)
    return r, 1.0 - r


def update_cdf_equations(cdf: GridCdf, m_index: int, y: int, p: float) -> GridCdf:
    """Closed-form posterior CDF after receiving ``y`` with split at ``m_index``.

    Points below the median are scaled by ``r / Z``; points at or above it
    follow ``((1-r) F(b) + (2r-1) F(m')) / Z`` with
    ``Z = 1 - r + (2r-1) F(m')`` and ``m' = m - delta``.
    """
    F = cdf.cum
    f_mprime = cdf(m_index - 1)
    r = p if y else 1.0 - p
    z = 1.0 - r + (2.0 * r - 1.0) * f_mprime
    if z <= 0:
        raise InconsistentObservation(f"bit {y} impossible with p={p}")
    new = np.empty_like(F)
    new[:m_index] = r * F[:m_index] / z
    new[m_index:] = ((1.0 - r) * F[m_index:] + (2.0 * r - 1.0) * f_mprime) / z
    if abs(new[-1] - 1.0) > 1e-6:
        raise AssertionError(f"posterior drifted to total mass {new[-1]!r}")
    new /= new[-1]
    return GridCdf(cdf.grid, new)


@dataclass(frozen=True)
class PosteriorState:
    """A posterior together with its median.

    ``last_median`` is the split point the next update will use and
    ``m_prime`` the grid point just below it (clamped at 0).
    """

    cdf: GridCdf
    last_median: GridPrice

    @classmethod
    def from_cdf(cls, cdf: GridCdf) -> "PosteriorState":
        return cls(cdf, median(cdf))

    @property
    def m_prime(self) -> GridPrice:
        return self.cdf.grid.price(max(self.last_median.index - 1, 0))


def update_distribution(state: PosteriorState, y: int, p: float) -> PosteriorState:
    """Fold one received bit into ``state``."""
    pmf = state.cdf.pmf
    m = state.last_median.index
    r0, r1 = _likelihoods(y, p)
    new = np.empty_like(pmf)
    new[:m] = pmf[:m] * r0
    new[m:] = pmf[m:] * r1
    total = new.sum()
    if not total > 0:
        raise InconsistentObservation(f"bit {y} impossible with p={p}")
    return PosteriorState.from_cdf(GridCdf.from_pmf(state.cdf.grid, new))


def brute_force_posterior(prior: GridCdf, history: Sequence[tuple], p: float) -> GridCdf:
    """Posterior by direct enumeration of the whole history.

    ``history`` holds ``(median, y)`` pairs (median as index or GridPrice).
    Each grid point ``b`` is weighted by its prior mass times
    ``prod_t P{y_t | x_t(b)}`` with ``x_t(b) = 1{b >= m_t}``.
    """
    grid = prior.grid
    b = np.arange(grid.n_points)
    weight = prior.pmf.copy()
    for med, y in history:
        m = med.index if isinstance(med, GridPrice) else int(med)
        x = b >= m
        weight *= np.where(x == bool(y), 1.0 - p, p)
    total = weight.sum()
    if not total > 0:
        raise InconsistentObservation("history has zero likelihood")
    return GridCdf.from_pmf(grid, weight)


class DenseBank:
    """Rows of dense pmfs over one grid, updated in lockstep.

    Used where the posterior must be inspected cell by cell every round
    (tracking) and in tests.
    """

    def __init__(self, grid: PriceGrid, priors: Sequence[GridCdf], p: float):
        self.grid = grid
        self.p = p
        self.pmf = np.stack([c.pmf for c in priors]).astype(float)
        self.pmf /= self.pmf.sum(axis=1, keepdims=True)
        self._cols = np.arange(grid.n_points)
        self.medians = self._medians()

    def __len__(self):
        return self.pmf.shape[0]

    def copy(self) -> "DenseBank":
        other = object.__new__(DenseBank)
        other.__dict__.update(self.__dict__)
        other.pmf = self.pmf.copy()
        other.medians = self.medians.copy()
        return other

    def _medians(self, rows=None) -> np.ndarray:
        pmf = self.pmf if rows is None else self.pmf[rows]
        cum = np.cumsum(pmf, axis=1)
        k = np.argmax(cum >= 0.5 - MEDIAN_TOL, axis=1)
        # first index at or above k carrying positive mass
        ok = (self._cols[None, :] >= k[:, None]) & (pmf > 0)
        return np.argmax(ok, axis=1)

    def update(self, y) -> None:
        r0, r1 = _likelihoods(y, self.p)
        below = self._cols[None, :] < self.medians[:, None]
        self.pmf *= np.where(below, r0[:, None], r1[:, None])
        total = self.pmf.sum(axis=1, keepdims=True)
        if np.any(total <= 0):
            raise InconsistentObservation("received bit impossible under posterior")
        self.pmf /= total
        self.medians = self._medians()

    def row_pmf(self, row: int) -> np.ndarray:
        return self.pmf[row]

    def cdf(self, row: int) -> GridCdf:
        return GridCdf.from_pmf(self.grid, self.pmf[row])

    def replace(self, rows, pmfs) -> None:
        rows = np.asarray(rows)
        self.pmf[rows] = pmfs
        self.pmf[rows] /= self.pmf[rows].sum(axis=1, keepdims=True)
        self.medians[rows] = self._medians(rows)

    def same_as(self, other: "DenseBank") -> bool:
        return (np.array_equal(self.pmf, other.pmf)
                and np.array_equal(self.medians, other.medians))

    def rows_match(self, other: "DenseBank", row: int = 0) -> bool:
        """Every row of ``self`` equals row ``row`` of ``other``."""
        return (np.all(self.pmf == other.pmf[row])
                and np.all(self.medians == other.medians[row]))


class SegmentBank:
    """Rows of posteriors stored as base pmf times piecewise-constant weights.

    Row ``u`` has pmf ``base_u[k] * exp(logw[u, s])`` for ``k`` in segment
    ``s`` (``starts[u, s] <= k < starts[u, s+1]``).  Every update inserts
    the split point as a new segment start, so after ``t`` updates a row
    has ``t + 1`` segments (some possibly empty) whatever the grid size.
    Weights live in log space so long runs do not underflow.
    """

    def __init__(self, grid: PriceGrid, priors: Sequence[GridCdf], p: float):
        self.grid = grid
        self.p = p
        n = grid.n_points
        bases = {}
        base_id = []
        for c in priors:
            key = id(c)
            if key not in bases:
                bases[key] = (len(bases), c)
            base_id.append(bases[key][0])
        table = np.zeros((len(bases), n + 1))
        for idx, c in bases.values():
            table[idx, 1:] = c.cum
        self.base_table = table
        self.base_id = np.asarray(base_id, dtype=np.intp)
        rows = len(base_id)
        self.starts = np.zeros((rows, 1), dtype=np.int64)
        self.logw = np.zeros((rows, 1))
        self.n = n
        self.medians = self._medians(self._normalise())

    def __len__(self):
        return self.starts.shape[0]

    def copy(self) -> "SegmentBank":
        other = object.__new__(SegmentBank)
        other.__dict__.update(self.__dict__)
        other.starts = self.starts.copy()
        other.logw = self.logw.copy()
        other.medians = self.medians.copy()
        return other

    def _bounds(self):
        ends = np.empty_like(self.starts)
        ends[:, :-1] = self.starts[:, 1:]
        ends[:, -1] = self.n
        return ends

    def _normalise(self) -> np.ndarray:
        """Per-segment masses summing to one; shifts ``logw`` to match."""
        rows = self.base_id[:, None]
        base = (self.base_table[rows, self._bounds()]
                - self.base_table[rows, self.starts])
        top = self.logw.max(axis=1, keepdims=True)
        if np.any(~np.isfinite(top)):
            raise InconsistentObservation("received bit impossible under posterior")
        mass = np.exp(self.logw - top) * base
        total = mass.sum(axis=1, keepdims=True)
        if np.any(total <= 0):
            raise InconsistentObservation("received bit impossible under posterior")
        self.logw -= top + np.log(total)
        return mass / total

    def _medians(self, mass: np.ndarray) -> np.ndarray:
        cum = np.cumsum(mass, axis=1)
        s = np.argmax(cum >= 0.5 - MEDIAN_TOL, axis=1)
        r = np.arange(len(s))
        before = cum[r, s] - mass[r, s]
        start = self.starts[r, s]
        end = self._bounds()[r, s]
        w = np.exp(self.logw[r, s])
        out = np.empty(len(s), dtype=np.int64)
        for b in np.unique(self.base_id):
            sel = self.base_id == b
            C = self.base_table[b]
            target = C[start[sel]] + (0.5 - MEDIAN_TOL - before[sel]) / w[sel]
            # smallest k with C[k+1] >= target
            k = np.searchsorted(C, target, side="left") - 1
            out[sel] = np.clip(k, start[sel], end[sel] - 1)
        return out

    def update(self, y) -> None:
        m = self.medians
        rows, S = self.starts.shape
        r = np.arange(rows)
        seg = (self.starts <= m[:, None]).sum(axis=1) - 1
        pos = seg + 1
        cols = np.arange(S + 1)[None, :]
        src = np.where(cols < pos[:, None], cols, cols - 1)
        starts = np.take_along_axis(self.starts, src, axis=1)
        logw = np.take_along_axis(self.logw, src, axis=1)
        starts[r, pos] = m
        r0, r1 = _likelihoods(y, self.p)
        with np.errstate(divide="ignore"):
            l0, l1 = np.log(r0), np.log(r1)
        logw += np.where(starts < m[:, None], l0[:, None], l1[:, None])
        self.starts, self.logw = starts, logw
        self.medians = self._medians(self._normalise())

    def row_pmf(self, row: int) -> np.ndarray:
        C = self.base_table[self.base_id[row]]
        base = np.diff(C)
        lengths = np.diff(np.append(self.starts[row], self.n))
        return base * np.repeat(np.exp(self.logw[row]), lengths)

    def cdf(self, row: int) -> GridCdf:
        return GridCdf.from_pmf(self.grid, self.row_pmf(row))

    def same_as(self, other: "SegmentBank") -> bool:
        return (np.array_equal(self.starts, other.starts)
                and np.array_equal(self.logw, other.logw)
                and np.array_equal(self.medians, other.medians))

    def rows_match(self, other: "SegmentBank", row: int = 0) -> bool:
        """Every row of ``self`` equals row ``row`` of ``other``."""
        ref = other.base_table[other.base_id[row]]
        same_base = all(np.array_equal(self.base_table[b], ref)
                        for b in np.unique(self.base_id))
        return (same_base
                and np.all(self.starts == other.starts[row])
                and np.all(self.logw == other.logw[row])
                and np.all(self.medians == other.medians[row]))


def make_bank(grid: PriceGrid, priors: Sequence[GridCdf], p: float, dense: bool = False):
    return (DenseBank if dense else SegmentBank)(grid, priors, p)
