"""Drifting bids and the re-spreading posterior update used to track them."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import GridCdf, GridPrice, PriceGrid, cell_cdf, median
from .posterior import DenseBank, PosteriorState, update_distribution


@dataclass(frozen=True)
class DriftConfig:
    q: float = 0.0
    epsilon: float = 0.01

    def __post_init__(self):
        if not 0 <= self.q <= 1:
            raise ValueError(f"q must be in [0, 1], got {self.q}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class TrackingConfig:
    lam: float = 0.005
    mu: float = 0.005
    theta: float = 0.3

    def __post_init__(self):
        if not 0 < self.lam < 0.5:
            raise ValueError(f"lambda must be in (0, 0.5), got {self.lam}")
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must be in (0, 1), got {self.mu}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")


def drift_step(bid: GridPrice, cfg: DriftConfig, rng: np.random.Generator,
               grid: PriceGrid) -> GridPrice:
    """One round of the additive drift model, snapped back onto ``grid``."""
    change, u = rng.random(2)
    return grid.price(_drift_index(bid.index, change, u, cfg, grid))


def _drift_index(k, change, u, cfg, grid):
    if change >= cfg.q:
        return k
    step = (2.0 * u - 1.0) * cfg.epsilon
    value = min(max(k * grid.delta + step, 0.0), grid.p_max)
    return grid.index_of(value)


def drift_path(start: int, rounds: int, cfg: DriftConfig, rng: np.random.Generator,
               grid: PriceGrid) -> np.ndarray:
    """Bid indices for rounds ``1..rounds`` starting from ``start``.

    Uses the same two draws per step as :func:`drift_step`, so a path is
    reproducible step by step.
    """
    draws = rng.random((max(rounds - 1, 0), 2))
    path = np.empty(rounds, dtype=np.int64)
    k = start
    path[0] = k
    for t in range(1, rounds):
        k = _drift_index(k, draws[t - 1, 0], draws[t - 1, 1], cfg, grid)
        path[t] = k
    return path


def piecewise_linear(b, b0, lam: float, mu: float) -> np.ndarray:
    """The three-case piecewise-linear CDF with median ``b0`` evaluated at ``b``.

    ``b0`` may be an array of shape ``(rows, 1)`` to evaluate several
    medians at once.  The central plateau is the same line in all three
    cases; only the tails change when the plateau hits 0 or 1.
    """
    b = np.asarray(b, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    lo, hi = b0 - mu / 2, b0 + mu / 2
    left_edge = lo <= 0
    right_edge = (hi >= 1) & ~left_edge
    with np.errstate(divide="ignore", invalid="ignore"):
        left = np.where(left_edge, b / (2 * b0), lam / lo * b)
        mid = (b - lo) * (1.0 - 2.0 * lam) / mu + lam
        right = np.where(right_edge, (b - b0) / (2 * (1 - b0)) + 0.5,
                         lam / (1 - hi) * (b - hi) + 1 - lam)
        out = np.where(b <= np.where(left_edge, b0, lo), left,
                       np.where(b <= np.where(right_edge, b0, hi), mid, right))
    return np.where(b <= 0, 0.0, np.where(b >= 1, 1.0, out))


def piecewise_linear_cdf(b0: GridPrice | int, lam: float, mu: float, grid: PriceGrid) -> GridCdf:
    k = b0.index if isinstance(b0, GridPrice) else int(b0)
    center = k * grid.delta
    return cell_cdf(grid, lambda b: piecewise_linear(b, center, lam, mu))


@lru_cache(maxsize=2048)
def _pwl_pmf(grid: PriceGrid, center: int, lam: float, mu: float) -> np.ndarray:
    """Cell pmf of the piecewise-linear law centred on grid index ``center``.

    Same projection as :func:`piecewise_linear_cdf`; cached because the CA
    and every user replica ask for the same centres round after round.
    """
    pmf = piecewise_linear_cdf(center, lam, mu, grid).pmf
    pmf.setflags(write=False)
    return pmf


def _pwl_pmf_rows(grid: PriceGrid, centers: np.ndarray, lam: float, mu: float) -> np.ndarray:
    return np.stack([_pwl_pmf(grid, int(c), lam, mu) for c in centers])


def bhattacharyya(p1, p2) -> float:
    """``-log sum sqrt(p1 * p2)``; disjoint supports give ``inf``."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ValueError("pmfs live on different grids")
    bc = np.sqrt(p1 * p2).sum(axis=-1)
    with np.errstate(divide="ignore"):
        return -np.log(bc)


def update_track(state: PosteriorState, y: int, p: float, cfg: TrackingConfig) -> PosteriorState:
    """Bayes update, then re-spread the posterior if it is close to collapse."""
    new = update_distribution(state, y, p)
    grid = new.cdf.grid
    ref = piecewise_linear_cdf(new.last_median, cfg.lam, cfg.mu, grid)
    if bhattacharyya(new.cdf.pmf, ref.pmf) < cfg.theta:
        return PosteriorState(ref, median(ref))
    return new


def track_bank(bank: DenseBank, cfg: TrackingConfig) -> np.ndarray:
    """Re-spreading step applied to every row of ``bank`` in place.

    Returns the boolean mask of rows that were replaced.
    """
    ref = _pwl_pmf_rows(bank.grid, bank.medians, cfg.lam, cfg.mu)
    hit = bhattacharyya(bank.pmf, ref) < cfg.theta
    if hit.any():
        bank.replace(np.flatnonzero(hit), ref[hit])
    return hit
