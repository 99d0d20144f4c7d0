"""Round-by-round auction state machines.

Every scheme runs the clearing authority (CA) and the users side by side.
Users compute their uplink bits from their own replicas of the CA's
posteriors, which they keep current from the noiseless feedback; after each
round the replicas are compared with the CA's state and any difference is
a hard error.

A trial returns per-round arrays in a :class:`TrialResult`;
:meth:`TrialResult.records` expands them into :class:`RoundRecord` objects.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel
from .accounting import Ledger, settle
from .channel import BscChannel, Role, stream
from .config import SchemeConfig
from .drift import DriftConfig, TrackingConfig, drift_path, track_bank
from .grid import PriceGrid, prior_order_statistic, prior_uniform
from .mechanism import losing_prices, top_k_mask, vickrey_outcome
from .posterior import make_bank

DOWNLINK_BITS = {"unmatched": 2, "matched": 2, "matched_tracking": 2, "truthful": 3}


def downlink_budget(cfg: SchemeConfig) -> int:
    return 2 * cfg.units + 1 if cfg.scheme == "vickrey" else DOWNLINK_BITS[cfg.scheme]


class MirrorMismatch(AssertionError):
    """A user's replica diverged from the CA state."""


@dataclass(frozen=True)
class RoundRecord:
    t: int
    winners: dict            # unit -> user
    asks: dict               # user -> amount asked
    accepted: dict           # user -> bool
    revenue: float
    payoffs: np.ndarray


@dataclass
class TrialResult:
    config: SchemeConfig
    seed: int
    bids: np.ndarray             # (T, N, K) grid indices
    revenue: np.ndarray          # (T,)
    target_revenue: np.ndarray   # (T,) what revenue should converge to
    max_bid: np.ndarray          # (T,) B_(N) in round t
    winner_correct: np.ndarray   # (T,) bool
    payoffs: np.ndarray          # (T, N)
    ideal_payoffs: np.ndarray    # (T, N)
    winners: np.ndarray          # (T, K) user per unit
    asks: np.ndarray             # (T, N) nan where nothing was asked
    accepted: np.ndarray         # (T, N) bool
    uplink_bits: np.ndarray      # (T, N)
    downlink_bits: np.ndarray    # (T, N)
    ledger: Ledger = field(repr=False)
    replaced: np.ndarray | None = None   # (T,) rows re-spread by tracking

    def records(self) -> list:
        out = []
        for t in range(len(self.revenue)):
            winners = {k: int(u) for k, u in enumerate(self.winners[t]) if u >= 0}
            asks = {int(u): float(a) for u, a in enumerate(self.asks[t]) if not np.isnan(a)}
            acc = {u: bool(self.accepted[t, u]) for u in asks}
            out.append(RoundRecord(t + 1, winners, asks, acc,
                                   float(self.revenue[t]), self.payoffs[t].copy()))
        return out


# ---------------------------------------------------------------- inputs

def bid_grid(cfg: SchemeConfig) -> PriceGrid:
    return PriceGrid(cfg.delta)


def draw_bids(cfg: SchemeConfig, seed: int, grid: PriceGrid) -> np.ndarray:
    """(N, K) initial bids as grid indices, non-increasing along each row."""
    out = np.empty((cfg.users, cfg.units), dtype=np.int64)
    for i in range(cfg.users):
        u = np.sort(stream(seed, i, Role.BID).random(cfg.units))[::-1]
        out[i] = [grid.index_of(v) for v in u]
    return out


def bid_paths(cfg: SchemeConfig, seed: int, grid: PriceGrid) -> np.ndarray:
    """(T, N, K) bids per round; constant unless drift is switched on."""
    start = draw_bids(cfg, seed, grid)
    T = cfg.rounds
    paths = np.broadcast_to(start, (T,) + start.shape).copy()
    if cfg.q > 0:
        if cfg.units != 1:
            raise ValueError("bid drift is only modelled for single-unit schemes")
        dcfg = DriftConfig(cfg.q, cfg.epsilon)
        for i in range(cfg.users):
            paths[:, i, 0] = drift_path(start[i, 0], T, dcfg, stream(seed, i, Role.DRIFT), grid)
    return paths


def uplink_flips(cfg: SchemeConfig, seed: int) -> np.ndarray:
    """(T, N, K) flip indicators; unit ``k`` of user ``i`` uses channel sub-index ``k``."""
    out = np.empty((cfg.rounds, cfg.users, cfg.units), dtype=bool)
    for i in range(cfg.users):
        for k in range(cfg.units):
            out[:, i, k] = BscChannel(cfg.p, seed, i, k).flips(cfg.rounds)
    return out


class _Trial:
    """Shared per-round bookkeeping."""

    def __init__(self, cfg: SchemeConfig, seed: int, strategic: bool):
        self.cfg, self.seed = cfg, seed
        T, N, K = cfg.rounds, cfg.users, cfg.units
        self.revenue = np.zeros(T)
        self.target = np.zeros(T)
        self.max_bid = np.zeros(T)
        self.correct = np.zeros(T, dtype=bool)
        self.payoffs = np.zeros((T, N))
        self.ideal = np.zeros((T, N))
        self.winners = np.full((T, K), -1, dtype=np.int64)
        self.asks = np.full((T, N), np.nan)
        self.accepted = np.zeros((T, N), dtype=bool)
        self.up = np.zeros((T, N), dtype=np.int64)
        self.down = np.zeros((T, N), dtype=np.int64)
        self.ledger = Ledger(N, strategic)
        self.replaced = None

    def downlink(self, t, *vectors):
        """Route CA-to-user traffic through the feedback path and count it."""
        out = [np.asarray(channel.feedback(v)) for v in vectors]
        for v in out:
            self.down[t - 1] += v.reshape(self.cfg.users, -1).shape[1]
        return out

    def book(self, t, winners: dict, asks: dict, accepted: dict, revenue: float):
        i = t - 1
        for k, u in winners.items():
            self.winners[i, k] = u
        for u, a in asks.items():
            self.asks[i, u] = a
            self.accepted[i, u] = accepted[u]
        self.revenue[i] = revenue
        self.ledger.record(t, winners, asks, accepted, revenue)

    def result(self, bids) -> TrialResult:
        settle(self.ledger)
        return TrialResult(self.cfg, self.seed, bids, self.revenue, self.target,
                           self.max_bid, self.correct, self.payoffs, self.ideal,
                           self.winners, self.asks, self.accepted, self.up,
                           self.down, self.ledger, self.replaced)


def _check_mirror(ca, users, what: str, t: int):
    if not users.same_as(ca):
        raise MirrorMismatch(f"{what} replica diverged from the CA in round {t}")


def _check_rows(ca, users, what: str, t: int):
    """Every user row of ``users`` must equal the single CA row."""
    if not users.rows_match(ca, 0):
        raise MirrorMismatch(f"{what} replica diverged from the CA in round {t}")


# ---------------------------------------------------------------- schemes

def run_unmatched(cfg: SchemeConfig, seed: int) -> TrialResult:
    """Users stream the binary expansion of their bids, ignoring feedback."""
    grid = bid_grid(cfg)
    bids = bid_paths(cfg, seed, grid)
    flips = uplink_flips(cfg, seed)[:, :, 0]
    tr = _Trial(cfg, seed, strategic=False)
    t = np.arange(1, cfg.rounds + 1)[:, None]
    b = bids[:, :, 0] * grid.delta
    x = (np.floor(b * 2.0 ** t) % 2).astype(np.int64)
    y = x ^ flips
    est = np.cumsum(y * 2.0 ** -t, axis=0)
    win = np.argmax(est, axis=1)
    top = np.argmax(b, axis=1)
    rows = np.arange(cfg.rounds)
    asks = est[rows, win]
    ok = asks <= b[rows, win]
    tr.up[:] = 1
    for i in range(cfg.rounds):
        w = int(win[i])
        u = np.zeros(cfg.users, dtype=np.int64)
        u[w] = 1
        tr.downlink(i + 1, u, y[i])
        ask = float(asks[i])
        tr.book(i + 1, {0: w}, {w: ask}, {w: bool(ok[i])}, ask if ok[i] else 0.0)
        if ok[i]:
            tr.payoffs[i, w] = b[i, w] - ask
    tr.max_bid[:] = tr.target[:] = b.max(axis=1)
    tr.correct[:] = win == top
    return tr.result(bids)


def run_matched(cfg: SchemeConfig, seed: int) -> TrialResult:
    """Posterior-matching auction; ``matched_tracking`` adds re-spreading."""
    grid = bid_grid(cfg)
    bids = bid_paths(cfg, seed, grid)
    flips = uplink_flips(cfg, seed)[:, :, 0]
    N = cfg.users
    track = TrackingConfig(cfg.lam, cfg.mu, cfg.theta) if cfg.tracking else None
    prior = prior_uniform(grid)
    ca = make_bank(grid, [prior] * N, cfg.p, dense=track is not None)
    users = ca.copy()
    margin, steps = cfg.margin, cfg.margin_steps
    tr = _Trial(cfg, seed, strategic=False)
    if track:
        tr.replaced = np.zeros(cfg.rounds, dtype=np.int64)
    for t in range(1, cfg.rounds + 1):
        b = bids[t - 1, :, 0]
        x = (b >= users.medians).astype(np.int64)
        y = x ^ flips[t - 1]
        tr.up[t - 1] = 1
        ca.update(y)
        if track:
            tr.replaced[t - 1] = track_bank(ca, track).sum()
        med = ca.medians
        w = int(np.argmax(med))
        ask = med[w] * grid.delta - margin
        u = np.zeros(N, dtype=np.int64)
        u[w] = 1
        u, z = tr.downlink(t, u, y)
        users.update(z)
        if track:
            track_bank(users, track)
        _check_mirror(ca, users, "posterior", t)
        ok = bool(users.medians[w] - b[w] <= steps)
        tr.book(t, {0: w}, {w: ask}, {w: ok}, ask if ok else 0.0)
        bv = b * grid.delta
        if ok:
            tr.payoffs[t - 1, w] = bv[w] - ask
        top = int(np.argmax(b))
        tr.ideal[t - 1, top] = margin
        tr.max_bid[t - 1] = bv.max()
        tr.target[t - 1] = bv.max() - margin
        tr.correct[t - 1] = w == top
    return tr.result(bids)


def run_truthful(cfg: SchemeConfig, seed: int) -> TrialResult:
    """Second-price style auction with a shared ask distribution."""
    grid = bid_grid(cfg)
    bids = bid_paths(cfg, seed, grid)
    flips = uplink_flips(cfg, seed)[:, :, 0]
    N = cfg.users
    prior = prior_uniform(grid)
    ca = make_bank(grid, [prior] * N, cfg.p)
    users = ca.copy()
    ask_ca = make_bank(grid, [prior], cfg.p)
    ask_users = make_bank(grid, [prior] * N, cfg.p)
    tr = _Trial(cfg, seed, strategic=True)
    for t in range(1, cfg.rounds + 1):
        b = bids[t - 1, :, 0]
        x = (b >= users.medians).astype(np.int64)
        y = x ^ flips[t - 1]
        tr.up[t - 1] = 1
        ca.update(y)
        med = ca.medians
        w = int(np.argmax(med))
        second = np.partition(med, N - 2)[N - 2]
        y_ask = int(second > ask_ca.medians[0])
        ask_ca.update([y_ask])
        ask = ask_ca.medians[0] * grid.delta
        u = np.zeros(N, dtype=np.int64)
        u[w] = 1
        u, z, y_virt = tr.downlink(t, u, y, np.full(N, y_ask))
        users.update(z)
        ask_users.update(y_virt)
        _check_mirror(ca, users, "posterior", t)
        _check_rows(ask_ca, ask_users, "ask distribution", t)
        tr.book(t, {0: w}, {w: ask}, {w: True}, ask)
        bv = b * grid.delta
        tr.payoffs[t - 1, w] = bv[w] - ask
        ideal = vickrey_outcome(bv[:, None], 1)
        tr.ideal[t - 1] = ideal.payoffs
        tr.target[t - 1] = ideal.revenue
        tr.max_bid[t - 1] = bv.max()
        tr.correct[t - 1] = w == int(np.argmax(ideal.units))
    return tr.result(bids)


def run_vickrey(cfg: SchemeConfig, seed: int) -> TrialResult:
    """Quantized multi-unit Vickrey auction with per-user ask distributions."""
    grid = bid_grid(cfg)
    N, K = cfg.users, cfg.units
    ask_grid = PriceGrid(cfg.delta, float(K))
    bids = bid_paths(cfg, seed, grid)
    flips = uplink_flips(cfg, seed)
    priors = [prior_order_statistic(grid, k + 1, K) for k in range(K)]
    ca = make_bank(grid, [priors[k] for _ in range(N) for k in range(K)], cfg.p)
    users = ca.copy()
    ask_prior = prior_uniform(ask_grid)
    ask_ca = make_bank(ask_grid, [ask_prior] * N, cfg.p)
    ask_users = ask_ca.copy()
    tr = _Trial(cfg, seed, strategic=True)
    for t in range(1, cfg.rounds + 1):
        V = bids[t - 1]
        x = (V >= users.medians.reshape(N, K)).astype(np.int64)
        y = x ^ flips[t - 1]
        tr.up[t - 1] = K
        ca.update(y.ravel())
        med = np.sort(ca.medians.reshape(N, K), axis=1)[:, ::-1]
        won = top_k_mask(med, K)
        charges, first = losing_prices(med, won)
        units = won.sum(axis=1)
        target = np.array([charges[i] if units[i] else first for i in range(N)], dtype=np.int64)
        y_ask = (target > ask_ca.medians).astype(np.int64)
        ask_ca.update(y_ask)
        pay = ask_ca.medians * ask_grid.delta
        z, u, y_virt = tr.downlink(t, y, won.astype(np.int64), y_ask)
        users.update(z.ravel())
        ask_users.update(y_virt)
        _check_mirror(ca, users, "posterior", t)
        _check_mirror(ask_ca, ask_users, "ask distribution", t)
        winners = {}
        for k, i in enumerate(np.repeat(np.arange(N), units)):
            winners[k] = int(i)
        asks = {int(i): float(pay[i]) for i in np.flatnonzero(units)}
        tr.book(t, winners, asks, {i: True for i in asks}, float(sum(asks.values())))
        Vv = V * grid.delta
        gained = np.where(np.arange(K)[None, :] < units[:, None], Vv, 0.0).sum(axis=1)
        tr.payoffs[t - 1] = gained - np.where(units > 0, pay, 0.0)
        ideal = vickrey_outcome(Vv, K)
        tr.ideal[t - 1] = ideal.payoffs
        tr.target[t - 1] = ideal.revenue
        tr.max_bid[t - 1] = Vv[:, 0].max()
        tr.correct[t - 1] = np.array_equal(units, ideal.units)
    return tr.result(bids)


RUNNERS = {
    "unmatched": run_unmatched,
    "matched": run_matched,
    "matched_tracking": run_matched,
    "truthful": run_truthful,
    "vickrey": run_vickrey,
}


def run_trial(cfg: SchemeConfig, seed: int) -> TrialResult:
    try:
        runner = RUNNERS[cfg.scheme]
    except KeyError:
        raise ValueError(f"{cfg.scheme!r} is not an auction scheme") from None
    return runner(cfg, seed)
