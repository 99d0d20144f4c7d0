"""Seeded Monte-Carlo runs, metric estimation and efficiency sweeps.

Trial ``r`` of a run with master seed ``s`` always uses the seed derived
from ``(s, r)``, so results do not depend on how trials are spread over
worker processes.  Different schemes run with the same master seed see the
same bids, bid paths and uplink noise (common random numbers).
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .channel import BscChannel, Role, stream
from .config import ExperimentPreset, SchemeConfig
from .horstein import DEFAULT_OVERSAMPLE, decode_batch
from .schemes import run_trial

WORKERS_ENV = "SPECTRA_AUCTION_WORKERS"
FER_BATCH = 2000


def trial_seed(master: int, index: int) -> int:
    state = np.random.SeedSequence([master, index]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        raw = os.environ.get(WORKERS_ENV, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ValueError("worker count must be at least 1")
    return workers


def error_bar(samples: np.ndarray, axis=0) -> np.ndarray:
    """Two standard errors: ``2 * sigma_hat / sqrt(R)``."""
    R = samples.shape[axis]
    if R < 2:
        return np.zeros(np.delete(samples.shape, axis))
    return 2.0 * samples.std(axis=axis, ddof=1) / np.sqrt(R)


@dataclass
class TrialSummary:
    """The per-round numbers the metrics need from one trial."""

    revenue: np.ndarray
    target: np.ndarray
    max_bid: np.ndarray
    correct: np.ndarray
    payoff: np.ndarray         # mean over users
    ideal_payoff: np.ndarray   # mean over users

    @classmethod
    def of(cls, res) -> "TrialSummary":
        return cls(res.revenue, res.target_revenue, res.max_bid, res.winner_correct,
                   res.payoffs.mean(axis=1), res.ideal_payoffs.mean(axis=1))


def _summarise(args):
    cfg, seed = args
    return TrialSummary.of(run_trial(cfg, seed))


def collect(cfg: SchemeConfig, trials: int, seed: int, workers: int | None = None) -> list:
    """Run ``trials`` trials and return their summaries in trial order."""
    jobs = [(cfg, trial_seed(seed, r)) for r in range(trials)]
    n = worker_count(workers)
    if n == 1:
        return [_summarise(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_summarise, jobs, chunksize=max(1, trials // (4 * n))))


@dataclass
class MetricSeries:
    """Named curves (value and error bar per x point) plus scalar results."""

    x: dict = field(default_factory=dict)        # metric -> x coordinates
    values: dict = field(default_factory=dict)   # metric -> values
    stderr: dict = field(default_factory=dict)   # metric -> error bars (or None)
    scalars: dict = field(default_factory=dict)  # name -> (value, stderr or None)

    def add(self, name, x, values, stderr=None):
        self.x[name] = np.asarray(x)
        self.values[name] = np.asarray(values, dtype=float)
        self.stderr[name] = None if stderr is None else np.asarray(stderr, dtype=float)

    def __getitem__(self, name):
        return self.values[name]

    def names(self):
        return list(self.values)

    def equals(self, other: "MetricSeries") -> bool:
        def same(a, b):
            return (a is None and b is None) or (
                a is not None and b is not None and np.array_equal(a, b, equal_nan=True))
        return (self.names() == other.names()
                and all(same(self.x[k], other.x[k]) and same(self.values[k], other.values[k])
                        and same(self.stderr[k], other.stderr[k]) for k in self.values)
                and self.scalars == other.scalars)


def tol_name(prefix: str, d: float) -> str:
    return f"{prefix}_{format(d, 'g')}"


def efficiency_ratios(summaries) -> np.ndarray:
    """Per trial: mean revenue over rounds divided by mean maximum bid."""
    return np.array([s.revenue.mean() / s.max_bid.mean() for s in summaries])


def summarise(summaries, tolerances=(0.005, 0.01, 0.02), prefix: str = "") -> MetricSeries:
    out = MetricSeries()
    if not summaries:
        return out
    stack = {k: np.stack([getattr(s, k) for s in summaries]) for k in
             ("revenue", "target", "max_bid", "correct", "payoff", "ideal_payoff")}
    rounds = np.arange(1, stack["revenue"].shape[1] + 1)

    def curve(name, samples):
        samples = samples.astype(float)
        out.add(prefix + name, rounds, samples.mean(axis=0), error_bar(samples))

    curve("mean_revenue", stack["revenue"])
    curve("mean_max_bid", stack["max_bid"])
    curve("mean_target_revenue", stack["target"])
    curve("winner_correct_prob", stack["correct"])
    curve("mean_payoff", stack["payoff"])
    curve("mean_ideal_payoff", stack["ideal_payoff"])
    gap = np.abs(stack["revenue"] - stack["target"])
    pgap = np.abs(stack["payoff"] - stack["ideal_payoff"])
    for d in tolerances:
        curve(tol_name("conv_prob_delta", d), gap < d)
        curve(tol_name("payoff_conv_prob_delta", d), pgap < d)
    ratios = efficiency_ratios(summaries)
    out.scalars[prefix + "efficiency_ratio"] = (float(ratios.mean()), float(error_bar(ratios)))
    return out


def run_trials(preset: ExperimentPreset, workers: int | None = None) -> MetricSeries:
    """All metrics of one preset (no sweep)."""
    if preset.config.scheme == "horstein":
        return fer_series(preset)
    arms = (preset.config.scheme,) + tuple(a for a in preset.arms if a != preset.config.scheme)
    merged = MetricSeries()
    for arm in arms:
        cfg = preset.config.with_(scheme=arm)
        series = summarise(collect(cfg, preset.trials, preset.seed, workers),
                           preset.tolerances, prefix="" if len(arms) == 1 else f"{arm}.")
        merged.x.update(series.x)
        merged.values.update(series.values)
        merged.stderr.update(series.stderr)
        merged.scalars.update(series.scalars)
    return merged


@dataclass(frozen=True)
class SweepPoint:
    param: str
    value: float
    arm: str
    ratio: float
    stderr: float


def efficiency_sweep(preset: ExperimentPreset, workers: int | None = None) -> list:
    """Efficiency ratio for every (panel, value, arm), on paired seeds."""
    if not preset.sweep:
        raise ValueError("preset has no sweep axis")
    arms = (preset.config.scheme,) + tuple(a for a in preset.arms if a != preset.config.scheme)
    points = []
    for param, values in preset.sweep:
        for v in values:
            for arm in arms:
                cfg = preset.config.with_(scheme=arm, **{param: v})
                ratios = efficiency_ratios(collect(cfg, preset.trials, preset.seed, workers))
                points.append(SweepPoint(param, float(v), arm, float(ratios.mean()),
                                         float(error_bar(ratios))))
    return points


def sweep_series(points) -> MetricSeries:
    out = MetricSeries()
    keys = []
    for pt in points:
        key = (pt.param, pt.arm)
        if key not in keys:
            keys.append(key)
    for param, arm in keys:
        pts = [pt for pt in points if pt.param == param and pt.arm == arm]
        out.add(f"efficiency_ratio.{arm}.{param}", [pt.value for pt in pts],
                [pt.ratio for pt in pts], [pt.stderr for pt in pts])
    return out


@dataclass(frozen=True)
class FerEstimate:
    fer: float
    low: float
    high: float
    errors: int
    trials: int


def fer_experiment(K: int, n: int, p: float, trials: int, seed: int = 0,
                   oversample: int = DEFAULT_OVERSAMPLE) -> FerEstimate:
    """Monte-Carlo frame error rate with a Wilson 95% interval."""
    if trials < 1:
        raise ValueError("trials must be positive")
    errors = 0
    for start in range(0, trials, FER_BATCH):
        seeds = [trial_seed(seed, r) for r in range(start, min(start + FER_BATCH, trials))]
        thetas = [int(stream(s, 0, Role.MESSAGE).integers(K)) for s in seeds]
        flips = np.stack([BscChannel(p, s, 0).flips(n) for s in seeds], axis=1)
        _, err = decode_batch(K, n, p, thetas, flips, oversample)
        errors += int(err.sum())
    ci = binomtest(errors, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return FerEstimate(errors / trials, float(ci.low), float(ci.high), errors, trials)


def fer_series(preset: ExperimentPreset) -> MetricSeries:
    """FER against the swept crossover probabilities (or the configured one)."""
    cfg = preset.config
    ps = dict(preset.sweep).get("p", (cfg.p,))
    fer, low, high = [], [], []
    for p in ps:
        est = fer_experiment(cfg.levels, cfg.rounds, p, preset.trials, seed=preset.seed,
                             oversample=cfg.oversample)
        fer.append(est.fer)
        low.append(est.low)
        high.append(est.high)
    out = MetricSeries()
    out.add("fer.p", ps, fer)
    out.add("fer_ci_low.p", ps, low)
    out.add("fer_ci_high.p", ps, high)
    out.scalars["code_rate"] = (float(np.log2(cfg.levels) / cfg.rounds), None)
    return out


def run_preset(preset: ExperimentPreset, workers: int | None = None) -> MetricSeries:
    if preset.config.scheme == "horstein":
        return fer_series(preset)
    if preset.sweep:
        return sweep_series(efficiency_sweep(preset, workers))
    return run_trials(preset, workers)
