"""Experiment configuration shared by schemes, harness and CLI."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction

SCHEMES = ("unmatched", "matched", "matched_tracking", "truthful", "vickrey", "horstein")
SWEEPABLE = ("q", "epsilon", "lam", "theta", "mu", "p")


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


def _finite(name, value):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ConfigError(f"{name} must be a finite number, got {value!r}")


@dataclass(frozen=True)
class SchemeConfig:
    """Everything that determines one trial of one scheme.

    ``q``/``epsilon`` drive bid drift (``q=0`` keeps bids fixed);
    ``lam``/``mu``/``theta`` only matter for ``matched_tracking``.
    ``levels``/``oversample`` only matter for ``horstein``.
    """

    scheme: str = "matched"
    users: int = 10
    units: int = 1
    p: float = 0.05
    delta: float = 1e-5
    h: float = 1e-3
    rounds: int = 150
    q: float = 0.0
    epsilon: float = 0.01
    lam: float = 0.005
    mu: float = 0.005
    theta: float = 0.3
    levels: int = 100000
    oversample: int = 20

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {', '.join(SCHEMES)}, got {self.scheme!r}")
        for name in ("users", "units", "rounds", "levels", "oversample"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for f in fields(self):
            if f.type == "float":
                _finite(f.name, getattr(self, f.name))
        if not 0 <= self.p < 0.5:
            raise ConfigError("p must be in [0, 0.5)")
        if not 0 < self.delta <= 0.5:
            raise ConfigError("delta must be in (0, 0.5]")
        if abs(round(1 / self.delta) * self.delta - 1) > 1e-9:
            raise ConfigError("delta must divide 1 into an integer number of steps")
        if not 0 <= self.h < 1:
            raise ConfigError("h must be in [0, 1)")
        if not 0 <= self.q <= 1:
            raise ConfigError("q must be in [0, 1]")
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must be in (0, 1)")
        if not 0 < self.lam < 0.5:
            raise ConfigError("lam must be in (0, 0.5)")
        if not 0 < self.mu < 1:
            raise ConfigError("mu must be in (0, 1)")
        if not self.theta > 0:
            raise ConfigError("theta must be positive")
        if self.scheme in ("truthful",) and self.users < 2:
            raise ConfigError("users must be at least 2 for truthful")
        if self.scheme != "vickrey" and self.units != 1:
            raise ConfigError("units must be 1 unless scheme is vickrey")
        if self.scheme == "horstein" and self.levels < 2:
            raise ConfigError("levels must be at least 2")

    @property
    def tracking(self) -> bool:
        return self.scheme == "matched_tracking"

    @property
    def margin(self) -> float:
        """Amount subtracted from the top median to form the ask."""
        return self.mu if self.tracking else self.h

    @property
    def margin_steps(self) -> int:
        """``floor(margin / delta)`` computed on the decimal values exactly."""
        return math.floor(Fraction(repr(self.margin)) / Fraction(repr(self.delta)))

    def with_(self, **kw) -> "SchemeConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    config: SchemeConfig
    trials: int = 1000
    seed: int = 0
    tolerances: tuple = (0.005, 0.01, 0.02)
    sweep: tuple = ()        # ((param, (v1, v2, ...)), ...)
    arms: tuple = ()         # extra scheme ids run on the same seeds

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        for d in self.tolerances:
            _finite("tolerances", d)
            if d <= 0:
                raise ConfigError("tolerances must be positive")
        for param, values in self.sweep:
            if param not in SWEEPABLE:
                raise ConfigError(f"sweep parameter must be one of {', '.join(SWEEPABLE)}, got {param!r}")
            for v in values:
                _finite(f"sweep {param}", v)
                self.config.with_(**{param: v})
        for a in self.arms:
            if a not in SCHEMES:
                raise ConfigError(f"arms must name schemes, got {a!r}")
            self.config.with_(scheme=a)
