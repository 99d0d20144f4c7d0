"""Built-in experiment presets."""
from __future__ import annotations

from .config import ExperimentPreset, SchemeConfig

_TRACK = dict(users=5, p=0.05, delta=1 / 5000, h=1e-3, lam=0.005, mu=0.005,
              theta=0.3, epsilon=0.01, q=0.02, rounds=200)

PRESETS = {
    "fig9-convergence": ExperimentPreset(
        "fig9-convergence",
        SchemeConfig(scheme="matched", users=10, p=0.05, delta=1e-5, h=1e-3, rounds=200),
        trials=1000, seed=42),
    "fig10-unmatched": ExperimentPreset(
        "fig10-unmatched",
        SchemeConfig(scheme="unmatched", users=10, p=0.05, delta=1e-5, h=1e-3, rounds=150),
        trials=10000, seed=42),
    "fig11-vickrey": ExperimentPreset(
        "fig11-vickrey",
        SchemeConfig(scheme="vickrey", users=10, units=4, p=0.05, delta=1e-5, rounds=150),
        trials=500, seed=42),
    "fig12-drift-sweep": ExperimentPreset(
        "fig12-drift-sweep",
        SchemeConfig(scheme="matched_tracking", **_TRACK),
        trials=200, seed=42, arms=("matched",),
        sweep=(("q", (0.001, 0.003, 0.01, 0.03, 0.1, 0.3)),
               ("epsilon", (0.001, 0.002, 0.005, 0.01, 0.02, 0.05)))),
    "fig13-param-sweep": ExperimentPreset(
        "fig13-param-sweep",
        SchemeConfig(scheme="matched_tracking", **_TRACK),
        trials=200, seed=42,
        sweep=(("lam", (0.001, 0.0025, 0.005, 0.0075, 0.01)),
               ("theta", (0.3, 0.5, 0.75, 1.0)),
               ("mu", (0.001, 0.0025, 0.005, 0.0075, 0.01)))),
    "table1-fer": ExperimentPreset(
        "table1-fer",
        SchemeConfig(scheme="horstein", p=0.05, levels=100000, rounds=50, oversample=20),
        trials=10000, seed=42,
        sweep=(("p", (0.05, 0.06, 0.1)),)),
}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
