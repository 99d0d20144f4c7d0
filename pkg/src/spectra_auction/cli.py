"""``spectra-auction`` command line: configuration, CSV output, run manifest."""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentPreset, SchemeConfig
from .presets import PRESETS

CONFIG_KEYS = {f.name: f.type for f in fields(SchemeConfig)}
PRESET_KEYS = ("name", "trials", "seed", "tolerances", "sweep", "arms")
ALL_KEYS = tuple(CONFIG_KEYS) + PRESET_KEYS
CSV_HEADER = "round,metric,value,stderr"


# ------------------------------------------------------------ config parsing

def _number(key, raw, kind):
    try:
        if kind == "int":
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be {'an integer' if kind == 'int' else 'a number'}, "
                          f"got {raw!r}") from None


def _floats(key, raw):
    return tuple(_number(key, v.strip(), "float") for v in raw.split(",") if v.strip())


def _sweep(raw):
    panels = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ConfigError(f"sweep panel must look like 'param:v1,v2', got {part!r}")
        param, values = part.split(":", 1)
        values = _floats("sweep", values)
        if not values:
            raise ConfigError(f"sweep panel {param.strip()!r} has no values")
        panels.append((param.strip(), values))
    return tuple(panels)


def read_config_file(path) -> dict:
    """Flat ``key = value`` pairs; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"config file {path}: {e.strerror}") from None
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config file {path} line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def preset_pairs(preset: ExperimentPreset) -> dict:
    """Flat string echo of a preset; :func:`build_preset` inverts it."""
    pairs = {"name": preset.name}
    for k in CONFIG_KEYS:
        pairs[k] = repr(getattr(preset.config, k)) if k != "scheme" else preset.config.scheme
    pairs["trials"] = str(preset.trials)
    pairs["seed"] = str(preset.seed)
    pairs["tolerances"] = ",".join(repr(d) for d in preset.tolerances)
    pairs["sweep"] = "; ".join(f"{p}:" + ",".join(repr(v) for v in vals) for p, vals in preset.sweep)
    pairs["arms"] = ",".join(preset.arms)
    return pairs


def build_preset(pairs: dict, base: ExperimentPreset | None = None) -> ExperimentPreset:
    """Validated preset from string pairs layered over ``base``."""
    unknown = sorted(set(pairs) - set(ALL_KEYS))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}")
    if base is None and "scheme" not in pairs:
        raise ConfigError("missing required key 'scheme'")
    cfg_kw = {} if base is None else {k: getattr(base.config, k) for k in CONFIG_KEYS}
    for k, kind in CONFIG_KEYS.items():
        if k in pairs:
            cfg_kw[k] = pairs[k] if kind == "str" else _number(k, pairs[k], kind)
    config = SchemeConfig(**cfg_kw)
    kw = {"name": pairs.get("name", base.name if base else "custom"), "config": config}
    if base is not None:
        kw.update(trials=base.trials, seed=base.seed, tolerances=base.tolerances,
                  sweep=base.sweep, arms=base.arms)
    if "trials" in pairs:
        kw["trials"] = _number("trials", pairs["trials"], "int")
    if "seed" in pairs:
        kw["seed"] = _number("seed", pairs["seed"], "int")
    if "tolerances" in pairs:
        kw["tolerances"] = _floats("tolerances", pairs["tolerances"])
    if "sweep" in pairs:
        kw["sweep"] = _sweep(pairs["sweep"])
    if "arms" in pairs:
        kw["arms"] = tuple(a.strip() for a in pairs["arms"].split(",") if a.strip())
    return ExperimentPreset(**kw)


def parse_config(source=None, flags: dict | None = None, preset: str | None = None) -> ExperimentPreset:
    """Preset name, then config file, then flags; later layers win."""
    base = None
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        base = PRESETS[preset]
    pairs = {}
    if source is not None:
        pairs.update(source if isinstance(source, dict) else read_config_file(source))
    pairs.update({k: str(v) for k, v in (flags or {}).items() if v is not None})
    return build_preset(pairs, base)


# ------------------------------------------------------------ output

def _fmt(v) -> str:
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else format(float(v), ".9g")


def _fmt_x(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".9g")


def _atomic_write(path: Path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_csv(series, path) -> Path:
    """Long-format CSV: ``round,metric,value,stderr``; scalars have an empty round."""
    lines = [CSV_HEADER]
    for name in series.names():
        err = series.stderr[name]
        for j, (x, v) in enumerate(zip(series.x[name], series.values[name])):
            lines.append(f"{_fmt_x(x)},{name},{_fmt(v)},{'' if err is None else _fmt(err[j])}")
    for name, (v, e) in series.scalars.items():
        lines.append(f",{name},{_fmt(v)},{_fmt(e)}")
    _atomic_write(Path(path), "\n".join(lines) + "\n")
    return Path(path)


def write_manifest(out_dir: Path, preset: ExperimentPreset, files, started: float,
                   finished: float) -> Path:
    manifest = {
        "artifact_version": __version__,
        "config": preset_pairs(preset),
        "master_seed": preset.seed,
        "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(finished)),
        "files": sorted(str(Path(f).name) for f in files),
    }
    path = Path(out_dir) / "manifest.json"
    _atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_manifest_preset(path) -> ExperimentPreset:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return build_preset(data["config"])


# ------------------------------------------------------------ entry point

def _parser():
    ap = argparse.ArgumentParser(prog="spectra-auction",
                                 description="Quantized spectrum auction simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a preset or a flag-defined experiment")
    run.add_argument("preset", nargs="?", help="built-in preset name")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--out", required=True, help="output directory")
    for key, kind in CONFIG_KEYS.items():
        run.add_argument(f"--{key}", dest=key)
    for key in PRESET_KEYS:
        run.add_argument(f"--{key}", dest=key)
    sub.add_parser("list-presets", help="show built-in presets")
    return ap


def main(argv=None) -> int:
    from .harness import run_preset

    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command == "list-presets":
        for name, p in PRESETS.items():
            print(f"{name}\t{p.config.scheme}\ttrials={p.trials}")
        return 0
    flags = {k: getattr(args, k) for k in ALL_KEYS if getattr(args, k, None) is not None}
    try:
        preset = parse_config(args.config, flags, args.preset)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        started = time.time()
        series = run_preset(preset)
        csv_path = emit_csv(series, out / "metrics.csv")
        write_manifest(out, preset, [csv_path], started, time.time())
    except Exception as e:  # noqa: BLE001 - reported as a runtime failure
        print(f"run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    print(f"wrote {csv_path} and {out / 'manifest.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
