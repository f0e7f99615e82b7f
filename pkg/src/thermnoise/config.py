"""Run configuration: YAML schema, defaults and resolution.

Schema (every key optional unless noted)::

    seed: 0                     # master seed; fills every seed left unset
    data:                       # exactly one of root / synth
      root: /path/to/data       # falls back to $THERMNOISE_DATA_ROOT
      shape: {n_classes: 19, n_subjects: 8, n_segments: 60,
              n_samples: 125, n_channels: 45, sample_rate_hz: 25.0}
      synth: {n_classes: 4, n_subjects: 2, segments_per_cell: 15,
              n_channels: 6, n_samples: 50, sample_rate_hz: 25.0, seed: 0}
    features: {mode: flatten}   # flatten | stats
    models:                     # default: the five standard families
      - {family: mlp, hidden_layers: [128, 64], epochs: 30, seed: 1}
    eval: {k: 5, mode: kfold, holdout_fraction: 0.2, shuffle_seed: 0}
    noise: {trials: 5, master_seed: 0}
    snr_grid: [40, 30, 20, 10, 5]
    output: results

Precedence: command-line flag, then this file, then the defaults above.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .evaluation import DEFAULT_SNR_GRID, EvalConfig
from .ingest import ShapeConfig, SynthSpec
from .models import SPEC_TYPES, default_specs, spec_from_dict
from .noise import NoisePlan
from .pipeline import FeatureConfig

DATA_ROOT_ENV = "THERMNOISE_DATA_ROOT"

_TOP_KEYS = {"seed", "data", "features", "models", "eval", "noise", "snr_grid", "output"}


@dataclass
class RunConfig:
    seed: int
    data_root: str | None
    shape: ShapeConfig | None
    synth: SynthSpec | None
    synth_seed: int | None
    features: FeatureConfig
    models: list
    eval: EvalConfig
    noise: NoisePlan
    snr_grid: list[float]
    output: str

    def echo(self) -> dict:
        """Fully resolved configuration, as recorded in reports."""
        data: dict = {}
        if self.data_root is not None:
            data["root"] = str(self.data_root)
            data["shape"] = dataclasses.asdict(self.shape)
        else:
            data["synth"] = {**dataclasses.asdict(self.synth), "seed": self.synth_seed}
        return {
            "seed": self.seed,
            "data": data,
            "features": {"mode": self.features.mode},
            "models": [m.to_dict() for m in self.models],
            "eval": dataclasses.asdict(self.eval),
            "noise": {"trials": self.noise.trials, "master_seed": self.noise.master_seed, "scope": self.noise.scope},
            "snr_grid": list(self.snr_grid),
            "output": self.output,
        }


def _section(raw: dict, key: str) -> dict:
    val = raw.get(key) or {}
    if not isinstance(val, dict):
        raise ConfigError(f"config key '{key}' must be a mapping")
    return dict(val)


def _known(section: dict, allowed, where: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{where}': {sorted(unknown)}")


def build_section(cls, kwargs: dict, where: str):
    _known(kwargs, {f.name for f in dataclasses.fields(cls) if f.init}, where)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{where}': {exc}") from None


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: YAML syntax error{where}: {getattr(exc, 'problem', exc)}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def resolve_config(raw: dict, seed: int | None = None, snr_grid=None, trials: int | None = None) -> RunConfig:
    """Apply defaults and overrides; every seed is explicit afterwards."""
    _known(raw, _TOP_KEYS, "<top level>")
    master = seed if seed is not None else raw.get("seed", 0)
    if not isinstance(master, int) or isinstance(master, bool):
        raise ConfigError("'seed' must be an integer")

    data = _section(raw, "data")
    _known(data, {"root", "shape", "synth"}, "data")
    root = data.get("root")
    synth_raw = data.get("synth")
    if root is None and synth_raw is None:
        root = os.environ.get(DATA_ROOT_ENV)
    if (root is None) == (synth_raw is None):
        raise ConfigError(f"'data' needs exactly one of 'root' or 'synth' (or ${DATA_ROOT_ENV})")
    shape = synth = synth_seed = None
    if root is not None:
        shape = build_section(ShapeConfig, _section(data, "shape"), "data.shape")
    else:
        synth_kw = dict(synth_raw) if isinstance(synth_raw, dict) else {}
        if not isinstance(synth_raw, dict):
            raise ConfigError("'data.synth' must be a mapping")
        file_seed = synth_kw.pop("seed", master)
        synth_seed = master if seed is not None else file_seed
        synth = build_section(SynthSpec, synth_kw, "data.synth")
        try:
            synth.validate()
        except ConfigError as exc:
            raise ConfigError(f"'data.synth': {exc}") from None

    features = build_section(FeatureConfig, _section(raw, "features"), "features")

    models_raw = raw.get("models")
    if models_raw is None:
        models = default_specs(master)
    else:
        if not isinstance(models_raw, list) or not models_raw:
            raise ConfigError("'models' must be a non-empty list")
        models = []
        for i, m in enumerate(models_raw):
            if not isinstance(m, dict):
                raise ConfigError(f"'models[{i}]' must be a mapping")
            m = dict(m)
            if seed is not None or "seed" not in m:
                m["seed"] = master
            if m.get("family") not in SPEC_TYPES:
                raise ConfigError(f"'models[{i}].family' must be one of {sorted(SPEC_TYPES)}")
            try:
                models.append(spec_from_dict(m))
            except ConfigError as exc:
                raise ConfigError(f"'models[{i}]': {exc}") from None

    ev = _section(raw, "eval")
    if seed is not None or "shuffle_seed" not in ev:
        ev["shuffle_seed"] = master
    eval_cfg = build_section(EvalConfig, ev, "eval")

    nz = _section(raw, "noise")
    _known(nz, {"trials", "master_seed"}, "noise")
    if seed is not None or "master_seed" not in nz:
        nz["master_seed"] = master
    if trials is not None:
        nz["trials"] = trials
    noise = build_section(NoisePlan, {"snr_db": float("inf"), **nz}, "noise")

    grid = snr_grid if snr_grid is not None else raw.get("snr_grid", list(DEFAULT_SNR_GRID))
    if not isinstance(grid, (list, tuple)) or not grid:
        raise ConfigError("'snr_grid' must be a non-empty list of numbers")
    try:
        grid = [float(g) for g in grid]
    except (TypeError, ValueError):
        raise ConfigError("'snr_grid' must contain only numbers") from None

    output = raw.get("output", "results")
    if not isinstance(output, str):
        raise ConfigError("'output' must be a path string")
    return RunConfig(
        seed=master,
        data_root=root,
        shape=shape,
        synth=synth,
        synth_seed=synth_seed,
        features=features,
        models=models,
        eval=eval_cfg,
        noise=noise,
        snr_grid=grid,
        output=output,
    )
