"""Stratified cross-validation, clean baselines and SNR robustness sweeps.

Work is split into one task per fold. A task fits each distinct
preprocessing chain and every model on the clean training part, scores the
clean validation part, then re-scores it under every (SNR, trial) noise
draw. Models never see noisy data during fitting.

Accuracies are aggregated from exact correct/total counts, so a sweep with
noise disabled (``snr_db = inf``) reproduces the clean accuracy bit for bit.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError, ThermNoiseError
from .ingest import Dataset
from .models import fit
from .noise import NoisePlan, inject_signals, mix64
from .pipeline import FeatureConfig, fit_pipeline

DEFAULT_SNR_GRID = (40.0, 30.0, 20.0, 10.0, 5.0)


class EvalError(ThermNoiseError):
    """A cell of a baseline or sweep run failed."""


@dataclass(frozen=True)
class EvalConfig:
    k: int = 5
    stratified: bool = True
    shuffle_seed: int = 0
    mode: str = "kfold"  # "kfold" or "holdout"
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if self.mode not in ("kfold", "holdout"):
            raise ConfigError(f"eval mode must be 'kfold' or 'holdout', got {self.mode!r}")
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if not 0 < self.holdout_fraction <= 0.5:
            raise ConfigError("holdout_fraction must be in (0, 0.5]")
        if not self.stratified:
            raise ConfigError("only stratified splitting is supported")


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ValueError("accuracy needs two non-empty label vectors of equal length")
    return float(np.mean(y_true == y_pred))


def stratified_kfold(labels, k: int, seed: int) -> np.ndarray:
    """Fold id (0..k-1) per sample; per-class fold counts differ by at most 1."""
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if np.any(counts < k):
        small = classes[counts < k].tolist()
        raise ConfigError(f"classes {small} have fewer than k={k} members")
    rng = np.random.default_rng(int(mix64(seed, 0x6B666F6C64)))
    folds = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for c in classes:
        members = rng.permutation(np.flatnonzero(labels == c))
        folds[members] = (np.arange(len(members)) + offset) % k
        offset += len(members)
    return folds


def stratified_holdout(labels, fraction: float, seed: int) -> np.ndarray:
    """Boolean test mask holding ``round(fraction * n_c)`` (>= 1) of each class."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(int(mix64(seed, 0x686F6C64)))
    mask = np.zeros(len(labels), dtype=bool)
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        if len(members) < 2:
            raise ConfigError(f"class {c} needs at least 2 members for a holdout split")
        n_test = min(len(members) - 1, max(1, round(fraction * len(members))))
        mask[members[:n_test]] = True
    return mask


def make_splits(labels, cfg: EvalConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    if cfg.mode == "holdout":
        test = stratified_holdout(labels, cfg.holdout_fraction, cfg.shuffle_seed)
        return [(np.flatnonzero(~test), np.flatnonzero(test))]
    folds = stratified_kfold(labels, cfg.k, cfg.shuffle_seed)
    return [(np.flatnonzero(folds != f), np.flatnonzero(folds == f)) for f in range(cfg.k)]


@dataclass(frozen=True)
class CellResult:
    model: str
    snr_db: float | None  # None for clean baseline cells
    clean_accuracy: float
    noisy_accuracy_mean: float
    noisy_accuracy_std: float
    loss_pp: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RobustnessReport:
    run_id: str
    master_seed: int
    config: dict
    dataset_checksum: str
    baseline: list[CellResult]
    sweep: list[CellResult]
    timings: dict[str, float] = field(default_factory=dict)
    model_cards: dict[str, dict] = field(default_factory=dict)

    def cell(self, model: str, snr_db: float) -> CellResult:
        for c in self.sweep:
            if c.model == model and c.snr_db == snr_db:
                return c
        raise KeyError((model, snr_db))

    @property
    def models(self) -> list[str]:
        return [c.model for c in self.baseline]

    @property
    def snr_grid(self) -> list[float]:
        seen = []
        for c in self.sweep:
            if c.snr_db not in seen:
                seen.append(c.snr_db)
        return seen


def _pipeline_key(spec) -> tuple:
    return (spec.scale, spec.pca_target)


def fit_fold(signals, labels, train_idx, specs, features: FeatureConfig, n_classes: int, fold: int):
    """Fit every distinct preprocessing chain and every model on one training split.

    Returns ``(pipelines, models)``: pipelines keyed by (scale, pca_target),
    models in ``specs`` order.
    """
    train = signals[train_idx]
    y = labels[train_idx]
    pipelines, transformed, models = {}, {}, []
    for spec in specs:
        key = _pipeline_key(spec)
        fold_spec = dataclasses.replace(spec, seed=int(mix64(spec.seed, fold)))
        try:
            if key not in pipelines:
                pipelines[key], transformed[key] = fit_pipeline(train, features, spec.scale, spec.pca_target)
            models.append(fit(fold_spec, transformed[key], y, n_classes))
        except Exception as exc:
            raise EvalError(f"model {spec.name}, fold {fold}: fit failed: {exc}") from exc
    return pipelines, models


# fork-inherited worker state; avoids pickling the dataset per task
_WORKER_STATE: dict = {}


def _run_fold(fold: int) -> dict:
    st = _WORKER_STATE
    signals, labels, keys = st["signals"], st["labels"], st["keys"]
    specs, features, n_classes = st["specs"], st["features"], st["n_classes"]
    train_idx, val_idx = st["splits"][fold]
    grid, trials, master_seed = st["grid"], st["trials"], st["master_seed"]

    timings = {}
    t0 = time.perf_counter()
    pipelines, models = fit_fold(signals, labels, train_idx, specs, features, n_classes, fold)
    timings[f"fit/fold{fold}"] = time.perf_counter() - t0

    y_val = labels[val_idx]
    val = signals[val_idx]

    def score(sig):
        out = []
        feats = {key: pipe.transform(sig) for key, pipe in pipelines.items()}
        for spec, model in zip(specs, models):
            try:
                pred = model.predict(feats[_pipeline_key(spec)])
            except Exception as exc:
                raise EvalError(f"model {spec.name}, fold {fold}: predict failed: {exc}") from exc
            out.append(int(np.sum(pred == y_val)))
        return out

    clean = score(val)
    noisy = {}
    for snr in grid:
        t0 = time.perf_counter()
        plan = NoisePlan(snr, trials, master_seed)
        per_trial = []
        for trial in range(trials):
            noisy_val, _ = inject_signals(val, keys[val_idx], plan, trial)
            per_trial.append(score(noisy_val))
        noisy[snr] = per_trial  # [trial][model]
        timings[f"sweep/fold{fold}/{snr:g}dB"] = time.perf_counter() - t0
    cards = {}
    if fold == 0:
        for spec in specs:
            cards[spec.name] = {"model": spec.to_dict(), "pipeline": pipelines[_pipeline_key(spec)].to_dict()}
    return {"n_val": len(val_idx), "clean": clean, "noisy": noisy, "timings": timings, "cards": cards}


def _execute(ds: Dataset, specs, cfg: EvalConfig, features, grid, trials, master_seed, jobs):
    splits = make_splits(ds.labels, cfg)
    keys = np.stack([ds.labels, ds.subjects, [s.segment_index for s in ds.segments]], axis=1)
    _WORKER_STATE.update(
        signals=ds.signals, labels=ds.labels, keys=keys, specs=list(specs), features=features,
        n_classes=ds.n_classes, splits=splits, grid=list(grid), trials=trials, master_seed=master_seed,
    )
    try:
        if jobs > 1 and len(splits) > 1:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=min(jobs, len(splits)), mp_context=ctx) as pool:
                results = list(pool.map(_run_fold, range(len(splits))))
        else:
            results = [_run_fold(f) for f in range(len(splits))]
    finally:
        _WORKER_STATE.clear()
    return results


def _mean(fracs: list[Fraction]) -> Fraction:
    return sum(fracs, Fraction(0)) / len(fracs)


def _aggregate(results, specs, grid, trials):
    baseline, sweep = [], []
    for m, spec in enumerate(specs):
        clean_f = [Fraction(r["clean"][m], r["n_val"]) for r in results]
        clean = _mean(clean_f)
        clean_std = float(np.std([float(f) for f in clean_f]))
        baseline.append(CellResult(spec.name, None, float(clean), float(clean), clean_std, 0.0))
        for snr in grid:
            noisy_f = [Fraction(r["noisy"][snr][t][m], r["n_val"]) for r in results for t in range(trials)]
            noisy = _mean(noisy_f)
            sweep.append(
                CellResult(
                    spec.name,
                    float(snr),
                    float(clean),
                    float(noisy),
                    float(np.std([float(f) for f in noisy_f])),
                    float(100 * (noisy - clean)),
                )
            )
    return baseline, sweep


def _check_specs(specs):
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"model names must be unique, got {names}")
    if not specs:
        raise ConfigError("at least one model spec is required")


def run_id_for(config: dict, checksum: str) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode() + checksum.encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _default_echo(specs, grid, plan, cfg, features) -> dict:
    return {
        "features": {"mode": features.mode},
        "models": [s.to_dict() for s in specs],
        "eval": dataclasses.asdict(cfg),
        "noise": {"trials": plan.trials, "master_seed": plan.master_seed, "scope": plan.scope},
        "snr_grid": list(grid),
    }


def _run(ds, specs, grid, plan, cfg, features, jobs, config) -> RobustnessReport:
    _check_specs(specs)
    features = features or FeatureConfig()
    results = _execute(ds, specs, cfg, features, grid, plan.trials, plan.master_seed, jobs)
    baseline, sweep = _aggregate(results, specs, grid, plan.trials)
    timings = {}
    for r in results:
        timings.update(r["timings"])
    if config is None:
        config = _default_echo(specs, grid, plan, cfg, features)
    checksum = ds.checksum()
    return RobustnessReport(
        run_id=run_id_for(config, checksum),
        master_seed=plan.master_seed,
        config=config,
        dataset_checksum=checksum,
        baseline=baseline,
        sweep=sweep,
        timings=timings,
        model_cards=results[0]["cards"],
    )


def baseline_report(
    ds: Dataset,
    specs,
    cfg: EvalConfig,
    features: FeatureConfig | None = None,
    jobs: int = 1,
    config: dict | None = None,
    master_seed: int = 0,
) -> RobustnessReport:
    """Clean-only run: a report with baseline cells and an empty sweep."""
    return _run(ds, specs, [], NoisePlan(math.inf, 1, master_seed), cfg, features, jobs, config)


def run_baseline(ds: Dataset, specs, cfg: EvalConfig, features: FeatureConfig | None = None, jobs: int = 1):
    """Mean clean validation accuracy per model across folds, as baseline cells."""
    return baseline_report(ds, specs, cfg, features, jobs).baseline


def run_sweep(
    ds: Dataset,
    specs,
    snr_grid,
    plan: NoisePlan,
    cfg: EvalConfig,
    features: FeatureConfig | None = None,
    jobs: int = 1,
    config: dict | None = None,
) -> RobustnessReport:
    """Train on clean folds, score validation folds under each SNR and trial.

    ``plan`` supplies the trial count and master seed; its ``snr_db`` is
    ignored in favour of ``snr_grid``. Noise is added to the raw validation
    signals before feature extraction.
    """
    grid = [float(s) for s in snr_grid]
    if not grid:
        raise ConfigError("snr_grid must not be empty")
    if len(set(grid)) != len(grid):
        raise ConfigError(f"snr_grid has duplicates: {grid}")
    for s in grid:
        if math.isnan(s) or s == -math.inf:
            raise ConfigError(f"invalid SNR value {s}")
    return _run(ds, specs, grid, plan, cfg, features, jobs, config)
