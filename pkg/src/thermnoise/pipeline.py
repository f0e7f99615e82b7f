"""Feature extraction, standardization and PCA."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FitError

FEATURE_MODES = ("flatten", "stats")
STATS_ORDER = ("mean", "std", "min", "max", "rms")


@dataclass(frozen=True)
class FeatureConfig:
    mode: str = "flatten"

    def __post_init__(self):
        if self.mode not in FEATURE_MODES:
            raise ConfigError(f"feature mode must be one of {FEATURE_MODES}, got {self.mode!r}")

    def n_features(self, n_samples: int, n_channels: int) -> int:
        return n_samples * n_channels if self.mode == "flatten" else len(STATS_ORDER) * n_channels


def extract_features_batch(signals: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Feature matrix for a stack of segments of shape (n, n_samples, n_channels).

    ``flatten`` is channel-major: all samples of channel 0 in time order, then
    channel 1, and so on. ``stats`` gives, per channel, the population
    mean, std, min, max and rms.
    """
    x = np.asarray(signals, dtype=np.float64)
    if cfg.mode == "flatten":
        return np.ascontiguousarray(np.transpose(x, (0, 2, 1))).reshape(x.shape[0], -1)
    stats = np.stack(
        [x.mean(axis=1), x.std(axis=1), x.min(axis=1), x.max(axis=1), np.sqrt(np.mean(x * x, axis=1))],
        axis=2,
    )
    return stats.reshape(x.shape[0], -1)


def extract_features(segment, cfg: FeatureConfig) -> np.ndarray:
    return extract_features_batch(segment.samples[None], cfg)[0]


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


def scaler_fit(X) -> Scaler:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("scaler_fit needs a 2-D matrix with at least 2 rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # constant columns (up to rounding in the mean) keep unit scale
    std[std <= 1e-12 * np.abs(mean)] = 1.0
    return Scaler(mean, std)


def scaler_apply(s: Scaler, X) -> np.ndarray:
    return (np.asarray(X, dtype=np.float64) - s.mean) / s.std


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (retained_k, d), orthonormal rows
    explained_variance_ratios: np.ndarray  # retained components only
    retained_k: int

    def to_dict(self) -> dict:
        return {
            "retained_k": self.retained_k,
            "explained_variance_ratios": self.explained_variance_ratios.tolist(),
            "mean": self.mean.tolist(),
        }


def pca_fit(X, variance_target: float = 0.95) -> PcaModel:
    """Fit PCA and keep the fewest components reaching ``variance_target``.

    Uses the eigendecomposition of the 1/(n-1) sample covariance when
    ``d <= n``, otherwise the SVD of the centered data (same spectrum,
    cheaper for wide matrices). Component signs are fixed so the
    largest-magnitude loading of each component is positive.
    """
    if not 0 < variance_target <= 1:
        raise ConfigError(f"variance_target must be in (0, 1], got {variance_target}")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise FitError("pca_fit needs a 2-D matrix with at least 2 rows")
    n, d = X.shape
    mean = X.mean(axis=0)
    Xc = X - mean
    if d <= n:
        cov = Xc.T @ Xc / (n - 1)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        vecs = evecs[:, order].T
    else:
        _, s, vt = np.linalg.svd(Xc, full_matrices=False)
        evals = s**2 / (n - 1)
        vecs = vt
    total = evals.sum()
    if total <= 0 or not np.isfinite(total):
        raise FitError("pca_fit: input has zero variance (rank 0)")
    # drop numerically null directions before choosing k
    rank = int(np.sum(evals > 1e-10 * evals[0]))
    ratios = evals[:rank] / total
    cum = np.cumsum(ratios)
    k = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
    k = min(k, rank)
    comps = vecs[:k].copy()
    flip = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    comps *= flip[:, None]
    return PcaModel(mean, comps, ratios[:k].copy(), k)


def pca_apply(m: PcaModel, X) -> np.ndarray:
    return (np.asarray(X, dtype=np.float64) - m.mean) @ m.components.T


def pca_reconstruct(m: PcaModel, Z) -> np.ndarray:
    return np.asarray(Z) @ m.components + m.mean


@dataclass(frozen=True)
class FittedPipeline:
    """Feature extraction plus optional scaler and PCA, fitted on clean data."""

    features: FeatureConfig
    scaler: Scaler | None
    pca: PcaModel | None

    def transform(self, signals: np.ndarray) -> np.ndarray:
        X = extract_features_batch(signals, self.features)
        if self.scaler is not None:
            X = scaler_apply(self.scaler, X)
        if self.pca is not None:
            X = pca_apply(self.pca, X)
        return X

    def state_bytes(self) -> bytes:
        parts = []
        if self.scaler is not None:
            parts += [self.scaler.mean, self.scaler.std]
        if self.pca is not None:
            parts += [self.pca.mean, self.pca.components, self.pca.explained_variance_ratios]
        return b"".join(p.tobytes() for p in parts)

    def to_dict(self) -> dict:
        return {
            "features": self.features.mode,
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "pca": None if self.pca is None else self.pca.to_dict(),
        }


def fit_pipeline(signals, features: FeatureConfig, scale: bool, pca_target: float | None):
    """Fit the preprocessing chain; returns (pipeline, transformed training matrix)."""
    X = extract_features_batch(signals, features)
    scaler = pca = None
    if scale:
        scaler = scaler_fit(X)
        X = scaler_apply(scaler, X)
    if pca_target is not None:
        pca = pca_fit(X, pca_target)
        X = pca_apply(pca, X)
    return FittedPipeline(features, scaler, pca), X
