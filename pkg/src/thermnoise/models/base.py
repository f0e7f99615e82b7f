"""Model specifications and the shared fit/predict contract."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..errors import CapabilityError, ConfigError, FitError


@dataclass(frozen=True)
class _SpecBase:
    seed: int = 0
    name: str = ""
    # preprocessing applied before this model; pca_target=None disables PCA
    scale: bool = True
    pca_target: float | None = None

    def __post_init__(self):
        if not self.name:
            object.__setattr__(self, "name", self.default_name())
        if self.pca_target is not None and not 0 < self.pca_target <= 1:
            raise ConfigError(f"{self.name}: pca_target must be in (0, 1]")
        self.check()

    def default_name(self) -> str:
        return self.family

    def check(self) -> None:
        pass

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return {"family": self.family, **d}


@dataclass(frozen=True)
class MlpSpec(_SpecBase):
    family = "mlp"
    hidden_layers: tuple[int, ...] = (128, 64)
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 30
    batch_size: int = 64

    def default_name(self):
        return "DNN"

    def check(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if any(h < 1 for h in self.hidden_layers):
            raise ConfigError("mlp: hidden layer widths must be >= 1")
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ConfigError("mlp: epochs, batch_size and learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("mlp: Adam betas must be in [0, 1)")


@dataclass(frozen=True)
class TreeSpec(_SpecBase):
    family = "tree"
    max_depth: int | None = None
    min_samples_split: int = 2
    pca_target: float | None = 0.95

    def default_name(self):
        return "DTC+PCA" if self.pca_target is not None else "DTC"

    def check(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("tree: max_depth must be >= 1 or null")
        if self.min_samples_split < 2:
            raise ConfigError("tree: min_samples_split must be >= 2")


@dataclass(frozen=True)
class ForestSpec(_SpecBase):
    family = "forest"
    n_trees: int = 100
    bootstrap: bool = True
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: int | None = None  # None -> ceil(sqrt(d))

    def default_name(self):
        return "RFC"

    def check(self):
        if self.n_trees < 1:
            raise ConfigError("forest: n_trees must be >= 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ConfigError("forest: features_per_split must be >= 1")
        if self.min_samples_split < 2:
            raise ConfigError("forest: min_samples_split must be >= 2")


@dataclass(frozen=True)
class KnnSpec(_SpecBase):
    family = "knn"
    k: int = 5
    pca_target: float | None = 0.95

    def default_name(self):
        return "KNN+PCA" if self.pca_target is not None else "KNN"

    def check(self):
        if self.k < 1:
            raise ConfigError("knn: k must be >= 1")


@dataclass(frozen=True)
class GnbSpec(_SpecBase):
    family = "gnb"
    var_floor_ratio: float = 1e-9

    def default_name(self):
        return "GNB"

    def check(self):
        if self.var_floor_ratio < 0:
            raise ConfigError("gnb: var_floor_ratio must be >= 0")


SPEC_TYPES = {cls.family: cls for cls in (MlpSpec, TreeSpec, ForestSpec, KnnSpec, GnbSpec)}


def spec_from_dict(d: dict):
    d = dict(d)
    family = d.pop("family", None)
    if family not in SPEC_TYPES:
        raise ConfigError(f"unknown model family {family!r}; expected one of {sorted(SPEC_TYPES)}")
    cls = SPEC_TYPES[family]
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"model {family!r}: unknown keys {sorted(unknown)}")
    if "hidden_layers" in d:
        d["hidden_layers"] = tuple(d["hidden_layers"])
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(f"model {family!r}: {exc}") from None


def default_specs(seed: int = 0) -> list:
    """The five families with their default hyperparameters."""
    return [MlpSpec(seed=seed), TreeSpec(seed=seed), ForestSpec(seed=seed), KnnSpec(seed=seed), GnbSpec(seed=seed)]


class TrainedModel:
    """Fitted classifier; labels are integers 1..n_classes."""

    family = "base"

    def __init__(self, n_classes: int, n_features: int):
        self.n_classes = n_classes
        self.n_features = n_features

    def _check_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, self.n_features)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"{self.family}: expected {self.n_features} features, got shape {X.shape}")
        return X

    def predict(self, X) -> np.ndarray:
        X = self._check_input(X)
        if len(X) == 0:
            return np.zeros(0, dtype=np.int64)
        return self._predict(X)

    def predict_proba(self, X) -> np.ndarray:
        raise CapabilityError(f"{self.family} does not provide class probabilities")

    def _predict(self, X) -> np.ndarray:
        raise NotImplementedError

    def state_bytes(self) -> bytes:
        """Raw bytes of every fitted parameter, for bitwise comparisons."""
        raise NotImplementedError


def check_training_data(X, y, n_classes: int | None):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
        raise FitError(f"X must be (n, d) and y (n,), got {X.shape} and {y.shape}")
    if len(y) == 0:
        raise FitError("cannot fit on zero samples")
    if not np.all(np.isfinite(X)):
        raise FitError("non-finite feature value in training data")
    if n_classes is None:
        n_classes = int(y.max())
    if y.min() < 1 or y.max() > n_classes:
        raise FitError(f"labels must be in [1, {n_classes}]")
    counts = np.bincount(y, minlength=n_classes + 1)[1:]
    if np.any(counts == 0):
        missing = (np.flatnonzero(counts == 0) + 1).tolist()
        raise FitError(f"classes with zero training samples: {missing}")
    return X, y, n_classes


def fit(spec, X, y, n_classes: int | None = None) -> TrainedModel:
    """Fit the model described by ``spec``; deterministic given ``spec.seed``."""
    from . import gnb, knn, mlp, tree

    X, y, n_classes = check_training_data(X, y, n_classes)
    builders = {
        "mlp": mlp.fit_mlp,
        "tree": tree.fit_tree,
        "forest": tree.fit_forest,
        "knn": knn.fit_knn,
        "gnb": gnb.fit_gnb,
    }
    return builders[spec.family](spec, X, y, n_classes)


def argmax_lowest(scores: np.ndarray) -> np.ndarray:
    """Row-wise argmax as a 1-based label; ties go to the lowest label."""
    return np.argmax(scores, axis=1).astype(np.int64) + 1


__all__ = [
    "MlpSpec", "TreeSpec", "ForestSpec", "KnnSpec", "GnbSpec", "TrainedModel",
    "fit", "spec_from_dict", "default_specs", "SPEC_TYPES",
]
