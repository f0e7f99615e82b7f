"""Gaussian naive Bayes."""
from __future__ import annotations

import numpy as np

from .base import TrainedModel, argmax_lowest


class GaussianNB(TrainedModel):
    family = "gnb"

    def __init__(self, means, variances, log_priors):
        super().__init__(means.shape[0], means.shape[1])
        self.means = means
        self.variances = variances
        self.log_priors = log_priors

    def joint_log_likelihood(self, X) -> np.ndarray:
        """log p(c) + sum_j log N(x_j; mu_cj, var_cj), shape (n, n_classes)."""
        X = self._check_input(X)
        out = np.empty((len(X), self.n_classes))
        for c in range(self.n_classes):
            var = self.variances[c]
            norm = -0.5 * np.sum(np.log(2.0 * np.pi * var))
            out[:, c] = self.log_priors[c] + norm - 0.5 * np.sum((X - self.means[c]) ** 2 / var, axis=1)
        return out

    def _predict(self, X):
        return argmax_lowest(self.joint_log_likelihood(X))

    def predict_proba(self, X):
        jll = self.joint_log_likelihood(X)
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)

    def state_bytes(self):
        return self.means.tobytes() + self.variances.tobytes() + self.log_priors.tobytes()


def fit_gnb(spec, X, y, n_classes) -> GaussianNB:
    # clamp every per-class variance at var_floor_ratio * (largest feature variance)
    floor = spec.var_floor_ratio * float(np.max(X.var(axis=0)))
    if floor <= 0:
        floor = np.finfo(np.float64).tiny
    means = np.empty((n_classes, X.shape[1]))
    variances = np.empty_like(means)
    counts = np.empty(n_classes)
    for c in range(n_classes):
        Xc = X[y == c + 1]
        means[c] = Xc.mean(axis=0)
        variances[c] = np.maximum(Xc.var(axis=0), floor)
        counts[c] = len(Xc)
    return GaussianNB(means, variances, np.log(counts / counts.sum()))
