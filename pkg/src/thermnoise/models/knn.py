"""k-nearest-neighbour classifier (Euclidean)."""
from __future__ import annotations

import numpy as np

from .base import TrainedModel


class KNearestNeighbors(TrainedModel):
    family = "knn"

    def __init__(self, k, X, y, n_classes):
        super().__init__(n_classes, X.shape[1])
        self.k = min(k, len(X))
        self.X = X
        self.y = y
        self._sqnorm = np.einsum("ij,ij->i", X, X)

    def kneighbors(self, X, chunk: int = 512):
        """Indices of the k nearest training rows per query, nearest first.

        Neighbours are ranked by (distance, label, coordinates), so the result
        does not depend on training-row order.
        """
        X = self._check_input(X)
        out = np.empty((len(X), self.k), dtype=np.int64)
        k = self.k
        for start in range(0, len(X), chunk):
            Q = X[start:start + chunk]
            d2 = self._sqnorm[None, :] + np.einsum("ij,ij->i", Q, Q)[:, None] - 2.0 * Q @ self.X.T
            np.maximum(d2, 0.0, out=d2)
            kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
            for i in range(len(Q)):
                cand = np.flatnonzero(d2[i] <= kth[i])
                if len(cand) > k:
                    keys = [self.X[cand, j] for j in range(self.X.shape[1] - 1, -1, -1)]
                    order = np.lexsort(keys + [self.y[cand], d2[i, cand]])
                else:
                    order = np.lexsort((self.y[cand], d2[i, cand]))
                out[start + i] = cand[order[:k]]
        return out

    def _predict(self, X):
        nbrs = self.kneighbors(X)
        labels = self.y[nbrs]
        pred = np.empty(len(X), dtype=np.int64)
        for i, row in enumerate(labels):
            counts = np.bincount(row, minlength=self.n_classes + 1)
            top = counts.max()
            # tie between labels: the one holding the nearest neighbour wins
            pred[i] = next(lab for lab in row if counts[lab] == top)
        return pred

    def state_bytes(self):
        return self.X.tobytes() + self.y.tobytes()


def fit_knn(spec, X, y, n_classes) -> KNearestNeighbors:
    return KNearestNeighbors(spec.k, X.copy(), y.copy(), n_classes)
