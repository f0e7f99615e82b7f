"""CART decision tree (Gini) and a bootstrap random forest built on it."""
from __future__ import annotations

import math

import numpy as np

from ..noise import mix64
from .base import TrainedModel, argmax_lowest

# cap on the (samples x features) block scored at once
_BLOCK_ELEMS = 2_000_000
_TIE_RTOL = 1e-12


def _occurrence_counts(labels_sorted: np.ndarray) -> np.ndarray:
    """For each column, how many times the label at row i has appeared in rows 0..i."""
    n, f = labels_sorted.shape
    grp = np.argsort(labels_sorted, axis=0, kind="stable")
    lab = np.take_along_axis(labels_sorted, grp, axis=0)
    rows = np.arange(n)[:, None]
    starts = np.where(np.vstack([np.ones((1, f), bool), lab[1:] != lab[:-1]]), rows, 0)
    starts = np.maximum.accumulate(starts, axis=0)
    out = np.empty_like(lab)
    np.put_along_axis(out, grp, rows - starts + 1, axis=0)
    return out


def _best_split(X, y, class_totals, idx, features):
    """Best Gini split among ``features`` for the samples ``idx``.

    Returns ``(feature, threshold)`` or ``None`` when every candidate feature
    is constant on ``idx``. Ties go to the lowest feature index (in the order
    given), then to the lowest threshold.

    Minimizing weighted child Gini is the same as maximizing
    ``sum_c L_c**2 / n_L + sum_c R_c**2 / n_R``. Both sums are built by
    cumulative sums over the sorted samples without a class axis: adding the
    k-th sample of class c to the left child raises ``sum L_c**2`` by
    ``2k - 1``, and ``sum R_c**2 = sum T_c**2 - 2 sum T_c L_c + sum L_c**2``.
    """
    n = len(idx)
    yi = y[idx]
    tot = class_totals  # per-class counts at this node, indexed by label
    sum_t2 = float(np.sum(tot.astype(np.float64) ** 2))
    best_score = -np.inf
    best = None
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    step = max(1, _BLOCK_ELEMS // max(1, n))
    for start in range(0, len(features), step):
        feats = features[start:start + step]
        xs = X[np.ix_(idx, feats)]  # (n, f)
        order = np.argsort(xs, axis=0, kind="stable")
        xs_sorted = np.take_along_axis(xs, order, axis=0)
        lab = yi[order]
        occ = _occurrence_counts(lab)
        sum_l2 = np.cumsum(2.0 * occ - 1.0, axis=0)[:-1]
        sum_tl = np.cumsum(tot[lab].astype(np.float64), axis=0)[:-1]
        sum_r2 = sum_t2 - 2.0 * sum_tl + sum_l2
        score = sum_l2 / n_left + sum_r2 / (n - n_left)
        valid = xs_sorted[1:] > xs_sorted[:-1]
        score = np.where(valid, score, -np.inf)
        top = score.max()
        if top == -np.inf:
            continue
        # float rounding splits exact ties; treat near-equal scores as tied
        tol = _TIE_RTOL * max(1.0, abs(top))
        flat = np.argmax(score.T >= top - tol)  # first in (feature, position) order
        fi, pi = divmod(int(flat), n - 1)
        s = score[pi, fi]
        if best is None or s > best_score + tol:
            best_score = s
            lo, hi = xs_sorted[pi, fi], xs_sorted[pi + 1, fi]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (int(feats[fi]), float(thr))
    return best


class _TreeBuilder:
    def __init__(self, X, y, n_classes, max_depth, min_samples_split, n_split_features=None, rng=None):
        self.X = X
        self.y = y
        self.n_classes = n_classes
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.n_split_features = n_split_features
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []

    def _new_node(self, idx):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(np.bincount(self.y[idx] - 1, minlength=self.n_classes).astype(np.float64))
        return len(self.feature) - 1

    def _candidate_features(self):
        d = self.X.shape[1]
        if self.n_split_features is None or self.n_split_features >= d:
            return np.arange(d), None
        perm = self.rng.permutation(d)
        m = self.n_split_features
        return np.sort(perm[:m]), np.sort(perm[m:])

    def build(self, idx):
        root = self._new_node(idx)
        stack = [(root, idx, 0)]
        while stack:
            node, idx, depth = stack.pop()
            counts = self.value[node]
            if (
                np.count_nonzero(counts) <= 1
                or len(idx) < self.min_samples_split
                or (self.max_depth is not None and depth >= self.max_depth)
            ):
                continue
            feats, rest = self._candidate_features()
            totals = np.concatenate([[0], counts]).astype(np.int64)
            split = _best_split(self.X, self.y, totals, idx, feats)
            if split is None and rest is not None and len(rest):
                # every sampled feature was constant here; fall back to the others
                split = _best_split(self.X, self.y, totals, idx, rest)
            if split is None:
                continue
            f, thr = split
            mask = self.X[idx, f] <= thr
            li, ri = idx[mask], idx[~mask]
            lnode, rnode = self._new_node(li), self._new_node(ri)
            self.feature[node] = f
            self.threshold[node] = thr
            self.left[node] = lnode
            self.right[node] = rnode
            stack.append((rnode, ri, depth + 1))
            stack.append((lnode, li, depth + 1))
        return _FlatTree(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=np.float64),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.value),
        )


class _FlatTree:
    def __init__(self, feature, threshold, left, right, value):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value  # per-node training class counts

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.left[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X):
        """Leaf index reached by each row."""
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.left[node] >= 0)
        while len(active):
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = active[self.left[node[active]] >= 0]
        return node

    def predict(self, X):
        return argmax_lowest(self.value[self.apply(X)])

    def state_bytes(self):
        return b"".join(a.tobytes() for a in (self.feature, self.threshold, self.left, self.right, self.value))


class DecisionTree(TrainedModel):
    family = "tree"

    def __init__(self, tree: _FlatTree, n_classes, n_features):
        super().__init__(n_classes, n_features)
        self.tree = tree

    def _predict(self, X):
        return self.tree.predict(X)

    def state_bytes(self):
        return self.tree.state_bytes()


class RandomForest(TrainedModel):
    family = "forest"

    def __init__(self, trees, n_classes, n_features):
        super().__init__(n_classes, n_features)
        self.trees = trees

    def votes(self, X) -> np.ndarray:
        """Per-class tree vote counts, shape (n, n_classes)."""
        X = self._check_input(X)
        out = np.zeros((len(X), self.n_classes))
        rows = np.arange(len(X))
        for t in self.trees:
            out[rows, t.predict(X) - 1] += 1
        return out

    def _predict(self, X):
        return argmax_lowest(self.votes(X))

    def predict_proba(self, X):
        return self.votes(X) / len(self.trees)

    def state_bytes(self):
        return b"".join(t.state_bytes() for t in self.trees)


def fit_tree(spec, X, y, n_classes) -> DecisionTree:
    builder = _TreeBuilder(X, y, n_classes, spec.max_depth, spec.min_samples_split)
    return DecisionTree(builder.build(np.arange(len(X))), n_classes, X.shape[1])


def tree_seed(forest_seed: int, tree_index: int) -> int:
    return int(mix64(forest_seed, tree_index))


def fit_forest(spec, X, y, n_classes) -> RandomForest:
    n, d = X.shape
    m = spec.features_per_split or math.ceil(math.sqrt(d))
    trees = []
    for t in range(spec.n_trees):
        rng = np.random.default_rng(tree_seed(spec.seed, t))
        idx = np.sort(rng.integers(0, n, size=n)) if spec.bootstrap else np.arange(n)
        builder = _TreeBuilder(X, y, n_classes, spec.max_depth, spec.min_samples_split, m, rng)
        trees.append(builder.build(idx))
    return RandomForest(trees, n_classes, d)
