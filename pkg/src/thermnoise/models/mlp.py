"""Fully connected ReLU network with softmax output, trained with Adam."""
from __future__ import annotations

import numpy as np

from .base import TrainedModel, argmax_lowest


def init_params(sizes, seed, dtype=np.float32):
    """He-scaled Gaussian weights, zero biases. ``sizes`` = [d, h1, ..., n_classes]."""
    rng = np.random.default_rng(seed)
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = (rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)).astype(dtype)
        params.append([W, np.zeros(fan_out, dtype=dtype)])
    return params


def forward(params, X):
    """Return (hidden activations incl. input, logits)."""
    acts = [X]
    h = X
    for W, b in params[:-1]:
        h = np.maximum(h @ W + b, 0)
        acts.append(h)
    W, b = params[-1]
    return acts, h @ W + b


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(params, X, y0):
    """Mean cross-entropy and its gradients. ``y0`` holds 0-based class indices."""
    n = len(X)
    acts, logits = forward(params, X)
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logsum - z[rows, y0]))
    delta = np.exp(z - logsum[:, None])
    delta[rows, y0] -= 1
    delta /= n
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        grads[i] = [acts[i].T @ delta, delta.sum(axis=0)]
        if i > 0:
            delta = (delta @ W.T) * (acts[i] > 0)
    return loss, grads


class MLP(TrainedModel):
    family = "mlp"

    def __init__(self, params, n_classes, loss_history):
        super().__init__(n_classes, params[0][0].shape[0])
        self.params = params
        self.loss_history = loss_history

    def predict_proba(self, X):
        X = self._check_input(X)
        _, logits = forward(self.params, X.astype(np.float32))
        return softmax(logits.astype(np.float64))

    def _predict(self, X):
        return argmax_lowest(self.predict_proba(X))

    def state_bytes(self):
        return b"".join(p.tobytes() for layer in self.params for p in layer)


def fit_mlp(spec, X, y, n_classes) -> MLP:
    X = X.astype(np.float32)
    y0 = y - 1
    sizes = [X.shape[1], *spec.hidden_layers, n_classes]
    params = init_params(sizes, spec.seed)
    m = [[np.zeros_like(p) for p in layer] for layer in params]
    v = [[np.zeros_like(p) for p in layer] for layer in params]
    rng = np.random.default_rng([spec.seed, 1])
    b1, b2, lr, eps = spec.beta1, spec.beta2, spec.learning_rate, spec.adam_eps
    step = 0
    history = []
    for _ in range(spec.epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), spec.batch_size):
            batch = order[start:start + spec.batch_size]
            _, grads = loss_and_grads(params, X[batch], y0[batch])
            step += 1
            corr1 = 1 - b1**step
            corr2 = 1 - b2**step
            for li, layer in enumerate(params):
                for pi, p in enumerate(layer):
                    g = grads[li][pi]
                    m[li][pi] = b1 * m[li][pi] + (1 - b1) * g
                    v[li][pi] = b2 * v[li][pi] + (1 - b2) * g * g
                    p -= (lr * (m[li][pi] / corr1) / (np.sqrt(v[li][pi] / corr2) + eps)).astype(p.dtype)
        history.append(loss_and_grads(params, X, y0)[0])
    return MLP(params, n_classes, history)


def _relu_masks(params, X):
    acts, _ = forward(params, X)
    return [a > 0 for a in acts[1:]]


def _central_difference(params, X, y0, flat, j, step, base_masks):
    """Central difference for one parameter, or None if every step crosses a kink.

    The step shrinks by 10x (down to 1e-3 of the initial one) while a
    perturbation flips any ReLU on/off state.
    """
    orig = flat[j]
    for h in (step, step / 10, step / 100, step / 1000):
        vals = []
        crossed = False
        for sgn in (1.0, -1.0):
            flat[j] = orig + sgn * h
            vals.append(loss_and_grads(params, X, y0)[0])
            masks = _relu_masks(params, X)
            crossed = crossed or any(not np.array_equal(a, b) for a, b in zip(masks, base_masks))
        flat[j] = orig
        if not crossed:
            return (vals[0] - vals[1]) / (2 * h)
    return None


def mlp_gradient_check(hidden_layers, X, y, n_classes, seed=0, step=1e-5, params=None):
    """Max relative error between backprop and central finite differences.

    Runs in float64. Relative error per parameter is
    ``|g_bp - g_fd| / max(|g_bp| + |g_fd|, 1e-8)``. When ``params`` is not
    given, biases are drawn from +-[0.05, 0.15] instead of zero so no
    pre-activation sits exactly on the ReLU kink, where central differences
    and the subgradient disagree. Perturbations that still flip a ReLU are
    retried with a smaller step, and skipped if the smallest one flips too.
    """
    X = np.asarray(X, dtype=np.float64)
    y0 = np.asarray(y, dtype=np.int64) - 1
    if params is None:
        params = init_params([X.shape[1], *hidden_layers, n_classes], seed, dtype=np.float64)
        rng = np.random.default_rng([seed, 2])
        for _, b in params:
            b[...] = rng.choice([-1.0, 1.0], b.shape) * rng.uniform(0.05, 0.15, b.shape)
    _, grads = loss_and_grads(params, X, y0)
    base_masks = _relu_masks(params, X)
    worst = 0.0
    for li, layer in enumerate(params):
        for pi, p in enumerate(layer):
            flat = p.reshape(-1)
            g = grads[li][pi].reshape(-1)
            for j in range(flat.size):
                fd = _central_difference(params, X, y0, flat, j, step, base_masks)
                if fd is None:
                    continue
                rel = abs(g[j] - fd) / max(abs(g[j]) + abs(fd), 1e-8)
                worst = max(worst, rel)
    return worst
