"""Deep feed-forward regressor trained with Adam.

Parameters live in one flat vector; per-layer weights and biases are views
into it, so the optimiser updates everything with a handful of array ops.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BadHyperparameter, TrainingDiverged


@dataclass(frozen=True)
class MlpParams:
    hidden_layers: int = 10
    width: int = 16
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 2000
    tol: float = 1e-6  # relative improvement that counts as progress
    patience: int = 50  # epochs without progress before stopping
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.hidden_layers < 1 or self.width < 1:
            raise BadHyperparameter("need at least one hidden layer of width >= 1")
        if not self.learning_rate > 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise BadHyperparameter("learning rate, batch size and epochs must be positive")


class Network:
    """Layer shapes plus a flat parameter vector."""

    def __init__(self, sizes):
        self.sizes = tuple(int(s) for s in sizes)
        self.shapes = list(zip(self.sizes[:-1], self.sizes[1:]))
        self.n_params = sum(fi * fo + fo for fi, fo in self.shapes)

    def views(self, flat):
        """[(W, b), ...] views into ``flat``."""
        out, o = [], 0
        for fi, fo in self.shapes:
            w = flat[o : o + fi * fo].reshape(fi, fo)
            o += fi * fo
            b = flat[o : o + fo]
            o += fo
            out.append((w, b))
        return out

    def init(self, rng) -> np.ndarray:
        flat = np.zeros(self.n_params)
        for w, _ in self.views(flat):
            w[...] = rng.normal(0.0, np.sqrt(2.0 / w.shape[0]), size=w.shape)
        return flat

    def forward(self, flat, x) -> np.ndarray:
        layers = self.views(flat)
        a = x
        for w, b in layers[:-1]:
            a = np.maximum(a @ w + b, 0.0)
        w, b = layers[-1]
        return (a @ w + b)[:, 0]

    def loss_and_grad(self, flat, x, y, grad=None):
        """Half mean squared error and its gradient w.r.t. ``flat``."""
        layers = self.views(flat)
        if grad is None:
            grad = np.empty_like(flat)
        gviews = self.views(grad)
        acts = [x]
        a = x
        for w, b in layers[:-1]:
            a = np.maximum(a @ w + b, 0.0)
            acts.append(a)
        w, b = layers[-1]
        pred = (a @ w + b)[:, 0]
        resid = pred - y
        n = len(y)
        loss = 0.5 * float(resid @ resid) / n
        delta = (resid / n)[:, None]
        for li in range(len(layers) - 1, -1, -1):
            w, _ = layers[li]
            gw, gb = gviews[li]
            a_prev = acts[li]
            np.matmul(a_prev.T, delta, out=gw)
            gb[...] = delta.sum(axis=0)
            if li > 0:
                delta = (delta @ w.T) * (a_prev > 0)
        return loss, grad


@dataclass(frozen=True, eq=False)
class MlpState:
    sizes: tuple
    params: np.ndarray
    y_mean: float
    y_scale: float
    epochs: int

    def predict(self, xs: np.ndarray) -> np.ndarray:
        return Network(self.sizes).forward(self.params, xs) * self.y_scale + self.y_mean


def fit_mlp(xs: np.ndarray, y: np.ndarray, params: MlpParams, rng) -> MlpState:
    """Fit on already-standardised inputs; targets are scaled internally."""
    n, d = xs.shape
    y_mean = float(y.mean())
    y_scale = float(y.std())
    if not y_scale > 0:
        y_scale = 1.0
    ys = (y - y_mean) / y_scale
    net = Network([d] + [params.width] * params.hidden_layers + [1])
    flat = net.init(rng)
    m = np.zeros_like(flat)
    v = np.zeros_like(flat)
    grad = np.empty_like(flat)
    b1, b2, lr, eps = params.beta1, params.beta2, params.learning_rate, params.adam_eps
    step = 0
    best = np.inf
    best_flat = flat.copy()
    stale = 0
    epoch = 0
    bs = params.batch_size
    for epoch in range(1, params.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            loss, _ = net.loss_and_grad(flat, xs[idx], ys[idx], grad)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            step += 1
            m *= b1
            m += (1 - b1) * grad
            v *= b2
            v += (1 - b2) * grad * grad
            lr_t = lr * np.sqrt(1 - b2**step) / (1 - b1**step)
            flat -= lr_t * m / (np.sqrt(v) + eps)
        resid = net.forward(flat, xs) - ys
        full = 0.5 * float(resid @ resid) / n
        if not np.isfinite(full):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
        if full < best * (1 - params.tol):
            best = full
            best_flat = flat.copy()
            stale = 0
        else:
            stale += 1
            if stale >= params.patience:
                break
        if full < 1e-14:
            break
    # report the best full-batch epoch, not the last noisy one
    return MlpState(net.sizes, best_flat, y_mean, y_scale, epoch)
