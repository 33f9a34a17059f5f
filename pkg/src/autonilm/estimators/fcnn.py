"""Fully connected regression network trained with hand-rolled optimizers.

The network maps a mains window to the appliance power at the window's last
timestep: n_layers hidden layers of 32 ReLU units with inverted dropout, then
a linear scalar output. Inputs and target are standardized internally from
training statistics; predictions are de-standardized back to watts and clamped
at zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import RegressionDataset, TrainingDivergedError

HIDDEN_WIDTH = 32


class Adam:
    """Adam with bias correction. beta1=0.9, beta2=0.999, eps=1e-8.

    update: p -= lr * m_hat / (sqrt(v_hat) + eps)
    """

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class Nadam(Adam):
    """Adam with a Nesterov look-ahead on the first moment."""

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            lookahead = b1 * m_hat + (1 - b1) * g / (1 - b1 ** self.t)
            p -= self.lr * lookahead / (np.sqrt(v_hat) + self.eps)


class RMSprop:
    """Accumulates a decaying mean of squared gradients. rho=0.9, eps=1e-8."""

    def __init__(self, lr: float, rho: float = 0.9, eps: float = 1e-8):
        self.lr, self.rho, self.eps = lr, rho, eps
        self.acc = None

    def step(self, params, grads):
        if self.acc is None:
            self.acc = [np.zeros_like(p) for p in params]
        for p, g, a in zip(params, grads, self.acc):
            a *= self.rho
            a += (1 - self.rho) * g * g
            p -= self.lr * g / (np.sqrt(a) + self.eps)


OPTIMIZERS = {"Adam": Adam, "Nadam": Nadam, "RMSprop": RMSprop}


@dataclass
class FcnnModel:
    weights: list
    biases: list
    n_layers: int
    optimizer: str
    learning_rate: float
    loss: str
    dropout: float
    input_width: int
    feat_mean: np.ndarray
    feat_std: np.ndarray
    target_mean: float
    target_std: float


def _init_params(input_width: int, n_layers: int, rng: np.random.Generator, hidden: int = HIDDEN_WIDTH):
    sizes = [input_width] + [hidden] * n_layers + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(weights, biases, X, masks=None):
    a = X
    acts = [X]
    pre = []
    for l in range(len(weights) - 1):
        z = a @ weights[l] + biases[l]
        a = np.maximum(z, 0.0)
        if masks is not None:
            a = a * masks[l]
        pre.append(z)
        acts.append(a)
    out = (acts[-1] @ weights[-1] + biases[-1]).ravel()
    return out, acts, pre


def _loss_and_grads(weights, biases, X, y, loss: str, masks=None):
    out, acts, pre = _forward(weights, biases, X, masks)
    n = len(y)
    r = out - y
    if loss == "MSE":
        value = float(np.mean(r * r))
        d = (2.0 * r / n)[:, None]
    else:  # MAE; subgradient at zero residual is zero
        value = float(np.mean(np.abs(r)))
        d = (np.sign(r) / n)[:, None]

    g_w = [None] * len(weights)
    g_b = [None] * len(biases)
    g_w[-1] = acts[-1].T @ d
    g_b[-1] = d.sum(axis=0)
    da = d @ weights[-1].T
    for l in range(len(weights) - 2, -1, -1):
        if masks is not None:
            da = da * masks[l]
        dz = da * (pre[l] > 0)
        g_w[l] = acts[l].T @ dz
        g_b[l] = dz.sum(axis=0)
        if l > 0:
            da = dz @ weights[l].T
    return value, g_w, g_b


def network_loss_and_gradients(model: FcnnModel, inputs, targets):
    """Loss and parameter gradients on standardized data, dropout disabled."""
    Xs = (np.asarray(inputs, dtype=float) - model.feat_mean) / model.feat_std
    ys = (np.asarray(targets, dtype=float) - model.target_mean) / model.target_std
    return _loss_and_grads(model.weights, model.biases, Xs, ys, model.loss)


def fit_fcnn(data: RegressionDataset, *, optimizer: str, learning_rate: float, loss: str,
             n_layers: int, dropout: float, rng: np.random.Generator,
             epochs: int = 10, batch_size: int = 64, validation: RegressionDataset | None = None,
             patience: int = 2) -> FcnnModel:
    """Train on raw windows; statistics for standardization come from the data.

    Early stopping watches the held-out validation loss (mean epoch training
    loss when none is given) and stops after `patience` non-improving epochs,
    keeping the best snapshot. A non-finite training loss raises
    TrainingDivergedError naming the epoch.
    """
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    if loss not in ("MSE", "MAE"):
        raise ValueError(f"unknown loss {loss!r}")
    if not 0.0 <= dropout < 1.0:
        raise ValueError("dropout must be in [0, 1)")

    X, y = data.inputs, data.targets
    feat_mean = X.mean(axis=0)
    feat_std = np.maximum(X.std(axis=0), 1e-8)
    t_mean = float(y.mean())
    t_std = max(float(y.std()), 1e-8)
    Xs = (X - feat_mean) / feat_std
    ys = (y - t_mean) / t_std
    if validation is not None:
        Xv = (validation.inputs - feat_mean) / feat_std
        yv = (validation.targets - t_mean) / t_std

    weights, biases = _init_params(X.shape[1], n_layers, rng)
    opt = OPTIMIZERS[optimizer](learning_rate)
    n = len(ys)
    best_metric = np.inf
    best_snapshot = ([w.copy() for w in weights], [b.copy() for b in biases])
    bad_epochs = 0

    for epoch in range(epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            masks = None
            if dropout > 0.0 and n_layers > 0:
                masks = [
                    (rng.random((len(rows), HIDDEN_WIDTH)) >= dropout) / (1.0 - dropout)
                    for _ in range(n_layers)
                ]
            value, g_w, g_b = _loss_and_grads(weights, biases, Xs[rows], ys[rows], loss, masks)
            if not np.isfinite(value):
                raise TrainingDivergedError(f"non-finite training loss at epoch {epoch}")
            opt.step(weights + biases, g_w + g_b)
            batch_losses.append(value)

        if validation is not None:
            metric, _, _ = _loss_and_grads(weights, biases, Xv, yv, loss)
        else:
            metric = float(np.mean(batch_losses))
        if not np.isfinite(metric):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}")
        if metric < best_metric:
            best_metric = metric
            best_snapshot = ([w.copy() for w in weights], [b.copy() for b in biases])
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= patience:
                break

    weights, biases = best_snapshot
    return FcnnModel(weights=weights, biases=biases, n_layers=n_layers, optimizer=optimizer,
                     learning_rate=learning_rate, loss=loss, dropout=dropout,
                     input_width=X.shape[1], feat_mean=feat_mean, feat_std=feat_std,
                     target_mean=t_mean, target_std=t_std)


def predict_fcnn(model: FcnnModel, inputs) -> np.ndarray:
    """Forward pass without dropout; output de-standardized to watts, floored at 0."""
    X = np.asarray(inputs, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.input_width:
        raise ValueError(f"inputs must be 2-D with width {model.input_width}")
    Xs = (X - model.feat_mean) / model.feat_std
    out, _, _ = _forward(model.weights, model.biases, Xs)
    return np.maximum(out * model.target_std + model.target_mean, 0.0)
