"""CART regression trees and a bagged forest on top of them.

Split search is exhaustive: every feature, every midpoint between consecutive
distinct sorted values. Ties go to the lowest feature index, then the lowest
threshold. Rows with value <= threshold route left. Trees grow without a depth
limit; growth stops when a node is smaller than min_samples_split, its targets
are constant, or no split improves the criterion.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .base import RegressionDataset

CRITERIA = ("MSE", "Friedman_MSE", "MAE")


@dataclass
class Leaf:
    value: float


@dataclass
class Split:
    feature: int
    threshold: float
    left: object = None
    right: object = None


@dataclass
class TreeModel:
    root: object
    criterion: str
    min_samples_split: int
    n_features: int


@dataclass
class ForestModel:
    trees: list
    criterion: str
    min_samples_split: int
    n_features: int


class _MedianTracker:
    """Streaming sum of absolute deviations about the running median.

    Two-heap running median with tracked half-sums; push is O(log n).
    """

    __slots__ = ("_low", "_high", "_sum_low", "_sum_high")

    def __init__(self):
        self._low = []  # max-heap via negation
        self._high = []  # min-heap
        self._sum_low = 0.0
        self._sum_high = 0.0

    def push(self, x: float):
        if self._low and x > -self._low[0]:
            heapq.heappush(self._high, x)
            self._sum_high += x
        else:
            heapq.heappush(self._low, -x)
            self._sum_low += x
        if len(self._low) > len(self._high) + 1:
            v = -heapq.heappop(self._low)
            self._sum_low -= v
            heapq.heappush(self._high, v)
            self._sum_high += v
        elif len(self._high) > len(self._low):
            v = heapq.heappop(self._high)
            self._sum_high -= v
            heapq.heappush(self._low, -v)
            self._sum_low += v

    def abs_dev_sum(self) -> float:
        n_low, n_high = len(self._low), len(self._high)
        if n_low > n_high:
            med = -self._low[0]
        else:
            med = 0.5 * (-self._low[0] + self._high[0])
        return (n_low * med - self._sum_low) + (self._sum_high - n_high * med)


def _gains_mse(y: np.ndarray) -> np.ndarray:
    # SSE reduction for every split position i (left = first i rows)
    n = y.size
    cs = np.cumsum(y)
    css = np.cumsum(y * y)
    i = np.arange(1, n, dtype=float)
    sum_l = cs[:-1]
    sse_l = css[:-1] - sum_l * sum_l / i
    sum_r = cs[-1] - sum_l
    sse_r = (css[-1] - css[:-1]) - sum_r * sum_r / (n - i)
    sse_parent = css[-1] - cs[-1] * cs[-1] / n
    return sse_parent - sse_l - sse_r


def _gains_friedman(y: np.ndarray) -> np.ndarray:
    # (n_l * n_r / n) * (mean_l - mean_r)^2
    n = y.size
    cs = np.cumsum(y)
    i = np.arange(1, n, dtype=float)
    mean_l = cs[:-1] / i
    mean_r = (cs[-1] - cs[:-1]) / (n - i)
    diff = mean_l - mean_r
    return (i * (n - i) / n) * diff * diff


def _gains_mae(y: np.ndarray) -> np.ndarray:
    # reduction of summed absolute deviation about the side medians
    n = y.size
    prefix = np.empty(n - 1)
    fwd = _MedianTracker()
    for k in range(n - 1):
        fwd.push(float(y[k]))
        prefix[k] = fwd.abs_dev_sum()
    fwd.push(float(y[n - 1]))
    parent = fwd.abs_dev_sum()
    suffix = np.empty(n - 1)
    bwd = _MedianTracker()
    for k in range(n - 1, 0, -1):
        bwd.push(float(y[k]))
        suffix[k - 1] = bwd.abs_dev_sum()
    return parent - prefix - suffix


_GAINS = {"MSE": _gains_mse, "Friedman_MSE": _gains_friedman, "MAE": _gains_mae}


def _leaf_value(y: np.ndarray, criterion: str) -> float:
    return float(np.median(y)) if criterion == "MAE" else float(np.mean(y))


def _find_split(X: np.ndarray, y: np.ndarray, criterion: str):
    """Best (feature, threshold) by criterion gain, or None if nothing improves."""
    best_gain = 0.0
    best = None
    gains_fn = _GAINS[criterion]
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xv = X[order, j]
        if xv[0] == xv[-1]:
            continue
        gains = gains_fn(y[order])
        movable = xv[1:] > xv[:-1]
        gains = np.where(movable, gains, -np.inf)
        k = int(np.argmax(gains))
        if gains[k] > best_gain:
            best_gain = float(gains[k])
            best = (j, 0.5 * (xv[k] + xv[k + 1]))
    return best


def fit_tree(data: RegressionDataset, criterion: str = "MSE", min_samples_split: int = 2) -> TreeModel:
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if min_samples_split < 2:
        raise ValueError("min_samples_split must be >= 2")
    X, y = data.inputs, data.targets
    if len(y) == 0:
        raise ValueError("empty dataset")

    root = None
    # explicit stack: unbalanced trees can exceed the recursion limit
    stack = [(np.arange(len(y)), None, False)]
    while stack:
        idx, parent, is_right = stack.pop()
        ysub = y[idx]
        node = None
        if ysub.size >= min_samples_split and ysub.min() < ysub.max():
            found = _find_split(X[idx], ysub, criterion)
            if found is not None:
                feature, threshold = found
                mask = X[idx, feature] <= threshold
                node = Split(feature, float(threshold))
                stack.append((idx[mask], node, False))
                stack.append((idx[~mask], node, True))
        if node is None:
            node = Leaf(_leaf_value(ysub, criterion))
        if parent is None:
            root = node
        elif is_right:
            parent.right = node
        else:
            parent.left = node
    return TreeModel(root=root, criterion=criterion, min_samples_split=min_samples_split,
                     n_features=X.shape[1])


def predict_tree(model: TreeModel, inputs) -> np.ndarray:
    X = np.asarray(inputs, dtype=float)
    if X.ndim != 2 or X.shape[1] < model.n_features:
        raise ValueError(f"inputs must have at least {model.n_features} features")
    out = np.empty(len(X))
    stack = [(model.root, np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if isinstance(node, Leaf):
            out[idx] = node.value
            continue
        mask = X[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[mask]))
        stack.append((node.right, idx[~mask]))
    return out


def fit_forest(data: RegressionDataset, criterion: str = "MSE", min_samples_split: int = 2,
               n_estimators: int = 10, rng: np.random.Generator | None = None,
               bootstrap: bool = True) -> ForestModel:
    """Bagged trees: bootstrap rows per tree, no feature subsampling."""
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    n = len(data)
    trees = []
    for _ in range(n_estimators):
        if bootstrap:
            idx = rng.integers(0, n, n)
            sample = RegressionDataset(data.inputs[idx], data.targets[idx])
        else:
            sample = data
        trees.append(fit_tree(sample, criterion, min_samples_split))
    return ForestModel(trees=trees, criterion=criterion, min_samples_split=min_samples_split,
                       n_features=data.inputs.shape[1])


def predict_forest(model: ForestModel, inputs) -> np.ndarray:
    preds = np.stack([predict_tree(t, inputs) for t in model.trees])
    return preds.mean(axis=0)
