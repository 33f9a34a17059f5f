"""Evaluation harness: windows, metrics, and the per-method objective.

The objective returned by objective_for fits the configured method on the
first 80% of the training range and scores validation MAE (watts) on the last
20%. The same evaluation core serves the benchmark, which fits on the whole
training range and scores on the held-out test range.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass

import numpy as np

from .data import TimeSeriesDataset
from .estimators import (
    ApplianceStateLibrary,
    RegressionDataset,
    disaggregate_co,
    disaggregate_fhmm,
    external_objective,
    fit_fcnn,
    fit_fhmm,
    fit_forest,
    fit_states,
    fit_tree,
    predict_fcnn,
    predict_forest,
    predict_tree,
)
from .searchspace import EXTERNAL_METHODS, Configuration, builtin_space, validate_config

DEFAULT_DT_WINDOW = 9
VALIDATION_FRACTION = 0.2
STD_FLOOR = 1e-8


def standardize(series):
    """Return (standardized series, mean, std). std is floored at 1e-8."""
    x = np.asarray(series, dtype=float)
    mean = float(x.mean())
    std = max(float(x.std()), STD_FLOOR)
    return (x - mean) / std, mean, std


def make_windows(mains, appliance, length: int, stride: int = 1) -> RegressionDataset:
    """Sliding mains windows; each target is the appliance power at the window end."""
    mains = np.asarray(mains, dtype=float)
    appliance = np.asarray(appliance, dtype=float)
    if mains.size != appliance.size:
        raise ValueError("mains and appliance series must align")
    if length < 1 or stride < 1:
        raise ValueError("length and stride must be >= 1")
    if mains.size < length:
        raise ValueError(f"series of {mains.size} samples shorter than window {length}")
    windows = np.lib.stride_tricks.sliding_window_view(mains, length)[::stride]
    targets = appliance[length - 1::stride]
    return RegressionDataset(windows.copy(), targets.copy())


def mae(predictions, truths) -> float:
    predictions = np.asarray(predictions, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if predictions.shape != truths.shape or predictions.size == 0:
        raise ValueError("predictions and truths must be non-empty and aligned")
    return float(np.mean(np.abs(predictions - truths)))


def disaggregation_accuracy(predictions, truths, mains) -> float:
    """1 - sum|error| / (2 * sum(mains)); rows are time, columns appliances."""
    predictions = np.asarray(predictions, dtype=float)
    truths = np.asarray(truths, dtype=float)
    mains = np.asarray(mains, dtype=float)
    if predictions.shape != truths.shape or len(predictions) != mains.size:
        raise ValueError("predictions, truths, and mains must align")
    denom = 2.0 * float(mains.sum())
    if denom <= 0:
        raise ValueError("mains sum must be positive")
    return 1.0 - float(np.abs(predictions - truths).sum()) / denom


@dataclass
class SplitSpec:
    """Chronological boundary of the training range.

    Either a fraction of the samples or an absolute boundary timestamp; both
    resulting halves must be non-empty.
    """

    train_fraction: float | None = 0.8
    boundary: float | None = None

    def resolve(self, dataset: TimeSeriesDataset) -> int:
        n = len(dataset)
        if self.boundary is not None:
            end = int(np.searchsorted(dataset.timestamps, self.boundary, side="right"))
        else:
            if self.train_fraction is None or not 0.0 < self.train_fraction < 1.0:
                raise ValueError("train_fraction must be in (0, 1)")
            end = int(np.floor(self.train_fraction * n))
        if end < 1 or end >= n:
            raise ValueError("split leaves an empty training or evaluation range")
        return end


def _config_rng(seed: int, config: Configuration) -> np.random.Generator:
    # stable per-configuration stream so repeated runs reproduce exactly
    key = json.dumps({"method": config.method, "assignments": config.assignments},
                     sort_keys=True)
    return np.random.default_rng([seed, zlib.crc32(key.encode())])


def _windowed_predictions(dataset, appliance, config, fit_end, eval_start, eval_end,
                          window, seed, epochs, batch_size):
    """Fit DT/RF/FCNN on windows with targets before fit_end, predict the eval rows."""
    mains = dataset.mains[:eval_end]
    target = dataset.appliances[appliance][:eval_end]
    windows = make_windows(mains, target, window)
    t_index = np.arange(window - 1, eval_end)  # target timestep of each row
    train_rows = t_index < fit_end
    eval_rows = t_index >= eval_start
    if not train_rows.any() or not eval_rows.any():
        raise ValueError("not enough samples for the requested window and split")
    train = RegressionDataset(windows.inputs[train_rows], windows.targets[train_rows])
    X_eval = windows.inputs[eval_rows]

    method = config.method
    a = config.assignments
    if method == "DT":
        model = fit_tree(train, criterion=a["criterion"], min_samples_split=a["min_sample_split"])
        return predict_tree(model, X_eval)
    if method == "RF":
        model = fit_forest(train, criterion=a["criterion"], min_samples_split=a["min_sample_split"],
                           n_estimators=a["n_estimators"], rng=_config_rng(seed, config))
        return predict_forest(model, X_eval)
    # FCNN: hold out the tail of the training rows for early stopping
    n_train = len(train)
    holdout = max(1, int(0.1 * n_train)) if n_train >= 20 else 0
    if holdout:
        inner = RegressionDataset(train.inputs[:-holdout], train.targets[:-holdout])
        val = RegressionDataset(train.inputs[-holdout:], train.targets[-holdout:])
    else:
        inner, val = train, None
    model = fit_fcnn(inner, optimizer=a["optimizer"], learning_rate=a["learning_rate"],
                     loss=a["loss"], n_layers=a["n_layers"], dropout=a["dropout"],
                     rng=_config_rng(seed, config), epochs=epochs, batch_size=batch_size,
                     validation=val)
    return predict_fcnn(model, X_eval)


def _combinatorial_predictions(dataset, appliance, config, fit_end, eval_start, eval_end):
    """Fit CO/FHMM on all appliances up to fit_end, decode the eval mains."""
    n_states = config.assignments["n_states"]
    train_series = {name: series[:fit_end] for name, series in dataset.appliances.items()}
    eval_mains = dataset.mains[eval_start:eval_end]
    names = dataset.appliance_names
    col = names.index(appliance)
    if config.method == "CO":
        library = ApplianceStateLibrary(
            {name: fit_states(series, n_states) for name, series in train_series.items()})
        matrix = disaggregate_co(library, eval_mains)
    else:
        model = fit_fhmm(train_series, n_states, aggregate=dataset.mains[:fit_end])
        matrix = disaggregate_fhmm(model, eval_mains)
    return matrix[:, col]


def predict_range(dataset: TimeSeriesDataset, appliance: str, config: Configuration,
                  fit_end: int, eval_start: int, eval_end: int, *,
                  dt_window: int = DEFAULT_DT_WINDOW, seed: int = 0,
                  epochs: int = 10, batch_size: int = 64) -> np.ndarray:
    """Fit `config` on [0, fit_end) and predict the appliance on [eval_start, eval_end)."""
    if appliance not in dataset.appliances:
        raise ValueError(f"unknown appliance {appliance!r}; have {dataset.appliance_names}")
    method = config.method
    if method in ("DT", "RF", "FCNN"):
        window = dt_window if method in ("DT", "RF") else config.assignments["sequence_length"]
        return _windowed_predictions(dataset, appliance, config, fit_end, eval_start,
                                     eval_end, window, seed, epochs, batch_size)
    if method in ("CO", "FHMM"):
        return _combinatorial_predictions(dataset, appliance, config, fit_end,
                                          eval_start, eval_end)
    raise ValueError(f"method {method!r} has no native evaluation")


def objective_for(dataset: TimeSeriesDataset, appliance: str, split: SplitSpec, *,
                  space=None, dt_window: int = DEFAULT_DT_WINDOW, seed: int = 0,
                  epochs: int = 10, batch_size: int = 64, external: dict | None = None,
                  dataset_ref=None):
    """Build the search objective: Configuration -> validation MAE in watts.

    The training range (per `split`) is divided 80/20 into fit and validation.
    Invalid configurations and estimator errors raise, which the search layer
    records as failed trials. Methods in `external` delegate to their command.
    """
    if appliance not in dataset.appliances:
        raise ValueError(f"unknown appliance {appliance!r}; have {dataset.appliance_names}")
    space = space if space is not None else builtin_space()
    external = external or {}
    train_end = split.resolve(dataset)
    fit_end = int(np.floor((1.0 - VALIDATION_FRACTION) * train_end))
    if fit_end < 1 or fit_end >= train_end:
        raise ValueError("training range too small to hold out validation")
    truth = dataset.appliances[appliance][fit_end:train_end]

    def objective(config: Configuration) -> float:
        violations = validate_config(space, config)
        if violations:
            raise ValueError("invalid configuration: " + "; ".join(violations))
        if config.method in external:
            return external_objective(external[config.method], config,
                                      dataset_ref=dataset_ref, appliance=appliance)
        if config.method in EXTERNAL_METHODS:
            raise ValueError(f"{config.method} requires an external objective command")
        pred = predict_range(dataset, appliance, config, fit_end, fit_end, train_end,
                             dt_window=dt_window, seed=seed, epochs=epochs,
                             batch_size=batch_size)
        return mae(pred, truth)

    return objective
