"""Method comparison on one dataset.

For every method and appliance a short TPE search picks hyper-parameters on
the validation range; the winning configuration is refit on the whole search
range and scored on the held-out test range. Methods are ranked by average
MAE across appliances (ties alphabetical).
"""
from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import TimeSeriesDataset
from .harness import SplitSpec, disaggregation_accuracy, mae, objective_for, predict_range
from .searchspace import Configuration, builtin_space, config_to_json, subspace
from .tpe import TpeConfig, run_optimization

DEFAULT_METHODS = ("DT", "RF", "FCNN", "FHMM", "CO")
DEFAULT_BUDGET = 15


@dataclass
class MethodResult:
    method: str
    per_appliance_mae: dict
    average_mae: float
    accuracy: float
    wall_s: float
    winners: dict = field(default_factory=dict)  # appliance -> Configuration


@dataclass
class BenchmarkReport:
    results: dict  # method -> MethodResult
    ranking: list
    seed: int
    budget: int


def _search_seed(seed: int, method: str, appliance: str) -> int:
    return (seed * 1_000_003 + zlib.crc32(f"{method}/{appliance}".encode())) % 2**31


def run_benchmark(dataset: TimeSeriesDataset, methods=DEFAULT_METHODS, *,
                  budget: int = DEFAULT_BUDGET, seed: int = 0, gamma: float = 0.25,
                  split: SplitSpec | None = None, dt_window: int = 9,
                  workers: int = 1) -> BenchmarkReport:
    split = split or SplitSpec(0.8)
    train_end = split.resolve(dataset)
    n = len(dataset)
    test_mains = dataset.mains[train_end:n]
    space = builtin_space()

    results = {}
    for method in methods:
        t0 = time.perf_counter()
        method_space = subspace(space, [method])
        per_mae = {}
        winners = {}
        pred_cols = []
        truth_cols = []
        for appliance in dataset.appliance_names:
            objective = objective_for(dataset, appliance, split, dt_window=dt_window,
                                      seed=seed, space=method_space)
            cfg = TpeConfig(gamma=gamma, seed=_search_seed(seed, method, appliance))
            best, _ = run_optimization(objective, method_space, cfg, budget, workers=workers)
            winners[appliance] = best.config
            pred = predict_range(dataset, appliance, best.config, train_end, train_end, n,
                                 dt_window=dt_window, seed=seed)
            truth = dataset.appliances[appliance][train_end:n]
            per_mae[appliance] = mae(pred, truth)
            pred_cols.append(pred)
            truth_cols.append(truth)
        accuracy = disaggregation_accuracy(np.stack(pred_cols, axis=1),
                                           np.stack(truth_cols, axis=1), test_mains)
        results[method] = MethodResult(
            method=method,
            per_appliance_mae=per_mae,
            average_mae=float(np.mean(list(per_mae.values()))),
            accuracy=accuracy,
            wall_s=time.perf_counter() - t0,
            winners=winners,
        )

    ranking = sorted(results, key=lambda m: (results[m].average_mae, m))
    return BenchmarkReport(results=results, ranking=ranking, seed=seed, budget=budget)


def report_to_json(report: BenchmarkReport) -> dict:
    return {
        "ranking": list(report.ranking),
        "seed": report.seed,
        "budget": report.budget,
        "methods": {
            m: {
                "per_appliance_mae": dict(r.per_appliance_mae),
                "average_mae": r.average_mae,
                "disaggregation_accuracy": r.accuracy,
                "wall_s": r.wall_s,
                "winners": {a: config_to_json(c) for a, c in r.winners.items()},
            }
            for m, r in report.results.items()
        },
    }


def write_report(report: BenchmarkReport, path) -> None:
    Path(path).write_text(json.dumps(report_to_json(report), indent=2, sort_keys=True) + "\n")


def format_table(report: BenchmarkReport) -> str:
    """Ranked plain-text comparison table."""
    lines = [f"{'Rank':<6}{'Approach':<10}{'MAE (W)':>10}{'Accuracy':>10}{'Wall (s)':>10}"]
    for rank, method in enumerate(report.ranking, start=1):
        r = report.results[method]
        lines.append(f"{rank:<6}{method:<10}{r.average_mae:>10.2f}"
                     f"{r.accuracy:>10.3f}{r.wall_s:>10.1f}")
    return "\n".join(lines)
