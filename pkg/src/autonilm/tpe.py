"""Tree-structured Parzen estimator over a conditional search space.

Completed trials are split into a good and a bad set by loss; per parameter a
density is fitted to each set and candidates drawn from the good-set density
are kept where the ratio good/bad peaks. Numeric parameters use mixtures of
truncated Gaussians (one component per observation plus a broad prior at the
domain midpoint); categorical and finite-set parameters use smoothed counts.
"""
from __future__ import annotations

import json
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .searchspace import Configuration, ParamSpec, SearchSpace, sample_prior

MAX_GOOD = 25
_NORMAL = NormalDist()
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _phi_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


@dataclass
class Trial:
    id: int
    config: Configuration
    loss: float | None = None
    status: str = "pending"  # pending | completed | failed
    wall_ms: float | None = None


@dataclass
class TrialHistory:
    """Append-only trial log. Mutate only while holding your own lock when shared."""

    trials: list = field(default_factory=list)
    next_id: int = 0

    def completed(self) -> list:
        return [t for t in self.trials if t.status == "completed"]

    def get(self, trial_id: int) -> Trial:
        for t in self.trials:
            if t.id == trial_id:
                return t
        raise KeyError(f"unknown trial id {trial_id}")

    def best(self) -> Trial | None:
        done = self.completed()
        if not done:
            return None
        return min(done, key=lambda t: (t.loss, t.id))


@dataclass
class TpeConfig:
    gamma: float = 0.25
    n_candidates: int = 24
    n_startup: int = 10
    prior_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if self.n_candidates < 1 or self.n_startup < 0:
            raise ValueError("n_candidates must be >= 1 and n_startup >= 0")
        if self.prior_weight <= 0.0:
            raise ValueError("prior_weight must be positive")


def split_observations(history: TrialHistory, gamma: float):
    """Split completed trials into (good, bad) by ascending loss.

    The good set holds the min(25, ceil(gamma * sqrt(n))) best trials, never
    fewer than one. Ties at the boundary stay in submission order.
    """
    done = sorted(history.completed(), key=lambda t: t.loss)
    if not done:
        raise ValueError("no completed trials to split")
    n = len(done)
    n_good = max(1, min(MAX_GOOD, math.ceil(gamma * math.sqrt(n))))
    return done[:n_good], done[n_good:]


@dataclass
class ParzenDensity:
    """Density over one parameter domain, either categorical or continuous.

    Continuous densities are mixtures of truncated Gaussians on [lo, hi];
    integer domains are the same mixture with results rounded on sampling.
    """

    kind: str  # "categorical" | "continuous"
    labels: tuple = ()
    probs: np.ndarray | None = None
    centers: np.ndarray | None = None
    bandwidths: np.ndarray | None = None
    weights: np.ndarray | None = None
    lo: float = 0.0
    hi: float = 1.0
    quantized: bool = False

    def __post_init__(self):
        if self.kind == "continuous":
            # normalization of each truncated component over [lo, hi]
            self._norms = np.array(
                [
                    _phi_cdf((self.hi - c) / b) - _phi_cdf((self.lo - c) / b)
                    for c, b in zip(self.centers, self.bandwidths)
                ]
            )
            self._coef = self.weights / (self.bandwidths * _SQRT_2PI * self._norms)

    def pdf(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = (x[:, None] - self.centers[None, :]) / self.bandwidths[None, :]
        return np.exp(-0.5 * z * z) @ self._coef

    def score(self, values) -> np.ndarray:
        """Density (categorical: probability) of each value."""
        if self.kind == "categorical":
            index = {label: i for i, label in enumerate(self.labels)}
            return np.array([self.probs[index[v]] for v in values])
        return self.pdf(np.asarray(values, dtype=float))

    def sample(self, rng: np.random.Generator):
        if self.kind == "categorical":
            return self.labels[int(rng.choice(len(self.labels), p=self.probs))]
        i = int(rng.choice(len(self.centers), p=self.weights))
        c, b = float(self.centers[i]), float(self.bandwidths[i])
        u_lo, u_hi = _phi_cdf((self.lo - c) / b), _phi_cdf((self.hi - c) / b)
        u = min(max(rng.uniform(u_lo, u_hi), 1e-12), 1.0 - 1e-12)
        x = min(max(c + b * _NORMAL.inv_cdf(u), self.lo), self.hi)
        if self.quantized:
            return int(min(max(round(x), int(self.lo)), int(self.hi)))
        return float(x)


def fit_parzen(values, spec: ParamSpec, prior_weight: float = 1.0) -> ParzenDensity:
    """Fit the Parzen density for one parameter from observed values.

    With no observations the density is the prior alone. Raises ValueError if
    any observation lies outside the parameter's domain.
    """
    for v in values:
        if not spec.contains(v):
            raise ValueError(f"{spec.name}: observed value {v!r} outside domain")

    if spec.kind in ("cat", "set"):
        counts = np.array([sum(1 for v in values if v == c) for c in spec.choices], dtype=float)
        probs = (prior_weight + counts) / (prior_weight * len(spec.choices) + len(values))
        return ParzenDensity(kind="categorical", labels=tuple(spec.choices), probs=probs)

    lo, hi = float(spec.lo), float(spec.hi)
    width = hi - lo
    mid = 0.5 * (lo + hi)
    obs = np.asarray(list(values), dtype=float)
    centers = np.append(obs, mid)  # prior component last
    if len(centers) > 1:
        dist = np.abs(centers[:, None] - centers[None, :])
        np.fill_diagonal(dist, np.inf)
        nearest = dist.min(axis=1)
    else:
        nearest = np.array([width])
    bandwidths = np.maximum(nearest, width / 100.0)
    bandwidths[-1] = width
    weights = np.append(np.ones(len(obs)), prior_weight)
    weights = weights / weights.sum()
    return ParzenDensity(
        kind="continuous",
        centers=centers,
        bandwidths=bandwidths,
        weights=weights,
        lo=lo,
        hi=hi,
        quantized=(spec.kind == "int"),
    )


def score_candidates(candidates, good: ParzenDensity, bad: ParzenDensity):
    """Return the candidate maximizing good/bad density; first wins on ties."""
    if len(candidates) == 0:
        raise ValueError("no candidates to score")
    ratio = good.score(candidates) / bad.score(candidates)
    return candidates[int(np.argmax(ratio))]


def _suggest_value(param: ParamSpec, good_vals, bad_vals, cfg: TpeConfig, rng):
    l_dens = fit_parzen(good_vals, param, cfg.prior_weight)
    g_dens = fit_parzen(bad_vals, param, cfg.prior_weight)
    candidates = [l_dens.sample(rng) for _ in range(cfg.n_candidates)]
    return score_candidates(candidates, l_dens, g_dens)


def suggest(history: TrialHistory, space: SearchSpace, cfg: TpeConfig, rng: np.random.Generator):
    """Register and return the next trial: (trial_id, configuration).

    Before n_startup completed trials this samples the prior; afterwards the
    method and then each branch parameter (fitted only on trials of that
    branch) go through the good/bad density ratio. Pending and failed trials
    never enter the densities.
    """
    done = history.completed()
    if len(done) < cfg.n_startup:
        config = sample_prior(space, rng)
    else:
        good, bad = split_observations(history, cfg.gamma)
        method = _suggest_value(
            space.root_choice,
            [t.config.method for t in good],
            [t.config.method for t in bad],
            cfg,
            rng,
        )
        assignments = {}
        for param in space.branches[method]:
            good_vals = [t.config.assignments[param.name] for t in good if t.config.method == method]
            bad_vals = [t.config.assignments[param.name] for t in bad if t.config.method == method]
            assignments[param.name] = _suggest_value(param, good_vals, bad_vals, cfg, rng)
        config = Configuration(method, assignments)

    trial = Trial(id=history.next_id, config=config)
    history.trials.append(trial)
    history.next_id += 1
    return trial.id, config


def report(history: TrialHistory, trial_id: int, loss: float | None, wall_ms: float | None = None):
    """Record a trial outcome. loss=None (or a non-finite loss) marks failure."""
    trial = history.get(trial_id)
    if trial.status != "pending":
        raise ValueError(f"trial {trial_id} already reported ({trial.status})")
    if loss is None or not math.isfinite(float(loss)):
        trial.status = "failed"
        trial.loss = None
    else:
        trial.status = "completed"
        trial.loss = float(loss)
    trial.wall_ms = wall_ms
    return history


def run_optimization(objective, space: SearchSpace, cfg: TpeConfig, budget: int, workers: int = 1):
    """Run suggest/evaluate/report rounds and return (best trial, history).

    Objective exceptions become failed trials. Raises RuntimeError only if
    every trial failed. workers > 1 evaluates objectives concurrently; history
    mutation stays serialized behind a lock.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    history = TrialHistory()
    rng = np.random.default_rng(cfg.seed)
    lock = threading.Lock()

    def one_round():
        with lock:
            trial_id, config = suggest(history, space, cfg, rng)
        t0 = time.perf_counter()
        try:
            loss = float(objective(config))
        except Exception:
            loss = None
        wall = (time.perf_counter() - t0) * 1000.0
        with lock:
            report(history, trial_id, loss, wall_ms=wall)

    if workers <= 1:
        for _ in range(budget):
            one_round()
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(one_round) for _ in range(budget)]
            for f in futures:
                f.result()

    best = history.best()
    if best is None:
        raise RuntimeError("every trial failed; no best configuration")
    return best, history


def _trial_doc(trial: Trial, include_timing: bool) -> dict:
    return {
        "id": trial.id,
        "method": trial.config.method,
        "assignments": dict(trial.config.assignments),
        "loss": trial.loss,
        "status": trial.status,
        "wall_ms": trial.wall_ms if include_timing else None,
    }


def run_report(history: TrialHistory, cfg: TpeConfig, budget: int, include_timing: bool = False) -> dict:
    """Serializable summary of a finished run."""
    best = history.best()
    return {
        "best": None if best is None else _trial_doc(best, include_timing),
        "trials": [_trial_doc(t, include_timing) for t in history.trials],
        "seed": cfg.seed,
        "gamma": cfg.gamma,
        "budget": budget,
    }


def write_run_report(path, history: TrialHistory, cfg: TpeConfig, budget: int,
                     include_timing: bool = False) -> None:
    doc = run_report(history, cfg, budget, include_timing)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
