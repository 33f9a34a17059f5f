"""Combinatorial optimisation and factorial-HMM disaggregation.

Both methods share the same state extraction: a 1-D k-means over an appliance
series yields its power levels, with the smallest level snapped to 0 W. CO
explains each aggregate sample independently by the best-summing combination
of levels; the FHMM couples per-appliance Markov chains through a shared
Gaussian emission on the aggregate and decodes exactly with Viterbi over the
joint state space.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

MAX_COMBINATIONS = 1_000_000
MAX_JOINT_STATES = 4096
KMEANS_ITERS = 50
SIGMA_FLOOR = 1.0  # watts


def fit_states(series, n_states: int) -> np.ndarray:
    """Extract power levels from one appliance series by 1-D k-means.

    Centers start at the midpoint quantiles, run at most 50 iterations, then
    get sorted; the smallest is snapped to 0 W and exact duplicates collapse
    (logged, since fewer levels than requested usually signals a degenerate
    appliance).
    """
    x = np.asarray(series, dtype=float)
    if n_states < 1:
        raise ValueError("n_states must be >= 1")
    if x.size < n_states:
        raise ValueError(f"series has {x.size} samples, fewer than n_states={n_states}")

    q = (np.arange(n_states) + 0.5) / n_states
    centers = np.quantile(x, q)
    for _ in range(KMEANS_ITERS):
        assign = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        new_centers = centers.copy()
        for k in range(n_states):
            members = x[assign == k]
            if members.size:
                new_centers[k] = members.mean()
        if np.array_equal(new_centers, centers):
            break
        centers = new_centers

    levels = np.sort(centers)
    levels[0] = 0.0
    unique = np.unique(levels)
    if unique.size < n_states:
        logger.warning("degenerate power levels: %d requested, %d distinct (%s)",
                       n_states, unique.size, unique)
    return unique


@dataclass
class ApplianceStateLibrary:
    """Per-appliance power levels; dict order fixes the appliance order."""

    levels: dict  # name -> ascending ndarray of levels, first is 0

    def __post_init__(self):
        for name, lv in self.levels.items():
            lv = np.asarray(lv, dtype=float)
            if lv.size == 0 or lv[0] != 0.0 or np.any(np.diff(lv) <= 0) or np.any(lv < 0):
                raise ValueError(f"{name}: levels must be non-negative, ascending, starting at 0")
            self.levels[name] = lv

    @property
    def names(self) -> list:
        return list(self.levels)


def disaggregate_co(library: ApplianceStateLibrary, aggregate) -> np.ndarray:
    """Per-timestep exhaustive search over level combinations.

    Each output row holds the combination minimizing |aggregate - sum(levels)|;
    ties prefer fewer active appliances, then the lexicographically smallest
    level tuple. Returns a (time, appliance) matrix in library order.
    """
    agg = np.asarray(aggregate, dtype=float)
    level_lists = [library.levels[n] for n in library.names]
    count = math.prod(len(lv) for lv in level_lists)
    if count > MAX_COMBINATIONS:
        raise ValueError(
            f"{count} level combinations exceed the {MAX_COMBINATIONS} limit; "
            "reduce n_states or the number of appliances")

    combos = np.array(list(itertools.product(*level_lists)))  # lexicographic
    active = (combos > 0).sum(axis=1)
    order = np.argsort(active, kind="stable")  # fewest-active first, lex within
    combos = combos[order]
    sums = combos.sum(axis=1)

    out = np.empty((agg.size, combos.shape[1]))
    chunk = max(1, 4_000_000 // max(1, combos.shape[0]))
    for start in range(0, agg.size, chunk):
        part = agg[start:start + chunk]
        best = np.argmin(np.abs(part[:, None] - sums[None, :]), axis=1)
        out[start:start + chunk] = combos[best]
    return out


@dataclass
class ApplianceChain:
    means: np.ndarray
    initial: np.ndarray
    transition: np.ndarray


@dataclass
class FhmmModel:
    chains: dict  # name -> ApplianceChain, order fixes output columns
    sigma: float

    @property
    def names(self) -> list:
        return list(self.chains)


def fit_fhmm(appliances: dict, n_states: int, aggregate=None) -> FhmmModel:
    """Fit per-appliance chains by hard assignment to k-means levels.

    Transition and initial probabilities use add-one smoothing. The shared
    emission sigma is the standard deviation of (aggregate - sum of assigned
    means), floored at 1 W; without an explicit aggregate the sum of the
    appliance series stands in.
    """
    if not appliances:
        raise ValueError("no appliance series given")
    lengths = {len(np.asarray(v)) for v in appliances.values()}
    if len(lengths) != 1:
        raise ValueError("appliance series must share one length")

    chains = {}
    assigned_total = None
    for name, series in appliances.items():
        x = np.asarray(series, dtype=float)
        means = fit_states(x, n_states)
        k = means.size
        assign = np.argmin(np.abs(x[:, None] - means[None, :]), axis=1)
        counts = np.zeros((k, k))
        np.add.at(counts, (assign[:-1], assign[1:]), 1.0)
        transition = (counts + 1.0) / (counts.sum(axis=1, keepdims=True) + k)
        first = np.zeros(k)
        first[assign[0]] = 1.0
        initial = (first + 1.0) / (1.0 + k)
        chains[name] = ApplianceChain(means=means, initial=initial, transition=transition)
        fitted = means[assign]
        assigned_total = fitted if assigned_total is None else assigned_total + fitted

    if aggregate is None:
        agg = np.sum([np.asarray(v, dtype=float) for v in appliances.values()], axis=0)
    else:
        agg = np.asarray(aggregate, dtype=float)
        if agg.size != assigned_total.size:
            raise ValueError("aggregate length must match the appliance series")
    sigma = max(float(np.std(agg - assigned_total)), SIGMA_FLOOR)
    return FhmmModel(chains=chains, sigma=sigma)


def _joint_tables(model: FhmmModel):
    chains = [model.chains[n] for n in model.names]
    sizes = [c.means.size for c in chains]
    n_joint = math.prod(sizes)
    if n_joint > MAX_JOINT_STATES:
        raise ValueError(
            f"joint state space of {n_joint} exceeds {MAX_JOINT_STATES}; "
            "exact decoding only, reduce n_states or appliances")
    # row-major joint index == kron composition order
    states = np.array(list(itertools.product(*[range(s) for s in sizes])), dtype=int)
    means = np.zeros(1)
    init = np.ones(1)
    trans = np.ones((1, 1))
    for c in chains:
        means = (means[:, None] + c.means[None, :]).ravel()
        init = np.kron(init, c.initial)
        trans = np.kron(trans, c.transition)
    return states, means, np.log(init), np.log(trans)


def joint_viterbi(model: FhmmModel, aggregate):
    """Exact most-likely joint path; returns (per-appliance states (T, A), log-likelihood)."""
    agg = np.asarray(aggregate, dtype=float)
    if agg.size == 0:
        raise ValueError("empty aggregate")
    states, means, log_init, log_trans = _joint_tables(model)
    sigma = model.sigma
    log_norm = -math.log(sigma * math.sqrt(2.0 * math.pi))
    z = (agg[:, None] - means[None, :]) / sigma
    log_emit = log_norm - 0.5 * z * z

    T, K = agg.size, means.size
    back = np.zeros((T, K), dtype=int)
    delta = log_init + log_emit[0]
    for t in range(1, T):
        scores = delta[:, None] + log_trans
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(K)] + log_emit[t]

    path = np.empty(T, dtype=int)
    path[-1] = int(np.argmax(delta))
    loglik = float(delta[path[-1]])
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return states[path], loglik


def path_log_likelihood(model: FhmmModel, aggregate, states) -> float:
    """Joint log-likelihood of given per-appliance state indices (T, A)."""
    agg = np.asarray(aggregate, dtype=float)
    states = np.asarray(states, dtype=int)
    chains = [model.chains[n] for n in model.names]
    total = 0.0
    for a, chain in enumerate(chains):
        s = states[:, a]
        total += math.log(chain.initial[s[0]])
        total += float(np.sum(np.log(chain.transition[s[:-1], s[1:]])))
    means = np.sum([c.means[states[:, a]] for a, c in enumerate(chains)], axis=0)
    z = (agg - means) / model.sigma
    total += float(np.sum(-0.5 * z * z - math.log(model.sigma * math.sqrt(2.0 * math.pi))))
    return total


def disaggregate_fhmm(model: FhmmModel, aggregate) -> np.ndarray:
    """Viterbi-decoded per-appliance power levels as a (time, appliance) matrix."""
    states, _ = joint_viterbi(model, aggregate)
    cols = [model.chains[n].means[states[:, a]] for a, n in enumerate(model.names)]
    return np.stack(cols, axis=1)
