"""Conditional hyper-parameter space over disaggregation methods.

A space is a categorical root choice (the method label) plus one branch of
hyper-parameters per label; a branch parameter exists only when its method is
selected. Spaces are value objects: build once, share freely, sample with an
explicit numpy Generator.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

METHODS = ("DT", "RF", "GRU", "LSTM", "FCNN", "DAE", "FHMM", "CO")
NN_METHODS = frozenset({"FCNN", "GRU", "LSTM", "DAE"})
EXTERNAL_METHODS = frozenset({"GRU", "LSTM", "DAE"})

CRITERIA = ("MSE", "Friedman_MSE", "MAE")
OPTIMIZERS = ("Adam", "Nadam", "RMSprop")
LEARNING_RATES = (1e-2, 1e-3, 1e-4, 1e-5)
LOSSES = ("MSE", "MAE")
SEQUENCE_LENGTHS = (64, 128, 256, 512, 1024)


@dataclass(frozen=True)
class ParamSpec:
    """One hyper-parameter and its domain.

    kind is one of:
      "cat"   categorical string labels
      "int"   uniform integer, both bounds inclusive
      "float" uniform real on the half-open interval [lo, hi)
      "set"   finite set of numeric values, sampled uniformly
    """

    name: str
    kind: str
    choices: tuple = ()
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.kind in ("cat", "set"):
            if not self.choices:
                raise ValueError(f"{self.name}: empty choice list")
            if len(set(self.choices)) != len(self.choices):
                raise ValueError(f"{self.name}: duplicate choices")
        elif self.kind in ("int", "float"):
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise ValueError(f"{self.name}: uniform domain requires lo < hi")
        else:
            raise ValueError(f"{self.name}: unknown kind {self.kind!r}")

    def contains(self, value) -> bool:
        if isinstance(value, bool):
            return False
        if self.kind == "cat":
            return value in self.choices
        if self.kind == "set":
            return any(value == c for c in self.choices)
        if self.kind == "int":
            return isinstance(value, (int, np.integer)) and self.lo <= value <= self.hi
        return isinstance(value, (int, float, np.floating)) and self.lo <= value < self.hi

    def sample(self, rng: np.random.Generator):
        if self.kind in ("cat", "set"):
            return self.choices[int(rng.integers(len(self.choices)))]
        if self.kind == "int":
            return int(rng.integers(int(self.lo), int(self.hi) + 1))
        return float(rng.uniform(self.lo, self.hi))

    def to_json(self) -> dict:
        if self.kind in ("cat", "set"):
            return {"name": self.name, "kind": self.kind, "values": list(self.choices)}
        return {"name": self.name, "kind": self.kind, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_json(cls, doc: dict) -> "ParamSpec":
        if doc["kind"] in ("cat", "set"):
            return cls(doc["name"], doc["kind"], tuple(doc["values"]))
        return cls(doc["name"], doc["kind"], lo=doc["lo"], hi=doc["hi"])


@dataclass(frozen=True)
class SearchSpace:
    """Root method choice plus per-method parameter branches.

    Branch keys and root labels always agree; labels must come from the known
    method set. Treat instances as immutable.
    """

    root_choice: ParamSpec
    branches: dict[str, tuple[ParamSpec, ...]]

    def __post_init__(self):
        labels = self.root_choice.choices
        if self.root_choice.kind != "cat" or not labels:
            raise ValueError("root choice must be a non-empty categorical")
        unknown = [m for m in labels if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown method labels: {unknown}")
        if tuple(self.branches) != tuple(labels):
            raise ValueError("root labels and branch keys disagree")
        for method, params in self.branches.items():
            names = [p.name for p in params]
            if len(set(names)) != len(names):
                raise ValueError(f"{method}: duplicate parameter names")

    @property
    def methods(self) -> tuple:
        return self.root_choice.choices

    def branch(self, method: str) -> tuple:
        return self.branches[method]


@dataclass(frozen=True)
class Configuration:
    """A concrete point: method label plus values for that branch only."""

    method: str
    assignments: dict


def _nn_branch() -> tuple:
    return (
        ParamSpec("optimizer", "cat", OPTIMIZERS),
        ParamSpec("learning_rate", "set", LEARNING_RATES),
        ParamSpec("loss", "cat", LOSSES),
        ParamSpec("n_layers", "int", lo=5, hi=8),
        ParamSpec("dropout", "float", lo=0.1, hi=0.6),
        ParamSpec("sequence_length", "set", SEQUENCE_LENGTHS),
    )


def _tree_branch() -> tuple:
    return (
        ParamSpec("criterion", "cat", CRITERIA),
        ParamSpec("min_sample_split", "int", lo=2, hi=200),
    )


def builtin_space() -> SearchSpace:
    """The full eight-method space with the supported hyper-parameter domains."""
    branches: dict[str, tuple[ParamSpec, ...]] = {}
    for method in METHODS:
        if method == "DT":
            branches[method] = _tree_branch()
        elif method == "RF":
            branches[method] = _tree_branch() + (ParamSpec("n_estimators", "int", lo=5, hi=100),)
        elif method in NN_METHODS:
            branches[method] = _nn_branch()
        else:  # FHMM, CO
            branches[method] = (ParamSpec("n_states", "int", lo=2, hi=4),)
    root = ParamSpec("method", "cat", tuple(branches))
    return SearchSpace(root_choice=root, branches=branches)


def subspace(space: SearchSpace, methods) -> SearchSpace:
    """Restrict a space to a subset of its method labels (original order kept)."""
    wanted = set(methods)
    missing = wanted - set(space.methods)
    if missing:
        raise ValueError(f"methods not in space: {sorted(missing)}")
    kept = tuple(m for m in space.methods if m in wanted)
    branches = {m: space.branches[m] for m in kept}
    return SearchSpace(ParamSpec("method", "cat", kept), branches)


def sample_prior(space: SearchSpace, rng: np.random.Generator) -> Configuration:
    """Draw a configuration uniformly: method first, then each active parameter."""
    method = space.root_choice.sample(rng)
    assignments = {p.name: p.sample(rng) for p in space.branches[method]}
    return Configuration(method, assignments)


def validate_config(space: SearchSpace, config: Configuration) -> list:
    """Check a configuration against a space.

    Returns a list of violation messages; an empty list means valid. Checks
    that the method is known, that exactly the active branch parameters are
    assigned, and that every value lies in its domain.
    """
    if config.method not in space.branches:
        return [f"unknown method {config.method!r}"]
    violations = []
    branch = space.branches[config.method]
    names = {p.name for p in branch}
    for missing in sorted(names - set(config.assignments)):
        violations.append(f"missing parameter {missing!r}")
    for extra in sorted(set(config.assignments) - names):
        violations.append(f"parameter {extra!r} is not active under {config.method}")
    for p in branch:
        if p.name in config.assignments and not p.contains(config.assignments[p.name]):
            violations.append(f"{p.name}={config.assignments[p.name]!r} outside domain")
    return violations


def config_to_json(config: Configuration) -> dict:
    return {"method": config.method, "assignments": dict(config.assignments)}


def config_from_json(doc: dict) -> Configuration:
    return Configuration(doc["method"], dict(doc["assignments"]))


def space_to_json(space: SearchSpace) -> dict:
    return {
        "root": [
            {"method": m, "params": [p.to_json() for p in space.branches[m]]}
            for m in space.methods
        ]
    }


def space_from_json(doc: dict) -> SearchSpace:
    branches = {}
    for entry in doc["root"]:
        branches[entry["method"]] = tuple(ParamSpec.from_json(p) for p in entry["params"])
    root = ParamSpec("method", "cat", tuple(branches))
    return SearchSpace(root_choice=root, branches=branches)


def save_space(space: SearchSpace, path) -> None:
    Path(path).write_text(json.dumps(space_to_json(space), indent=2) + "\n")


def load_space(path) -> SearchSpace:
    return space_from_json(json.loads(Path(path).read_text()))
