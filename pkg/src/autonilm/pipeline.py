"""Pipeline constraint rules, applied before any training starts.

The rules encode what the supported model libraries require. In manual mode
every violation is only a warning and the pipeline comes back untouched; in
AutoML mode structural omissions (R1, R3) are fixed automatically and value
violations (R2, R4, R5) become errors.

R1  network methods need a standardize step before windows are consumed
R2  dropout within [0.1, 0.6]
R3  sequence models need a window step (length comes from sequence_length)
R4  min_sample_split >= 2
R5  learning_rate one of the supported set
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .searchspace import (
    LEARNING_RATES,
    NN_METHODS,
    Configuration,
    SearchSpace,
    builtin_space,
    validate_config,
)

STEPS = ("resample", "standardize", "window")


@dataclass
class PipelineDescription:
    method: str
    config: Configuration
    steps: list = field(default_factory=list)
    automl_mode: bool = False

    def __post_init__(self):
        if self.method != self.config.method:
            raise ValueError("pipeline method and configuration method disagree")
        for s in self.steps:
            if s not in STEPS:
                raise ValueError(f"unknown preprocessing step {s!r}")
        if len(set(self.steps)) != len(self.steps):
            raise ValueError("duplicate preprocessing steps")


@dataclass
class Diagnostic:
    rule_id: str
    severity: str  # warning | auto-fixed | error
    message: str
    applied_change: str | None = None


def pipeline_to_json(p: PipelineDescription) -> dict:
    return {
        "method": p.method,
        "assignments": dict(p.config.assignments),
        "steps": list(p.steps),
        "automl_mode": p.automl_mode,
    }


def pipeline_from_json(doc: dict) -> PipelineDescription:
    config = Configuration(doc["method"], dict(doc["assignments"]))
    return PipelineDescription(method=doc["method"], config=config,
                               steps=list(doc.get("steps", [])),
                               automl_mode=bool(doc.get("automl_mode", False)))


def load_pipeline(path) -> PipelineDescription:
    return pipeline_from_json(json.loads(Path(path).read_text()))


def diagnostics_to_json(diagnostics) -> list:
    return [
        {"rule_id": d.rule_id, "severity": d.severity, "message": d.message,
         "applied_change": d.applied_change}
        for d in diagnostics
    ]


def _violations(p: PipelineDescription) -> list:
    """(rule_id, message, fixable) for every broken rule, in rule order."""
    found = []
    a = p.config.assignments
    nn = p.method in NN_METHODS
    has_window = "window" in p.steps
    has_std = "standardize" in p.steps
    std_before_window = (
        has_std and (not has_window or p.steps.index("standardize") < p.steps.index("window"))
    )
    if nn and not std_before_window:
        found.append(("R1", f"{p.method} requires a standardize step before windowing", True))
    if "dropout" in a and not 0.1 <= a["dropout"] <= 0.6:
        found.append(("R2", f"dropout={a['dropout']!r} outside the supported range [0.1, 0.6]", False))
    if nn and not has_window:
        found.append(("R3", f"{p.method} requires a window step sized by sequence_length", True))
    if "min_sample_split" in a and a["min_sample_split"] < 2:
        found.append(("R4", f"min_sample_split={a['min_sample_split']!r} must be >= 2", False))
    if "learning_rate" in a and not any(
            math.isclose(a["learning_rate"], lr, rel_tol=1e-9) for lr in LEARNING_RATES):
        found.append(("R5", f"learning_rate={a['learning_rate']!r} not in the supported set "
                            f"{list(LEARNING_RATES)}", False))
    return found


def validate_pipeline(p: PipelineDescription, space: SearchSpace | None = None):
    """Check (and in AutoML mode repair) a pipeline.

    Returns (pipeline, diagnostics). Manual mode reports every violation as a
    warning and returns the input object unchanged. AutoML mode inserts the
    missing structural steps (auto-fixed diagnostics record what was inserted
    and where in the returned steps list) and flags value violations as
    errors. Running the result through validate_pipeline again yields no new
    fixes.
    """
    space = space if space is not None else builtin_space()
    config_errors = validate_config(space, p.config)
    if config_errors:
        diag = Diagnostic("config", "error", "configuration invalid: " + "; ".join(config_errors))
        return p, [diag]

    found = _violations(p)
    if not p.automl_mode:
        return p, [Diagnostic(rule, "warning", msg) for rule, msg, _ in found]

    steps = list(p.steps)
    diagnostics = []
    # R3 first so R1 has a window to anchor against
    for rule, msg, fixable in sorted(found, key=lambda f: f[0], reverse=True):
        if not fixable:
            continue
        if rule == "R3":
            steps.append("window")
        elif rule == "R1":
            at = steps.index("window") if "window" in steps else len(steps)
            steps.insert(at, "standardize")
    fixed_steps = {"R1": "standardize", "R3": "window"}
    for rule, msg, fixable in found:
        if fixable:
            idx = steps.index(fixed_steps[rule])
            diagnostics.append(Diagnostic(rule, "auto-fixed", msg,
                                          applied_change=f"inserted {fixed_steps[rule]} at index {idx}"))
        else:
            diagnostics.append(Diagnostic(rule, "error", msg))

    revised = replace(p, steps=steps) if steps != p.steps else p
    return revised, diagnostics
