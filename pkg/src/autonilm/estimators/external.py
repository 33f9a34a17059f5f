"""Bridge to externally implemented methods (recurrent and autoencoder nets).

An external method is a shell command template. It receives a JSON document on
standard input ({"method", "assignments", "dataset", "appliance"}) and must
print a single decimal loss on standard output. Timeouts, non-zero exits and
unparsable output raise ExternalObjectiveError, which the search layer records
as a failed trial.
"""
from __future__ import annotations

import json
import subprocess

from ..searchspace import Configuration

DEFAULT_TIMEOUT_S = 600.0
ENV_PREFIX = "AUTONILM_EXT_"


class ExternalObjectiveError(RuntimeError):
    pass


def external_objective(command: str, config: Configuration, dataset_ref=None,
                       appliance=None, timeout_s: float = DEFAULT_TIMEOUT_S) -> float:
    doc = json.dumps({
        "method": config.method,
        "assignments": dict(config.assignments),
        "dataset": dataset_ref,
        "appliance": appliance,
    })
    try:
        proc = subprocess.run(command, shell=True, input=doc, capture_output=True,
                              text=True, timeout=timeout_s)
    except subprocess.TimeoutExpired:
        raise ExternalObjectiveError(f"{config.method}: command timed out after {timeout_s:g}s")
    if proc.returncode != 0:
        raise ExternalObjectiveError(
            f"{config.method}: command exited with status {proc.returncode}: {proc.stderr.strip()}")
    text = proc.stdout.strip()
    try:
        return float(text)
    except ValueError:
        raise ExternalObjectiveError(f"{config.method}: expected a decimal loss, got {text!r}")
