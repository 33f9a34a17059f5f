"""Shared estimator types."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RegressionDataset:
    """Feature matrix (n, d) with an aligned target vector (n,)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be 2-D (rows, features)")
        if self.targets.ndim != 1 or len(self.targets) != len(self.inputs):
            raise ValueError("targets must be 1-D and aligned with inputs")
        if not (np.isfinite(self.inputs).all() and np.isfinite(self.targets).all()):
            raise ValueError("non-finite values in dataset")

    def __len__(self) -> int:
        return len(self.targets)


class TrainingDivergedError(RuntimeError):
    """Raised when a training loss stops being finite."""
