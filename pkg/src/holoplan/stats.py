"""Discrepancy statistics for tool-vs-target displacement samples."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class AxisStats:
    mean: float
    variance: float
    stddev: float


def discrepancy_stats(samples) -> dict:
    """Per-axis mean, sample variance, and standard deviation.

    samples: (N, 2) array-like of (x_error, y_error) in millimeters, N >= 2.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InsufficientSamples("samples must be an (N, 2) array of x/y errors")
    if arr.shape[0] < 2:
        raise InsufficientSamples("need at least 2 samples")
    if not np.all(np.isfinite(arr)):
        raise InsufficientSamples("samples must be finite")

    out = {}
    for axis, name in enumerate(("x", "y")):
        column = arr[:, axis]
        variance = float(np.var(column, ddof=1))
        out[name] = AxisStats(
            mean=float(np.mean(column)),
            variance=variance,
            stddev=math.sqrt(variance),
        )
    return out
