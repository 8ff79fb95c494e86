"""Least-squares slopes used by the exponent estimates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWindow, InvalidParameter


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    residual: float
    samples: int


def linear_fit(x, y, min_samples: int = 2) -> LineFit:
    """Fit y = slope * x + intercept.

    residual is the root-mean-square deviation of the samples from the line.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InvalidParameter("x and y must have the same shape")
    if len(x) < min_samples:
        raise DegenerateWindow(f"need at least {min_samples} samples, got {len(x)}")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return LineFit(float(slope), float(intercept), rms, len(x))


def log_slope(t, values, min_samples: int = 2) -> LineFit:
    """Growth rate: slope of log(values) against t."""
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        raise InvalidParameter("log_slope needs strictly positive values")
    return linear_fit(t, np.log(values), min_samples=min_samples)


def power_law_fit(x, values, min_samples: int = 3) -> LineFit:
    """Exponent of values ~ C * x**exponent, fitted on log-log pairs."""
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(x <= 0) or np.any(values <= 0):
        raise InvalidParameter("power_law_fit needs strictly positive data")
    return linear_fit(np.log(x), np.log(values), min_samples=min_samples)
