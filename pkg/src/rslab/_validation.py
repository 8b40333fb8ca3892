"""Argument checks shared by the public entry points."""

from __future__ import annotations

import math
import numbers

import numpy as np


class InfeasibleBudget(ValueError):
    """The budget cannot accommodate the policy's mandatory runs."""


def check_int(value, name: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, (numbers.Integral, np.integer)):
        if isinstance(value, (float, np.floating)) and float(value).is_integer():
            value = int(value)
        else:
            raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_positive(value, name: str) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def check_open_unit(value, name: str, upper: float = 1.0) -> float:
    """``value`` in the open interval ``(0, upper)``."""
    value = float(value)
    if not 0.0 < value < upper:
        raise ValueError(f"{name} must lie in (0, {upper:g}), got {value}")
    return value


def check_vector(values, name: str, positive: bool = False) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if positive and not np.all(arr > 0):
        raise ValueError(f"{name} must be strictly positive")
    arr.setflags(write=False)
    return arr
