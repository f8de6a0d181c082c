"""Small argument checks shared across the package."""

import numbers

import numpy as np


class ValidityError(ValueError):
    """A bound was requested outside the sample-size range where it holds."""


def check_rng(rng):
    """Turn ``None``, an int seed or a Generator into a ``np.random.Generator``."""
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, numbers.Integral):
        return np.random.default_rng(int(rng))
    raise TypeError(f"expected a numpy Generator or an int seed, got {type(rng).__name__}")


def check_positive(value, name):
    value = float(value)
    if not value > 0 or not np.isfinite(value):
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def check_count(n, name="n", minimum=1):
    if isinstance(n, bool) or not isinstance(n, numbers.Integral) and not float(n).is_integer():
        raise ValueError(f"{name} must be an integer, got {n!r}")
    n = int(n)
    if n < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {n}")
    return n


def check_delta(delta):
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return delta


def check_probability(p, name="p", allow_zero=True):
    p = float(p)
    lo_ok = p >= 0.0 if allow_zero else p > 0.0
    if not (lo_ok and p <= 1.0):
        bounds = "[0, 1]" if allow_zero else "(0, 1]"
        raise ValueError(f"{name} must lie in {bounds}, got {p}")
    return p
