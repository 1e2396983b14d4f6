"""Small shared helpers: deterministic formatting, rounding, golden search."""

from __future__ import annotations

import numpy as np


def format_float(x) -> str:
    """Shortest round-trip decimal form; stable across runs for determinism."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def round_half_toward_zero(x):
    """Coordinate-wise rounding to integers with .5 ties resolved toward 0."""
    x = np.asarray(x, dtype=float)
    away = np.floor(np.abs(x) + 0.5)
    tie = (np.abs(x) + 0.5) == away  # |x| has fractional part exactly .5
    mag = np.where(tie, away - 1.0, away)
    return np.sign(x) * mag + 0.0  # +0.0 normalizes -0.0


def golden_minimize(fun, lo: float, hi: float, iters: int = 40) -> tuple[float, float]:
    """Golden-section minimum of a scalar function on [lo, hi]."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fun(d)
    xm = (a + b) / 2.0
    return xm, fun(xm)


def as_int_exact(x: float, name: str, tol: float = 1e-9) -> int:
    """Cast to int, requiring |x - round(x)| <= tol."""
    r = round(float(x))
    if abs(float(x) - r) > tol:
        from .errors import ConfigurationError
        raise ConfigurationError(f"{name} = {x} is not an integer")
    return int(r)
