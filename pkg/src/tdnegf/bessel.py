"""Bessel functions of the first kind, integer order.

Small arguments use the ascending power series; larger ones use Miller's
downward recurrence normalised with ``J0 + 2 * sum(J_2k) = 1``.
"""
from __future__ import annotations


import numpy as np

from .exceptions import DomainError

SERIES_LIMIT = 12.0
MAX_ARGUMENT = 1.0e6
_RESCALE = 1.0e250


def _check(n, x):
    if n < 0 or int(n) != n:
        raise DomainError(f"Bessel order must be a non-negative integer, got {n!r}")
    if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > MAX_ARGUMENT):
        raise DomainError(f"Bessel argument must lie in [0, {MAX_ARGUMENT:g}]")


def _series(n: int, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    term = np.ones_like(x)
    for i in range(1, n + 1):  # (x/2)^n / n! without overflowing n!
        term = term * (half / i)
    total = term.copy()
    q = -(half * half)
    for k in range(1, 200):
        term = term * q / (k * (k + n))
        total += term
        if not np.any(np.abs(term) > 1e-20 + 1e-17 * np.abs(total)):
            break
    return total


def _start_index(n: int, x: np.ndarray) -> np.ndarray:
    top = np.maximum(n, x) + 30.0 + 20.0 * np.cbrt(x)
    start = top.astype(np.int64)
    return start + (start % 2)


def _miller_scalar(n: int, x: float) -> float:
    # same operations in the same order as the array path, so results match bitwise
    start = int(_start_index(n, np.array([x]))[0])
    two_over_x = 2.0 / x
    upper = 0.0
    current = 1e-30
    norm = 0.0
    result = 0.0
    for k in range(start, 0, -1):
        if k == n:
            result = current
        if k % 2 == 0:
            norm += 2.0 * current
        lower = k * two_over_x * current - upper
        upper, current = current, lower
        if abs(current) > _RESCALE:
            upper *= 1.0 / _RESCALE
            current *= 1.0 / _RESCALE
            norm *= 1.0 / _RESCALE
            result *= 1.0 / _RESCALE
    if n == 0:
        result = current
    norm += current
    return result / norm


def _miller(n: int, x: np.ndarray) -> np.ndarray:
    if x.size == 1:
        return np.array([_miller_scalar(n, float(x[0]))])
    # each element starts at its own index so results do not depend on batching
    starts = _start_index(n, x)
    two_over_x = 2.0 / x
    upper = np.zeros_like(x)
    current = np.zeros_like(x)
    norm = np.zeros_like(x)
    result = np.zeros_like(x)
    # `current` holds the unnormalised J_k, `upper` holds J_{k+1}
    for k in range(int(starts.max()), 0, -1):
        current[starts == k] = 1e-30
        if k == n:
            result = current.copy()
        if k % 2 == 0:
            norm += 2.0 * current
        lower = k * two_over_x * current - upper
        upper, current = current, lower
        big = np.abs(current) > _RESCALE
        if big.any():
            scale = np.where(big, 1.0 / _RESCALE, 1.0)
            upper *= scale
            current *= scale
            norm *= scale
            result *= scale
    if n == 0:
        result = current.copy()
    norm += current
    return result / norm


def bessel_j(n: int, x):
    """Return ``J_n(x)`` for integer ``n >= 0`` and ``0 <= x <= 1e6``.

    ``x`` may be a scalar or an array; the return type follows it.
    """
    arr = np.asarray(x, dtype=float)
    _check(n, arr)
    flat = arr.ravel()
    out = np.empty_like(flat)
    small = flat < SERIES_LIMIT
    if small.any():
        out[small] = _series(int(n), flat[small])
    if (~small).any():
        out[~small] = _miller(int(n), flat[~small])
    out = out.reshape(arr.shape)
    if np.ndim(x) == 0:
        return float(out)
    return out
