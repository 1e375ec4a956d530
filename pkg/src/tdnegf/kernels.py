"""Lead Green's functions and the retarded memory kernel.

The kernel is the self-energy of a severed semi-infinite chain, attached at
the two end sites of the central region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bessel import bessel_j
from .exceptions import DomainError, ResourceError
from .lattice import LatticeSpec, _check_band

DEFAULT_TABLE_CAP = 10**7


def surface_gf_energy(lat: LatticeSpec, E):
    """Retarded surface Green's function of a semi-infinite chain, ``-exp(i k a) / d``."""
    _check_band(lat, E, closed=True)
    c = 1.0 - np.asarray(E, dtype=float) * lat.m * lat.a**2
    g = -(c + 1j * np.sqrt(np.clip(1.0 - c * c, 0.0, None))) / lat.d
    return complex(g) if np.ndim(E) == 0 else g


def normalization(lat: LatticeSpec, E):
    """Injection amplitude ``sqrt(1 - (1 - E/2d)^2)``, equal to ``sin(k a)``."""
    _check_band(lat, E, closed=True)
    c = 1.0 - np.asarray(E, dtype=float) / (2.0 * lat.d)
    N = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    return float(N) if np.ndim(E) == 0 else N


def sigma_r(d: float, tau):
    """Retarded lead self-energy in the time domain.

    ``-i d J1(2 tau d) / tau * exp(-2 i tau d)`` for ``tau > 0``, the limit
    ``-i d^2`` at ``tau = 0`` and zero for negative ``tau``.
    """
    tau_arr = np.asarray(tau, dtype=float)
    out = np.zeros(tau_arr.shape, dtype=complex)
    pos = tau_arr > 0
    if pos.any():
        tp = tau_arr[pos]
        out[pos] = -1j * d * bessel_j(1, 2.0 * d * tp) / tp * np.exp(-2j * d * tp)
    out[tau_arr == 0] = -1j * d * d
    return complex(out) if tau_arr.ndim == 0 else out


def free_propagator(d: float, n: int, tau):
    """Retarded propagator of the infinite potential-free chain, ``G_{n0}(tau)``.

    Normalised so that ``tau -> 0+`` gives ``-i delta_{n0}``.
    """
    n = int(n)
    order = abs(n)
    phase = 1j**order
    tau_arr = np.asarray(tau, dtype=float)
    out = np.zeros(tau_arr.shape, dtype=complex)
    pos = tau_arr > 0
    if pos.any():
        tp = tau_arr[pos]
        out[pos] = -1j * phase * bessel_j(order, 2.0 * d * tp) * np.exp(-2j * d * tp)
    if n == 0:
        out[tau_arr == 0] = -1j
    return complex(out) if tau_arr.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Samples ``sigma_r(d, k * dt)`` for ``k = 0..n_steps`` (read-only)."""

    dt: float
    n_steps: int
    d: float
    samples: np.ndarray

    def __post_init__(self):
        self.samples.setflags(write=False)

    def __len__(self):
        return self.samples.shape[0]


def build_kernel_table(lat: LatticeSpec, dt: float, n_steps: int, *, cap: int = DEFAULT_TABLE_CAP) -> KernelTable:
    if not (dt > 0 and math.isfinite(dt)):
        raise DomainError(f"dt must be positive, got {dt!r}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise DomainError(f"n_steps must be a positive integer, got {n_steps!r}")
    if n_steps > cap:
        raise ResourceError(f"kernel table of {n_steps} steps exceeds cap {cap}")
    n_steps = int(n_steps)
    taus = dt * np.arange(n_steps + 1)
    samples = np.asarray(sigma_r(lat.d, taus), dtype=complex)
    return KernelTable(dt=float(dt), n_steps=n_steps, d=lat.d, samples=samples)
