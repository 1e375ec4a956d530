"""Tight-binding grid, three-point Hamiltonian and the incoming plane wave."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError, DomainError


@dataclass(frozen=True)
class LatticeSpec:
    """Uniform grid ``x_j = j * a`` for the central sites ``j = 0..M``.

    Parameters
    ----------
    a : float
        Grid spacing.
    m : float
        Particle mass (``hbar = 1``).
    M : int
        Index of the last central site.
    """

    a: float = 1.0
    m: float = 1.0
    M: int = 200
    d: float = field(init=False)

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"grid spacing a must be positive, got {self.a!r}")
        if not (self.m > 0 and math.isfinite(self.m)):
            raise DomainError(f"mass m must be positive, got {self.m!r}")
        if int(self.M) != self.M or self.M < 2:
            raise DomainError(f"M must be an integer >= 2, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "d", 1.0 / (2.0 * self.m * self.a**2))

    @property
    def n_sites(self) -> int:
        return self.M + 1

    @property
    def length(self) -> float:
        return self.M * self.a

    @property
    def band_top(self) -> float:
        return 4.0 * self.d

    def positions(self) -> np.ndarray:
        return self.a * np.arange(self.n_sites)


def _check_band(lat: LatticeSpec, E, *, closed=False):
    E = np.asarray(E, dtype=float)
    top = lat.band_top
    if closed:
        bad = ~((E >= 0.0) & (E <= top))
        interval = f"[0, {top:g}]"
    else:
        bad = ~((E > 0.0) & (E < top))
        interval = f"(0, {top:g})"
    if np.any(bad):
        raise DomainError(f"energy must lie in the band {interval} (0 and 4d = {top:g}), got {E}")


def dispersion(lat: LatticeSpec, k):
    """Band energy ``2 d (1 - cos k a)`` for ``0 <= k a <= pi``."""
    ka = np.asarray(k, dtype=float) * lat.a
    if np.any(~((ka >= 0.0) & (ka <= math.pi))):
        raise DomainError(f"k*a must lie in [0, pi], got {ka}")
    E = 2.0 * lat.d * (1.0 - np.cos(ka))
    return float(E) if np.ndim(k) == 0 else E


def wavenumber(lat: LatticeSpec, E):
    """Inverse of :func:`dispersion` on the open band ``0 < E < 4d``."""
    _check_band(lat, E)
    ka = np.arccos(1.0 - np.asarray(E, dtype=float) * lat.m * lat.a**2)
    k = ka / lat.a
    return float(k) if np.ndim(E) == 0 else k


def group_velocity(lat: LatticeSpec, E):
    """``dE/dk = 2 d a sin(k a)``."""
    ka = np.asarray(wavenumber(lat, E)) * lat.a
    v = 2.0 * lat.d * lat.a * np.sin(ka)
    return float(v) if np.ndim(E) == 0 else v


@dataclass(frozen=True)
class PlaneWaveSource:
    """Monoenergetic wave incoming from the left lead.

    Build it with :meth:`at_energy`; ``k`` and ``N`` are derived quantities.
    """

    E: float
    k: float
    N: float

    @classmethod
    def at_energy(cls, lat: LatticeSpec, E: float) -> "PlaneWaveSource":
        E = float(E)
        k = wavenumber(lat, E)
        return cls(E=E, k=k, N=math.sin(k * lat.a))


def apply_hamiltonian(lat: LatticeSpec, u_row, psi) -> np.ndarray:
    """Three-point Hamiltonian on sites ``0..M`` with open ends.

    Lead coupling is not included; it enters through the memory kernel.
    """
    psi = np.asarray(psi)
    u_row = np.asarray(u_row)
    if psi.shape[0] != lat.n_sites or u_row.shape[0] != lat.n_sites:
        raise ContractError(
            f"expected vectors of length {lat.n_sites}, got psi {psi.shape} and U {u_row.shape}"
        )
    d = lat.d
    out = (u_row + 2.0 * d) * psi
    out[1:] -= d * psi[:-1]
    out[:-1] -= d * psi[1:]
    return out


def source_wave(lat: LatticeSpec, src: PlaneWaveSource, j, t):
    """Unperturbed wave ``exp(i (k j a - E t))`` at site(s) ``j``."""
    j_arr = np.asarray(j)
    if np.any((j_arr < 0) | (j_arr > lat.M)):
        raise ContractError(f"site index outside 0..{lat.M}: {j}")
    return np.exp(1j * (src.k * lat.a * j_arr - src.E * t))
