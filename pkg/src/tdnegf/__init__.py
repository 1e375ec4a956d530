"""Time-dependent 1D lattice scattering with exact transparent boundaries.

A plane wave enters a finite chain coupled to two semi-infinite leads.  The
leads are integrated out into a time-local memory kernel acting on the end
sites, so only the scattered part of the wave function is evolved.
"""
from .bessel import bessel_j
from .exceptions import ConfigError, ContractError, DivergenceError, DomainError, ResourceError
from .kernels import KernelTable, build_kernel_table, free_propagator, normalization, sigma_r, surface_gf_energy
from .lattice import LatticeSpec, PlaneWaveSource, dispersion, group_velocity, wavenumber
from .potentials import (
    LaserPulse,
    NoPotential,
    PulseSpec,
    SquareBarrier,
    TabulatedPotential,
    dipole_potential,
    laser_field,
)
from .propagate import DensityRecord, Propagator, RunConfig, WaveState, evolve

__all__ = [
    "bessel_j",
    "ConfigError",
    "ContractError",
    "DivergenceError",
    "DomainError",
    "ResourceError",
    "KernelTable",
    "build_kernel_table",
    "free_propagator",
    "normalization",
    "sigma_r",
    "surface_gf_energy",
    "LatticeSpec",
    "PlaneWaveSource",
    "dispersion",
    "group_velocity",
    "wavenumber",
    "LaserPulse",
    "NoPotential",
    "PulseSpec",
    "SquareBarrier",
    "TabulatedPotential",
    "dipole_potential",
    "laser_field",
    "DensityRecord",
    "Propagator",
    "RunConfig",
    "WaveState",
    "evolve",
]
