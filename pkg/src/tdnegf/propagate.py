"""Time stepping of the scattered wave with memory-kernel boundary conditions.

The full wave on the central region is ``Psi = Psi0 + psi1`` where ``Psi0``
is the analytic plane wave and ``psi1`` starts at zero and is driven only by
the potential. The two lead self-energies act on the end sites through a
convolution with the boundary history of ``psi1``.

In gauge mode the state is ``phi1`` with ``Psi = u (Psi0 + phi1)`` and
``u_j = exp(-i theta_j)``; the potential then only appears through Peierls
phases on the hoppings, which lets the right lead carry the spatially uniform
value ``U_M(t)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, ContractError, DivergenceError, ResourceError
from .kernels import KernelTable, build_kernel_table
from .lattice import LatticeSpec, PlaneWaveSource, apply_hamiltonian
from .potentials import NoPotential, Potential

log = logging.getLogger(__name__)

MODES = ("auto", "direct", "gauge")
DEFAULT_WORK_CAP = 1e11


@dataclass(frozen=True)
class RunConfig:
    """Everything a single :func:`evolve` run needs.

    ``mode="auto"`` picks gauge mode when the potential reaches the right
    lead and direct mode otherwise.
    """

    lat: LatticeSpec
    src: PlaneWaveSource
    pot: Potential
    dt: float
    n_steps: int
    record_stride: int = 1
    mode: str = "auto"
    work_cap: float = DEFAULT_WORK_CAP

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"run.dt must be positive, got {self.dt!r}")
        if self.dt > self.stability_bound * (1 + 1e-12):
            raise ConfigError(f"run.dt = {self.dt} exceeds the stability bound 0.5/d = {self.stability_bound}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigError(f"run.n_steps must be a positive integer, got {self.n_steps!r}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ConfigError(f"run.record_stride must be a positive integer, got {self.record_stride!r}")
        if self.mode not in MODES:
            raise ConfigError(f"run.mode must be one of {MODES}, got {self.mode!r}")
        self.pot.check(self.lat, self.dt, self.n_steps)
        reaches = self.pot.reaches_right_lead(self.lat)
        mode = self.mode
        if mode == "auto":
            mode = "gauge" if reaches else "direct"
        if mode == "direct" and reaches:
            raise ConfigError(
                f"potential variant {self.pot.variant!r} is nonzero at site M or in the right lead; use run.mode = gauge"
            )
        if mode == "gauge" and self.pot.touches_first_site(self.lat):
            raise ConfigError("gauge mode requires U(x_0, t) = 0; the left lead is not gauged")
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "record_stride", int(self.record_stride))

    @property
    def stability_bound(self) -> float:
        return 0.5 / self.lat.d


@dataclass
class WaveState:
    """Snapshot of a run after ``step_index`` steps."""

    step_index: int
    t: float
    psi1: np.ndarray
    hist0: np.ndarray
    histM: np.ndarray
    mode: str


@dataclass
class DensityRecord:
    """Density ``n[time, site]`` on the central sites; ``sites`` holds positions ``x_j = j a``."""

    times: np.ndarray
    sites: np.ndarray
    n: np.ndarray

    def max_deviation(self) -> float:
        """``max |n - 1|`` over the whole record."""
        return float(np.max(np.abs(self.n - 1.0)))


def memory_term(hist, table, k: int, dt: float | None = None):
    """Trapezoid convolution ``sum_j w_j K[k - j] hist[j] dt`` over ``j = 0..k``.

    ``hist`` may be one history or a stack of them (last axis is time);
    ``table`` is a :class:`KernelTable` or a plain sample array, in which
    case ``dt`` is required.
    """
    samples = table.samples if isinstance(table, KernelTable) else np.asarray(table)
    if dt is None:
        dt = table.dt
    hist = np.asarray(hist)
    if hist.shape[-1] != k + 1:
        raise ContractError(f"history length {hist.shape[-1]} does not match k + 1 = {k + 1}")
    if samples.shape[0] < k + 1:
        raise ContractError(f"kernel table has {samples.shape[0]} samples, step {k} needs {k + 1}")
    w = np.ones(k + 1)
    w[0] = w[-1] = 0.5
    kern = samples[k::-1] * w
    return dt * (hist @ kern)


def rhs_direct(lat: LatticeSpec, u_row, psi0, psi1, mem) -> np.ndarray:
    """Time derivative of ``psi1`` in direct mode.

    ``mem`` holds the memory contributions at sites 0 and M.
    """
    r = apply_hamiltonian(lat, u_row, psi1) + u_row * psi0
    r[0] += mem[0]
    r[-1] += mem[1]
    return -1j * r


def gauge_hoppings(theta) -> np.ndarray:
    """Upper hopping phases ``exp(i (theta_j - theta_{j+1}))`` of ``u* H0 u``."""
    theta = np.asarray(theta)
    return np.exp(1j * (theta[:-1] - theta[1:]))


def rhs_gauge(lat: LatticeSpec, theta, psi0, phi1, mem) -> np.ndarray:
    """Time derivative of ``phi1`` in gauge mode.

    Evaluates ``H~ phi1 + (H~ - H0) Psi0`` plus the boundary memory, where
    ``H~ = u* H0 u`` keeps the diagonal ``2d`` and carries Peierls phases
    on the hoppings.
    """
    d = lat.d
    delta = np.asarray(theta)[:-1] - np.asarray(theta)[1:]
    half = np.exp(0.5j * delta)
    hop = half * half
    hop_m1 = 2j * np.sin(0.5 * delta) * half  # exp(i delta) - 1 without cancellation
    r = 2.0 * d * phi1
    r[:-1] -= d * (hop * phi1[1:] + hop_m1 * psi0[1:])
    r[1:] -= d * (np.conj(hop) * phi1[:-1] + np.conj(hop_m1) * psi0[:-1])
    r[0] += mem[0]
    r[-1] += mem[1]
    return -1j * r


def density(psi0, psi1) -> np.ndarray:
    """``|Psi0 + psi1|^2``; valid in both modes since the gauge factor has unit modulus."""
    return np.abs(np.asarray(psi0) + np.asarray(psi1)) ** 2


class Propagator:
    """Explicit Heun integrator for one run.

    The predictor's boundary values enter the memory convolution at the new
    time; only the corrected values are kept in the history.

    Parameters
    ----------
    cfg : RunConfig
    table : KernelTable, optional
        Shared read-only kernel samples; built from ``cfg`` when omitted.
    lead_frame : {"comoving", "lab"}
        Gauge mode only. ``"comoving"`` convolves the plain ``phi1_M``
        history, which is exact when the right lead carries ``U_M(t)``.
        ``"lab"`` convolves ``u_M phi1_M`` and applies ``u_M*`` afterwards;
        it is kept for comparison and is not exact for such potentials.
    """

    def __init__(self, cfg: RunConfig, table: KernelTable | None = None, *, lead_frame: str = "comoving"):
        if lead_frame not in ("comoving", "lab"):
            raise ConfigError(f"unknown lead_frame {lead_frame!r}")
        lat = cfg.lat
        if table is None:
            table = build_kernel_table(lat, cfg.dt, cfg.n_steps)
        if not math.isclose(table.dt, cfg.dt, rel_tol=1e-12) or not math.isclose(table.d, lat.d, rel_tol=1e-12):
            raise ContractError("kernel table was built for a different dt or hopping")
        if len(table) < cfg.n_steps + 1:
            raise ContractError(f"kernel table covers {len(table) - 1} steps, run needs {cfg.n_steps}")
        if float(cfg.n_steps) ** 2 > cfg.work_cap:
            raise ResourceError(f"{cfg.n_steps} steps need ~{float(cfg.n_steps) ** 2:.3g} kernel products, cap is {cfg.work_cap:.3g}")
        self.cfg = cfg
        self.table = table
        n = cfg.n_steps
        self._k0 = table.samples[0]
        self._kernel = table.samples[: n + 1]
        self._krev = np.ascontiguousarray(self._kernel[::-1])
        self._hist = np.zeros((2, n + 1), dtype=complex)
        self._base = np.exp(1j * cfg.src.k * lat.a * np.arange(lat.n_sites))
        self.k = 0
        self.psi1 = np.zeros(lat.n_sites, dtype=complex)
        self._mem = np.zeros(2, dtype=complex)
        self._u = np.asarray(cfg.pot.row(lat, 0.0), dtype=float)
        self.theta = np.zeros(lat.n_sites)
        self._gauge = cfg.mode == "gauge"
        self._lab = self._gauge and lead_frame == "lab"

    @property
    def t(self) -> float:
        return self.k * self.cfg.dt

    def plane_wave(self, t: float) -> np.ndarray:
        return self._base * np.exp(-1j * self.cfg.src.E * t)

    def _rhs(self, t, psi1, u_row, theta, mem):
        psi0 = self.plane_wave(t)
        if self._gauge:
            return rhs_gauge(self.cfg.lat, theta, psi0, psi1, mem)
        return rhs_direct(self.cfg.lat, u_row, psi0, psi1, mem)

    def _partial_memory(self, k: int) -> np.ndarray:
        # trapezoid weights over j = 0..k for the time t_{k+1}, without the j = k+1 node
        n = self.cfg.n_steps
        dt = self.cfg.dt
        part = self._hist[:, : k + 1] @ self._krev[n - k - 1 : n]
        part -= 0.5 * self._kernel[k + 1] * self._hist[:, 0]
        return dt * part

    def _boundary_factor(self, theta):
        if self._lab:
            return np.array([1.0, np.exp(-1j * theta[-1])])
        return np.ones(2)

    def step(self) -> None:
        if self.k >= self.cfg.n_steps:
            raise ContractError("run already completed")
        # overflow shows up as a non-finite state and is reported as DivergenceError
        with np.errstate(over="ignore", invalid="ignore"):
            self._advance()

    def _advance(self) -> None:
        cfg = self.cfg
        k = self.k
        dt = cfg.dt
        t0, t1 = k * dt, (k + 1) * dt
        u1 = np.asarray(cfg.pot.row(cfg.lat, t1), dtype=float)
        theta1 = self.theta + 0.5 * dt * (self._u + u1) if self._gauge else self.theta

        fac0, fac1 = self._boundary_factor(self.theta), self._boundary_factor(theta1)

        f0 = self._rhs(t0, self.psi1, self._u, self.theta, np.conj(fac0) * self._mem)
        pred = self.psi1 + dt * f0
        partial = self._partial_memory(k)
        half_k0 = 0.5 * dt * self._k0
        mem_pred = partial + half_k0 * fac1 * pred[[0, -1]]
        f1 = self._rhs(t1, pred, u1, theta1, np.conj(fac1) * mem_pred)
        new = self.psi1 + 0.5 * dt * (f0 + f1)
        if not np.isfinite(new).all():
            raise DivergenceError(k + 1)

        self.psi1 = new
        self._hist[:, k + 1] = fac1 * new[[0, -1]]
        self._mem = partial + half_k0 * self._hist[:, k + 1]
        self._u = u1
        self.theta = theta1
        self.k = k + 1

    def density(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            n = density(self.plane_wave(self.t), self.psi1)
        if not np.isfinite(n).all():
            raise DivergenceError(self.k)
        return n

    @property
    def state(self) -> WaveState:
        return WaveState(
            step_index=self.k,
            t=self.t,
            psi1=self.psi1.copy(),
            hist0=self._hist[0, : self.k + 1].copy(),
            histM=self._hist[1, : self.k + 1].copy(),
            mode=self.cfg.mode,
        )

    def run(self) -> DensityRecord:
        cfg = self.cfg
        times, rows = [], []
        if self.k % cfg.record_stride == 0:
            times.append(self.t)
            rows.append(self.density())
        while self.k < cfg.n_steps:
            self.step()
            if self.k % cfg.record_stride == 0:
                times.append(self.t)
                rows.append(self.density())
        return DensityRecord(times=np.asarray(times), sites=cfg.lat.positions(), n=np.asarray(rows))


def evolve(cfg: RunConfig, table: KernelTable | None = None, **kw) -> tuple[DensityRecord, WaveState]:
    """Run ``cfg.n_steps`` Heun steps and record the density every ``record_stride`` steps."""
    prop = Propagator(cfg, table, **kw)
    log.debug("evolve: mode=%s M=%d steps=%d dt=%g", cfg.mode, cfg.lat.M, cfg.n_steps, cfg.dt)
    record = prop.run()
    return record, prop.state


def free_run(lat: LatticeSpec, E: float, dt: float, n_steps: int, **kw) -> RunConfig:
    """Convenience config with no potential."""
    return RunConfig(lat, PlaneWaveSource.at_energy(lat, E), NoPotential(), dt, n_steps, **kw)
