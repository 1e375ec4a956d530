"""Space- and time-dependent potentials on the central region.

Every potential vanishes for ``t < 0``. Each variant can be sampled at any
integer site index; sites left of the central region always see zero, sites
right of it see whatever the variant puts into the right lead (nonzero only
for the laser pulse, whose dipole potential is constant for ``x >= L``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, ContractError, DomainError
from .lattice import LatticeSpec

DIPOLE_MODES = ("line_integral", "position_weighted")


@dataclass(frozen=True)
class PulseSpec:
    """Few-cycle pulse with ``sin^2`` envelopes in time (``[0, T]``) and space (``[0, L]``)."""

    eps0: float
    omega0: float
    phi_cep: float
    T: float
    L: float

    def __post_init__(self):
        if not self.eps0 >= 0:
            raise DomainError(f"eps0 must be >= 0, got {self.eps0!r}")
        for name in ("omega0", "T", "L"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)!r}")

    def time_profile(self, t):
        """Carrier times temporal envelope, zero outside ``[0, T]``."""
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.T)
        g = np.cos(self.omega0 * t + self.phi_cep) * np.sin(math.pi * t / self.T) ** 2
        return np.where(inside, g, 0.0)


def laser_field(pulse: PulseSpec, x, t):
    """Electric field of the pulse; zero outside ``x in [0, L]``, ``t in [0, T]``."""
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x <= pulse.L)
    space = np.where(inside, np.sin(math.pi * x / pulse.L) ** 2, 0.0)
    out = pulse.eps0 * pulse.time_profile(t) * space
    return float(out) if out.ndim == 0 else out


def _line_antiderivative(x, L):
    # integral of sin^2(pi x'/L) over [0, x]
    kappa = 2.0 * math.pi / L
    return 0.5 * x - np.sin(kappa * x) / (2.0 * kappa)


def _moment_antiderivative(x, L):
    # integral of x' sin^2(pi x'/L) over [0, x]
    kappa = 2.0 * math.pi / L
    return 0.25 * x * x - 0.5 * (x * np.sin(kappa * x) / kappa + (np.cos(kappa * x) - 1.0) / kappa**2)


def dipole_spatial_profile(pulse: PulseSpec, x, mode: str = "line_integral"):
    """``F(x)`` such that ``U(x, t) = -eps0 * F(x) * time_profile(t)``."""
    if mode not in DIPOLE_MODES:
        raise ConfigError(f"unknown dipole mode {mode!r}; expected one of {DIPOLE_MODES}")
    x = np.clip(np.asarray(x, dtype=float), 0.0, pulse.L)
    if mode == "line_integral":
        return _line_antiderivative(x, pulse.L)
    return _moment_antiderivative(x, pulse.L)


def dipole_potential(pulse: PulseSpec, x, t, mode: str = "line_integral"):
    """Length-gauge potential of the pulse.

    ``line_integral`` gives ``-int_0^x E dx'``; ``position_weighted`` weights the
    integrand with ``x'``. Both are constant in ``x`` for ``x >= L``.
    """
    out = -pulse.eps0 * dipole_spatial_profile(pulse, x, mode) * pulse.time_profile(t)
    return float(out) if np.ndim(out) == 0 else out


def _sites(lat, sites):
    if sites is None:
        return np.arange(lat.n_sites)
    return np.asarray(sites)


class Potential:
    """Base class; subclasses implement :meth:`row`."""

    variant = "base"

    def row(self, lat: LatticeSpec, t: float, sites=None) -> np.ndarray:
        raise NotImplementedError

    def check(self, lat: LatticeSpec, dt: float, n_steps: int) -> None:
        """Validate against a run grid; raise :class:`ConfigError` on mismatch."""

    def reaches_right_lead(self, lat: LatticeSpec) -> bool:
        """True when ``U_M`` can be nonzero; the right lead then carries ``U_M(t)`` uniformly."""
        return False

    def touches_first_site(self, lat: LatticeSpec) -> bool:
        return False

    def describe(self) -> dict:
        return {"potential.variant": self.variant}


class NoPotential(Potential):
    variant = "none"

    def row(self, lat, t, sites=None):
        return np.zeros(_sites(lat, sites).shape)


@dataclass(frozen=True)
class SquareBarrier(Potential):
    """Height ``U0`` on sites ``j_lo..j_hi`` during ``[t_on, t_off]``.

    The switch-on and switch-off are ``sin^2`` ramps of length ``ramp``
    placed inside the window. ``ramp=None`` means 5% of a finite window
    and no ramp for an open-ended one.
    """

    U0: float
    j_lo: int
    j_hi: int
    t_on: float = 0.0
    t_off: float = math.inf
    ramp: float | None = None
    variant = "square_barrier"

    def __post_init__(self):
        if self.t_on < 0:
            raise ConfigError("barrier.t_on must be >= 0 (potential vanishes for t < 0)")
        if not self.t_off > self.t_on:
            raise ConfigError("barrier.t_off must exceed barrier.t_on")
        if self.j_lo > self.j_hi or self.j_lo < 0:
            raise ConfigError("barrier sites need 0 <= j_lo <= j_hi")
        if self.ramp is not None and self.ramp < 0:
            raise ConfigError("barrier.ramp must be >= 0")
        if self.ramp_length() > 0.5 * (self.t_off - self.t_on):
            raise ConfigError("barrier.ramp longer than half the switching window")

    def ramp_length(self) -> float:
        if self.ramp is not None:
            return float(self.ramp)
        window = self.t_off - self.t_on
        return 0.05 * window if math.isfinite(window) else 0.0

    def envelope(self, t: float) -> float:
        if t < self.t_on or t > self.t_off:
            return 0.0
        r = self.ramp_length()
        if r > 0:
            if t < self.t_on + r:
                return math.sin(0.5 * math.pi * (t - self.t_on) / r) ** 2
            if t > self.t_off - r:
                return math.sin(0.5 * math.pi * (self.t_off - t) / r) ** 2
        elif t == self.t_off and math.isfinite(self.t_off):
            return 0.0
        return 1.0

    def row(self, lat, t, sites=None):
        s = _sites(lat, sites)
        # a barrier reaching site M continues uniformly into the right lead
        upper = np.inf if self.j_hi >= lat.M else self.j_hi
        mask = (s >= self.j_lo) & (s <= upper)
        return np.where(mask, self.U0 * self.envelope(t), 0.0)

    def check(self, lat, dt, n_steps):
        if self.j_hi > lat.M:
            raise ConfigError(f"barrier.j_hi = {self.j_hi} outside the central region 0..{lat.M}")

    def reaches_right_lead(self, lat):
        return self.j_hi >= lat.M and self.U0 != 0

    def touches_first_site(self, lat):
        return self.j_lo == 0 and self.U0 != 0

    def describe(self):
        return {
            "potential.variant": self.variant,
            "barrier.U0": self.U0,
            "barrier.j_lo": self.j_lo,
            "barrier.j_hi": self.j_hi,
            "barrier.t_on": self.t_on,
            "barrier.t_off": self.t_off,
            "barrier.ramp": self.ramp_length(),
        }


@dataclass(frozen=True)
class LaserPulse(Potential):
    """Dipole potential of a :class:`PulseSpec`; constant beyond ``x = L``."""

    pulse: PulseSpec
    dipole_mode: str = "line_integral"
    variant = "laser_pulse"

    def __post_init__(self):
        if self.dipole_mode not in DIPOLE_MODES:
            raise ConfigError(f"unknown pulse.dipole_mode {self.dipole_mode!r}")

    def row(self, lat, t, sites=None):
        x = lat.a * _sites(lat, sites)
        return np.asarray(dipole_potential(self.pulse, x, t, self.dipole_mode), dtype=float) * np.ones(x.shape)

    def reaches_right_lead(self, lat):
        return True

    def check(self, lat, dt, n_steps):
        if not math.isclose(self.pulse.L, lat.length, rel_tol=1e-12):
            raise ConfigError(f"pulse.L = {self.pulse.L} must equal M*a = {lat.length}")

    def describe(self):
        p = self.pulse
        return {
            "potential.variant": self.variant,
            "pulse.eps0": p.eps0,
            "pulse.omega0": p.omega0,
            "pulse.phi_cep": p.phi_cep,
            "pulse.T": p.T,
            "pulse.L": p.L,
            "pulse.dipole_mode": self.dipole_mode,
        }


@dataclass(frozen=True, eq=False)
class TabulatedPotential(Potential):
    """Samples ``U[j, k]`` at sites ``0..M`` and times ``k * dt``, linear in time between samples.

    Beyond the last sample the final column is held. Sites right of ``M``
    see ``U_M(t)``.
    """

    values: np.ndarray
    dt: float
    source: str = ""
    variant = "tabulated"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ConfigError("tabulated potential must be a 2-D array [site, step]")
        if not self.dt > 0:
            raise ConfigError("tabulated dt must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n_steps(self) -> int:
        return self.values.shape[1] - 1

    def reaches_right_lead(self, lat):
        return bool(np.any(self.values[-1] != 0))

    def touches_first_site(self, lat):
        return bool(np.any(self.values[0] != 0))

    def row(self, lat, t, sites=None):
        if lat.M != self.M:
            raise ContractError(f"tabulated potential has M = {self.M}, lattice has M = {lat.M}")
        s = _sites(lat, sites)
        if t < 0:
            return np.zeros(s.shape)
        pos = t / self.dt
        k = min(int(math.floor(pos)), self.n_steps)
        frac = pos - k
        col = self.values[:, k]
        if k < self.n_steps and frac > 0:
            col = (1.0 - frac) * col + frac * self.values[:, k + 1]
        # sites beyond M see the right-lead value U_M(t)
        return np.where(s >= 0, col[np.clip(s, 0, self.M)], 0.0)

    def check(self, lat, dt, n_steps):
        if lat.M != self.M:
            raise ConfigError(f"tabulated potential has M = {self.M}, run uses M = {lat.M}")
        if not math.isclose(dt, self.dt, rel_tol=1e-12):
            raise ConfigError(f"tabulated potential has dt = {self.dt}, run uses dt = {dt}")
        if n_steps > self.n_steps:
            raise ConfigError(f"tabulated potential covers {self.n_steps} steps, run needs {n_steps}")

    def describe(self):
        out = {"potential.variant": self.variant, "tabulated.dt": self.dt}
        if self.source:
            out["tabulated.path"] = self.source
        return out

    @classmethod
    def from_function(cls, func, lat: LatticeSpec, dt: float, n_steps: int) -> "TabulatedPotential":
        """Tabulate ``func(j_array, t) -> U`` on the run grid."""
        j = np.arange(lat.n_sites)
        cols = [np.asarray(func(j, k * dt), dtype=float) * np.ones(lat.n_sites) for k in range(n_steps + 1)]
        return cls(np.stack(cols, axis=1), dt)


def load_tabulated_csv(path) -> TabulatedPotential:
    """Read a tabulated potential.

    The file starts with ``# key = value`` lines declaring ``M``, ``dt`` and
    ``n_steps``, followed by a ``j,k,U`` header and one row per sample.
    Missing samples are zero.
    """
    path = Path(path)
    meta = {}
    rows = []
    with path.open(newline="") as fh:
        lines = [ln for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, value = ln[1:].partition("=")
            if value:
                meta[key.strip()] = value.strip()
        elif ln.strip():
            body.append(ln)
    try:
        M, dt, n_steps = int(meta["M"]), float(meta["dt"]), int(meta["n_steps"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: header must declare M, dt and n_steps ({exc})") from None
    reader = csv.DictReader(body)
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["j", "k", "U"]:
        raise ConfigError(f"{path}: expected columns j,k,U")
    values = np.zeros((M + 1, n_steps + 1))
    for rec in reader:
        j, k = int(rec["j"]), int(rec["k"])
        if not (0 <= j <= M and 0 <= k <= n_steps):
            raise ConfigError(f"{path}: sample (j={j}, k={k}) outside declared grid")
        values[j, k] = float(rec["U"])
    return TabulatedPotential(values, dt, source=str(path))


def write_tabulated_csv(pot: TabulatedPotential, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# M = {pot.M}\n# dt = {pot.dt!r}\n# n_steps = {pot.n_steps}\n")
        fh.write("j,k,U\n")
        for j in range(pot.M + 1):
            for k in range(pot.n_steps + 1):
                fh.write(f"{j},{k},{float(pot.values[j, k])!r}\n")


def sample_potential(spec: Potential, lat: LatticeSpec, j, t):
    """``U_j(t)`` for the given variant."""
    j_arr = np.asarray(j)
    if np.any((j_arr < 0) | (j_arr > lat.M)):
        raise ContractError(f"site index outside 0..{lat.M}: {j}")
    out = spec.row(lat, t, sites=np.atleast_1d(j_arr))
    return float(out[0]) if j_arr.ndim == 0 else out


def gauge_phase(spec: Potential, lat: LatticeSpec, j, t: float, dt: float):
    """``theta_j(t) = int_0^t U_j dt'`` by the trapezoid rule with step ``dt``.

    The last interval is shortened when ``t`` is not a multiple of ``dt``.
    The gauge factor is ``exp(-1j * theta)``.
    """
    if t < 0:
        raise DomainError("gauge phase is defined for t >= 0")
    sites = np.atleast_1d(np.asarray(j))
    theta = np.zeros(sites.shape)
    prev = spec.row(lat, 0.0, sites)
    n_full = int(math.floor(t / dt + 1e-12))
    for k in range(1, n_full + 1):
        cur = spec.row(lat, k * dt, sites)
        theta += 0.5 * dt * (prev + cur)
        prev = cur
    rest = t - n_full * dt
    if rest > 1e-15 * max(1.0, t):
        cur = spec.row(lat, t, sites)
        theta += 0.5 * rest * (prev + cur)
    return float(theta[0]) if np.ndim(j) == 0 else theta
