"""Acceptance criteria with pinned scenarios and tolerances.

Each ``criterion_*`` function runs one scenario end to end and returns a
:class:`CriterionResult`. Runtime limits are part of the pass condition.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .kernels import free_propagator, sigma_r
from .lattice import LatticeSpec, PlaneWaveSource, group_velocity
from .oracle import (
    BigBoxConfig,
    crank_nicolson_bigbox,
    keldysh_direct,
    minimal_pad,
    surface_gf_time,
    transfer_matrix_transmission,
)
from .potentials import LaserPulse, NoPotential, PulseSpec, SquareBarrier, TabulatedPotential
from .propagate import RunConfig, evolve


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    limits: dict
    seconds: float
    runtime_limit: float
    notes: list = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = [f"{k}={_fmt(v)} (limit {self.limits[k]})" if k in self.limits else f"{k}={_fmt(v)}"
                 for k, v in self.measured.items()]
        parts.append(f"runtime={self.seconds:.1f}s (limit {self.runtime_limit:g}s)")
        return f"[{status}] criterion {self.number} {self.name}: " + ", ".join(parts)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return f"{v:.3e}"
    return str(v)


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def criterion_1() -> CriterionResult:
    """Free plane wave through the transparent boundaries."""
    lat = LatticeSpec(a=1.0, m=1.0, M=200)
    cfg = RunConfig(lat, PlaneWaveSource.at_energy(lat, 2 * lat.d), NoPotential(), dt=0.05, n_steps=4000)
    with _Timer() as tm:
        rec, _ = evolve(cfg)
        dev = rec.max_deviation()
    ok = dev <= 1e-13 and tm.seconds <= 10
    return CriterionResult(1, "transparency", ok, {"max_abs_n_minus_1": dev}, {"max_abs_n_minus_1": 1e-13},
                           tm.seconds, 10)


def criterion_2() -> CriterionResult:
    """Time-domain kernel against the inverse Fourier transform of the energy-domain one."""
    lat = LatticeSpec(a=1.0, m=1.0, M=10)
    d = lat.d
    with _Timer() as tm:
        taus = np.linspace(20.0 / d / 50, 20.0 / d, 50)
        spectral = surface_gf_time(lat, taus, n_nodes=2**14)
        err = float(np.max(np.abs(spectral - sigma_r(d, taus) / d**2)))
    ok = err <= 1e-4 and tm.seconds <= 5
    return CriterionResult(2, "kernel vs inverse Fourier", ok, {"max_abs_error": err}, {"max_abs_error": 1e-4},
                           tm.seconds, 5)


def barrier_scenario(dt: float = 0.01):
    lat = LatticeSpec(a=1.0, m=1.0, M=200)
    d = lat.d
    E = 0.8 * d
    pot = SquareBarrier(U0=0.3 * d, j_lo=80, j_hi=120, t_on=0.0, t_off=math.inf, ramp=10.0 / d)
    traversal = lat.length / group_velocity(lat, E)
    n_steps = int(round(3.0 * traversal / dt))
    cfg = RunConfig(lat, PlaneWaveSource.at_energy(lat, E), pot, dt, n_steps, record_stride=n_steps)
    return cfg, traversal


def criterion_3() -> CriterionResult:
    """Steady transmitted density behind a held barrier."""
    with _Timer() as tm:
        cfg, traversal = barrier_scenario()
        T = transfer_matrix_transmission(cfg.lat, cfg.pot.row(cfg.lat, cfg.n_steps * cfg.dt), cfg.src.E)
        rec, _ = evolve(cfg)
        nM = float(rec.n[-1, -1])
        err = abs(nM - T)
    ok = err <= 1e-3 and tm.seconds <= 60
    return CriterionResult(3, "static barrier steady state", ok,
                           {"t_eval": float(rec.times[-1]), "n_M": nM, "T(E)": T, "abs_diff": err},
                           {"abs_diff": 1e-3}, tm.seconds, 60)


def window_scenario(dt: float = 0.025):
    lat = LatticeSpec(a=1.0, m=1.0, M=120)
    d = lat.d
    E = 0.8 * d
    pot = SquareBarrier(U0=0.5 * d, j_lo=50, j_hi=70, t_on=0.0, t_off=60.0, ramp=10.0)
    n_steps = int(round(150.0 / dt))
    stride = int(round(1.0 / dt))
    return RunConfig(lat, PlaneWaveSource.at_energy(lat, E), pot, dt, n_steps, record_stride=stride)


def criterion_4() -> CriterionResult:
    """Engine against a large closed box evolved with Crank-Nicolson."""
    with _Timer() as tm:
        cfg = window_scenario()
        rec, _ = evolve(cfg)
        pad = minimal_pad(cfg.lat, cfg.src.E, cfg.dt, cfg.n_steps)
        box = BigBoxConfig(cfg.lat, cfg.src, cfg.pot, pad, cfg.dt, cfg.n_steps, cfg.record_stride, substeps=4)
        ref = crank_nicolson_bigbox(box)
        rel = float(np.linalg.norm(rec.n - ref.n) / np.linalg.norm(ref.n))
    ok = rel <= 1e-3 and tm.seconds <= 60
    return CriterionResult(4, "big-box equivalence", ok, {"relative_L2": rel, "pad_sites": pad},
                           {"relative_L2": 1e-3}, tm.seconds, 60)


def smooth_random_potential(lat: LatticeSpec, dt: float, n_steps: int, seed: int = 7) -> TabulatedPotential:
    """Sum of a few random space-time modes on sites ``1..M-1``, switched on as ``sin^2``."""
    rng = np.random.default_rng(seed)
    amp = rng.uniform(-0.3, 0.3, size=3)
    kx = rng.uniform(0.2, 1.5, size=3)
    om = rng.uniform(0.2, 2.0, size=3)
    ph = rng.uniform(0, 2 * math.pi, size=3)
    t_ramp = 0.5 * n_steps * dt

    def f(j, t):
        env = math.sin(0.5 * math.pi * min(t / t_ramp, 1.0)) ** 2
        val = sum(a * np.cos(k * j + w * t + p) for a, k, w, p in zip(amp, kx, om, ph))
        return np.where((j >= 1) & (j <= lat.M - 1), env * val, 0.0)

    return TabulatedPotential.from_function(f, lat, dt, n_steps)


def criterion_5() -> CriterionResult:
    """Vector reduction against the two-time Green's matrix."""
    with _Timer() as tm:
        lat = LatticeSpec(a=1.0, m=1.0, M=6)
        dt, n_steps = 0.1, 40
        src = PlaneWaveSource.at_energy(lat, 0.7 * lat.d)
        pot = smooth_random_potential(lat, dt, n_steps)
        rec, _ = evolve(RunConfig(lat, src, pot, dt, n_steps, mode="direct"))
        ref = keldysh_direct(lat, src, pot, dt, n_steps)
        diff = float(np.max(np.abs(rec.n - ref.n)))
    ok = diff <= 1e-8 and tm.seconds <= 10
    return CriterionResult(5, "two-time formalism equivalence", ok,
                           {"max_abs_diff": diff, "max_abs_n_minus_1": rec.max_deviation()},
                           {"max_abs_diff": 1e-8}, tm.seconds, 10)


def laser_scenario(phi_cep: float, eps0: float | None = None, dt: float = 0.01):
    """Few-cycle pulse with ``E T = 2``; ``eps0`` defaults to ``E / L`` (peak ``|U| = E/2``)."""
    lat = LatticeSpec(a=1.0, m=1.0, M=20)
    E = 0.5 * lat.d
    T = 2.0 / E
    omega0 = 1.5 * 2 * math.pi / T
    if eps0 is None:
        eps0 = E / lat.length
    pulse = PulseSpec(eps0=eps0, omega0=omega0, phi_cep=phi_cep, T=T, L=lat.length)
    t_end = T + 2.0 * lat.length / group_velocity(lat, E)
    n_steps = int(round(t_end / dt))
    cfg = RunConfig(lat, PlaneWaveSource.at_energy(lat, E), LaserPulse(pulse), dt, n_steps, record_stride=5)
    return cfg


def criterion_6() -> CriterionResult:
    """CEP dependence of laser-driven density fluctuations."""
    with _Timer() as tm:
        runs = {}
        edge = {}
        for name, phi in (("phi0", 0.0), ("phi_pi2", 0.5 * math.pi)):
            cfg = laser_scenario(phi)
            rec, _ = evolve(cfg)
            runs[name] = rec
            after = rec.times > cfg.pot.pulse.T
            edge[name] = float(np.max(np.abs(rec.n[after][:, [0, -1]] - 1.0)))
            t_grid = cfg.dt * np.arange(cfg.n_steps + 1)
            max_u = max(abs(cfg.pot.row(cfg.lat, t, np.array([cfg.lat.M]))[0]) for t in t_grid)
        cep_diff = float(np.max(np.abs(runs["phi0"].n - runs["phi_pi2"].n)))
        control, _ = evolve(laser_scenario(0.0, eps0=0.0))
        control_dev = control.max_deviation()
        E = cfg.src.E
    ok_a = cep_diff > 0.01
    ok_b = min(edge.values()) > 0.005
    ok_c = control_dev <= 1e-13
    ok = ok_a and ok_b and ok_c and tm.seconds <= 120
    return CriterionResult(
        6, "CEP dependence", ok,
        {"eps0": cfg.pot.pulse.eps0, "max_abs_U_over_E": max_u / E, "cep_max_diff": cep_diff,
         "edge_dev_phi0": edge["phi0"], "edge_dev_phi_pi2": edge["phi_pi2"], "control_dev": control_dev},
        {"cep_max_diff": "> 0.01", "edge_dev_phi0": "> 0.005", "edge_dev_phi_pi2": "> 0.005", "control_dev": 1e-13},
        tm.seconds, 120)


def interior_pulse(lat: LatticeSpec, dt: float, n_steps: int, amplitude: float = 0.2) -> TabulatedPotential:
    j_lo, j_hi = lat.M // 3, 2 * lat.M // 3
    width = j_hi - j_lo
    t_pulse, omega = 10.0, 1.0

    def f(j, t):
        inside = (j >= j_lo) & (j <= j_hi)
        env = math.sin(math.pi * min(t, t_pulse) / t_pulse) ** 2
        return np.where(inside, amplitude * math.cos(omega * t) * env * np.sin(math.pi * (j - j_lo) / width) ** 2, 0.0)

    return TabulatedPotential.from_function(f, lat, dt, n_steps)


def criterion_7() -> CriterionResult:
    """Direct and gauge evolution of an interior pulse."""
    with _Timer() as tm:
        lat = LatticeSpec(a=1.0, m=1.0, M=60)
        dt = 0.004
        n_steps = int(round(80.0 / dt))
        src = PlaneWaveSource.at_energy(lat, 0.8 * lat.d)
        pot = interior_pulse(lat, dt, n_steps)
        direct, _ = evolve(RunConfig(lat, src, pot, dt, n_steps, record_stride=10, mode="direct"))
        gauge, _ = evolve(RunConfig(lat, src, pot, dt, n_steps, record_stride=10, mode="gauge"))
        diff = float(np.max(np.abs(direct.n - gauge.n)))
    ok = diff <= 1e-6 and tm.seconds <= 30
    return CriterionResult(7, "gauge/direct equivalence", ok,
                           {"max_abs_diff": diff, "max_abs_n_minus_1": direct.max_deviation()},
                           {"max_abs_diff": 1e-6}, tm.seconds, 30)


def richardson_order(coarse, medium, fine) -> float:
    return float(math.log2(np.max(np.abs(coarse - medium)) / np.max(np.abs(medium - fine))))


def criterion_8() -> CriterionResult:
    """Observed convergence order of the windowed-barrier run."""
    with _Timer() as tm:
        dens = [evolve(window_scenario(dt))[0].n for dt in (0.05, 0.025, 0.0125)]
        order = richardson_order(*dens)
    ok = 1.7 <= order <= 2.3 and tm.seconds <= 90
    return CriterionResult(8, "convergence order", ok, {"order": order}, {"order": "[1.7, 2.3]"}, tm.seconds, 90)


def criterion_9(seed: int = 2024) -> CriterionResult:
    """Free-chain propagator: unitarity and the equal-time limit."""
    rng = np.random.default_rng(seed)
    with _Timer() as tm:
        worst_unit = 0.0
        worst_limit = 0.0
        orders = np.arange(-60, 61)
        for _ in range(20):
            d = rng.uniform(0.1, 2.0)
            tau = rng.uniform(0.0, 20.0 / d)
            total = sum(abs(free_propagator(d, n, tau)) ** 2 for n in orders)
            worst_unit = max(worst_unit, abs(total - 1.0))
            tiny = 1e-12 / d
            for n in range(-3, 4):
                expected = -1j if n == 0 else 0.0
                worst_limit = max(worst_limit, abs(free_propagator(d, n, tiny) - expected),
                                  abs(free_propagator(d, n, 0.0) - expected))
    ok = worst_unit <= 1e-10 and worst_limit <= 1e-10 and tm.seconds <= 1
    return CriterionResult(9, "free propagator identities", ok,
                           {"unitarity_error": worst_unit, "limit_error": worst_limit},
                           {"unitarity_error": 1e-10, "limit_error": 1e-10}, tm.seconds, 1)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}

SUITES = {
    "kernels": (2, 9),
    "transparency": (1,),
    "barrier": (3,),
    "bigbox": (4, 8),
    "keldysh": (5,),
    "gauge": (7, 6),
    "all": tuple(CRITERIA),
}


def run_suite(name: str, echo=print) -> bool:
    """Run the criteria of suite ``name``; return True when all pass."""
    ok = True
    for number in SUITES[name]:
        result = CRITERIA[number]()
        if echo is not None:
            echo(result.line())
        ok = ok and result.passed
    return ok
