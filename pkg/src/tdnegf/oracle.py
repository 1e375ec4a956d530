"""Independent reference solvers used to check the propagator.

* a Crank-Nicolson solver on a large closed box,
* transfer-matrix transmission for static barriers,
* a two-time solver that builds the full retarded Green's matrix and forms
  the density from it, without the vector reduction used by the engine,
* the lead self-energy recovered from its spectral function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .exceptions import ConfigError, DomainError
from .kernels import build_kernel_table, surface_gf_energy
from .lattice import LatticeSpec, PlaneWaveSource, _check_band, group_velocity, wavenumber
from .potentials import Potential
from .propagate import DensityRecord

KELDYSH_MAX_M = 8
KELDYSH_MAX_STEPS = 64


def surface_gf_time(lat: LatticeSpec, taus, n_nodes: int = 2**16) -> np.ndarray:
    """Surface Green's function in time from the band spectral function.

    ``g(tau) = (i / pi) * int_0^{4d} Im g(E) exp(-i E tau) dE`` for ``tau > 0``,
    with :func:`surface_gf_energy` sampled on ``n_nodes`` equally spaced
    energies and the trapezoid rule.
    """
    E = np.linspace(0.0, lat.band_top, n_nodes)
    img = surface_gf_energy(lat, E).imag
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    w = np.full(n_nodes, E[1] - E[0])
    w[0] = w[-1] = 0.5 * (E[1] - E[0])
    phase = np.exp(-1j * np.outer(taus, E))
    return (1j / math.pi) * (phase @ (w * img))


def transfer_matrix_transmission(lat: LatticeSpec, barrier, E: float, *, with_reflection: bool = False):
    """Transmission probability through static site potentials ``barrier[0..M]``.

    Integrates ``(H - E) psi = 0`` from a pure transmitted wave on the right
    back into the free left lead and splits it into incoming and reflected
    parts.
    """
    _check_band(lat, E)
    U = np.asarray(barrier, dtype=float)
    if U.shape[0] != lat.n_sites:
        raise ConfigError(f"barrier must have {lat.n_sites} site values")
    d = lat.d
    ka = wavenumber(lat, E) * lat.a
    M = lat.M
    # (psi_{j+1}, psi_j) with t = 1 on the right of the barrier
    nxt = np.exp(1j * ka * (M + 1))
    cur = np.exp(1j * ka * M)
    for j in range(M, -1, -1):
        prev = ((2.0 * d + U[j] - E) / d) * cur - nxt
        nxt, cur = cur, prev
    # cur = psi_{-1}, nxt = psi_0 in the free left lead: A e^{ikj} + B e^{-ikj}
    e = np.exp(1j * ka)
    A = (nxt - cur * np.conj(e)) / (1.0 - np.conj(e) ** 2)
    B = nxt - A
    T = 1.0 / abs(A) ** 2
    if with_reflection:
        return T, abs(B / A) ** 2
    return T


@dataclass(frozen=True)
class BigBoxConfig:
    """Closed box ``-pad_sites .. M + pad_sites`` with hard walls.

    ``substeps`` subdivides ``dt`` internally; densities are still reported
    every ``record_stride`` steps of size ``dt``.
    """

    lat: LatticeSpec
    src: PlaneWaveSource
    pot: Potential
    pad_sites: int
    dt: float
    n_steps: int
    record_stride: int = 1
    substeps: int = 1

    def __post_init__(self):
        need = minimal_pad(self.lat, self.src.E, self.dt, self.n_steps)
        if self.pad_sites < need:
            raise ConfigError(f"pad_sites = {self.pad_sites} too small; need at least {need}")


def minimal_pad(lat: LatticeSpec, E: float, dt: float, n_steps: int) -> int:
    """Smallest pad with ``pad * a >= 1.5 * v(E) * n_steps * dt``."""
    return int(math.ceil(1.5 * group_velocity(lat, E) * n_steps * dt / lat.a - 1e-9))


def crank_nicolson_bigbox(cfg: BigBoxConfig) -> DensityRecord:
    """Evolve the truncated plane wave in the box and return ``|psi|^2`` on sites ``0..M``.

    Each step solves ``(1 + i h/2 H(t + h/2)) psi' = (1 - i h/2 H(t + h/2)) psi``.
    """
    lat, src = cfg.lat, cfg.src
    d = lat.d
    pad = cfg.pad_sites
    sites = np.arange(-pad, lat.M + pad + 1)
    psi = np.exp(1j * src.k * lat.a * sites)
    h = cfg.dt / cfg.substeps
    lo, hi = pad, pad + lat.n_sites
    ab = np.zeros((3, sites.size), dtype=complex)
    ab[0, 1:] = 1j * 0.5 * h * (-d)
    ab[2, :-1] = 1j * 0.5 * h * (-d)

    times, rows = [0.0], [np.abs(psi[lo:hi]) ** 2]
    for k in range(cfg.n_steps):
        for s in range(cfg.substeps):
            tm = k * cfg.dt + (s + 0.5) * h
            diag = 2.0 * d + cfg.pot.row(lat, tm, sites)
            rhs = (1.0 - 0.5j * h * diag) * psi
            rhs[1:] += 0.5j * h * d * psi[:-1]
            rhs[:-1] += 0.5j * h * d * psi[1:]
            ab[1] = 1.0 + 0.5j * h * diag
            psi = solve_banded((1, 1), ab, rhs, overwrite_b=True, check_finite=False)
        if (k + 1) % cfg.record_stride == 0:
            times.append((k + 1) * cfg.dt)
            rows.append(np.abs(psi[lo:hi]) ** 2)
    return DensityRecord(times=np.asarray(times), sites=lat.positions(), n=np.asarray(rows))


def cn_step_norm_change(cfg: BigBoxConfig) -> float:
    """Relative change of the box norm over one step (unitarity check)."""
    one = BigBoxConfig(cfg.lat, cfg.src, cfg.pot, cfg.pad_sites, cfg.dt, 1, 1, cfg.substeps)
    # rerun with the full wave to get the norm; cheap for one step
    lat, src = one.lat, one.src
    pad = one.pad_sites
    sites = np.arange(-pad, lat.M + pad + 1)
    psi = np.exp(1j * src.k * lat.a * sites)
    d = lat.d
    h = one.dt
    diag = 2.0 * d + one.pot.row(lat, 0.5 * h, sites)
    ab = np.zeros((3, sites.size), dtype=complex)
    ab[0, 1:] = -0.5j * h * d
    ab[2, :-1] = -0.5j * h * d
    ab[1] = 1.0 + 0.5j * h * diag
    rhs = (1.0 - 0.5j * h * diag) * psi
    rhs[1:] += 0.5j * h * d * psi[:-1]
    rhs[:-1] += 0.5j * h * d * psi[1:]
    new = solve_banded((1, 1), ab, rhs)
    n0 = np.vdot(psi, psi).real
    return abs(np.vdot(new, new).real - n0) / n0


def keldysh_direct(lat: LatticeSpec, src: PlaneWaveSource, pot: Potential, dt: float, n_steps: int,
                   *, weights: str = "integrator") -> DensityRecord:
    """Density from the full two-time retarded Green's matrix.

    ``G(t1, t2)`` is obtained for every start time on the grid by stepping
    the matrix Dyson equation in ``t1`` from ``G(t2, t2) = -i`` with the lead
    self-energy at both end sites. Retardation makes ``G`` vanish before
    ``t2``, so the memory integral runs over the whole grid ``[0, t1]``.

    The wave is then ``Psi = Psi0 + int_0^t G(t, s) U(s) Psi0(s) ds``: the
    source integral over ``t' < 0`` is the free plane wave, and the potential
    acts only for ``s > 0``. With ``weights="integrator"`` the time integral
    uses the weights implied by the Heun scheme, so it reproduces the engine
    up to rounding; ``weights="trapezoid"`` uses the plain trapezoid rule and
    agrees to second order in ``dt``.
    """
    if lat.M > KELDYSH_MAX_M or n_steps > KELDYSH_MAX_STEPS:
        raise ConfigError(f"keldysh_direct is limited to M <= {KELDYSH_MAX_M}, n_steps <= {KELDYSH_MAX_STEPS}")
    if pot.reaches_right_lead(lat):
        raise ConfigError("keldysh_direct needs a potential that vanishes at site M")
    if weights not in ("integrator", "trapezoid"):
        raise ConfigError(f"unknown weights {weights!r}")
    G = retarded_matrix(lat, pot, dt, n_steps)
    n_s = lat.n_sites
    d = lat.d
    K0 = -1j * d * d
    j = np.arange(n_s)
    times = dt * np.arange(n_steps + 1)
    psi0 = np.exp(1j * (src.k * lat.a * j[None, :] - src.E * times[:, None]))
    U = np.stack([pot.row(lat, t) for t in times])
    f = U * psi0  # i dpsi1/dt = ... + f
    s = -1j * f
    rows = []
    for k in range(n_steps + 1):
        psi1 = np.zeros(n_s, dtype=complex)
        if weights == "integrator":
            for l in range(k):
                # Heun injection of the source on [t_l, t_{l+1}]
                cur = -1j * (2.0 * d + U[l + 1]) * s[l]
                cur[1:] += 1j * d * s[l][:-1]
                cur[:-1] += 1j * d * s[l][1:]
                cur[[0, -1]] += -1j * 0.5 * dt * K0 * s[l][[0, -1]]
                b = 0.5 * dt * (s[l] + s[l + 1] + dt * cur)
                psi1 += 1j * (G[k, l + 1] @ b)
        else:
            w = np.full(k + 1, dt)
            if k > 0:
                w[0] = w[-1] = 0.5 * dt
            else:
                w[:] = 0.0
            for l in range(k + 1):
                psi1 += w[l] * (G[k, l] @ f[l])
        rows.append(np.abs(psi0[k] + psi1) ** 2)
    return DensityRecord(times=times, sites=lat.positions(), n=np.asarray(rows))


def retarded_matrix(lat: LatticeSpec, pot: Potential, dt: float, n_steps: int) -> np.ndarray:
    """``G[k, l] = G^R(t_k, t_l)`` as ``(M+1) x (M+1)`` matrices; zero for ``k < l``.

    Each start time is integrated with Heun steps; the memory term uses the
    trapezoid rule over ``[0, t_k]`` with the predictor value at the new node.
    """
    n_s = lat.n_sites
    table = build_kernel_table(lat, dt, max(n_steps, 1)).samples
    H = []
    for k in range(n_steps + 1):
        u = pot.row(lat, k * dt)
        h = np.diag(2.0 * lat.d + u).astype(complex)
        h += np.diag(np.full(n_s - 1, -lat.d), 1) + np.diag(np.full(n_s - 1, -lat.d), -1)
        H.append(h)
    G = np.zeros((n_steps + 1, n_steps + 1, n_s, n_s), dtype=complex)
    ends = [0, n_s - 1]

    def memory(hist_rows, upto, new_rows):
        # hist_rows[j] are boundary rows at steps j = 0..upto-1, new_rows at step upto
        acc = 0.5 * table[0] * new_rows
        for jj in range(upto):
            w = 0.5 if jj == 0 else 1.0
            acc = acc + w * table[upto - jj] * hist_rows[jj]
        return dt * acc

    def deriv(k, g, mem):
        out = H[k] @ g
        out[ends] += mem
        return -1j * out

    for l in range(n_steps + 1):
        G[l, l] = -1j * np.eye(n_s)
        rows = [np.zeros((2, n_s), dtype=complex) for _ in range(l)] + [G[l, l][ends]]
        for k in range(l, n_steps):
            f0 = deriv(k, G[k, l], memory(rows, k, G[k, l][ends]))
            pred = G[k, l] + dt * f0
            f1 = deriv(k + 1, pred, memory(rows, k + 1, pred[ends]))
            G[k + 1, l] = G[k, l] + 0.5 * dt * (f0 + f1)
            rows.append(G[k + 1, l][ends])
    return G
