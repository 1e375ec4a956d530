import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tdnegf.exceptions import ConfigError, DomainError
from tdnegf.kernels import free_propagator, sigma_r
from tdnegf.lattice import LatticeSpec, PlaneWaveSource, wavenumber
from tdnegf.oracle import (
    BigBoxConfig,
    cn_step_norm_change,
    crank_nicolson_bigbox,
    keldysh_direct,
    minimal_pad,
    retarded_matrix,
    surface_gf_time,
    transfer_matrix_transmission,
)
from tdnegf.potentials import NoPotential, SquareBarrier, TabulatedPotential
from tdnegf.propagate import RunConfig, evolve

LAT = LatticeSpec(a=1.0, m=1.0, M=40)
SRC = PlaneWaveSource.at_energy(LAT, 0.8 * LAT.d)


def test_transmission_without_barrier_is_one():
    for E in (0.1, 0.5, 1.0, 1.9):
        assert transfer_matrix_transmission(LAT, np.zeros(LAT.n_sites), E) == pytest.approx(1.0, abs=1e-13)


def single_impurity_by_direct_solve(d, U0, ka):
    # unknowns (r, t): psi_j = e^{ikj} + r e^{-ikj} left of the impurity, t e^{ikj} right of it
    e = np.exp(1j * ka)
    E = 2 * d * (1 - math.cos(ka))
    A = np.array([[1.0, -1.0], [(2 * d + U0 - E) - d * e, -d * e]], dtype=complex)
    b = np.array([-1.0, -(2 * d + U0 - E) + d * np.conj(e)], dtype=complex)
    r, t = np.linalg.solve(A, b)
    return abs(t) ** 2, abs(r) ** 2


@pytest.mark.parametrize("U0", [0.05, 0.3, 1.0, 4.0])
@pytest.mark.parametrize("E", [0.2, 1.0, 1.7])
def test_single_impurity_closed_form(U0, E):
    barrier = np.zeros(LAT.n_sites)
    barrier[17] = U0
    ka = wavenumber(LAT, E) * LAT.a
    closed = 1.0 / (1.0 + (U0 / (2 * LAT.d * math.sin(ka))) ** 2)
    T_direct, R_direct = single_impurity_by_direct_solve(LAT.d, U0, ka)
    assert T_direct == pytest.approx(closed, rel=1e-12)
    assert T_direct + R_direct == pytest.approx(1.0, abs=1e-12)
    assert transfer_matrix_transmission(LAT, barrier, E) == pytest.approx(closed, rel=1e-12)


def test_transmission_vanishes_for_tall_barriers():
    heights = [0.1, 0.5, 1, 2, 5, 20, 100]
    Ts = []
    for U0 in heights:
        barrier = np.zeros(LAT.n_sites)
        barrier[10:15] = U0
        Ts.append(transfer_matrix_transmission(LAT, barrier, 0.4))
    assert all(a > b for a, b in zip(Ts, Ts[1:]))
    assert Ts[-1] < 1e-12


@given(st.lists(st.floats(-1.0, 3.0), min_size=LAT.n_sites, max_size=LAT.n_sites), st.floats(0.02, 1.98))
def test_transfer_matrix_unitarity(values, E):
    T, R = transfer_matrix_transmission(LAT, np.array(values), E, with_reflection=True)
    assert 0.0 <= T <= 1.0 + 1e-12
    assert abs(T + R - 1.0) <= 1e-12


def test_transmission_errors():
    with pytest.raises(DomainError):
        transfer_matrix_transmission(LAT, np.zeros(LAT.n_sites), 0.0)
    with pytest.raises(DomainError):
        transfer_matrix_transmission(LAT, np.zeros(LAT.n_sites), LAT.band_top)
    with pytest.raises(ConfigError):
        transfer_matrix_transmission(LAT, np.zeros(3), 0.5)


def test_big_box_pad_invariant():
    need = minimal_pad(LAT, SRC.E, 0.05, 400)
    assert need == 24  # 1.5 * v(E) * t_end = 1.5 * 0.8 * 20
    with pytest.raises(ConfigError, match=f"at least {need}"):
        BigBoxConfig(LAT, SRC, NoPotential(), need - 1, 0.05, 400)


@pytest.mark.parametrize("pot", [NoPotential(), SquareBarrier(0.6, 10, 30, t_on=0.0, t_off=3.0, ramp=1.0)])
def test_crank_nicolson_conserves_norm(pot):
    cfg = BigBoxConfig(LAT, SRC, pot, 50, 0.5, 1)
    assert cn_step_norm_change(cfg) <= 1e-12


def test_big_box_free_wave():
    dt, n = 0.05, 400
    pad = minimal_pad(LAT, SRC.E, dt, n)
    wide = crank_nicolson_bigbox(BigBoxConfig(LAT, SRC, NoPotential(), 2 * pad, dt, n, 10))
    assert wide.max_deviation() <= 1e-12
    # frozen regression: with the minimal pad the precursor of the truncated wave front reaches the
    # central region before the end of this run
    tight = crank_nicolson_bigbox(BigBoxConfig(LAT, SRC, NoPotential(), pad, dt, n, 10))
    assert tight.max_deviation() == pytest.approx(0.017396764593577085, rel=1e-6)
    early = tight.times <= 12.0
    assert np.abs(tight.n[early] - 1).max() <= 1e-3


def test_big_box_agrees_with_steady_transmission():
    lat = LatticeSpec(a=1.0, m=1.0, M=30)
    src = PlaneWaveSource.at_energy(lat, 1.0)
    pot = SquareBarrier(0.3, 10, 20, t_on=0.0, ramp=5.0)
    dt, n = 0.1, 1200
    rec = crank_nicolson_bigbox(BigBoxConfig(lat, src, pot, minimal_pad(lat, src.E, dt, n), dt, n, n))
    T = transfer_matrix_transmission(lat, pot.row(lat, 1e9), src.E)
    # the transmitted side carries |t|^2 once the switching transient has left
    assert abs(rec.n[-1, -1] - T) < 1e-2


def test_surface_gf_time_against_kernel():
    taus = np.linspace(0.5, 40.0, 30)
    err = np.abs(surface_gf_time(LAT, taus) - sigma_r(LAT.d, taus) / LAT.d**2)
    assert err.max() < 1e-6


TINY = LatticeSpec(a=1.0, m=1.0, M=6)
TINY_SRC = PlaneWaveSource.at_energy(TINY, 0.7 * TINY.d)


def test_keldysh_free_density_is_one():
    rec = keldysh_direct(TINY, TINY_SRC, NoPotential(), 0.1, 40)
    assert rec.max_deviation() <= 1e-6


def free_column_error(dt):
    n = int(round(4.0 / dt))
    G = retarded_matrix(TINY, NoPotential(), dt, n)
    idx = np.arange(TINY.n_sites)
    err = 0.0
    for k in range(n + 1):
        exact = np.array([[free_propagator(TINY.d, i - j, k * dt) for j in idx] for i in idx])
        err = max(err, np.abs(G[k, 0] - exact).max())
    return err, G


def test_retarded_matrix_converges_to_free_propagator():
    e1, _ = free_column_error(0.1)
    e2, _ = free_column_error(0.05)
    assert e2 < 3e-3
    assert 1.8 < math.log2(e1 / e2) < 2.2


def test_retarded_matrix_depends_on_time_difference_before_quench():
    dt, n = 0.1, 30
    quench = 15

    def f(j, t):
        return np.where((j >= 2) & (j <= 4), 0.4 * (t >= quench * dt), 0.0)

    G = retarded_matrix(TINY, TabulatedPotential.from_function(f, TINY, dt, n), dt, n)
    for k in range(quench):
        for l in range(k + 1):
            # columns started on interior sites are exactly shift invariant
            assert np.array_equal(G[k, l][:, 1:-1], G[k - l, 0][:, 1:-1])
    assert np.all(G[3, 5] == 0)


def test_keldysh_trapezoid_weights_agree_to_second_order():
    from tdnegf.acceptance import smooth_random_potential

    diffs = []
    for dt, n in ((0.1, 20), (0.05, 40)):
        pot = smooth_random_potential(TINY, dt, n)
        rec, _ = evolve(RunConfig(TINY, TINY_SRC, pot, dt, n, mode="direct"))
        trap = keldysh_direct(TINY, TINY_SRC, pot, dt, n, weights="trapezoid")
        diffs.append(np.abs(rec.n - trap.n).max())
    assert diffs[1] < diffs[0] / 3


def test_keldysh_limits():
    with pytest.raises(ConfigError):
        keldysh_direct(LatticeSpec(1.0, 1.0, 9), TINY_SRC, NoPotential(), 0.1, 10)
    with pytest.raises(ConfigError):
        keldysh_direct(TINY, TINY_SRC, NoPotential(), 0.1, 65)
    with pytest.raises(ConfigError):
        keldysh_direct(TINY, TINY_SRC, SquareBarrier(0.2, 3, 6), 0.1, 10)
    with pytest.raises(ConfigError):
        keldysh_direct(TINY, TINY_SRC, NoPotential(), 0.1, 10, weights="simpson")
