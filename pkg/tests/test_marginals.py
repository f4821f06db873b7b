import math

import numpy as np
import pytest

from husimi import dynamics, fock, marginals as mg, phasespace as ps
from husimi.errors import MeasureError, SamplingError
from husimi.fock import ModeSpace
from husimi.phasespace import PhaseGrid

from oracles import hermite_wavefunction


def qp_grid(space, radius=6.0, samples=121):
    return PhaseGrid(space, radius, samples, "qp")


def grid_for_dq(space, dq, reach=6.0):
    h = dq / space.q_scale()
    half = math.ceil(reach / h)
    return PhaseGrid(space, half * h, 2 * half + 1, "qp")


def test_psi_profile_vacuum(space):
    prof = mg.psi_profile(fock.number_state(space, 0))
    assert prof.at(0.0)[0] == pytest.approx(1 / math.sqrt(math.pi), abs=1e-10)
    assert prof.norm() == pytest.approx(1, abs=1e-10)


def test_real_amplitudes_carry_no_current(small, rng):
    amps = rng.normal(size=16)
    prof = mg.psi_profile(fock.StateVector.normalized(small, amps))
    assert np.max(np.abs(prof.current)) < 1e-13


def test_momentum_kick_current(space):
    prof = mg.psi_profile(fock.coherent_state(space, 1j / math.sqrt(2)))
    np.testing.assert_allclose(prof.current, prof.density * 1.0, atol=1e-12)


def test_psi_profile_against_textbook_wavefunctions():
    sp = ModeSpace(truncation=8, hbar=0.8, mass=1.7, omega=0.6)
    amps = np.array([0.2, 0.5j, -0.3, 0.1 + 0.4j, 0, 0.2, 0, -0.1j])
    psi = fock.StateVector.normalized(sp, amps)
    x = np.linspace(-4, 4, 201)
    wave = sum(c * hermite_wavefunction(n, x, 0.8, 1.7, 0.6) for n, c in enumerate(psi.amplitudes))
    dx = 1e-5
    wave_p = sum(c * hermite_wavefunction(n, x + dx, 0.8, 1.7, 0.6) for n, c in enumerate(psi.amplitudes))
    wave_m = sum(c * hermite_wavefunction(n, x - dx, 0.8, 1.7, 0.6) for n, c in enumerate(psi.amplitudes))
    deriv = (wave_p - wave_m) / (2 * dx)
    prof = mg.psi_profile(psi, x)
    np.testing.assert_allclose(prof.density, np.abs(wave) ** 2, atol=1e-12)
    np.testing.assert_allclose(prof.current, 0.8 * np.imag(np.conj(wave) * deriv), atol=1e-8)


def test_wigner_marginal_examples(space):
    grid = qp_grid(space)
    vac = mg.wigner_marginals(ps.wigner_grid(fock.pure_density(fock.number_state(space, 0)), grid))
    assert vac.at(0.0)[0] == pytest.approx(1 / math.sqrt(math.pi), abs=1e-6)
    one = mg.wigner_marginals(ps.wigner_grid(fock.pure_density(fock.number_state(space, 1)), grid))
    assert abs(one.at(0.0)[0]) < 1e-12
    assert one.norm() == pytest.approx(1, abs=1e-5)


def test_wigner_marginals_match_psi(small, rng):
    grid = qp_grid(small, 8.0, 161)
    for _ in range(3):
        psi = fock.random_state(small, rng)
        wm = mg.wigner_marginals(ps.wigner_grid(fock.pure_density(psi), grid))
        ref = mg.psi_profile(psi, wm.axis)
        assert np.max(np.abs(wm.density - ref.density)) < 1e-5
        assert np.max(np.abs(wm.current - ref.current)) < 1e-5
        assert wm.norm() == pytest.approx(1, abs=1e-5)


def test_marginals_need_qp_measure(space):
    W = ps.wigner_grid(fock.pure_density(fock.number_state(space, 0)), PhaseGrid(space))
    with pytest.raises(MeasureError):
        mg.wigner_marginals(W)


def test_q_marginal_of_vacuum(space):
    vac = fock.pure_density(fock.number_state(space, 0))
    prof = mg.q_marginals(ps.q_grid(vac, qp_grid(space)))
    assert prof.at(0.0)[0] == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-6)
    assert prof.at(0.0)[0] < mg.psi_profile(vac).at(0.0)[0]
    assert prof.norm() == pytest.approx(1, abs=1e-5)


@pytest.mark.parametrize("n", [0, 1, 4])
def test_stationary_states_have_no_q_current(space, n):
    prof = mg.q_marginals(ps.q_grid(fock.pure_density(fock.number_state(space, n)), qp_grid(space)))
    assert np.max(np.abs(prof.current)) < 1e-12


@pytest.mark.parametrize("units", [(1.0, 1.0, 1.0), (0.5, 2.0, 1.5)])
def test_q_marginal_is_smoothed_psi_density(units, rng):
    hbar, m, w = units
    sp = ModeSpace(truncation=12, hbar=hbar, mass=m, omega=w)
    psi = fock.random_state(sp, rng, levels=6)
    qm = mg.q_marginals(ps.q_grid(fock.pure_density(psi), qp_grid(sp, 7.0, 141)))
    ref = mg.psi_profile(psi, qm.axis)
    smoothed = mg.gaussian_smooth(ref, math.sqrt(hbar / (2 * m * w)))
    assert np.max(np.abs(qm.density - smoothed)) < 1e-4


def test_continuity_stationary(space):
    rho = fock.pure_density(fock.number_state(space, 2))
    traj = dynamics.evolve(rho, fock.harmonic_hamiltonian(space), 0.2, 2)
    assert mg.continuity_residual(traj, qp_grid(space)) < 1e-10


def test_continuity_needs_three_samples(space):
    rho = fock.pure_density(fock.number_state(space, 0))
    traj = dynamics.evolve(rho, fock.harmonic_hamiltonian(space), 0.2, 1)
    with pytest.raises(SamplingError):
        mg.continuity_residual(traj, qp_grid(space))


@pytest.mark.parametrize("units", [(1.0, 1.0, 1.0), (1.0, 2.0, 0.5)])
def test_continuity_coherent_run(units):
    hbar, m, w = units
    sp = ModeSpace(hbar=hbar, mass=m, omega=w)
    H = fock.harmonic_hamiltonian(sp)
    reports = []
    for dt, dq in [(1e-3, 0.05), (5e-4, 0.025)]:
        # centre the three samples on t = 0.3, away from the turning point at t = 0
        t0 = 0.3 - dt
        rho = fock.pure_density(fock.coherent_state(sp, np.exp(-1j * w * t0)))
        traj = dynamics.evolve(rho, H, 0.3 + dt, 2, t0=t0)
        reports.append(mg.continuity_report(traj, grid_for_dq(sp, dq * math.sqrt(hbar / (m * w)))))
    coarse, fine = reports
    assert coarse["residual"] < 1e-3 * coarse["max_rate"]
    assert coarse["residual"] / fine["residual"] == pytest.approx(4, rel=0.2)
