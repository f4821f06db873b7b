import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from husimi import fock
from husimi.errors import ConfigError, ScaleError, TruncationError
from husimi.fock import DensityOperator, ModeSpace, StateVector

from oracles import coherent_series


def test_annihilation_matrix_d3():
    a = fock.annihilation(ModeSpace(truncation=3)).matrix
    expected = np.array([[0, 1, 0], [0, 0, math.sqrt(2)], [0, 0, 0]])
    np.testing.assert_allclose(a, expected, atol=0)


def test_annihilation_kills_vacuum(space):
    vac = fock.number_state(space, 0).amplitudes
    assert np.linalg.norm(fock.annihilation(space).matrix @ vac) == 0


def test_coherent_is_eigenvector(space):
    psi = fock.coherent_state(space, 0.5).amplitudes
    resid = fock.annihilation(space).matrix @ psi - 0.5 * psi
    assert np.linalg.norm(resid) < 1e-8


def test_creation_is_adjoint(space):
    np.testing.assert_array_equal(fock.creation(space).matrix, fock.annihilation(space).matrix.conj().T)


def test_creation_raises_level():
    sp = ModeSpace(truncation=4)
    out = fock.creation(sp).matrix @ fock.number_state(sp, 1).amplitudes
    assert out[2] == pytest.approx(math.sqrt(2))
    assert np.count_nonzero(out) == 1


def test_commutator_is_identity_below_top():
    sp = ModeSpace(truncation=10)
    a, ad = fock.annihilation(sp).matrix, fock.creation(sp).matrix
    comm = a @ ad - ad @ a
    np.testing.assert_allclose(comm[:-1, :-1], np.eye(9), atol=1e-14)


def test_vacuum_position_moments():
    sp = ModeSpace(truncation=6)
    q = fock.position(sp).matrix
    vac = fock.number_state(sp, 0).amplitudes
    assert vac.conj() @ q @ q @ vac == pytest.approx(0.5)
    assert vac.conj() @ q @ vac == 0


@pytest.mark.parametrize("hbar,m,w", [(1, 1, 1), (2.0, 0.5, 3.0)])
def test_canonical_commutator(hbar, m, w):
    sp = ModeSpace(truncation=12, hbar=hbar, mass=m, omega=w)
    q, p = fock.position(sp).matrix, fock.momentum(sp).matrix
    comm = q @ p - p @ q
    np.testing.assert_allclose(comm[:-1, :-1], 1j * hbar * np.eye(11), atol=1e-12)
    assert fock.position(sp).is_hermitian(1e-12) and fock.momentum(sp).is_hermitian(1e-12)


def test_number_states():
    sp = ModeSpace(truncation=4)
    np.testing.assert_array_equal(fock.number_state(sp, 0).amplitudes, [1, 0, 0, 0])
    np.testing.assert_array_equal(fock.number_state(sp, 2).amplitudes, [0, 0, 1, 0])
    with pytest.raises(TruncationError):
        fock.number_state(sp, 4)


def test_harmonic_energy_of_first_level(space):
    one = fock.number_state(space, 1).amplitudes
    H = fock.harmonic_hamiltonian(space).matrix
    assert (one.conj() @ H @ one).real == pytest.approx(1.5)


def test_coherent_vacuum_and_first_amplitude(space):
    np.testing.assert_allclose(fock.coherent_state(space, 0).amplitudes, fock.number_state(space, 0).amplitudes)
    assert fock.coherent_state(space, 1.0).amplitudes[0].real == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_coherent_overlap_matches_series(space):
    a, b = 0.3, -0.2j
    ours = abs(fock.coherent_state(space, b).overlap(fock.coherent_state(space, a))) ** 2
    ref = abs(np.vdot(coherent_series(b), coherent_series(a))) ** 2
    assert ours == pytest.approx(ref, abs=1e-8)
    assert ours == pytest.approx(math.exp(-abs(a - b) ** 2), abs=1e-8)


def test_coherent_guard_names_required_truncation():
    with pytest.raises(TruncationError, match="truncation >= "):
        fock.coherent_state(ModeSpace(truncation=8), 3.0)


def test_two_mode_coherent_is_tensor_product():
    sp = ModeSpace(modes=2, truncation=12)
    psi = fock.coherent_state(sp, [0.4, -0.3j]).amplitudes
    one = fock.coherent_state(ModeSpace(truncation=12), 0.4).amplitudes
    two = fock.coherent_state(ModeSpace(truncation=12), -0.3j).amplitudes
    np.testing.assert_allclose(psi, np.kron(one, two), atol=1e-15)


def test_pure_density_examples():
    sp = ModeSpace(truncation=4)
    vac = fock.pure_density(fock.number_state(sp, 0)).matrix
    assert vac[0, 0] == 1 and np.count_nonzero(vac) == 1
    plus = fock.superposition([1, 1], [fock.number_state(sp, 0), fock.number_state(sp, 1)])
    np.testing.assert_allclose(fock.pure_density(plus).matrix[:2, :2], 0.5 * np.ones((2, 2)), atol=1e-15)
    mix = DensityOperator.mixture(
        [0.5, 0.5], [fock.pure_density(fock.number_state(sp, k)) for k in (0, 1)]
    )
    assert mix.purity() == pytest.approx(0.5)


def test_space_validation():
    with pytest.raises(ConfigError):
        ModeSpace(truncation=1)
    with pytest.raises(ConfigError):
        ModeSpace(hbar=0)
    with pytest.raises(ScaleError):
        ModeSpace(modes=3, truncation=17)
    with pytest.raises(IndexError):
        fock.annihilation(ModeSpace(), 1)


def test_density_invariants_enforced(space):
    with pytest.raises(ConfigError):
        DensityOperator(space, np.diag([1.0, 0.5] + [0.0] * 30))
    bad = np.zeros((32, 32), dtype=complex)
    bad[0, 1] = 1
    bad[0, 0] = 1
    with pytest.raises(ConfigError):
        DensityOperator(space, bad)
    with pytest.raises(ConfigError):
        StateVector(space, np.ones(32))


def test_partial_trace_of_product():
    sp = ModeSpace(modes=2, truncation=(3, 5))
    r0 = fock.random_density(sp.mode(0), np.random.default_rng(1))
    r1 = fock.random_density(sp.mode(1), np.random.default_rng(2))
    joint = DensityOperator(sp, np.kron(r0.matrix, r1.matrix))
    np.testing.assert_allclose(joint.partial_trace([0]).matrix, r0.matrix, atol=1e-14)
    np.testing.assert_allclose(joint.partial_trace([1]).matrix, r1.matrix, atol=1e-14)


def test_hermite_functions_orthonormal():
    x = np.linspace(-14, 14, 4001)
    phi = fock.hermite_functions(40, x)
    gram = np.trapezoid(phi[:, None, :] * phi[None, :, :], x, axis=2)
    np.testing.assert_allclose(gram, np.eye(40), atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_states_satisfy_invariants(seed):
    sp = ModeSpace(truncation=32)
    rng = np.random.default_rng(seed)
    psi = fock.random_state(sp, rng)
    assert abs(np.linalg.norm(psi.amplitudes) - 1) < 1e-10
    rho = fock.random_density(sp, rng, rank=3)
    assert abs(np.trace(rho.matrix) - 1) < 1e-10
    assert np.linalg.eigvalsh(rho.matrix).min() > -1e-9
    a = fock.annihilation(sp).matrix
    v = psi.amplitudes
    # <φ|a ψ> = <a† φ|ψ>
    phi = fock.random_state(sp, rng).amplitudes
    assert abs(np.vdot(phi, a @ v) - np.vdot(fock.creation(sp).matrix @ phi, v)) < 1e-12
    assert fock.pure_density(psi).purity() == pytest.approx(1, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.complex_numbers(max_magnitude=2.0))
def test_coherent_residual_small_amplitudes(alpha):
    sp = ModeSpace(truncation=32)
    psi = fock.coherent_state(sp, alpha).amplitudes
    assert np.linalg.norm(fock.annihilation(sp).matrix @ psi - alpha * psi) < 1e-7


@settings(max_examples=100, deadline=None)
@given(st.complex_numbers(max_magnitude=3.6))
def test_coherent_residual_bounded_by_top_level(alpha):
    # Only the dropped top-level term |α c_{D-1}| survives. Near the guard's
    # edge it is ~1e-4, so a 1e-7 residual cannot follow from the guard alone.
    sp = ModeSpace(truncation=32)
    assume(fock.coherent_tail_mass(alpha, 32) < fock.COHERENT_TAIL_TOL)
    psi = fock.coherent_state(sp, alpha).amplitudes
    resid = np.linalg.norm(fock.annihilation(sp).matrix @ psi - alpha * psi)
    assert resid == pytest.approx(abs(alpha * psi[-1]), abs=1e-14)
