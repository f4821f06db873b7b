"""Unitary evolution of density operators and the induced Q-function dynamics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fock, phasespace
from .errors import ConfigError, DomainError, UnsupportedError
from .fock import DensityOperator, OperatorMatrix
from .phasespace import PhaseDistribution, PhaseGrid, PhasePoint

TRACE_DRIFT_TOL = 1e-8


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: tuple[DensityOperator, ...]

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", tuple(self.states))
        if len(self.states) != times.size:
            raise ConfigError("one state per time sample is required")
        drift = max(abs(np.trace(s.matrix).real - 1) for s in self.states)
        if drift > TRACE_DRIFT_TOL:
            raise ConfigError(f"trace drift {drift:.2e} along the trajectory")

    def __len__(self):
        return len(self.states)

    def q_grids(self, grid: PhaseGrid) -> list[PhaseDistribution]:
        return [phasespace.q_grid(s, grid) for s in self.states]


def _check_hermitian(H: OperatorMatrix, rho: DensityOperator):
    if H.space.dims != rho.space.dims:
        raise ConfigError("Hamiltonian and state live on different spaces")
    if not H.is_hermitian():
        raise DomainError(f"Hamiltonian {H.label!r} is not Hermitian")


def evolve(rho0: DensityOperator, H: OperatorMatrix, t_f: float, steps: int, t0: float = 0.0) -> Trajectory:
    """ρ_t = U ρ₀ U† on ``steps + 1`` uniform times from ``t0`` to ``t_f``.

    U comes from the exact eigendecomposition of H, so there is no
    integrator error at any step size.
    """
    _check_hermitian(H, rho0)
    if steps < 1:
        raise ConfigError("steps must be at least 1")
    hbar = rho0.space.hbar
    energies, vecs = np.linalg.eigh(H.matrix)
    rho_e = vecs.conj().T @ rho0.matrix @ vecs
    gaps = energies[:, None] - energies[None, :]
    times = np.linspace(t0, t_f, steps + 1)
    states = []
    for t in times:
        mat = vecs @ (rho_e * np.exp(-1j * gaps * (t - t0) / hbar)) @ vecs.conj().T
        states.append(DensityOperator(rho0.space, 0.5 * (mat + mat.conj().T)))
    return Trajectory(times, states)


def q_time_derivative(rho: DensityOperator, H: OperatorMatrix, point: PhasePoint):
    """dQ/dt = -(i/π^M ħ) <α|[H, ρ]|α>, per d²α, at a point or batch."""
    _check_hermitian(H, rho)
    space = rho.space
    comm = H.matrix @ rho.matrix - rho.matrix @ H.matrix
    alphas = point.alphas
    flat = alphas.reshape(space.modes, -1)
    vec = np.ones((flat.shape[1], 1), dtype=complex)
    for k, d in enumerate(space.dims):
        ck = fock.coherent_amplitudes(flat[k], d)
        vec = (vec[:, :, None] * ck[:, None, :]).reshape(flat.shape[1], -1)
    form = np.einsum("ni,ij,nj->n", vec.conj(), comm, vec)
    vals = (-1j * form / (np.pi**space.modes * space.hbar)).real.reshape(alphas.shape[1:])
    return float(vals[0]) if vals.shape == (1,) else vals


def q_time_derivative_grid(rho: DensityOperator, H: OperatorMatrix, grid: PhaseGrid) -> np.ndarray:
    _check_hermitian(H, rho)
    space = rho.space
    comm = H.matrix @ rho.matrix - rho.matrix @ H.matrix
    form = phasespace.coherent_form(comm, space.dims, phasespace.coherent_grid_amplitudes(grid))
    vals = (-1j * form / (np.pi**space.modes * space.hbar)).real
    return vals.reshape(grid.shape) / grid.measure_factor()


def harmonic_frequency(H: OperatorMatrix) -> float:
    """Return ω if H = ħω n + c·1 for the space's ω, else raise."""
    space = H.space
    if space.modes != 1:
        raise UnsupportedError("Fokker-Planck check is implemented for a single mode")
    w = space.omega[0]
    n = fock.number_operator(space).matrix
    rest = H.matrix - space.hbar * w * n
    offset = rest[0, 0]
    if np.max(np.abs(rest - offset * np.eye(space.dim))) > 1e-10 * max(1.0, np.abs(H.matrix).max()):
        raise UnsupportedError("only the harmonic Hamiltonian ħω(n + c) has a pure drift flow")
    return w


def fokker_planck_residual(rho: DensityOperator, H: OperatorMatrix, grid: PhaseGrid) -> float:
    """max |dQ/dt - drift| over the grid for harmonic H.

    The harmonic flow rotates phase space, α → α e^{-iωt}, so the drift term
    is the angular derivative ω ∂_φ Q = ω (x ∂_y Q - y ∂_x Q). It is taken as
    a second-order central difference in angle, with Q sampled at the grid
    points rotated by ±δ and δ equal to the grid step. Rotation-invariant
    states therefore give zero drift up to round-off, at any step.

    Since <n|αe^{iδ}> = e^{inδ}<n|α>, Q at the rotated points is the Q of the
    phase-rotated ρ on the original grid.
    """
    w = harmonic_frequency(H)
    grid = grid.with_measure("alpha")
    rate = q_time_derivative_grid(rho, H, grid)
    delta = grid.step(0)
    n = np.arange(rho.space.dims[0])
    coeffs = phasespace.coherent_grid_amplitudes(grid)

    def rotated_q(angle):
        phase = np.exp(1j * n * angle)
        mat = phase.conj()[:, None] * rho.matrix * phase[None, :]
        vals = phasespace.coherent_form(mat, rho.space.dims, coeffs).real / np.pi
        return vals.reshape(grid.shape)

    drift = w * (rotated_q(delta) - rotated_q(-delta)) / (2 * delta)
    return float(np.max(np.abs(rate - drift)))
