"""Position densities and currents from ψ, W and Q, and the continuity check.

The current is the momentum-weighted marginal ``j(q) = ∫ p F(q, p) dp``;
for a pure state this equals ``ħ Im(ψ* ∂ψ/∂q) = |ψ|² ∂S/∂q``. The continuity
equation therefore reads ``∂ρ/∂t + (1/m) ∂j/∂q = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fock, phasespace
from .errors import ConfigError, MeasureError, SamplingError, UnsupportedError
from .fock import DensityOperator, StateVector
from .phasespace import Kind, Measure, PhaseDistribution, PhaseGrid


@dataclass(frozen=True)
class SpatialProfile:
    axis: np.ndarray
    density: np.ndarray
    current: np.ndarray

    def __post_init__(self):
        for name in ("axis", "density", "current"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.axis.shape == self.density.shape == self.current.shape):
            raise ConfigError("axis, density and current must have the same length")
        if self.density.min() < -phasespace.NEGATIVITY_TOL:
            raise ConfigError("density profile has negative values")

    @property
    def step(self) -> float:
        return float(self.axis[1] - self.axis[0])

    def norm(self) -> float:
        """∫ density dq (trapezoid)."""
        return float(np.trapezoid(self.density, self.axis))

    def at(self, q: float) -> tuple[float, float]:
        """Linearly interpolated (density, current) at ``q``."""
        return float(np.interp(q, self.axis, self.density)), float(np.interp(q, self.axis, self.current))


def default_axis(space: fock.ModeSpace, samples: int = 801) -> np.ndarray:
    osc = np.sqrt(space.hbar / (space.mass[0] * space.omega[0]))
    half = (np.sqrt(2 * space.dims[0] + 1) + 6) * osc
    return np.linspace(-half, half, samples)


def psi_profile(state: StateVector | DensityOperator, axis=None) -> SpatialProfile:
    """|ψ(q)|² and ħ Im(ψ* ψ') from the Fock amplitudes (mixtures allowed)."""
    space = state.space
    if space.modes != 1:
        raise UnsupportedError("position profiles are implemented for a single mode")
    rho = fock.pure_density(state).matrix if isinstance(state, StateVector) else state.matrix
    axis = default_axis(space) if axis is None else np.asarray(axis, dtype=float)
    d = space.dims[0]
    hbar, m, w = space.hbar, space.mass[0], space.omega[0]
    phi = fock.hermite_functions(d + 1, axis, m, w, hbar)
    n = np.arange(d)[:, None]
    lower = np.vstack([np.zeros_like(axis), phi[: d - 1]])
    dphi = np.sqrt(m * w / hbar) * (np.sqrt(n / 2) * lower - np.sqrt((n + 1) / 2) * phi[1 : d + 1])
    phi = phi[:d]
    density = np.einsum("nm,nx,mx->x", rho, phi, phi).real
    current = hbar * np.einsum("nm,mx,nx->x", rho, phi, dphi).imag
    return SpatialProfile(axis, np.clip(density, 0, None), current)


def _phase_marginals(dist: PhaseDistribution, kind: Kind) -> SpatialProfile:
    if dist.kind is not kind:
        raise ConfigError(f"expected a {kind.value} distribution, got {dist.kind.value}")
    if dist.measure is not Measure.QP:
        raise MeasureError("marginals need a per-dq-dp distribution; call to_measure('qp') first")
    grid = dist.grid
    space = grid.space
    if space.modes != 1:
        raise UnsupportedError("marginals are implemented for a single mode")
    ax = grid.axis(0)
    q = ax * space.q_scale(0)
    p = ax * space.p_scale(0)
    w = phasespace.simpson_weights(grid.samples[0], grid.step(0)) * space.p_scale(0)
    density = dist.values @ w
    current = dist.values @ (w * p)
    if kind is Kind.Q:
        density = np.clip(density, 0, None)
    return SpatialProfile(q, density, current)


def wigner_marginals(W: PhaseDistribution) -> SpatialProfile:
    """ρ(q) = ∫W dp and j(q) = ∫pW dp by direct quadrature of the grid."""
    return _phase_marginals(W, Kind.WIGNER)


def q_marginals(Q: PhaseDistribution) -> SpatialProfile:
    """ρ_Q(q) = ∫Q dp and j_Q(q) = ∫pQ dp by direct quadrature of the grid."""
    return _phase_marginals(Q, Kind.Q)


def gaussian_smooth(profile: SpatialProfile, width: float) -> np.ndarray:
    """Convolve the density with a unit-mass Gaussian of standard deviation ``width``."""
    x = profile.axis
    kernel = np.exp(-((x[:, None] - x[None, :]) ** 2) / (2 * width**2)) / np.sqrt(2 * np.pi * width**2)
    return np.trapezoid(kernel * profile.density[None, :], x, axis=1)


def _uniform_step(times) -> float:
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise SamplingError(f"need at least 3 time samples, got {times.size}")
    steps = np.diff(times)
    if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise SamplingError("time samples must be uniformly spaced")
    return float(steps[0])


def marginal_history(trajectory, grid: PhaseGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(q axis, ρ_Q[t, q], j_Q[t, q]) along a trajectory."""
    grid = grid.with_measure(Measure.QP)
    dens, curr = [], []
    for rho in trajectory.states:
        prof = q_marginals(phasespace.q_grid(rho, grid))
        dens.append(prof.density)
        curr.append(prof.current)
    return prof.axis, np.array(dens), np.array(curr)


def continuity_terms(trajectory, grid: PhaseGrid) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference ∂ρ_Q/∂t and (1/m)∂j_Q/∂q on interior (t, q) samples."""
    if grid.space.modes != 1:
        raise UnsupportedError("the continuity check is implemented for a single mode")
    dt = _uniform_step(trajectory.times)
    q, dens, curr = marginal_history(trajectory, grid)
    dq = q[1] - q[0]
    rate = (dens[2:, 1:-1] - dens[:-2, 1:-1]) / (2 * dt)
    flux = (curr[1:-1, 2:] - curr[1:-1, :-2]) / (2 * dq) / grid.space.mass[0]
    return rate, flux


def continuity_residual(trajectory, grid: PhaseGrid) -> float:
    """max |∂ρ_Q/∂t + (1/m) ∂j_Q/∂q| over interior samples."""
    rate, flux = continuity_terms(trajectory, grid)
    return float(np.max(np.abs(rate + flux)))


def continuity_report(trajectory, grid: PhaseGrid) -> dict:
    rate, flux = continuity_terms(trajectory, grid)
    return {
        "residual": float(np.max(np.abs(rate + flux))),
        "max_rate": float(np.max(np.abs(rate))),
        "dt": _uniform_step(trajectory.times),
        "dq": grid.step(0) * grid.space.q_scale(0),
    }
