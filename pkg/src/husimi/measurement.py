"""Pointer-state measurement model: Born-rule pointer statistics from Q.

The apparatus is a single oscillator mode whose pointer settings are
disjoint disks Γ_j in its α-plane. Each outcome j leaves the apparatus in
ρ_j, a μ_j-weighted mixture of coherent states inside Γ_j. Decoherence is
modelled as exact dephasing in the measured basis, giving the joint state
Σ_i |c_i|² |B_i><B_i| ⊗ ρ_i.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from . import fock, phasespace
from .errors import ConditioningError, ConfigError, DomainError, GeometryError, TruncationError
from .fock import DensityOperator, ModeSpace, StateVector
from .phasespace import Kind, PhaseDistribution, PhaseGrid

MIN_RADIUS = 3.0
MIN_GAP = 2.0
DEFAULT_WIDTH = 0.25
DEFAULT_NODES = 17
MIN_PROBABILITY = 1e-9


@dataclass(frozen=True)
class PointerRegion:
    label: int
    centre: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "centre", complex(self.centre))
        if self.radius < 0:
            raise GeometryError("region radius must be nonnegative")

    def contains(self, alpha) -> np.ndarray:
        return np.abs(np.asarray(alpha) - self.centre) <= self.radius

    def predicate(self, mode: int = 0):
        return phasespace.disk(self.centre, self.radius, mode)


@dataclass(frozen=True)
class MeasurementModel:
    """System basis {|B_i>}, amplitudes c_i and one pointer region per outcome.

    ``width`` is the standard deviation of the Gaussian weight μ_j about each
    region centre (in |α| units); ``nodes`` is the per-axis quadrature order
    used to realize ρ_j. ``support_guard`` enforces the minimum radius that
    keeps ρ_j's Q mass inside Γ_j.
    """

    system: ModeSpace
    apparatus: ModeSpace
    basis: tuple[StateVector, ...]
    amplitudes: tuple[complex, ...]
    regions: tuple[PointerRegion, ...]
    width: float = DEFAULT_WIDTH
    nodes: int = DEFAULT_NODES
    support_guard: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "basis", tuple(self.basis))
        set_(self, "amplitudes", tuple(complex(c) for c in self.amplitudes))
        set_(self, "regions", tuple(self.regions))
        if self.system.modes != 1 or self.apparatus.modes != 1:
            raise ConfigError("system and apparatus are single modes in this model")
        n = len(self.basis)
        if not (len(self.amplitudes) == len(self.regions) == n) or n == 0:
            raise ConfigError("need one amplitude and one region per basis state")
        norm = sum(abs(c) ** 2 for c in self.amplitudes)
        if abs(norm - 1) > 1e-10:
            raise ConfigError(f"sum of |c_i|^2 is {norm!r}, expected 1")
        gram = np.array([[b1.overlap(b2) for b2 in self.basis] for b1 in self.basis])
        if np.max(np.abs(gram - np.eye(n))) > 1e-10:
            raise ConfigError("measurement basis is not orthonormal")
        for b in self.basis:
            if b.space.dims != self.system.dims:
                raise ConfigError("basis states must live on the system space")
        for r1, r2 in itertools.combinations(self.regions, 2):
            gap = abs(r1.centre - r2.centre) - r1.radius - r2.radius
            if gap < MIN_GAP - 1e-12:
                raise GeometryError(f"regions {r1.label} and {r2.label} are only {gap:.3g} apart (need {MIN_GAP})")
        if self.width < 0 or self.nodes < 1:
            raise ConfigError("width must be nonnegative and nodes positive")

    @property
    def outcomes(self) -> int:
        return len(self.basis)

    @property
    def born(self) -> np.ndarray:
        return np.array([abs(c) ** 2 for c in self.amplitudes])

    @property
    def joint_space(self) -> ModeSpace:
        return self.system.tensor(self.apparatus)

    @classmethod
    def ring(
        cls,
        amplitudes: Sequence[complex],
        separation: float = 8.0,
        radius: float = MIN_RADIUS,
        *,
        system_truncation: int | None = None,
        basis: Sequence[StateVector] | None = None,
        width: float = DEFAULT_WIDTH,
        nodes: int = DEFAULT_NODES,
        support_guard: bool = True,
        hbar: float = 1.0,
    ) -> "MeasurementModel":
        """Regions on a circle with neighbouring centres ``separation`` apart.

        The system basis defaults to number states |0>..|n-1>; the apparatus
        truncation is the smallest one that holds every coherent node.
        """
        centres = ring_centres(len(amplitudes), separation)
        regions = [PointerRegion(i + 1, c, radius) for i, c in enumerate(centres)]
        return cls.from_regions(
            amplitudes,
            regions,
            system_truncation=system_truncation,
            basis=basis,
            width=width,
            nodes=nodes,
            support_guard=support_guard,
            hbar=hbar,
        )

    @classmethod
    def from_regions(
        cls,
        amplitudes: Sequence[complex],
        regions: Sequence[PointerRegion],
        *,
        system_truncation: int | None = None,
        basis: Sequence[StateVector] | None = None,
        width: float = DEFAULT_WIDTH,
        nodes: int = DEFAULT_NODES,
        support_guard: bool = True,
        hbar: float = 1.0,
    ) -> "MeasurementModel":
        """Model with explicit pointer regions, in outcome order."""
        amps = list(amplitudes)
        n = len(amps)
        if n == 0:
            raise ConfigError("need at least one outcome")
        # μ nodes fill a square of half-side min(r, 4w) clipped to the disk
        def reach(r):
            return min(r.radius, math.sqrt(2) * min(r.radius, 4 * width)) if width > 0 else 0.0

        d_app = max(fock.required_truncation(abs(r.centre) + reach(r)) for r in regions)
        system = ModeSpace(1, system_truncation or max(n, 2), hbar)
        apparatus = ModeSpace(1, d_app, hbar)
        if basis is None:
            basis = [fock.number_state(system, i) for i in range(n)]
        return cls(system, apparatus, tuple(basis), tuple(amps), tuple(regions), width, nodes, support_guard)

    def region(self, j: int) -> PointerRegion:
        """Region for outcome ``j`` (1-based label)."""
        for r in self.regions:
            if r.label == j:
                return r
        raise IndexError(f"no pointer region labelled {j}")

    def index(self, j: int) -> int:
        return self.regions.index(self.region(j))

    def apparatus_grid(self, step: float = 0.2) -> PhaseGrid:
        """Square grid covering every region plus the Gaussian tails of ρ_j."""
        reach = max(abs(r.centre) + max(r.radius, 4 * self.width + 6) for r in self.regions) + 1
        samples = 2 * math.ceil(reach / step) + 1
        return PhaseGrid(self.apparatus, (samples - 1) / 2 * step, samples)

    def system_grid(self, step: float = 0.25) -> PhaseGrid:
        top = max(int(np.max(np.nonzero(np.abs(b.amplitudes) > 1e-12)[0])) for b in self.basis)
        reach = max(phasespace.DEFAULT_RADIUS, math.sqrt(top) + 5)
        samples = 2 * math.ceil(reach / step) + 1
        return PhaseGrid(self.system, (samples - 1) / 2 * step, samples)


def ring_centres(n: int, separation: float) -> list[complex]:
    """n points on a circle, adjacent ones ``separation`` apart (n=1: origin)."""
    if n == 1:
        return [0j]
    radius = separation / (2 * math.sin(math.pi / n))
    return [radius * complex(math.cos(2 * math.pi * k / n), math.sin(2 * math.pi * k / n)) for k in range(n)]


def mu_nodes(model: MeasurementModel, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes α' and normalized weights realizing ∫_{Γ_j} μ_j(α') dα'."""
    region = model.region(j)
    if region.radius == 0 or model.width == 0:
        return np.array([region.centre]), np.array([1.0])
    half = min(region.radius, 4 * model.width)
    ax = np.linspace(-half, half, model.nodes) if model.nodes > 1 else np.zeros(1)
    offsets = (ax[:, None] + 1j * ax[None, :]).ravel()
    inside = np.abs(offsets) <= region.radius
    offsets = offsets[inside]
    weights = np.exp(-np.abs(offsets) ** 2 / (2 * model.width**2))
    return region.centre + offsets, weights / weights.sum()


def pointer_state(model: MeasurementModel, j: int) -> DensityOperator:
    """ρ_j = Σ_k w_k |α_k><α_k| over the μ_j quadrature nodes, trace 1."""
    region = model.region(j)
    if model.support_guard and region.radius < MIN_RADIUS:
        raise GeometryError(
            f"region {j} has radius {region.radius}; at least {MIN_RADIUS} keeps ρ_j inside it"
        )
    key = ("pointer", j)
    if key not in model._cache:
        nodes, weights = mu_nodes(model, j)
        vecs = np.array([fock.coherent_state(model.apparatus, a).amplitudes for a in nodes])
        mat = (vecs.T * weights) @ vecs.conj()
        mat = 0.5 * (mat + mat.conj().T)
        model._cache[key] = DensityOperator(model.apparatus, mat / np.trace(mat).real)
    return model._cache[key]


def post_measurement_state(model: MeasurementModel) -> DensityOperator:
    """Σ_i |c_i|² |B_i><B_i| ⊗ ρ_i on system ⊗ apparatus."""
    key = ("post",)
    if key not in model._cache:
        space = model.joint_space
        mat = np.zeros((space.dim, space.dim), dtype=complex)
        for i, (b, c) in enumerate(zip(model.basis, model.amplitudes)):
            proj = np.outer(b.amplitudes, b.amplitudes.conj())
            mat += abs(c) ** 2 * np.kron(proj, pointer_state(model, model.regions[i].label).matrix)
        model._cache[key] = DensityOperator(space, mat)
    return model._cache[key]


def apparatus_q(model: MeasurementModel, grid: PhaseGrid | None = None) -> PhaseDistribution:
    """Q of the apparatus reduced state."""
    grid = grid or model.apparatus_grid()
    reduced = post_measurement_state(model).partial_trace([1])
    return phasespace.q_grid(reduced, grid)


def pointer_probabilities(model: MeasurementModel, grid: PhaseGrid | None = None) -> np.ndarray:
    """P(j) = ∫_{Γ_j} Q_red,A d²α for every region, in region order."""
    q = apparatus_q(model, grid)
    return np.array([phasespace.region_probability(q, r.predicate()) for r in model.regions])


def pointer_probability(model: MeasurementModel, j: int, grid: PhaseGrid | None = None) -> float:
    q = apparatus_q(model, grid)
    return phasespace.region_probability(q, model.region(j).predicate())


def born_error(model: MeasurementModel, grid: PhaseGrid | None = None) -> float:
    """max_j |P(j) - |c_j|²|."""
    return float(np.max(np.abs(pointer_probabilities(model, grid) - model.born)))


def joint_grid(model: MeasurementModel, system_grid=None, apparatus_grid=None) -> PhaseGrid:
    sg = system_grid or model.system_grid()
    ag = apparatus_grid or model.apparatus_grid(step=0.25)
    return PhaseGrid(model.joint_space, (sg.radius[0], ag.radius[0]), (sg.samples[0], ag.samples[0]))


def joint_q(model: MeasurementModel, grid: PhaseGrid | None = None) -> PhaseDistribution:
    """Q_{S+A}(β, α) of the post-measurement state on a system × apparatus grid."""
    grid = grid or joint_grid(model)
    return phasespace.q_grid(post_measurement_state(model), grid)


def _mode_grid(grid: PhaseGrid, k: int) -> PhaseGrid:
    return PhaseGrid(grid.space.mode(k), grid.radius[k], grid.samples[k], grid.measure)


def marginal(joint: PhaseDistribution, keep: int) -> PhaseDistribution:
    """Integrate a two-mode distribution over the other mode's plane."""
    grid = joint.grid
    other = 1 - keep
    w = grid.mode_weights(other) * (2 * grid.space.hbar if grid.measure.value == "qp" else 1.0)
    if keep == 0:
        vals = np.tensordot(joint.values, w, axes=([2, 3], [0, 1]))
    else:
        vals = np.tensordot(w, joint.values, axes=([0, 1], [0, 1]))
    return PhaseDistribution(_mode_grid(grid, keep), joint.kind, vals, joint.kappa)


def system_marginal(joint: PhaseDistribution) -> PhaseDistribution:
    return marginal(joint, 0)


def apparatus_marginal(joint: PhaseDistribution) -> PhaseDistribution:
    return marginal(joint, 1)


def bayesian_update(model: MeasurementModel, joint: PhaseDistribution, j: int) -> PhaseDistribution:
    """Condition the joint Q on the apparatus being inside Γ_j and renormalize.

    Only apparatus regions can be conditioned on; there is deliberately no
    way to condition on a system phase point alone.
    """
    if joint.kind is not Kind.Q or joint.grid.space.modes != 2:
        raise ConfigError("bayesian_update expects the joint system-apparatus Q distribution")
    region = model.region(j)
    app_grid = _mode_grid(joint.grid, 1)
    frac = phasespace.region_fraction(app_grid, region.predicate())
    masked = joint.values * frac[None, None, :, :]
    prob = phasespace.integrate(PhaseDistribution(joint.grid, Kind.Q, masked))
    if prob <= MIN_PROBABILITY:
        raise ConditioningError(f"pointer region {j} has probability {prob:.3g}; cannot condition on it")
    return PhaseDistribution(joint.grid, Kind.Q, masked / prob)


def collapse_error(model: MeasurementModel, joint: PhaseDistribution, j: int) -> float:
    """Sup-norm distance between the conditioned system marginal and Q_{|B_j>}."""
    updated = bayesian_update(model, joint, j)
    sys_q = system_marginal(updated)
    basis_state = model.basis[model.index(j)]
    ref = phasespace.q_grid(fock.pure_density(basis_state), sys_q.grid, check=False)
    return float(np.max(np.abs(sys_q.values - ref.values)))


def eigenstate_q_overlap(space: ModeSpace, n: int, m: int, grid: PhaseGrid | None = None) -> float:
    """∫ min(Q_|n>, Q_|m>) d²α on a grid (single mode)."""
    if n == m:
        raise DomainError("overlap witness needs two different levels")
    if space.modes != 1:
        raise ConfigError("eigenstate overlap is defined for a single mode")
    for k in (n, m):
        if not 0 <= k < space.dims[0]:
            raise TruncationError(f"level {k} is outside truncation {space.dims[0]}")
    if grid is None:
        reach = max(phasespace.DEFAULT_RADIUS, math.sqrt(max(n, m)) + 6)
        samples = 2 * math.ceil(reach / 0.05) + 1
        grid = PhaseGrid(space, reach, samples)
    qn = phasespace.q_grid(fock.pure_density(fock.number_state(space, n)), grid, check=False)
    qm = phasespace.q_grid(fock.pure_density(fock.number_state(space, m)), grid, check=False)
    both = PhaseDistribution(grid, Kind.Q, np.minimum(qn.values, qm.values))
    return phasespace.integrate(both)

