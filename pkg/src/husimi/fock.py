"""Truncated Fock-space states and operators.

Basis convention: for several modes the joint basis index is the row-major
multi-index ``(n_0, n_1, ..., n_{M-1})``, i.e. mode 0 varies slowest. All
matrices are dense numpy arrays and are frozen (read-only) after
construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
from scipy import special

from .errors import ConfigError, ScaleError, TruncationError

MAX_DIM = 4096
DEFAULT_TRUNCATION = 32
COHERENT_TAIL_TOL = 1e-8
NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9


def _per_mode(value, modes, name, kind=float):
    if np.ndim(value) == 0:
        out = (kind(value),) * modes
    else:
        out = tuple(kind(v) for v in value)
    if len(out) != modes:
        raise ConfigError(f"{name} needs {modes} entries, got {len(out)}")
    return out


def _frozen(array, dtype=complex):
    arr = np.array(array, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModeSpace:
    """Bosonic modes truncated to Fock levels ``0..D-1``.

    ``truncation``, ``mass`` and ``omega`` accept a scalar (shared by all
    modes) or one value per mode; they are stored as per-mode tuples.
    """

    modes: int = 1
    truncation: int | Sequence[int] = DEFAULT_TRUNCATION
    hbar: float = 1.0
    mass: float | Sequence[float] = 1.0
    omega: float | Sequence[float] = 1.0

    def __post_init__(self):
        if int(self.modes) != self.modes or self.modes < 1:
            raise ConfigError(f"modes must be a positive integer, got {self.modes}")
        set_ = object.__setattr__
        set_(self, "modes", int(self.modes))
        set_(self, "truncation", _per_mode(self.truncation, self.modes, "truncation", int))
        set_(self, "mass", _per_mode(self.mass, self.modes, "mass"))
        set_(self, "omega", _per_mode(self.omega, self.modes, "omega"))
        set_(self, "hbar", float(self.hbar))
        if min(self.truncation) < 2:
            raise ConfigError("truncation must be at least 2 levels per mode")
        if self.hbar <= 0 or min(self.mass) <= 0 or min(self.omega) <= 0:
            raise ConfigError("hbar, mass and omega must be positive")
        if self.dim > MAX_DIM:
            raise ScaleError(f"Hilbert-space dimension {self.dim} exceeds the dense cap {MAX_DIM}")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.truncation

    @property
    def dim(self) -> int:
        return int(np.prod(self.truncation))

    def mode(self, k: int) -> "ModeSpace":
        """Single-mode space carrying mode ``k``'s constants."""
        _check_mode(self, k)
        return ModeSpace(1, self.truncation[k], self.hbar, self.mass[k], self.omega[k])

    def tensor(self, other: "ModeSpace") -> "ModeSpace":
        """Joint space ``self ⊗ other`` (modes of ``self`` first)."""
        if other.hbar != self.hbar:
            raise ConfigError("cannot combine spaces with different hbar")
        return ModeSpace(
            self.modes + other.modes,
            self.truncation + other.truncation,
            self.hbar,
            self.mass + other.mass,
            self.omega + other.omega,
        )

    def q_scale(self, k: int = 0) -> float:
        """Position per unit Re(alpha): sqrt(2 hbar / (m omega))."""
        return float(np.sqrt(2 * self.hbar / (self.mass[k] * self.omega[k])))

    def p_scale(self, k: int = 0) -> float:
        """Momentum per unit Im(alpha): sqrt(2 hbar m omega)."""
        return float(np.sqrt(2 * self.hbar * self.mass[k] * self.omega[k]))

    def describe(self) -> dict:
        return {
            "modes": self.modes,
            "truncation": list(self.truncation),
            "hbar": self.hbar,
            "mass": list(self.mass),
            "omega": list(self.omega),
        }


def _check_mode(space, mode):
    if not 0 <= mode < space.modes:
        raise IndexError(f"mode {mode} out of range for {space.modes} mode(s)")


@dataclass(frozen=True)
class StateVector:
    space: ModeSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.shape != (self.space.dim,):
            raise ConfigError(f"expected {self.space.dim} amplitudes, got shape {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1) > NORM_TOL:
            raise ConfigError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, space: ModeSpace, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ConfigError("cannot normalize the zero vector")
        return cls(space, amps / norm)

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class DensityOperator:
    space: ModeSpace
    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        n = self.space.dim
        if mat.shape != (n, n):
            raise ConfigError(f"expected a {n}x{n} matrix, got {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
            raise ConfigError("density operator is not Hermitian")
        tr = np.trace(mat).real
        if abs(tr - 1) > 1e-10:
            raise ConfigError(f"density operator trace is {tr!r}, expected 1")
        if np.linalg.eigvalsh(mat).min() < -PSD_TOL:
            raise ConfigError("density operator has negative eigenvalues")
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def mixture(cls, weights, components: Sequence["DensityOperator"]) -> "DensityOperator":
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < 0):
            raise ConfigError("mixture weights must be nonnegative")
        weights = weights / weights.sum()
        space = components[0].space
        mat = sum(w * c.matrix for w, c in zip(weights, components))
        return cls(space, mat)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def expect(self, op: "OperatorMatrix | np.ndarray") -> complex:
        mat = op.matrix if isinstance(op, OperatorMatrix) else op
        return complex(np.trace(self.matrix @ mat))

    def partial_trace(self, keep: Sequence[int]) -> "DensityOperator":
        """Reduced state on the modes listed in ``keep`` (in that order)."""
        space = self.space
        dims = space.dims
        keep = list(keep)
        for k in keep:
            _check_mode(space, k)
        drop = [k for k in range(space.modes) if k not in keep]
        tensor = self.matrix.reshape(dims + dims)
        m = space.modes
        letters = "abcdefghijklmnopqrstuvwxyz"
        row = [letters[k] for k in range(m)]
        col = [letters[k].upper() for k in range(m)]
        for k in drop:
            col[k] = row[k]
        out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
        reduced = np.einsum("".join(row) + "".join(col) + "->" + out, tensor)
        sub = ModeSpace(
            len(keep),
            tuple(dims[k] for k in keep),
            space.hbar,
            tuple(space.mass[k] for k in keep),
            tuple(space.omega[k] for k in keep),
        )
        d = sub.dim
        return DensityOperator(sub, reduced.reshape(d, d))


@dataclass(frozen=True)
class OperatorMatrix:
    space: ModeSpace
    matrix: np.ndarray
    label: str = field(default="")

    def __post_init__(self):
        mat = _frozen(self.matrix)
        n = self.space.dim
        if mat.shape != (n, n):
            raise ConfigError(f"expected a {n}x{n} matrix, got {mat.shape}")
        object.__setattr__(self, "matrix", mat)

    @property
    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.space, self.matrix.conj().T, f"({self.label})†")

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.space, self.matrix @ other.matrix, f"{self.label} {other.label}")
        if isinstance(other, StateVector):
            return self.matrix @ other.amplitudes
        return self.matrix @ other

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.space, self.matrix + other.matrix, f"{self.label} + {other.label}")

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.space, self.matrix - other.matrix, f"{self.label} - {other.label}")

    def __mul__(self, scalar) -> "OperatorMatrix":
        return OperatorMatrix(self.space, scalar * self.matrix, f"{scalar}*{self.label}")

    __rmul__ = __mul__

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)


def lowering_matrix(d: int) -> np.ndarray:
    """Single-mode annihilation matrix on ``d`` levels."""
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)


def embed(space: ModeSpace, mode: int, single: np.ndarray) -> np.ndarray:
    """Place a single-mode matrix on ``mode`` with identities elsewhere."""
    _check_mode(space, mode)
    factors = [single if k == mode else np.eye(d) for k, d in enumerate(space.dims)]
    return reduce(np.kron, factors)


def annihilation(space: ModeSpace, mode: int = 0) -> OperatorMatrix:
    _check_mode(space, mode)
    mat = embed(space, mode, lowering_matrix(space.dims[mode]))
    return OperatorMatrix(space, mat, f"a_{mode}")


def creation(space: ModeSpace, mode: int = 0) -> OperatorMatrix:
    _check_mode(space, mode)
    mat = embed(space, mode, lowering_matrix(space.dims[mode]).T)
    return OperatorMatrix(space, mat, f"a†_{mode}")


def number_operator(space: ModeSpace, mode: int = 0) -> OperatorMatrix:
    _check_mode(space, mode)
    n = np.diag(np.arange(space.dims[mode], dtype=complex))
    return OperatorMatrix(space, embed(space, mode, n), f"n_{mode}")


def position(space: ModeSpace, mode: int = 0) -> OperatorMatrix:
    a = annihilation(space, mode).matrix
    scale = np.sqrt(space.hbar / (2 * space.mass[mode] * space.omega[mode]))
    return OperatorMatrix(space, scale * (a + a.conj().T), f"q_{mode}")


def momentum(space: ModeSpace, mode: int = 0) -> OperatorMatrix:
    a = annihilation(space, mode).matrix
    scale = np.sqrt(space.hbar * space.mass[mode] * space.omega[mode] / 2)
    return OperatorMatrix(space, 1j * scale * (a.conj().T - a), f"p_{mode}")


def identity(space: ModeSpace) -> OperatorMatrix:
    return OperatorMatrix(space, np.eye(space.dim), "1")


def harmonic_hamiltonian(space: ModeSpace) -> OperatorMatrix:
    """sum_k hbar omega_k (n_k + 1/2)."""
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    for k in range(space.modes):
        n = number_operator(space, k).matrix
        mat += space.hbar * space.omega[k] * (n + 0.5 * np.eye(space.dim))
    return OperatorMatrix(space, mat, "H_harmonic")


def kerr_hamiltonian(space: ModeSpace, chi: float) -> OperatorMatrix:
    """hbar (omega n + chi n^2) summed over modes."""
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    for k in range(space.modes):
        n = number_operator(space, k).matrix
        mat += space.hbar * (space.omega[k] * n + chi * n @ n)
    return OperatorMatrix(space, mat, f"H_kerr(chi={chi})")


def _flat_index(space, occupations):
    return int(np.ravel_multi_index(tuple(occupations), space.dims))


def number_state(space: ModeSpace, occupations: int | Sequence[int]) -> StateVector:
    occ = _per_mode(occupations, space.modes, "occupations", int)
    for k, (n, d) in enumerate(zip(occ, space.dims)):
        if n < 0:
            raise ConfigError(f"occupation must be nonnegative, got {n}")
        if n >= d:
            raise TruncationError(f"occupation {n} on mode {k} needs truncation > {n}, have {d}")
    amps = np.zeros(space.dim, dtype=complex)
    amps[_flat_index(space, occ)] = 1.0
    return StateVector(space, amps)


def coherent_amplitudes(alpha, levels: int) -> np.ndarray:
    """Exact Fock amplitudes <n|alpha> for n < levels (not renormalized).

    ``alpha`` may be an array; the level index is appended as the last axis.
    The product recurrence c_n = c_{n-1} alpha / sqrt(n) avoids factorials.
    """
    alpha = np.asarray(alpha, dtype=complex)
    out = np.empty(alpha.shape + (levels,), dtype=complex)
    out[..., 0] = np.exp(-0.5 * np.abs(alpha) ** 2)
    for n in range(1, levels):
        out[..., n] = out[..., n - 1] * alpha / np.sqrt(n)
    return out


def coherent_tail_mass(alpha: complex, levels: int) -> float:
    """Probability weight of |alpha> on Fock levels >= ``levels``."""
    x = abs(alpha) ** 2
    if x == 0:
        return 0.0
    # P(Poisson(x) >= levels) is the regularized lower incomplete gamma.
    return float(special.gammainc(levels, x))


def required_truncation(alpha: complex, tol: float = COHERENT_TAIL_TOL) -> int:
    """Smallest per-mode truncation whose coherent tail mass is below ``tol``."""
    d = 2
    while coherent_tail_mass(alpha, d) >= tol:
        d += 1
    return d


def coherent_state(space: ModeSpace, alphas, tol: float = COHERENT_TAIL_TOL) -> StateVector:
    alphas = _per_mode(alphas, space.modes, "alphas", complex)
    factors = []
    for k, (alpha, d) in enumerate(zip(alphas, space.dims)):
        tail = coherent_tail_mass(alpha, d)
        if tail >= tol:
            need = required_truncation(alpha, tol)
            raise TruncationError(
                f"coherent amplitude {alpha} on mode {k} loses {tail:.3g} of its norm "
                f"at truncation {d}; need truncation >= {need}"
            )
        c = coherent_amplitudes(alpha, d)
        factors.append(c / np.linalg.norm(c))
    return StateVector(space, reduce(np.kron, factors))


def superposition(coefficients, states: Sequence[StateVector]) -> StateVector:
    amps = sum(c * s.amplitudes for c, s in zip(coefficients, states))
    return StateVector.normalized(states[0].space, amps)


def hermite_functions(levels: int, x, mass: float = 1.0, omega: float = 1.0, hbar: float = 1.0) -> np.ndarray:
    """Oscillator eigenfunctions <x|n> for n < levels, shape ``(levels, len(x))``.

    Uses the normalized three-term recurrence, which stays finite far past
    the point where H_n(x) / sqrt(2^n n!) would overflow.
    """
    x = np.asarray(x, dtype=float)
    xi = x * np.sqrt(mass * omega / hbar)
    out = np.empty((levels,) + x.shape)
    out[0] = (mass * omega / (np.pi * hbar)) ** 0.25 * np.exp(-0.5 * xi**2)
    if levels > 1:
        out[1] = np.sqrt(2.0) * xi * out[0]
    for n in range(1, levels - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * xi * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def pure_density(state: StateVector) -> DensityOperator:
    v = state.amplitudes
    return DensityOperator(state.space, np.outer(v, v.conj()))


def random_state(space: ModeSpace, rng: np.random.Generator, levels: int | None = None) -> StateVector:
    """Gaussian-random pure state supported on the lowest ``levels`` levels of each mode."""
    amps = rng.normal(size=space.dims) + 1j * rng.normal(size=space.dims)
    if levels is not None:
        for k in range(space.modes):
            idx = [slice(None)] * space.modes
            idx[k] = slice(levels, None)
            amps[tuple(idx)] = 0
    return StateVector.normalized(space, amps.ravel())


def random_density(
    space: ModeSpace, rng: np.random.Generator, rank: int | None = None, levels: int | None = None
) -> DensityOperator:
    """Random mixed state: Dirichlet-weighted mixture of ``rank`` random pure states."""
    rank = rank or space.dim
    vecs = [random_state(space, rng, levels).amplitudes for _ in range(rank)]
    weights = rng.dirichlet(np.ones(rank))
    mat = sum(w * np.outer(v, v.conj()) for w, v in zip(weights, vecs))
    mat = 0.5 * (mat + mat.conj().T)
    return DensityOperator(space, mat / np.trace(mat).real)
