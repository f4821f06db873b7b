"""Phase-space distributions on uniform quadrature grids.

Every distribution is stored as a density with respect to either ``d²α``
per mode (``Measure.ALPHA``, the canonical choice) or ``dq dp`` per mode
(``Measure.QP``). Since ``d²α = dq dp / 2ħ``, switching measure rescales the
values by exactly ``(2ħ)^M``.

Grid layout: values have shape ``(n_0, n_0, n_1, n_1, ...)``, i.e. row-major
over the axes in mode order with Re(α) before Im(α).
"""
from __future__ import annotations

import enum
import itertools
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy import special

from . import fock
from .errors import (
    ConfigError,
    DomainError,
    ExtentError,
    GridExtentWarning,
    MeasureError,
    UnsupportedError,
)
from .fock import DensityOperator, ModeSpace

NEGATIVITY_TOL = 1e-12
NORMALIZATION_TOL = 1e-6
DEFAULT_RADIUS = 6.0
DEFAULT_SAMPLES = 121
MAX_POLY_DEGREE = 8
# |W| below this fraction of max|W| counts as outside the support.
SUPPORT_THRESHOLD = 1e-8
MARGIN_WIDTHS = 5.0


class Measure(str, enum.Enum):
    ALPHA = "alpha"
    QP = "qp"


class Kind(str, enum.Enum):
    Q = "q"
    HUSIMI = "husimi"
    WIGNER = "wigner"


def _measure(value) -> Measure:
    try:
        return Measure(value)
    except ValueError:
        raise ConfigError(f"unknown measure {value!r}; use 'alpha' or 'qp'") from None


@dataclass(frozen=True)
class PhasePoint:
    """Phase-space point(s); ``alphas[k]`` is mode k's complex amplitude.

    ``alphas`` may carry trailing axes, in which case the point is a batch.
    """

    space: ModeSpace
    alphas: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=complex)
        if a.ndim == 0:
            a = a.reshape(1)
        if a.shape[0] != self.space.modes:
            raise ConfigError(f"need {self.space.modes} alpha value(s), got {a.shape[0]}")
        object.__setattr__(self, "alphas", a)

    @classmethod
    def from_qp(cls, space: ModeSpace, q, p) -> "PhasePoint":
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        if q.ndim == 0:
            q, p = q.reshape(1), p.reshape(1)
        alphas = [q[k] / space.q_scale(k) + 1j * p[k] / space.p_scale(k) for k in range(space.modes)]
        return cls(space, np.array(alphas))

    def q(self, mode: int = 0):
        return self.alphas[mode].real * self.space.q_scale(mode)

    def p(self, mode: int = 0):
        return self.alphas[mode].imag * self.space.p_scale(mode)


def simpson_weights(samples: int, step: float) -> np.ndarray:
    """Composite Simpson weights for an odd number of equispaced samples."""
    if samples < 3 or samples % 2 == 0:
        raise ConfigError(f"Simpson's rule needs an odd sample count >= 3, got {samples}")
    w = np.ones(samples)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * step / 3.0


@dataclass(frozen=True)
class PhaseGrid:
    """Tensor grid over Re(α), Im(α) of every mode, ``[-R, R]`` per axis."""

    space: ModeSpace
    radius: float | Sequence[float] = DEFAULT_RADIUS
    samples: int | Sequence[int] = DEFAULT_SAMPLES
    measure: Measure = Measure.ALPHA

    def __post_init__(self):
        m = self.space.modes
        object.__setattr__(self, "radius", fock._per_mode(self.radius, m, "radius"))
        object.__setattr__(self, "samples", fock._per_mode(self.samples, m, "samples", int))
        object.__setattr__(self, "measure", _measure(self.measure))
        if min(self.radius) <= 0:
            raise ConfigError("grid radius must be positive")
        for n in self.samples:
            if n < 3 or n % 2 == 0:
                raise ConfigError(f"grid samples per axis must be odd and >= 3, got {n}")

    def axis(self, mode: int = 0) -> np.ndarray:
        r, n = self.radius[mode], self.samples[mode]
        return np.linspace(-r, r, n)

    def step(self, mode: int = 0) -> float:
        return 2 * self.radius[mode] / (self.samples[mode] - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n for n in self.samples for _ in range(2))

    def mode_alphas(self, mode: int = 0) -> np.ndarray:
        """Complex α over mode ``mode``'s plane, shape ``(n, n)`` (Re index first)."""
        ax = self.axis(mode)
        return ax[:, None] + 1j * ax[None, :]

    def alphas(self) -> np.ndarray:
        """Complex α of every grid point, shape ``(M, *shape)``."""
        planes = [self.mode_alphas(k) for k in range(self.space.modes)]
        out = []
        for k, plane in enumerate(planes):
            shape = [1] * (2 * len(planes))
            shape[2 * k] = shape[2 * k + 1] = plane.shape[0]
            out.append(np.broadcast_to(plane.reshape(shape), self.shape))
        return np.array(out)

    def points(self) -> PhasePoint:
        return PhasePoint(self.space, self.alphas())

    def mode_weights(self, mode: int = 0) -> np.ndarray:
        w = simpson_weights(self.samples[mode], self.step(mode))
        return np.outer(w, w)

    def weights(self) -> np.ndarray:
        """Quadrature weights for d²α per mode."""
        w = np.ones(())
        for k in range(self.space.modes):
            w = np.multiply.outer(w, self.mode_weights(k))
        return w

    def cell_weights(self) -> np.ndarray:
        """Trapezoid weights (uniform cell areas) for d²α per mode."""
        w = np.ones(())
        for k in range(self.space.modes):
            t = np.full(self.samples[k], self.step(k))
            t[[0, -1]] *= 0.5
            w = np.multiply.outer(w, np.outer(t, t))
        return w

    def measure_factor(self, measure=None) -> float:
        """Jacobian turning a per-``measure`` density into one per d²α."""
        measure = self.measure if measure is None else _measure(measure)
        return (2 * self.space.hbar) ** self.space.modes if measure is Measure.QP else 1.0

    def with_measure(self, measure) -> "PhaseGrid":
        return replace(self, measure=_measure(measure))

    def describe(self) -> dict:
        return {
            "radius": list(self.radius),
            "samples": list(self.samples),
            "measure": self.measure.value,
            "layout": "row-major over (re_alpha, im_alpha) per mode, mode 0 first",
        }

    @classmethod
    def default(cls, space: ModeSpace, measure=Measure.ALPHA) -> "PhaseGrid":
        return cls(space, DEFAULT_RADIUS, DEFAULT_SAMPLES, measure)


@dataclass(frozen=True)
class PhaseDistribution:
    grid: PhaseGrid
    kind: Kind
    values: np.ndarray
    kappa: float | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ConfigError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "kind", Kind(self.kind))

    @property
    def measure(self) -> Measure:
        return self.grid.measure

    def to_measure(self, measure) -> "PhaseDistribution":
        measure = _measure(measure)
        if measure is self.measure:
            return self
        factor = self.grid.measure_factor() / self.grid.measure_factor(measure)
        return replace(self, grid=self.grid.with_measure(measure), values=self.values * factor)

    def scaled(self, factor: float) -> "PhaseDistribution":
        return replace(self, values=self.values * factor)

    def integrate(self) -> float:
        return integrate(self)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


# -- evaluation kernels ---------------------------------------------------


def coherent_grid_amplitudes(grid: PhaseGrid) -> list[np.ndarray]:
    """Per-mode coherent amplitudes over each mode's plane, shape ``(n_k², D_k)``."""
    dims = grid.space.dims
    return [fock.coherent_amplitudes(grid.mode_alphas(k).ravel(), d) for k, d in enumerate(dims)]


def coherent_form(matrix: np.ndarray, dims: Sequence[int], coeffs: Sequence[np.ndarray]) -> np.ndarray:
    """<c|X|c> for product vectors c = ⊗_k c_k, over a tensor grid of points.

    ``coeffs[k]`` has shape ``(N_k, D_k)``; the result has shape
    ``(N_0, ..., N_{M-1})``. Modes with the largest truncation are contracted
    first so intermediates stay small.
    """
    m = len(dims)
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    rows = [next(letters) for _ in range(m)]
    cols = [next(letters) for _ in range(m)]
    pts = [next(letters) for _ in range(m)]
    current = rows + cols
    tensor = matrix.reshape(tuple(dims) * 2)
    for k in sorted(range(m), key=lambda k: -dims[k]):
        out = [pts[k]] + [s for s in current if s not in (rows[k], cols[k])]
        spec = f"{''.join(current)},{pts[k]}{rows[k]},{pts[k]}{cols[k]}->{''.join(out)}"
        tensor = np.einsum(spec, tensor, coeffs[k].conj(), coeffs[k], optimize=True)
        current = out
    order = [current.index(p) for p in pts]
    return np.transpose(tensor, order)


def q_value(rho: DensityOperator, point: PhasePoint, measure=Measure.ALPHA):
    """Q function (1/π^M)<α|ρ|α> at one point or a batch of points.

    The coherent vector is the exact projection of the untruncated |α> onto
    the retained levels, so the value is exact for ρ at any |α|.
    """
    space = rho.space
    alphas = point.alphas
    batch = alphas.shape[1:]
    flat = alphas.reshape(space.modes, -1)
    vec = np.ones((flat.shape[1], 1), dtype=complex)
    for k, d in enumerate(space.dims):
        ck = fock.coherent_amplitudes(flat[k], d)
        vec = (vec[:, :, None] * ck[:, None, :]).reshape(flat.shape[1], -1)
    vals = np.einsum("ni,ij,nj->n", vec.conj(), rho.matrix, vec).real / np.pi**space.modes
    vals = vals / PhaseGrid(space, 1.0, 3, measure).measure_factor()
    vals = vals.reshape(batch)
    return float(vals[0]) if batch == (1,) else vals


def extent_leakage(rho: DensityOperator, radius: float | Sequence[float]) -> float:
    """Upper bound on the Q mass outside a grid of half-width ``radius``.

    Per mode, the Q mass outside the disk |α| > R depends only on the Fock
    populations: sum_n ρ_nn Γ(n+1, R²)/n!. The disk is inscribed in the grid
    square, and a union bound covers several modes.
    """
    space = rho.space
    radii = fock._per_mode(radius, space.modes, "radius")
    total = 0.0
    for k in range(space.modes):
        red = rho if space.modes == 1 else rho.partial_trace([k])
        pops = np.clip(np.diag(red.matrix).real, 0, None)
        n = np.arange(space.dims[k])
        total += float(np.sum(pops * special.gammaincc(n + 1, radii[k] ** 2)))
    return total


def check_extent(rho: DensityOperator, grid: PhaseGrid, tol: float = NORMALIZATION_TOL) -> float:
    leak = extent_leakage(rho, grid.radius)
    if leak > tol:
        warnings.warn(
            f"up to {leak:.2e} of the Q mass lies outside the grid (radius {grid.radius})",
            GridExtentWarning,
            stacklevel=3,
        )
    return leak


def q_grid(rho: DensityOperator, grid: PhaseGrid, check: bool = True) -> PhaseDistribution:
    space = rho.space
    if check:
        check_extent(rho, grid)
    coeffs = coherent_grid_amplitudes(grid)
    vals = coherent_form(rho.matrix, space.dims, coeffs).real / np.pi**space.modes
    vals = vals.reshape(grid.shape) / grid.measure_factor()
    return PhaseDistribution(grid, Kind.Q, vals)


def _require_single_mode(space, what):
    if space.modes != 1:
        raise UnsupportedError(f"{what} is implemented for a single mode only (got M={space.modes})")


def _wigner_alpha(matrix: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Wigner density per d²α from the Fock-basis Laguerre expansion."""
    d = matrix.shape[0]
    b = 4 * np.abs(alpha) ** 2
    two_alpha = 2 * alpha
    lgam = special.gammaln(np.arange(d) + 1)
    acc = np.zeros(alpha.shape)
    for m in range(d):
        sign = -1.0 if m % 2 else 1.0
        if matrix[m, m] != 0:
            acc += sign * matrix[m, m].real * special.eval_genlaguerre(m, 0, b)
        power = np.ones_like(two_alpha)
        for n in range(m + 1, d):
            power = power * two_alpha
            if matrix[m, n] == 0:
                continue
            ratio = np.exp(0.5 * (lgam[m] - lgam[n]))
            term = matrix[m, n] * power * special.eval_genlaguerre(m, n - m, b)
            acc += 2 * sign * ratio * term.real
    return 2 / np.pi * np.exp(-0.5 * b) * acc


def wigner_value(rho: DensityOperator, point: PhasePoint, measure=Measure.ALPHA):
    """Wigner function at one point or a batch (single mode only)."""
    space = rho.space
    _require_single_mode(space, "the Wigner function")
    alpha = point.alphas[0]
    vals = _wigner_alpha(rho.matrix, alpha)
    vals = vals / PhaseGrid(space, 1.0, 3, measure).measure_factor()
    return float(vals[0]) if alpha.shape == (1,) else vals


def wigner_grid(rho: DensityOperator, grid: PhaseGrid) -> PhaseDistribution:
    _require_single_mode(rho.space, "the Wigner function")
    vals = _wigner_alpha(rho.matrix, grid.mode_alphas(0)) / grid.measure_factor()
    return PhaseDistribution(grid, Kind.WIGNER, vals)


def _wavepacket_amplitudes(space: ModeSpace, alpha: np.ndarray, kappa: float) -> np.ndarray:
    """Fock amplitudes <n|g> of Gaussian packets of stiffness m·kappa centred at α.

    Computed by trapezoidal quadrature of the position-space overlap, which
    is spectrally accurate for these smooth, rapidly decaying integrands.
    """
    hbar, m, w = space.hbar, space.mass[0], space.omega[0]
    d = space.dims[0]
    q0 = alpha.real * space.q_scale(0)
    p0 = alpha.imag * space.p_scale(0)
    osc = np.sqrt(hbar / (m * w))
    width = np.sqrt(hbar / (m * kappa))
    turning = np.sqrt(2 * d + 1) * osc + 8 * osc
    lo = min(-turning, q0.min() - 10 * width)
    hi = max(turning, q0.max() + 10 * width)
    kmax = np.abs(p0).max() / hbar + np.sqrt(2 * d + 1) / osc + 4 / width
    dx = min(0.25 / kmax, width / 8, osc / 8)
    x = np.arange(lo, hi + dx, dx)
    phi = fock.hermite_functions(d, x, m, w, hbar)
    out = np.empty(q0.shape + (d,), dtype=complex)
    norm = (m * kappa / (np.pi * hbar)) ** 0.25
    for start in range(0, q0.size, 512):
        sl = slice(start, start + 512)
        g = norm * np.exp(
            -m * kappa * (x[None, :] - q0[sl, None]) ** 2 / (2 * hbar) + 1j * p0[sl, None] * x[None, :] / hbar
        )
        out[sl] = g @ phi.T * dx
    return out


def husimi_value(rho: DensityOperator, point: PhasePoint, kappa: float, measure=Measure.ALPHA):
    """Husimi function with smoothing stiffness ``kappa`` (single mode).

    Equal to (1/π)<g|ρ|g> for the minimum-uncertainty packet g of stiffness
    m·kappa centred at the point; per d²α by default. ``kappa = omega``
    reproduces :func:`q_value`.
    """
    space = rho.space
    _require_single_mode(space, "the Husimi function")
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    alpha = point.alphas[0]
    flat = alpha.ravel()
    amps = _wavepacket_amplitudes(space, flat, kappa)
    vals = np.einsum("ni,ij,nj->n", amps.conj(), rho.matrix, amps).real / np.pi
    vals = vals.reshape(alpha.shape) / PhaseGrid(space, 1.0, 3, measure).measure_factor()
    return float(vals[0]) if alpha.shape == (1,) else vals


def husimi_grid(rho: DensityOperator, grid: PhaseGrid, kappa: float) -> PhaseDistribution:
    pts = grid.points()
    vals = husimi_value(rho, PhasePoint(rho.space, pts.alphas), kappa, grid.measure)
    return PhaseDistribution(grid, Kind.HUSIMI, vals, kappa=kappa)


def smoothing_kernels(grid: PhaseGrid, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature-weighted Gaussian kernels along Re α and Im α.

    In α coordinates the smoothing Gaussian is exp(-2s x² - 2y²/s) with
    s = kappa/omega; the 2/π prefactor makes it unit-mass.
    """
    s = kappa / grid.space.omega[0]
    ax = grid.axis(0)
    w = simpson_weights(grid.samples[0], grid.step(0))
    diff = ax[:, None] - ax[None, :]
    kx = np.exp(-2 * s * diff**2) * w[None, :]
    ky = np.exp(-2 / s * diff**2) * w[None, :]
    return kx * (2 / np.pi), ky


def kernel_widths(space: ModeSpace, kappa: float) -> tuple[float, float]:
    """Standard deviations of the smoothing Gaussian along Re α and Im α."""
    s = kappa / space.omega[0]
    return 0.5 / np.sqrt(s), 0.5 * np.sqrt(s)


def weierstrass_transform(wigner, kappa: float) -> PhaseDistribution:
    """Gaussian-smooth a Wigner grid into the Husimi(kappa) grid.

    Raises :class:`ExtentError` unless the significant support of the Wigner
    function sits at least five kernel widths inside the grid edge.
    """
    if wigner.kind is not Kind.WIGNER:
        raise ConfigError(f"expected a Wigner distribution, got {wigner.kind.value}")
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    grid = wigner.grid
    _require_single_mode(grid.space, "the Weierstrass transform")
    vals = wigner.values * grid.measure_factor()
    ax = grid.axis(0)
    big = np.abs(vals) > SUPPORT_THRESHOLD * np.abs(vals).max()
    sx, sy = kernel_widths(grid.space, kappa)
    rows, cols = np.nonzero(big)
    reach_x = np.abs(ax[rows]).max() + MARGIN_WIDTHS * sx
    reach_y = np.abs(ax[cols]).max() + MARGIN_WIDTHS * sy
    if max(reach_x, reach_y) > grid.radius[0] + 1e-12:
        raise ExtentError(
            f"grid radius {grid.radius[0]} too small: support plus {MARGIN_WIDTHS:g} kernel widths "
            f"reaches {max(reach_x, reach_y):.3f}"
        )
    kx, ky = smoothing_kernels(grid, kappa)
    out = kx @ vals @ ky.T
    return PhaseDistribution(grid, Kind.HUSIMI, out / grid.measure_factor(), kappa=kappa)


# -- integrals ------------------------------------------------------------


def integrate(dist: PhaseDistribution) -> float:
    """Simpson integral of the density over its own measure."""
    weights = dist.grid.weights() * dist.grid.measure_factor()
    return float(np.sum(weights * dist.values))


def polynomial_degree(f) -> int | None:
    return getattr(f, "degree", None)


def phase_expectation(dist: PhaseDistribution, f) -> float | complex:
    """∫ f · dist; ``f`` is a PhasePolynomial or a callable on a batched PhasePoint."""
    grid = dist.grid
    pts = grid.points()
    degree = polynomial_degree(f)
    if degree is not None:
        if degree > MAX_POLY_DEGREE:
            raise DomainError(f"polynomial degree {degree} exceeds the cap {MAX_POLY_DEGREE}")
        need = 6 + degree / 2
        if min(grid.radius) < need:
            warnings.warn(
                f"grid radius {min(grid.radius)} below {need} recommended for degree {degree}",
                GridExtentWarning,
                stacklevel=2,
            )
        fvals = f.evaluate(pts)
    else:
        fvals = f(pts)
    weights = grid.weights() * grid.measure_factor()
    total = np.sum(weights * dist.values * np.asarray(fvals))
    if np.iscomplexobj(total) and total.imag != 0:
        return complex(total)
    return float(np.real(total))


def region_fraction(grid: PhaseGrid, region: Callable[[PhasePoint], np.ndarray], modes=None) -> np.ndarray:
    """Fraction of each grid point's cell lying inside ``region``.

    ``region`` receives a batched :class:`PhasePoint` and returns booleans.
    Each cell is probed on a sub-lattice (4 per axis for the first listed
    mode, 2 for further ones), so points on a region boundary get partial
    weight instead of all-or-nothing. ``modes`` restricts the probing to the
    modes the predicate depends on.
    """
    modes = list(range(grid.space.modes)) if modes is None else list(modes)
    base = grid.alphas()
    offsets = []
    for i, k in enumerate(modes):
        s = 4 if i == 0 else 2
        sub = (np.arange(s) + 0.5) / s - 0.5
        h = grid.step(k)
        offsets.append([(k, dx * h + 1j * dy * h) for dx in sub for dy in sub])
    frac = np.zeros(grid.shape)
    count = 0
    for combo in itertools.product(*offsets):
        shifted = base.copy()
        for k, off in combo:
            shifted[k] = shifted[k] + off
        frac += np.asarray(region(PhasePoint(grid.space, shifted)), dtype=bool)
        count += 1
    return frac / count


def region_probability(dist: PhaseDistribution, region: Callable[[PhasePoint], np.ndarray], modes=None) -> float:
    """Q-probability of ``region`` (see :func:`region_fraction`).

    Uses trapezoid cell weights: partial cells only make sense against a
    uniform cell area, which Simpson's alternating weights do not provide.
    """
    if dist.kind is not Kind.Q:
        raise ConfigError(f"region probabilities need a Q distribution, got {dist.kind.value}")
    frac = region_fraction(dist.grid, region, modes)
    weights = dist.grid.cell_weights() * dist.grid.measure_factor()
    return float(np.sum(frac * weights * dist.values))


def disk(centre: complex, radius: float, mode: int = 0) -> Callable[[PhasePoint], np.ndarray]:
    """Region predicate |α_mode - centre| <= radius."""

    def inside(point: PhasePoint) -> np.ndarray:
        return np.abs(point.alphas[mode] - centre) <= radius

    return inside


def q_centroid(dist: PhaseDistribution, mode: int = 0) -> complex:
    """Mean of α_mode under the distribution."""
    return complex(phase_expectation(dist, lambda pts: pts.alphas[mode]))
