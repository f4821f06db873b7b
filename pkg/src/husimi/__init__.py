"""Husimi Q-function toolkit: Fock-space states, phase-space distributions,
operator orderings, marginals, dynamics and a pointer-measurement model."""
from . import dynamics, fock, marginals, measurement, ordering, phasespace
from .errors import (
    ConditioningError,
    ConfigError,
    DomainError,
    ExtentError,
    GeometryError,
    GridExtentWarning,
    GuardError,
    HusimiError,
    MeasureError,
    OrderingError,
    ParseError,
    SamplingError,
    ScaleError,
    TruncationError,
    UnsupportedError,
)
from .fock import DensityOperator, ModeSpace, OperatorMatrix, StateVector
from .phasespace import Kind, Measure, PhaseDistribution, PhaseGrid, PhasePoint, q_grid, wigner_grid
from .ordering import LadderPolynomial, Ordering, PhasePolynomial, parse_polynomial
from .dynamics import Trajectory, evolve
from .marginals import SpatialProfile
from .measurement import MeasurementModel, PointerRegion

__version__ = "0.1.0"
