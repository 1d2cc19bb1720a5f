"""Dynamical symplectic reduced basis methods on the orthosymplectic manifold."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    CoordinateBreakdownError,
    DegenerateFactorError,
    DimensionError,
    InitializationError,
    ModelError,
    OverapproximationError,
    StepError,
    SymplecticityError,
    SympdrbError,
    TangentError,
)
from .symplectic import (
    OrthosymplecticBasis,
    ReducedState,
    apply_J,
    check_orthosymplectic,
    orthosymplectic_from_complex_svd,
    random_orthosymplectic,
)
from .cayley import LowRankFactors, cayley_apply, inverse_tangent_map, retract
from .models import LinearOscillatorModel, OscillatorConfig, ParameterGrid, SWEConfig, SWEModel
from .flow import basis_velocity, coefficient_rhs, tangent_projection
from .integrators import SchemeConfig, full_order_solve, integrate, partitioned_step

__all__ = [
    "ConfigError", "CoordinateBreakdownError", "DegenerateFactorError", "DimensionError",
    "InitializationError", "ModelError", "OverapproximationError", "StepError",
    "SymplecticityError", "SympdrbError", "TangentError",
    "OrthosymplecticBasis", "ReducedState", "apply_J", "check_orthosymplectic",
    "orthosymplectic_from_complex_svd", "random_orthosymplectic",
    "LowRankFactors", "cayley_apply", "inverse_tangent_map", "retract",
    "LinearOscillatorModel", "OscillatorConfig", "ParameterGrid", "SWEConfig", "SWEModel",
    "basis_velocity", "coefficient_rhs", "tangent_projection",
    "SchemeConfig", "full_order_solve", "integrate", "partitioned_step",
]
