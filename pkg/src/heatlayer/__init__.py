"""Layer heat potentials on moving curves: asymptotics and time quadrature."""

from .geometry import (Circle, ConstantDensity, CosineDensity, EllipseDensity,
                       FunctionDensity, GaussianBumpDensity, MovingEllipse, Parabola,
                       ParametricCurve, Segment, local_frame)
from .oracle import OracleDisagreement, reference_model_integral, reference_potential
from .potentials import (Method, PotentialRequest, ResolutionWarning, eval_bridge,
                         eval_potential, heat_kernel, spatial_slice_double,
                         spatial_slice_single)

__version__ = "0.1.0"

__all__ = [
    "Circle", "ConstantDensity", "CosineDensity", "EllipseDensity", "FunctionDensity",
    "GaussianBumpDensity", "Method", "MovingEllipse", "OracleDisagreement", "Parabola",
    "ParametricCurve", "PotentialRequest", "ResolutionWarning", "Segment", "eval_bridge",
    "eval_potential", "heat_kernel", "local_frame", "reference_model_integral",
    "reference_potential", "spatial_slice_double", "spatial_slice_single",
]
