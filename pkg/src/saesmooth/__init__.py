"""Small area estimation of proportions with spatial mean and variance smoothing."""

__version__ = "0.1.0"

from .errors import ConvergenceWarning, ValidationError
from .graph import (
    AreaGraph,
    ScaledIcarPrecision,
    build_graph,
    icar_precision,
    sample_icar,
    scale_icar,
)

__all__ = [
    "__version__",
    "ValidationError",
    "ConvergenceWarning",
    "AreaGraph",
    "ScaledIcarPrecision",
    "build_graph",
    "icar_precision",
    "scale_icar",
    "sample_icar",
]
