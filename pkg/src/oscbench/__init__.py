"""oscbench: oscillation, weight, and commutator numerics on dyadic grids."""

from ._backend import COMPILED_AVAILABLE, backend_name
from .grid import (
    CellPairSet,
    CellSet,
    Cube,
    DomainError,
    Grid,
    GridFunction,
    GridMismatchError,
    integrate,
    lq_norm,
    mollify,
)
from .oscillation import CubeFamily, MedianInterval, bmo_norm

__version__ = "0.1.0"

__all__ = [
    "COMPILED_AVAILABLE",
    "CellPairSet",
    "CellSet",
    "Cube",
    "CubeFamily",
    "DomainError",
    "Grid",
    "GridFunction",
    "GridMismatchError",
    "MedianInterval",
    "backend_name",
    "bmo_norm",
    "integrate",
    "lq_norm",
    "mollify",
    "__version__",
]
