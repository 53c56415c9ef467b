"""Spectral computations on quantum graphs with general vertex conditions."""

__version__ = "0.1.0"

from .conditions import (  # noqa: E402
    DIRICHLET,
    INFINITY,
    NEUMANN,
    CirclePoint,
    Delta,
    ExtendedDeltaAngle,
    GeneralAB,
    ProjectorForm,
    UnitaryForm,
)
from .errors import (  # noqa: E402
    GraphFileError,
    NumericalRefusal,
    QuantumGraphError,
    StructuralError,
    UnsupportedOracle,
)
from .graph import Edge, MetricGraph, PiecewisePotential, Vertex  # noqa: E402
from .secular import eigenfunctions, find_spectrum, lowest_eigenvalues  # noqa: E402

__all__ = [
    "DIRICHLET",
    "INFINITY",
    "NEUMANN",
    "CirclePoint",
    "Delta",
    "Edge",
    "ExtendedDeltaAngle",
    "GeneralAB",
    "GraphFileError",
    "MetricGraph",
    "NumericalRefusal",
    "PiecewisePotential",
    "ProjectorForm",
    "QuantumGraphError",
    "StructuralError",
    "UnitaryForm",
    "UnsupportedOracle",
    "Vertex",
    "eigenfunctions",
    "find_spectrum",
    "lowest_eigenvalues",
]
