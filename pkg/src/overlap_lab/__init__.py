"""overlap_lab: a numerical laboratory for topologically regularized models.

Subpackages and modules:

- autodiff: tape-based reverse-mode differentiation on float64 arrays
- ph: persistent homology (filtrations, reduction, gradients, distances)
- model: bilinear entanglement + neural ODE stack with a topological loss
- stats: detection and falsification statistics
- synth: deterministic synthetic two-modality data
- harness: experiment orchestration (proof-of-concept runs, sweeps, stress)
- cli: command-line entry points
"""

__version__ = "0.1.0"

from . import autodiff  # noqa: F401
from . import harness  # noqa: F401
from . import model  # noqa: F401
from . import optim  # noqa: F401
from . import stats  # noqa: F401
from . import synth  # noqa: F401
from .exceptions import (  # noqa: F401
    CapacityError,
    DegenerateDataError,
    FitError,
    InsufficientPointsError,
    NumericError,
    OverlapLabError,
    ParameterError,
    ShapeError,
    StateError,
    StiffnessError,
    SweepError,
)
