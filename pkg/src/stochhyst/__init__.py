"""Heterogeneous 1D viscoelastic solids with dry friction: simulation and homogenization."""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .constitutive import DissipationParams, ElasticParams, Subdifferential  # noqa: E402
from .environment import Environment, ParameterTable, Seed, sample_environment  # noqa: E402
from .solver import Loading, MaxIterExceeded, Trajectory, run_trajectory  # noqa: E402

__all__ = [
    "BACKEND",
    "DissipationParams",
    "ElasticParams",
    "Environment",
    "Loading",
    "MaxIterExceeded",
    "ParameterTable",
    "Seed",
    "Subdifferential",
    "Trajectory",
    "__version__",
    "run_trajectory",
    "sample_environment",
]
