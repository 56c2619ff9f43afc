"""ec3lab: spectral-gap laboratory for adiabatic optimization on random EC3 instances."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    Assignment,
    CleanResult,
    CouplingData,
    Instance,
    InstanceStats,
    assignment_for,
    clean,
    cost,
    couplings,
    instance_stats,
    random_instance,
    read_instance,
    write_instance,
)
from .dpll import SolutionSet, hamming, solve_all  # noqa: F401
from .errors import Ec3Error  # noqa: F401
