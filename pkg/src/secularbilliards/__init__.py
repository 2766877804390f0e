"""Secular dynamics and integrable billiards of the two-center and Lagrange problems.

The package covers the plane, the sphere and the hyperbolic plane:

* :mod:`~secularbilliards.geometry` -- surfaces, gnomonic charts, standardizing change, reflections
* :mod:`~secularbilliards.model` -- energies, the first integral ``D`` and the energy factorization
* :mod:`~secularbilliards.flow` -- Hamiltonian flows, adaptive integration, Poisson brackets
* :mod:`~secularbilliards.secular` -- Kepler elements and orbit-averaged (secular) systems
* :mod:`~secularbilliards.billiard` -- confocal walls and billiard runs
* :mod:`~secularbilliards.cli` -- scenario files and the command line
"""

from .billiard import BilliardRun, BounceRecord, Wall, confocal_wall, run_billiard
from .errors import (
    BilliardDegeneracy,
    ChartDomainError,
    KeplerConvergenceError,
    PeriodDetectionError,
    QuadratureError,
    RegionError,
    ScenarioError,
    SecularBilliardsError,
    SingularityError,
    StepSizeUnderflow,
)
from .flow import SystemSelector, Trajectory, first_integrals, integrate, poisson_bracket_fd
from .geometry import EUCLIDEAN, HYPERBOLIC, SPHERICAL, PhaseState, Space
from .model import FirstIntegrals, ModelParams
from .secular import AveragedSystem, OrbitElements, solve_kepler

__version__ = "0.1.0"

__all__ = [
    "EUCLIDEAN",
    "SPHERICAL",
    "HYPERBOLIC",
    "Space",
    "PhaseState",
    "ModelParams",
    "FirstIntegrals",
    "SystemSelector",
    "Trajectory",
    "integrate",
    "first_integrals",
    "poisson_bracket_fd",
    "AveragedSystem",
    "OrbitElements",
    "solve_kepler",
    "Wall",
    "BounceRecord",
    "BilliardRun",
    "confocal_wall",
    "run_billiard",
    "SecularBilliardsError",
    "SingularityError",
    "ChartDomainError",
    "RegionError",
    "QuadratureError",
    "PeriodDetectionError",
    "KeplerConvergenceError",
    "StepSizeUnderflow",
    "BilliardDegeneracy",
    "ScenarioError",
]
