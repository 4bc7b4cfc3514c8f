"""Numerical realization and verification of a desingularization of
transversely intersecting n-planes in C^n by minimal model necks.

The package checks the admissibility hypotheses of a plane configuration,
solves the interaction system Gamma alpha = Lambda for the neck scales,
builds the model-neck and Green-graph pieces, matches them at leading order
through sphere Dirichlet-to-Neumann operators, and certifies the output
with mean-curvature, Jacobi-field and indicial-root checks.
"""

__version__ = "0.1.0"

from .config import Configuration, InteractionSystem, build_interaction_system
from .geometry import AmbientPoint, ImmersionPatch
from .green import GreenData
from .matching import SHExpansion
from .neck import NeckParams, NormalField
from .spectrum import IndicialTable, ModeSolution

__all__ = [
    "AmbientPoint",
    "Configuration",
    "GreenData",
    "ImmersionPatch",
    "IndicialTable",
    "InteractionSystem",
    "ModeSolution",
    "NeckParams",
    "NormalField",
    "SHExpansion",
    "__version__",
    "build_interaction_system",
]
