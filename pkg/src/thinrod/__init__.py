"""Asymptotic one-dimensional models of thin curved elastic rods.

Subpackages cover rotation-group primitives (so3), rod geometry charts
(geometry), cross-section constants and the torsion function (section),
deformation decomposition (decompose), the four 1D limit models (limits),
the 3D St Venant-Kirchhoff energy with its Gamma-convergence check
(energy3d), and a JSON-configured command line (cli).
"""

from .errors import DegenerateSliceError, NumericsError, ThinrodError, ValidationError

__all__ = [
    "DegenerateSliceError",
    "NumericsError",
    "ThinrodError",
    "ValidationError",
]

__version__ = "0.1.0"
