"""Exception types shared across the package.

The CLI maps ValidationError to exit code 2 and NumericsError to exit code 3.
"""


class ThinrodError(Exception):
    pass


class ValidationError(ThinrodError):
    """Bad input: shapes, domains, inconsistent configuration."""


class NumericsError(ThinrodError):
    """A computation could not be completed (non-convergence, singular system)."""


class DegenerateSliceError(NumericsError):
    """Slice-averaged deformation gradient has rank < 2."""
