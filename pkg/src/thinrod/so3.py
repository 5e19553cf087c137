"""Rotation-group primitives.

Axis-angle construction, logarithm, geodesic paths, exact integration of
dR/ds3 = R A for piecewise-constant antisymmetric generators, and geodesic
interpolation of rotation samples.  Generators are carried as axial vectors
(a with A x = a ^ x); propagation uses the exact exponential so every nodal
value stays on SO(3).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ValidationError

ORTHO_TOL = 1e-12


def skew(a: np.ndarray) -> np.ndarray:
    """Antisymmetric matrix of the axial vector a, so skew(a) @ x = a ^ x."""
    a = np.asarray(a, dtype=float)
    H = np.zeros(a.shape[:-1] + (3, 3))
    H[..., 0, 1] = -a[..., 2]
    H[..., 0, 2] = a[..., 1]
    H[..., 1, 0] = a[..., 2]
    H[..., 1, 2] = -a[..., 0]
    H[..., 2, 0] = -a[..., 1]
    H[..., 2, 1] = a[..., 0]
    return H


def unskew(A: np.ndarray) -> np.ndarray:
    """Axial vector of the antisymmetric part of A."""
    A = np.asarray(A, dtype=float)
    return 0.5 * np.stack(
        [
            A[..., 2, 1] - A[..., 1, 2],
            A[..., 0, 2] - A[..., 2, 0],
            A[..., 1, 0] - A[..., 0, 1],
        ],
        axis=-1,
    )


def frob(A: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.asarray(A) ** 2, axis=(-2, -1)))


def exp_batch(w: np.ndarray) -> np.ndarray:
    """Vectorized exp(skew(w)) over the leading dimensions of w."""
    w = np.asarray(w, dtype=float)
    t2 = np.sum(w * w, axis=-1)
    t = np.sqrt(t2)
    small = t < 1e-8
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(small, 1.0 - t2 / 6.0, np.sin(t) / np.where(small, 1.0, t))
        b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(t)) / np.where(small, 1.0, t2))
    H = skew(w)
    eye = np.broadcast_to(np.eye(3), H.shape)
    return eye + a[..., None, None] * H + b[..., None, None] * (H @ H)


def orthogonality_defect(R: np.ndarray) -> float:
    R = np.asarray(R, dtype=float)
    return float(np.max(frob(np.swapaxes(R, -1, -2) @ R - np.eye(3))))


def check_rotation(R: np.ndarray, tol: float = ORTHO_TOL) -> np.ndarray:
    """Validate R^T R = I and det R = 1 within tol; returns R as float array."""
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3):
        raise ValidationError(f"rotation must be 3x3, got shape {R.shape}")
    defect = orthogonality_defect(R)
    if defect > tol:
        raise ValidationError(f"matrix is not orthonormal: defect {defect:.3e} > {tol:.1e}")
    det = np.linalg.det(R)
    if np.max(np.abs(det - 1.0)) > tol:
        raise ValidationError("matrix has det != 1 (reflection or scaling)")
    return R


def project_rotation(M: np.ndarray) -> np.ndarray:
    """Special-orthogonal polar factor of M (nearest rotation in Frobenius norm)."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    d = np.sign(np.linalg.det(U @ Vt))
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def rodrigues(axis: np.ndarray, theta: float) -> np.ndarray:
    """Rotation by theta about a unit axis.

    R x = cos(theta) x + (1 - cos(theta)) <x, axis> axis + sin(theta) axis ^ x.
    """
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,):
        raise ValidationError("axis must be a 3-vector")
    n = np.linalg.norm(axis)
    if abs(n - 1.0) > 1e-8:
        raise ValidationError(f"axis must be unit length, got |axis| = {n:.12g}")
    theta = float(theta)
    c, s = np.cos(theta), np.sin(theta)
    return c * np.eye(3) + (1.0 - c) * np.outer(axis, axis) + s * skew(axis)


def log_rotation(R: np.ndarray) -> tuple[np.ndarray, float]:
    """Axis and angle with theta in [0, pi] such that rodrigues(axis, theta) = R.

    Slightly non-orthonormal input is projected to its polar factor first (a
    warning is emitted).  At theta = pi the axis comes from the dominant
    diagonal entry of (R + I)/2 with the first nonzero component positive.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValidationError("log_rotation expects a single 3x3 matrix")
    defect = orthogonality_defect(R)
    if defect > ORTHO_TOL:
        if defect > 1e-4:
            raise ValidationError(f"matrix too far from SO(3): defect {defect:.3e}")
        warnings.warn("input projected onto SO(3) before taking the logarithm")
        R = project_rotation(R)
    if np.linalg.det(R) < 0:
        raise ValidationError("matrix has det < 0, not a rotation")

    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    w = unskew(R)
    s = float(np.linalg.norm(w))        # = sin(theta) below the pi branch
    theta = float(np.arctan2(s, cos_theta))
    if s < 1e-12 and cos_theta > 0.0:
        axis = w / s if s > 0 else np.array([1.0, 0.0, 0.0])
        return axis, theta
    if np.pi - theta > 1e-4:
        return w / s, theta
    # theta ~ pi: the skew part degenerates; take the axis from the dominant
    # diagonal entry of the symmetrized (R + I)/2 (= axis axis^T + O((pi-theta)^2))
    # and polish with one power-iteration step.
    B = 0.25 * (R + R.T) + 0.5 * np.eye(3)
    i = int(np.argmax(np.diag(B)))
    axis = B[:, i] / np.sqrt(max(B[i, i], 1e-300))
    axis = B @ axis
    axis = axis / np.linalg.norm(axis)
    s = float(np.dot(unskew(R), axis))  # = sin(theta) once the axis sign is right
    if abs(s) > 1e-9:
        # strictly below pi the sign is determined by the skew part
        if s < 0:
            axis = -axis
            s = -s
    else:
        # both signs are valid at pi; fix the first nonzero component positive
        for comp in axis:
            if abs(comp) > 1e-12:
                if comp < 0:
                    axis = -axis
                break
        s = abs(s)
    theta = float(np.arctan2(s, (np.trace(R) - 1.0) / 2.0))
    return axis, min(theta, np.pi)


def geodesic_path(U0: np.ndarray, U1: np.ndarray, t: float) -> np.ndarray:
    """Point at parameter t of the geodesic from U0 to U1 in SO(3).

    U(t) = U0 rodrigues(axis, t * theta) with (axis, theta) = log(U0^T U1);
    the derivative has constant Frobenius norm sqrt(2) * theta.
    """
    U0 = check_rotation(U0)
    U1 = check_rotation(U1)
    axis, theta = log_rotation(U0.T @ U1)
    return U0 @ rodrigues(axis, float(t) * theta)


@dataclass(frozen=True)
class RotationField:
    """Piecewise-geodesic SO(3)-valued field on an arc-length grid.

    values[k+1] = values[k] @ exp(h_k skew(generator[k])) holds exactly by
    construction.  ``clamped`` records the R(0) = I boundary normalization.
    """

    grid: np.ndarray          # (M+1,) strictly increasing
    values: np.ndarray        # (M+1, 3, 3)
    generator: np.ndarray     # (M, 3) axial vectors, constant per interval
    clamped: bool = True

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValidationError("grid needs at least two nodes")
        if np.any(np.diff(grid) <= 0):
            raise ValidationError("grid must be strictly increasing (no zero-length intervals)")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "generator", np.asarray(self.generator, dtype=float))
        if self.values.shape != (grid.size, 3, 3):
            raise ValidationError("values shape must be (len(grid), 3, 3)")
        if self.generator.shape != (grid.size - 1, 3):
            raise ValidationError("generator shape must be (len(grid)-1, 3)")
        if not np.all(np.isfinite(self.generator)):
            raise ValidationError("generator must be finite")
        if self.clamped and frob(self.values[0] - np.eye(3)) > ORTHO_TOL:
            raise ValidationError("clamped field must start at the identity")

    @property
    def length(self) -> float:
        return float(self.grid[-1] - self.grid[0])

    def _locate(self, s: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.grid, s, side="right") - 1
        return np.clip(idx, 0, self.grid.size - 2)

    def at(self, s) -> np.ndarray:
        """Evaluate the field at arc lengths s (scalar or array)."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        idx = self._locate(s_arr)
        w = (s_arr - self.grid[idx])[:, None] * self.generator[idx]
        out = self.values[idx] @ exp_batch(w)
        if np.ndim(s) == 0:
            return out[0]
        return out.reshape(np.shape(s) + (3, 3))

    def generator_at(self, s) -> np.ndarray:
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = self.generator[self._locate(s_arr)]
        if np.ndim(s) == 0:
            return out[0]
        return out.reshape(np.shape(s) + (3,))

    def h1_seminorm_sq(self) -> float:
        """Integral of |||dR/ds3|||^2 = 2 |a|^2 over the grid (exact)."""
        h = np.diff(self.grid)
        return float(np.sum(2.0 * h * np.sum(self.generator**2, axis=1)))


def integrate_generator(grid: np.ndarray, generator: np.ndarray,
                        clamped: bool = True) -> RotationField:
    """Solve dR/ds3 = R skew(a) exactly for piecewise-constant a, R(0) = I."""
    grid = np.asarray(grid, dtype=float)
    generator = np.asarray(generator, dtype=float)
    if grid.ndim != 1 or generator.shape != (grid.size - 1, 3):
        raise ValidationError("generator must have one axial vector per grid interval")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("grid must be strictly increasing (no zero-length intervals)")
    if not np.all(np.isfinite(generator)):
        raise ValidationError("generator must be finite")
    values = _kernels.chain_rotations(
        np.ascontiguousarray(generator), np.ascontiguousarray(np.diff(grid))
    )
    return RotationField(grid=grid, values=values, generator=generator, clamped=clamped)


def interpolate_rotation_samples(samples: np.ndarray, length: float,
                                 clamped: bool = False,
                                 start: float = 0.0) -> RotationField:
    """Piecewise-geodesic field through rotation samples at uniform nodes of
    [start, start + length].

    The discrete H1 energy of the result is 2 sum theta_k^2 / h, which sits
    under the factor-4 bound 4 sum h ||| (R_{k+1}-R_k)/h |||^2 for every
    sample set (theta <= 4 sin(theta/2) on [0, pi]).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 2:
        samples = samples[None]
    if samples.ndim != 3 or samples.shape[0] < 1 or samples.shape[1:] != (3, 3):
        raise ValidationError("samples must be an (N+1, 3, 3) stack of rotations")
    if length <= 0:
        raise ValidationError("length must be positive")
    check_rotation(samples)
    n = samples.shape[0]
    if n == 1:
        grid = start + np.array([0.0, float(length)])
        values = np.repeat(samples, 2, axis=0)
        return RotationField(grid=grid, values=values,
                             generator=np.zeros((1, 3)), clamped=clamped)
    grid = start + np.linspace(0.0, float(length), n)
    h = float(length) / (n - 1)
    gen = np.empty((n - 1, 3))
    for k in range(n - 1):
        axis, theta = log_rotation(samples[k].T @ samples[k + 1])
        gen[k] = axis * (theta / h)
    return RotationField(grid=grid, values=samples.copy(), generator=gen, clamped=clamped)
