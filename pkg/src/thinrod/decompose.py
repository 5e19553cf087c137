"""Decomposition of a sampled 3D rod deformation into an elementary
deformation plus warping:

    v(s) = V(s3) + R(s3) (s1 n1 + s2 n2) + vbar(s)

with V the section mean of v, R a rotation field fitted per axial slice
(special-orthogonal polar factor of the slice-averaged deformation gradient)
and interpolated geodesically, and vbar the remainder.  Reports the scaling
ratios of the five decomposition estimates against
D = | dist(grad v, SO(3)) |_L2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature, so3
from .errors import DegenerateSliceError, ValidationError
from .fields import DeformationField3D, cell_measures, dist_to_so3, gradient_xv
from .limits import integrate_rotated_tangent


def section_means(field: DeformationField3D) -> np.ndarray:
    """Per axial node, the area-weighted section mean of v (A, 3)."""
    sec = field.chart.section
    return sec.integrate_nodal(np.moveaxis(field.values, 0, 1)) / sec.area


def default_slice_count(length: float, delta: float) -> int:
    """Midpoint of the admissible window [2L/(3 delta), L/delta]."""
    return max(1, round(0.75 * length / delta))


def fit_slice_rotations(field: DeformationField3D, n_slices: int | None = None):
    """Rotation samples at the uniform slice boundaries alpha_k = k L / N.

    Each sample is the special-orthogonal polar factor of the volume-averaged
    deformation gradient of the slice starting at alpha_k; the last boundary
    repeats the last slice (N + 1 samples for N slices).
    """
    grid = field.axial_grid
    length = float(grid[-1] - grid[0])
    n = n_slices or default_slice_count(length, field.delta)
    lo = int(np.ceil(2.0 * length / (3.0 * field.delta)))
    hi = int(length / field.delta)
    if n_slices is None and lo <= hi:
        n = min(max(n, lo), max(hi, 1))
    if n < 1:
        raise ValidationError("need at least one slice")
    edges = grid[0] + length * np.arange(n + 1) / n
    counts = np.array([np.sum((grid >= a - 1e-12) & (grid <= b + 1e-12))
                       for a, b in zip(edges[:-1], edges[1:])])
    if np.any(counts < 2):
        raise ValidationError(
            f"slice count {n} leaves slices with fewer than 2 axial nodes")

    F = gradient_xv(field)                         # (A, T, 3, 3)
    meas = cell_measures(field, weighted=True)     # (A, T)
    samples = np.empty((n + 1, 3, 3))
    for k in range(n):
        a, b = edges[k], edges[k + 1]
        mask = (grid >= a - 1e-12) & (grid <= b + 1e-12)
        w = meas[mask]
        G = np.einsum("at,atij->ij", w, F[mask]) / np.sum(w)
        U, sig, Vt = np.linalg.svd(G)
        if sig[1] <= 1e-12 * max(sig[0], 1e-300):
            raise DegenerateSliceError(
                f"slice [{a:g}, {b:g}] has a rank-deficient averaged gradient")
        d = np.sign(np.linalg.det(U @ Vt))
        samples[k] = U @ np.diag([1.0, 1.0, d]) @ Vt
    samples[n] = samples[n - 1]
    return samples, edges


@dataclass
class EstimateNorms:
    """Left-hand sides of the decomposition estimates and the distance D."""

    warping_l2: float
    warping_grad_l2: float
    rotation_rate_l2: float
    line_rate_gap_l2: float
    gradient_gap_l2: float
    dist_l2: float
    gradient_l2: float = 1.0

    def ratios(self, delta: float) -> dict:
        D = self.dist_l2
        # exactly rigid fields report zero ratios; the floor absorbs roundoff
        if D <= 1e-12 * max(self.gradient_l2, 1e-300):
            return {k: 0.0 for k in ("warping", "warping_grad", "rotation_rate",
                                     "line_rate_gap", "gradient_gap")}
        return {
            "warping": self.warping_l2 / (delta * D),
            "warping_grad": self.warping_grad_l2 / D,
            "rotation_rate": self.rotation_rate_l2 * delta**2 / D,
            "line_rate_gap": self.line_rate_gap_l2 * delta / D,
            "gradient_gap": self.gradient_gap_l2 / D,
        }


@dataclass
class ElementaryDecomposition:
    field: DeformationField3D
    V: np.ndarray                      # (A, 3)
    rotation: so3.RotationField
    warping: np.ndarray                # (A, P, 3)
    VB: np.ndarray
    VS: np.ndarray
    norms: EstimateNorms

    def reconstruct(self) -> np.ndarray:
        """V + R (s1 n1 + s2 n2) + vbar at the grid nodes (exact inverse)."""
        return _elementary_part(self.field, self.V, self.rotation) + self.warping


def _elementary_part(field: DeformationField3D, V, rot: so3.RotationField):
    sec = field.chart.section
    grid = field.axial_grid
    R = rot.at(grid)                                       # (A, 3, 3)
    n1 = field.chart.frame.n1(grid)
    n2 = field.chart.frame.n2(grid)
    arm = (field.delta * sec.nodes[None, :, 0, None] * n1[:, None, :]
           + field.delta * sec.nodes[None, :, 1, None] * n2[:, None, :])
    return V[:, None, :] + np.einsum("aij,apj->api", R, arm)


def decompose(field: DeformationField3D, clamp_left: bool = False,
              n_slices: int | None = None) -> ElementaryDecomposition:
    """Split the field into elementary deformation plus warping and compute
    the estimate norms."""
    samples, edges = fit_slice_rotations(field, n_slices)
    if clamp_left:
        samples = samples.copy()
        samples[0] = np.eye(3)
    length = float(edges[-1] - edges[0])
    rot = so3.interpolate_rotation_samples(samples, length, clamped=clamp_left,
                                           start=float(edges[0]))

    V = section_means(field)
    warping = field.values - _elementary_part(field, V, rot)
    VB, VS = split_bending_stretching(V, rot, field.chart.line, field.axial_grid)
    norms = _estimate_norms(field, V, rot, warping)
    return ElementaryDecomposition(field=field, V=V, rotation=rot, warping=warping,
                                   VB=VB, VS=VS, norms=norms)


def split_bending_stretching(V: np.ndarray, rot: so3.RotationField, line,
                             axial_grid) -> tuple[np.ndarray, np.ndarray]:
    """V_B = V(0) + int_0^{s3} R t (Gauss per interval on the exact
    piecewise-geodesic rotations); V_S = V - V_B with V_S(0) = 0."""
    VB = V[0] + integrate_rotated_tangent(rot, line, np.asarray(axial_grid, float))
    return VB, V - VB


def _estimate_norms(field, V, rot, warping) -> EstimateNorms:
    sec = field.chart.section
    grid = field.axial_grid
    delta = field.delta
    tau = quadrature.trapezoid_weights(grid)

    # D over the physical rod (det-weighted); field norms over Omega_delta
    F = gradient_xv(field)
    meas_phys = cell_measures(field, weighted=True)
    meas_flat = cell_measures(field, weighted=False)
    D = float(np.sqrt(np.sum(meas_phys * dist_to_so3(F) ** 2)))

    # |vbar|_L2(Omega_delta): exact P1 mass quadrature per triangle,
    # int (sum u_i phi_i)^2 = area/12 (sum u_i^2 + (sum u_i)^2)
    tri = sec.tris
    comp = warping[:, tri, :]                              # (A, T, 3, 3)
    sum_sq = np.sum(comp**2, axis=(2, 3))
    sq_sum = np.sum(np.sum(comp, axis=2) ** 2, axis=2)
    int_sec = (sec.tri_area[None, :] / 12.0 * (sum_sq + sq_sum)).sum(axis=1)
    warping_l2 = float(np.sqrt(delta**2 * np.sum(tau * int_sec)))

    # |grad_s vbar|: P1 section gradients (note d/ds_alpha = delta^-1 d/dS)
    # and axial finite differences
    d1 = np.einsum("ki,akiv->akv", sec.grads[:, :, 0], comp) / delta
    d2 = np.einsum("ki,akiv->akv", sec.grads[:, :, 1], comp) / delta
    d3 = np.gradient(warping, grid, axis=0, edge_order=2)[:, tri, :].mean(axis=2)
    g2 = np.sum(d1**2 + d2**2 + d3**2, axis=-1)
    warping_grad_l2 = float(np.sqrt(np.sum(meas_flat * g2)))

    rotation_rate_l2 = float(np.sqrt(rot.h1_seminorm_sq()))

    t = field.chart.line.tangent(grid)
    Rt = np.einsum("aij,aj->ai", rot.at(grid), t)
    dV = np.gradient(V, grid, axis=0, edge_order=2)
    line_rate_gap_l2 = float(np.sqrt(np.sum(tau * np.sum((dV - Rt) ** 2, axis=1))))

    Rg = rot.at(grid)
    gap = np.sum((F - Rg[:, None]) ** 2, axis=(-2, -1))
    gradient_gap_l2 = float(np.sqrt(np.sum(meas_flat * gap)))
    gradient_l2 = float(np.sqrt(np.sum(meas_flat * np.sum(F**2, axis=(-2, -1)))))

    return EstimateNorms(warping_l2=warping_l2, warping_grad_l2=warping_grad_l2,
                         rotation_rate_l2=rotation_rate_l2,
                         line_rate_gap_l2=line_rate_gap_l2,
                         gradient_gap_l2=gradient_gap_l2, dist_l2=D,
                         gradient_l2=gradient_l2)


def estimate_report(dec: ElementaryDecomposition) -> dict:
    """The five scaling ratios of the decomposition estimates (dict)."""
    return dec.norms.ratios(dec.field.delta)
