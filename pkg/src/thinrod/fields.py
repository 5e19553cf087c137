"""Sampled 3D deformation fields of the rod and their gradients.

A field stores values of v at the tensor grid (section mesh nodes) x (axial
nodes); the section coordinates are the reference ones (S1, S2), the physical
point is Phi(delta S1, delta S2, s3).  Gradients combine per-triangle P1
section derivatives with axial finite differences, chain-ruled through the
analytic chart gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import RodChart, grad_phi, phi


@dataclass
class DeformationField3D:
    """v sampled at (delta * section nodes, axial nodes); values (A, P, 3)."""

    chart: RodChart
    axial_grid: np.ndarray
    values: np.ndarray
    analytic: object = None      # optional evaluator (recovery fields)

    def __post_init__(self):
        self.axial_grid = np.asarray(self.axial_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        A = len(self.axial_grid)
        P = len(self.chart.section.nodes)
        if self.axial_grid.ndim != 1 or A < 2 or np.any(np.diff(self.axial_grid) <= 0):
            raise ValidationError("axial grid must be strictly increasing with >= 2 nodes")
        if self.values.shape != (A, P, 3):
            raise ValidationError(f"values must have shape ({A}, {P}, 3)")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field values must be finite")

    @property
    def delta(self) -> float:
        return self.chart.delta

    def section_points_physical(self):
        return self.delta * self.chart.section.nodes


def sample_field(chart: RodChart, axial_grid, fn) -> DeformationField3D:
    """Sample fn(s1, s2, s3) (physical section coordinates) on the grid."""
    axial_grid = np.asarray(axial_grid, dtype=float)
    S = chart.section.nodes
    s1 = chart.delta * np.broadcast_to(S[None, :, 0], (len(axial_grid), len(S)))
    s2 = chart.delta * np.broadcast_to(S[None, :, 1], (len(axial_grid), len(S)))
    s3 = np.broadcast_to(axial_grid[:, None], s1.shape)
    vals = fn(s1.ravel(), s2.ravel(), s3.ravel()).reshape(len(axial_grid), len(S), 3)
    return DeformationField3D(chart=chart, axial_grid=axial_grid, values=vals)


def identity_field(chart: RodChart, axial_grid) -> DeformationField3D:
    return sample_field(chart, axial_grid,
                        lambda s1, s2, s3: phi(chart, s1, s2, s3, validate=False))


def gradient_xv(field: DeformationField3D) -> np.ndarray:
    """Deformation gradient per (axial node, triangle): (A, T, 3, 3).

    Section derivatives are exact P1 per-triangle gradients; the axial
    derivative uses second-order finite differences (one-sided at the ends),
    averaged to the triangle centroid; the chain rule applies the analytic
    inverse chart gradient at (delta * centroid, s3).
    """
    sec = field.chart.section
    delta = field.delta
    grid = field.axial_grid
    vals = field.values                                   # (A, P, 3)

    tri_vals = vals[:, sec.tris, :]                       # (A, T, 3, 3) [vertex axis]
    d1 = np.einsum("ki,akiv->akv", sec.grads[:, :, 0], tri_vals) / delta
    d2 = np.einsum("ki,akiv->akv", sec.grads[:, :, 1], tri_vals) / delta
    dv3_nodes = np.gradient(vals, grid, axis=0, edge_order=2)
    d3 = dv3_nodes[:, sec.tris, :].mean(axis=2)           # (A, T, 3)

    grad_s = np.stack([d1, d2, d3], axis=-1)              # (A, T, 3, 3)

    cent = sec.centroids                                  # (T, 2)
    A, T = len(grid), len(sec.tris)
    s1 = delta * np.broadcast_to(cent[None, :, 0], (A, T))
    s2 = delta * np.broadcast_to(cent[None, :, 1], (A, T))
    s3 = np.broadcast_to(grid[:, None], (A, T))
    gphi = grad_phi(field.chart, s1.ravel(), s2.ravel(), s3.ravel()).reshape(A, T, 3, 3)
    return grad_s @ np.linalg.inv(gphi)


def cell_measures(field: DeformationField3D, weighted: bool = True):
    """Quadrature weights per (axial node, triangle) cell of Omega_delta.

    trapezoid x triangle-area x delta^2, optionally times |det grad Phi| at
    the cell representative point (centroid, node).
    """
    sec = field.chart.section
    grid = field.axial_grid
    delta = field.delta
    h = np.diff(grid)
    tau = np.zeros(len(grid))
    tau[:-1] += 0.5 * h
    tau[1:] += 0.5 * h
    w = delta**2 * tau[:, None] * sec.tri_area[None, :]
    if weighted:
        cent = sec.centroids
        A, T = len(grid), len(sec.tris)
        s1 = delta * np.broadcast_to(cent[None, :, 0], (A, T))
        s2 = delta * np.broadcast_to(cent[None, :, 1], (A, T))
        s3 = np.broadcast_to(grid[:, None], (A, T))
        k1, k2 = field.chart.curvature_coefficients(s3.ravel())
        det = 1.0 + s1.ravel() * k1 + s2.ravel() * k2
        w = w * np.abs(det.reshape(A, T))
    return w


def dist_to_so3(F: np.ndarray) -> np.ndarray:
    """dist(F, SO(3)) batched over leading dims.

    Equals ||| sqrt(F^T F) - I ||| when det F > 0; for det F <= 0 the nearest
    proper rotation flips the smallest singular value.
    """
    F = np.asarray(F, dtype=float)
    sigma = np.sqrt(np.maximum(np.linalg.eigvalsh(
        np.swapaxes(F, -1, -2) @ F), 0.0))                # ascending
    det = np.linalg.det(F)
    d_pos = np.sum((sigma - 1.0) ** 2, axis=-1)
    d_neg = (sigma[..., 2] - 1.0) ** 2 + (sigma[..., 1] - 1.0) ** 2 + (sigma[..., 0] + 1.0) ** 2
    return np.sqrt(np.where(det > 0, d_pos, d_neg))


def rescale(values: np.ndarray, section_coords: np.ndarray, delta: float,
            to_reference: bool = True):
    """Coordinate relabeling Pi_delta between Omega_delta and Omega.

    Values are returned unchanged (same array); only the section coordinate
    labels are scaled, so a round trip is the identity on the values.
    """
    section_coords = np.asarray(section_coords, dtype=float)
    coords = section_coords / delta if to_reference else section_coords * delta
    return values, coords
