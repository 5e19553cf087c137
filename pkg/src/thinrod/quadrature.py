"""Composite Gauss-Legendre helpers on axial grids."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def interval_rule(grid: np.ndarray, n: int = 2):
    """Gauss points and weights per interval of a 1D grid.

    Returns (points, weights) of shape (M, n) for the M = len(grid)-1
    intervals.
    """
    grid = np.asarray(grid, dtype=float)
    x, w = _gl(n)
    h = np.diff(grid)
    mid = 0.5 * (grid[:-1] + grid[1:])
    pts = mid[:, None] + 0.5 * h[:, None] * x[None, :]
    wts = 0.5 * h[:, None] * w[None, :]
    return pts, wts


def integrate(fn, grid: np.ndarray, n: int = 4):
    """Composite Gauss integral of a (vectorized) function over the grid."""
    pts, wts = interval_rule(grid, n)
    vals = fn(pts.ravel())
    vals = np.asarray(vals).reshape(pts.shape + np.shape(vals)[1:])
    return np.tensordot(wts.ravel(), vals.reshape((-1,) + vals.shape[2:]), axes=(0, 0))


def cumulative_integral(fn, grid: np.ndarray, n: int = 4):
    """Cumulative integral at the grid nodes, node 0 = 0."""
    pts, wts = interval_rule(grid, n)
    vals = fn(pts.ravel())
    vals = np.asarray(vals).reshape(pts.shape + np.shape(vals)[1:])
    per = np.einsum("mg,mg...->m...", wts, vals)
    out = np.zeros((len(grid),) + per.shape[1:])
    np.cumsum(per, axis=0, out=out[1:])
    return out


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    h = np.diff(grid)
    w = np.zeros(len(grid))
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w
