"""Middle-line curves, frame fields, and the rod chart Phi.

Curves are arc-length parametrized; frames are orthonormal with
n2 = t ^ n1.  The chart is Phi(s1, s2, s3) = M(s3) + s1 n1 + s2 n2 and its
Jacobian determinant is affine in (s1, s2):
det(grad Phi) = 1 + s1 (dn1/ds3 . t) + s2 (dn2/ds3 . t).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ValidationError

ARC_LENGTH_TOL = 1e-8


@dataclass(frozen=True)
class MiddleLine:
    """Arc-length parametrized C^2 curve with vectorized evaluators."""

    kind: str
    length: float
    point: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    tangent: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    dtangent: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def check_arc_length(self, n_nodes: int = 257, tol: float = ARC_LENGTH_TOL) -> float:
        s = np.linspace(0.0, self.length, n_nodes)
        err = float(np.max(np.abs(np.linalg.norm(self.tangent(s), axis=-1) - 1.0)))
        if err > tol:
            raise ValidationError(f"curve is not arc-length parametrized: |t|-1 up to {err:.2e}")
        return err


def _as_unit(v, name):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-14:
        raise ValidationError(f"{name} must be nonzero")
    return v / n


def straight_line(origin, direction, length) -> MiddleLine:
    origin = np.asarray(origin, dtype=float)
    d = _as_unit(direction, "direction")
    if length <= 0:
        raise ValidationError("length must be positive")

    def point(s):
        s = np.asarray(s, dtype=float)
        return origin + s[..., None] * d

    def tangent(s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(d, s.shape + (3,)).copy()

    def dtangent(s):
        s = np.asarray(s, dtype=float)
        return np.zeros(s.shape + (3,))

    return MiddleLine("straight", float(length), point, tangent, dtangent)


def circular_arc(radius, angle, center=(0.0, 0.0, 0.0),
                 u=(1.0, 0.0, 0.0), w=(0.0, 1.0, 0.0)) -> MiddleLine:
    """Planar arc M(s) = C + rho (cos(s/rho) u + sin(s/rho) w), length rho*angle."""
    if radius <= 0 or angle <= 0:
        raise ValidationError("radius and angle must be positive")
    center = np.asarray(center, dtype=float)
    u = _as_unit(u, "u")
    w = np.asarray(w, dtype=float) - np.dot(w, u) * u
    w = _as_unit(w, "w")
    rho = float(radius)

    def point(s):
        phi = np.asarray(s, dtype=float) / rho
        return center + rho * (np.cos(phi)[..., None] * u + np.sin(phi)[..., None] * w)

    def tangent(s):
        phi = np.asarray(s, dtype=float) / rho
        return -np.sin(phi)[..., None] * u + np.cos(phi)[..., None] * w

    def dtangent(s):
        phi = np.asarray(s, dtype=float) / rho
        return -(np.cos(phi)[..., None] * u + np.sin(phi)[..., None] * w) / rho

    return MiddleLine("circular-arc", rho * float(angle), point, tangent, dtangent)


def helix(radius, pitch, length) -> MiddleLine:
    """Helix of radius rho and pitch 2*pi*b, arc-length parametrized by
    s -> (rho cos(s/c), rho sin(s/c), b s/c) with c = sqrt(rho^2 + b^2)."""
    if radius <= 0 or length <= 0:
        raise ValidationError("radius and length must be positive")
    rho = float(radius)
    b = float(pitch) / (2.0 * np.pi)
    c = np.hypot(rho, b)

    def point(s):
        phi = np.asarray(s, dtype=float) / c
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), b * phi], axis=-1)

    def tangent(s):
        phi = np.asarray(s, dtype=float) / c
        return np.stack([-rho * np.sin(phi) / c, rho * np.cos(phi) / c,
                         np.full_like(phi, b / c)], axis=-1)

    def dtangent(s):
        phi = np.asarray(s, dtype=float) / c
        z = np.zeros_like(phi)
        return np.stack([-rho * np.cos(phi) / c**2, -rho * np.sin(phi) / c**2, z], axis=-1)

    return MiddleLine("helix", float(length), point, tangent, dtangent)


def spline_line(points, samples_per_segment: int = 64) -> MiddleLine:
    """Cubic spline through the given points, reparametrized by arc length.

    Reparametrization: per-segment Gauss quadrature of |sigma'| gives the
    cumulative length at a dense set of parameters; a fresh cubic spline is
    fitted through the resampled points as a function of arc length.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 4:
        raise ValidationError("sampled curve needs at least 4 points of shape (n, 3)")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(seg < 1e-12):
        raise ValidationError("duplicate consecutive points in sampled curve")
    u_nodes = np.concatenate([[0.0], np.cumsum(seg)])
    sigma = CubicSpline(u_nodes, pts, axis=0)

    # dense cumulative arc length via 8-point Gauss per subsegment
    gx, gw = np.polynomial.legendre.leggauss(8)
    u_fine = np.linspace(u_nodes[0], u_nodes[-1], samples_per_segment * (len(pts) - 1) + 1)
    du = np.diff(u_fine)
    mid = 0.5 * (u_fine[:-1] + u_fine[1:])
    uq = mid[:, None] + 0.5 * du[:, None] * gx[None, :]
    speed = np.linalg.norm(sigma(uq.ravel(), 1).reshape(uq.shape + (3,)), axis=-1)
    seg_len = 0.5 * du * (speed @ gw)
    s_fine = np.concatenate([[0.0], np.cumsum(seg_len)])
    L = float(s_fine[-1])
    if L < 1e-12:
        raise ValidationError("zero-length sampled curve")

    t0 = sigma(u_fine[0], 1)
    t1 = sigma(u_fine[-1], 1)
    M = CubicSpline(s_fine, sigma(u_fine), axis=0,
                    bc_type=((1, t0 / np.linalg.norm(t0)), (1, t1 / np.linalg.norm(t1))))

    def point(s):
        return M(np.asarray(s, dtype=float))

    def tangent(s):
        return M(np.asarray(s, dtype=float), 1)

    def dtangent(s):
        return M(np.asarray(s, dtype=float), 2)

    line = MiddleLine("sampled-spline", L, point, tangent, dtangent)
    line.check_arc_length()
    return line


def build_middle_line(spec: dict) -> MiddleLine:
    """Construct a middle line from a configuration mapping (see README)."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError("geometry spec must be a mapping with a 'kind' key")
    kind = spec["kind"]
    try:
        if kind == "straight":
            return straight_line(spec.get("origin", (0.0, 0.0, 0.0)),
                                 spec.get("direction", (0.0, 0.0, 1.0)),
                                 spec["length"])
        if kind == "circular-arc":
            return circular_arc(spec["radius"], spec["angle"],
                                center=spec.get("center", (0.0, 0.0, 0.0)),
                                u=spec.get("u", (1.0, 0.0, 0.0)),
                                w=spec.get("w", (0.0, 1.0, 0.0)))
        if kind == "helix":
            return helix(spec["radius"], spec["pitch"], spec["length"])
        if kind == "sampled-spline":
            return spline_line(spec["points"])
    except KeyError as exc:
        raise ValidationError(f"geometry spec for kind '{kind}' misses key {exc}") from exc
    raise ValidationError(f"unknown curve kind '{kind}'")


@dataclass(frozen=True)
class FrameField:
    """Orthonormal frame (n1, n2) completing the tangent, with derivatives."""

    method: str
    n1: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    n2: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    dn1: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    dn2: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    orientation: str = "unspecified"

    def check(self, line: MiddleLine, n_nodes: int = 129, tol: float = 1e-10):
        s = np.linspace(0.0, line.length, n_nodes)
        t, n1, n2 = line.tangent(s), self.n1(s), self.n2(s)
        t = t / np.linalg.norm(t, axis=-1, keepdims=True)
        if np.max(np.abs(np.linalg.norm(n1, axis=-1) - 1.0)) > tol:
            raise ValidationError("frame n1 is not unit length")
        if np.max(np.abs(np.sum(t * n1, axis=-1))) > tol:
            raise ValidationError("frame n1 is not orthogonal to the tangent")
        if np.max(np.linalg.norm(np.cross(t, n1) - n2, axis=-1)) > tol:
            raise ValidationError("frame violates n2 = t ^ n1")


def _perp(d):
    trial = np.array([0.0, 0.0, 1.0]) if abs(d[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    v = trial - np.dot(trial, d) * d
    return v / np.linalg.norm(v)


def _analytic_frame(line: MiddleLine) -> FrameField:
    if line.kind == "straight":
        d = line.tangent(np.array(0.0))
        n1c = _perp(d)
        n2c = np.cross(d, n1c)

        def n1(s):
            s = np.asarray(s, dtype=float)
            return np.broadcast_to(n1c, s.shape + (3,)).copy()

        def n2(s):
            s = np.asarray(s, dtype=float)
            return np.broadcast_to(n2c, s.shape + (3,)).copy()

        def zero(s):
            s = np.asarray(s, dtype=float)
            return np.zeros(s.shape + (3,))

        return FrameField("analytic", n1, n2, zero, zero, orientation="constant")

    if line.kind in ("circular-arc", "helix"):
        # principal (Frenet) normal points toward the center of curvature
        def n1(s):
            d2 = line.dtangent(np.asarray(s, dtype=float))
            return d2 / np.linalg.norm(d2, axis=-1, keepdims=True)

        def n2(s):
            return np.cross(line.tangent(np.asarray(s, dtype=float)), n1(s))

        dn1 = _fd_vector(n1, line.length)
        dn2 = _fd_vector(n2, line.length)
        return FrameField("analytic", n1, n2, dn1, dn2, orientation="inward-normal")

    raise ValidationError(f"analytic frame is not available for kind '{line.kind}'")


def _fd_vector(fn, length, h=None):
    if h is None:
        h = max(1e-6, length * 1e-7)

    def deriv(s):
        s = np.asarray(s, dtype=float)
        sp = np.minimum(s + h, length)
        sm = np.maximum(s - h, 0.0)
        return (fn(sp) - fn(sm)) / (sp - sm)[..., None]

    return deriv


def _double_reflection(points, tangents, n_start):
    """Rotation-minimizing frame by the double-reflection recurrence."""
    n = np.empty_like(tangents)
    n[0] = n_start
    for i in range(len(points) - 1):
        v1 = points[i + 1] - points[i]
        c1 = np.dot(v1, v1)
        if c1 < 1e-30:
            n[i + 1] = n[i]
            continue
        nl = n[i] - (2.0 / c1) * np.dot(v1, n[i]) * v1
        tl = tangents[i] - (2.0 / c1) * np.dot(v1, tangents[i]) * v1
        v2 = tangents[i + 1] - tl
        c2 = np.dot(v2, v2)
        if c2 < 1e-30:
            n[i + 1] = nl
        else:
            n[i + 1] = nl - (2.0 / c2) * np.dot(v2, nl) * v2
        # strip drift: keep n exactly unit and orthogonal to t
        n[i + 1] -= np.dot(n[i + 1], tangents[i + 1]) * tangents[i + 1]
        n[i + 1] /= np.linalg.norm(n[i + 1])
    return n


def _rmf_frame(line: MiddleLine, n_nodes: int = 2049) -> FrameField:
    s_nodes = np.linspace(0.0, line.length, n_nodes)
    pts = line.point(s_nodes)
    tans = line.tangent(s_nodes)
    tans = tans / np.linalg.norm(tans, axis=-1, keepdims=True)
    n0 = _perp(tans[0])
    n1_nodes = _double_reflection(pts, tans, n0)

    def n1(s):
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(s_nodes, s, side="right") - 1, 0, n_nodes - 2)
        # one double-reflection step from the nearest precomputed node
        p0 = pts[idx]
        t0 = tans[idx]
        nn = n1_nodes[idx]
        p1 = line.point(s)
        t1 = line.tangent(s)
        t1 = t1 / np.linalg.norm(t1, axis=-1, keepdims=True)
        v1 = p1 - p0
        c1 = np.sum(v1 * v1, axis=-1)
        ok1 = c1 > 1e-30
        scale1 = np.where(ok1, 2.0 / np.where(ok1, c1, 1.0), 0.0)
        nl = nn - scale1[..., None] * np.sum(v1 * nn, axis=-1)[..., None] * v1
        tl = t0 - scale1[..., None] * np.sum(v1 * t0, axis=-1)[..., None] * v1
        v2 = t1 - tl
        c2 = np.sum(v2 * v2, axis=-1)
        ok2 = c2 > 1e-30
        scale2 = np.where(ok2, 2.0 / np.where(ok2, c2, 1.0), 0.0)
        out = nl - scale2[..., None] * np.sum(v2 * nl, axis=-1)[..., None] * v2
        out -= np.sum(out * t1, axis=-1)[..., None] * t1
        return out / np.linalg.norm(out, axis=-1, keepdims=True)

    def n2(s):
        t = line.tangent(np.asarray(s, dtype=float))
        return np.cross(t / np.linalg.norm(t, axis=-1, keepdims=True), n1(s))

    dn1 = _fd_vector(n1, line.length)
    dn2 = _fd_vector(n2, line.length)
    return FrameField("rotation-minimizing", n1, n2, dn1, dn2, orientation="rmf")


def build_frame(line: MiddleLine, method: str = "analytic") -> FrameField:
    """Frame field for a middle line; validates the orthonormality invariants."""
    if method == "analytic":
        frame = _analytic_frame(line)
    elif method == "rotation-minimizing":
        frame = _rmf_frame(line)
    else:
        raise ValidationError(f"unknown frame method '{method}'")
    frame.check(line)
    return frame


@dataclass(frozen=True)
class RodChart:
    """Chart of the physical rod: middle line, frame, section, and scale delta.

    delta must not exceed delta0 = 0.9 / (max curvature coefficient * max
    section radius), which keeps det(grad Phi) > 0 on the rod.
    """

    line: MiddleLine
    frame: FrameField
    section: "object"  # CrossSection; typed loosely to avoid a cyclic import
    delta: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValidationError("delta must be positive")
        d0 = self.delta0()
        if self.delta > d0:
            raise ValidationError(
                f"delta = {self.delta:g} exceeds delta0 = {d0:g}: geometry too thick")
        self._check_injective()

    def _check_injective(self, n_samples: int = 4096, seed: int = 987):
        """Probabilistic injectivity check: random domain points mapped
        through Phi must not nearly coincide unless their arc lengths are
        close (local injectivity is already covered by the delta0 bound)."""
        from scipy.spatial import cKDTree

        rng = np.random.default_rng(seed)
        reach = self.delta * self.section.max_radius
        # uniform samples inside the section via its triangulation
        sec = self.section
        t_idx = rng.choice(len(sec.tris), n_samples, p=sec.tri_area / sec.area)
        u = rng.uniform(0.0, 1.0, (n_samples, 2))
        flip = u.sum(axis=1) > 1.0
        u[flip] = 1.0 - u[flip]
        v = sec.nodes[sec.tris[t_idx]]
        pts2d = (v[:, 0] + u[:, :1] * (v[:, 1] - v[:, 0])
                 + u[:, 1:] * (v[:, 2] - v[:, 0]))
        S1, S2 = pts2d[:, 0], pts2d[:, 1]
        s3 = rng.uniform(0.0, self.line.length, n_samples)
        pts = phi(self, self.delta * S1, self.delta * S2, s3, validate=False)
        tree = cKDTree(pts)
        tol = 0.2 * max(reach, 1e-12)
        for i, j in tree.query_pairs(tol):
            if abs(s3[i] - s3[j]) > 8.0 * reach:
                raise ValidationError(
                    "chart is not injective: distant cross-sections overlap")

    def curvature_coefficients(self, s):
        """(k1, k2) with det(grad Phi) = 1 + s1 k1 + s2 k2."""
        s = np.asarray(s, dtype=float)
        t = self.line.tangent(s)
        k1 = np.sum(self.frame.dn1(s) * t, axis=-1)
        k2 = np.sum(self.frame.dn2(s) * t, axis=-1)
        return k1, k2

    def delta0(self, n_nodes: int = 257) -> float:
        s = np.linspace(0.0, self.line.length, n_nodes)
        k1, k2 = self.curvature_coefficients(s)
        kmax = float(np.max(np.hypot(k1, k2)))
        rmax = float(self.section.max_radius)
        if kmax * rmax < 1e-14:
            return np.inf
        return 0.9 / (kmax * rmax)


def phi(chart: RodChart, s1, s2, s3, validate: bool = True) -> np.ndarray:
    """Physical point Phi(s1, s2, s3) = M(s3) + s1 n1(s3) + s2 n2(s3)."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    s3 = np.asarray(s3, dtype=float)
    if validate:
        _check_domain(chart, s1, s2, s3)
    return (chart.line.point(s3) + s1[..., None] * chart.frame.n1(s3)
            + s2[..., None] * chart.frame.n2(s3))


def jac_det(chart: RodChart, s1, s2, s3, validate: bool = True) -> np.ndarray:
    """det(grad Phi) = 1 + s1 (dn1.t) + s2 (dn2.t); positive for delta <= delta0."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    s3 = np.asarray(s3, dtype=float)
    if validate:
        _check_domain(chart, s1, s2, s3)
    k1, k2 = chart.curvature_coefficients(s3)
    det = 1.0 + s1 * k1 + s2 * k2
    if np.any(det <= 0):
        raise ValidationError("det(grad Phi) <= 0: geometry too thick for this delta")
    return det


def grad_phi(chart: RodChart, s1, s2, s3) -> np.ndarray:
    """Columns (n1 | n2 | t + s1 dn1 + s2 dn2) of the chart gradient."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    s3 = np.asarray(s3, dtype=float)
    col3 = (chart.line.tangent(s3) + s1[..., None] * chart.frame.dn1(s3)
            + s2[..., None] * chart.frame.dn2(s3))
    return np.stack([chart.frame.n1(s3), chart.frame.n2(s3), col3], axis=-1)


def _check_domain(chart: RodChart, s1, s2, s3):
    if np.any(s3 < -1e-12) or np.any(s3 > chart.line.length + 1e-12):
        raise ValidationError("s3 outside [0, L]")
    S1 = s1 / chart.delta
    S2 = s2 / chart.delta
    if not chart.section.contains(S1, S2):
        raise ValidationError("(s1/delta, s2/delta) outside the reference section")
