"""Reference cross-sections: meshing, normalization, moments, and the
Saint-Venant torsion function.

Sections are recentered at their centroid and rotated to principal axes, so
int S1 = int S2 = int S1 S2 = 0 on the shipped mesh.  The torsion function
chi solves

    int grad(chi) . grad(psi) = - int ( -S2 dpsi/dS1 + S1 dpsi/dS2 )

with zero mean, discretized with P1 triangles and a scalar Lagrange
multiplier; the torsion constant is
K = int [ (d chi/dS1 - S2)^2 + (d chi/dS2 + S1)^2 ].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import Delaunay
import shapely
from shapely.geometry import Polygon as ShapelyPolygon

from .errors import ValidationError

# Dunavant degree-4 rule on the reference triangle (6 points, weights sum to 1).
_DUN4_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_DUN4_BARY = np.array(
    [
        [0.108103018168070, 0.445948490915965, 0.445948490915965],
        [0.445948490915965, 0.108103018168070, 0.445948490915965],
        [0.445948490915965, 0.445948490915965, 0.108103018168070],
        [0.816847572980459, 0.091576213509771, 0.091576213509771],
        [0.091576213509771, 0.816847572980459, 0.091576213509771],
        [0.091576213509771, 0.091576213509771, 0.816847572980459],
    ]
)


def _tri_geometry(nodes, tris):
    v = nodes[tris]                       # (T, 3, 2)
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return v, area


def _p1_gradients(nodes, tris, area):
    v = nodes[tris]
    g = np.empty((len(tris), 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        g[:, i, 0] = v[:, j, 1] - v[:, k, 1]
        g[:, i, 1] = v[:, k, 0] - v[:, j, 0]
    return g / (2.0 * area)[:, None, None]


@dataclass
class CrossSection:
    """Triangulated reference section, centered and on principal axes."""

    kind: str
    nodes: np.ndarray          # (P, 2)
    tris: np.ndarray           # (T, 3) int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.tris = np.asarray(self.tris, dtype=np.int64)
        _, area = _tri_geometry(self.nodes, self.tris)
        if np.any(area <= 0):
            raise ValidationError("triangulation contains degenerate or flipped triangles")
        self.tri_area = area
        self.area = float(area.sum())
        self.grads = _p1_gradients(self.nodes, self.tris, area)
        v = self.nodes[self.tris]
        self.rule_points = np.einsum("qi,tij->tqj", _DUN4_BARY, v)   # (T, 6, 2)
        self.rule_weights = _DUN4_W[None, :] * area[:, None]         # (T, 6)
        self.centroids = v.mean(axis=1)
        self.max_radius = float(np.max(np.linalg.norm(self.nodes, axis=1)))
        self.diam = 2.0 * self.max_radius

    # -- integration -----------------------------------------------------

    def integrate(self, values_at_rule: np.ndarray) -> float:
        """Integral over the section of values sampled on the rule grid (T, 6)."""
        return float(np.sum(self.rule_weights * values_at_rule))

    def integrate_nodal(self, nodal: np.ndarray) -> np.ndarray:
        """Exact integral of the P1 interpolant of nodal values (P, ...)."""
        vals = nodal[self.tris]                      # (T, 3, ...)
        return np.tensordot(self.tri_area, vals.mean(axis=1), axes=(0, 0))

    def moments(self):
        S1 = self.rule_points[..., 0]
        S2 = self.rule_points[..., 1]
        c1 = self.integrate(S1) / self.area
        c2 = self.integrate(S2) / self.area
        i11 = self.integrate(S1 * S1)
        i22 = self.integrate(S2 * S2)
        i12 = self.integrate(S1 * S2)
        return np.array([c1, c2]), np.array([[i11, i12], [i12, i22]])

    def contains(self, S1, S2) -> bool:
        tol = 1e-9 * max(self.diam, 1.0)
        S1 = np.asarray(S1, dtype=float)
        S2 = np.asarray(S2, dtype=float)
        if self.kind == "disc":
            r = self.metadata["radius"]
            return bool(np.all(np.hypot(S1, S2) <= r + tol))
        if self.kind == "rectangle":
            a, b = self.metadata["a"], self.metadata["b"]
            return bool(np.all((np.abs(S1) <= a / 2 + tol) & (np.abs(S2) <= b / 2 + tol)))
        poly = self.metadata["shapely"]
        return bool(np.all(shapely.dwithin(poly, shapely.points(S1.ravel(), S2.ravel()), tol)))


@dataclass(frozen=True)
class SectionConstants:
    area: float
    I1: float
    I2: float
    K: float
    chi: np.ndarray
    grad_chi: np.ndarray       # (T, 2), P1 gradient per triangle
    torsion_residual: float


# -- meshers --------------------------------------------------------------


def _disc_mesh(radius: float, level: int):
    n = 2 ** level
    pts = [np.zeros((1, 2))]
    for j in range(1, n + 1):
        m = 6 * j
        ang = 2.0 * np.pi * np.arange(m) / m
        r = radius * j / n
        pts.append(np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1))
    nodes = np.concatenate(pts)
    tris = Delaunay(nodes).simplices
    nodes, tris = _orient_ccw(nodes, tris)
    # scale so the mesh area equals the disc area exactly (kills the O(h^2)
    # inscribed-polygon deficit in area and most of it in the moments)
    _, area = _tri_geometry(nodes, tris)
    nodes = nodes * np.sqrt(np.pi * radius**2 / area.sum())
    return nodes, tris


def _rect_mesh(a: float, b: float, level: int):
    n_long = 2 ** (level + 1)
    if a >= b:
        nx, ny = n_long, max(2, round(n_long * b / a))
    else:
        ny, nx = n_long, max(2, round(n_long * a / b))
    x = np.linspace(-a / 2, a / 2, nx + 1)
    y = np.linspace(-b / 2, b / 2, ny + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            # same-direction diagonals keep the mesh symmetric under S1<->S2 swap
            tris.append([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1)])
            tris.append([nid(i, j), nid(i + 1, j + 1), nid(i, j + 1)])
    return nodes, np.array(tris, dtype=np.int64)


def _polygon_moments(vertices):
    """Exact area, centroid, and second moments of a simple polygon."""
    x, y = vertices[:, 0], vertices[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * np.sum(cross)
    if abs(area) < 1e-14:
        raise ValidationError("degenerate (zero-area) polygon")
    cx = np.sum((x + xn) * cross) / (6.0 * area)
    cy = np.sum((y + yn) * cross) / (6.0 * area)
    ixx = np.sum((x * x + x * xn + xn * xn) * cross) / 12.0
    iyy = np.sum((y * y + y * yn + yn * yn) * cross) / 12.0
    ixy = np.sum((2 * x * y + x * yn + xn * y + 2 * xn * yn) * cross) / 24.0
    return area, np.array([cx, cy]), np.array([[ixx, ixy], [ixy, iyy]])


def _principal_angle(inertia):
    return 0.5 * np.arctan2(2.0 * inertia[0, 1], inertia[0, 0] - inertia[1, 1])


def _rotate(points, angle):
    c, s = np.cos(angle), np.sin(angle)
    return points @ np.array([[c, -s], [s, c]])


def _check_simple(vertices):
    n = len(vertices)
    segs = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]

    def intersects(p, q, r, s):
        def orient(a, b, c):
            return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

        return (orient(p, q, r) * orient(p, q, s) < 0) and (orient(r, s, p) * orient(r, s, q) < 0)

    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if intersects(*segs[i], *segs[j]):
                raise ValidationError("polygon is self-intersecting")


def _polygon_mesh(vertices, level: int):
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
        raise ValidationError("polygon needs at least 3 (x, y) vertices")
    area, centroid, _ = _polygon_moments(verts)
    if area < 0:
        raise ValidationError("polygon must be counter-clockwise")
    if area < 1e-14:
        raise ValidationError("degenerate (zero-area) polygon")
    _check_simple(verts)

    # normalize before meshing so rigidly rotated inputs produce the same mesh
    verts = verts - centroid
    _, _, inertia = _polygon_moments(verts)
    verts = _rotate(verts, _principal_angle(inertia))

    n_target = 6 * 4 ** level
    h = np.sqrt(2.0 * area / n_target)

    boundary = []
    n = len(verts)
    for i in range(n):
        p, q = verts[i], verts[(i + 1) % n]
        # tolerance keeps the count stable when length/h sits on an integer
        m = max(1, int(np.ceil(np.linalg.norm(q - p) / h - 1e-9)))
        for k in range(m):
            boundary.append(p + (q - p) * k / m)
    boundary = np.array(boundary)

    poly = ShapelyPolygon(verts)
    xmin, ymin, xmax, ymax = poly.bounds
    # lattice anchored at absolute multiples of h (not at the bbox corner) so
    # that normalization roundoff cannot shift it and change the mesh
    hy = h * np.sqrt(3.0) / 2.0
    kx = np.arange(np.floor(xmin / h) - 1, np.ceil(xmax / h) + 1)
    ky = np.arange(np.floor(ymin / hy) - 1, np.ceil(ymax / hy) + 1)
    X, Y = np.meshgrid(kx * h, ky * hy, indexing="ij")
    X = X + (ky.astype(np.int64) % 2)[None, :] * (h / 2)  # hex stagger
    cand = np.stack([X.ravel(), Y.ravel()], axis=1)
    inside = shapely.contains_xy(poly, cand[:, 0], cand[:, 1])
    dist = shapely.distance(shapely.points(cand[:, 0], cand[:, 1]), poly.exterior)
    interior = cand[inside & (dist > 0.45 * h)]

    pts = np.concatenate([boundary, interior])
    tri = Delaunay(pts)
    cent = pts[tri.simplices].mean(axis=1)
    keep = shapely.contains_xy(poly, cent[:, 0], cent[:, 1])
    tris = tri.simplices[keep]
    used = np.unique(tris)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return pts[used], remap[tris], poly


def _orient_ccw(nodes, tris):
    v = nodes[tris]
    s = ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
         - (v[:, 1, 1] - v[:, 0, 1]) * (v[:, 2, 0] - v[:, 0, 0]))
    flip = s < 0
    tris = tris.copy()
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return nodes, tris


def _normalize_mesh(section: CrossSection, passes: int = 2) -> CrossSection:
    """Recenter at the mesh centroid and rotate to mesh principal axes."""
    nodes = section.nodes
    angle_total = 0.0
    shift_total = np.zeros(2)
    for _ in range(passes):
        sec = CrossSection(section.kind, nodes, section.tris, section.metadata)
        centroid, inertia = sec.moments()
        nodes = nodes - centroid
        ang = _principal_angle(inertia)
        nodes = _rotate(nodes, ang)
        angle_total += ang
        shift_total += centroid
    out = CrossSection(section.kind, nodes, section.tris, dict(section.metadata))
    out.metadata["normalization"] = {"shift": shift_total.tolist(), "angle": float(angle_total)}
    return out


def build_section(spec: dict) -> CrossSection:
    """Build a centered, principal-axes cross-section from a config mapping.

    Kinds: {"kind": "disc", "radius": r}, {"kind": "rectangle", "a": ..,
    "b": ..}, {"kind": "polygon", "vertices": [[x, y], ...]}.  Optional
    "refine" (default 5) controls the mesh density (about 6 * 4**refine
    triangles).
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError("section spec must be a mapping with a 'kind' key")
    kind = spec["kind"]
    level = int(spec.get("refine", 5))
    if level < 1 or level > 8:
        raise ValidationError("refine must be in [1, 8]")
    try:
        if kind == "disc":
            r = float(spec["radius"])
            if r <= 0:
                raise ValidationError("disc radius must be positive")
            nodes, tris = _disc_mesh(r, level)
            sec = CrossSection("disc", nodes, tris, {"radius": r})
        elif kind == "rectangle":
            a, b = float(spec["a"]), float(spec["b"])
            if a <= 0 or b <= 0:
                raise ValidationError("rectangle sides must be positive")
            nodes, tris = _rect_mesh(a, b, level)
            sec = CrossSection("rectangle", nodes, tris, {"a": a, "b": b})
        elif kind == "polygon":
            nodes, tris, poly = _polygon_mesh(spec["vertices"], level)
            nodes, tris = _orient_ccw(nodes, tris)
            sec = CrossSection("polygon", nodes, tris, {"shapely": poly})
            sec = _normalize_mesh(sec)
            # keep the contains() geometry aligned with the normalized mesh
            norm = sec.metadata["normalization"]
            sec.metadata["shapely"] = ShapelyPolygon(
                _rotate(np.asarray(poly.exterior.coords) - np.asarray(norm["shift"]),
                        norm["angle"]))
        else:
            raise ValidationError(f"unknown section kind '{kind}'")
    except KeyError as exc:
        raise ValidationError(f"section spec for kind '{kind}' misses key {exc}") from exc

    _validate_centering(sec)
    return sec


def _validate_centering(sec: CrossSection):
    centroid, inertia = sec.moments()
    scale1 = sec.area * sec.diam
    if np.max(np.abs(centroid)) * sec.area > 1e-10 * scale1:
        raise ValidationError("section centroid is off the origin after normalization")
    if abs(inertia[0, 1]) > 1e-8 * sec.area * sec.diam**2:
        raise ValidationError("section product moment nonzero after normalization")


def solve_torsion(section: CrossSection) -> np.ndarray:
    """Zero-mean P1 solution of the section torsion problem."""
    P = len(section.nodes)
    tris = section.tris
    area = section.tri_area
    grads = section.grads

    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            rows.append(tris[:, i])
            cols.append(tris[:, j])
            vals.append(area * np.sum(grads[:, i] * grads[:, j], axis=1))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)

    b = np.zeros(P)
    cent = section.centroids
    for i in range(3):
        # exact integral of S2 d(phi_i)/dS1 - S1 d(phi_i)/dS2 (linear integrand)
        contrib = area * (grads[:, i, 0] * cent[:, 1] - grads[:, i, 1] * cent[:, 0])
        np.add.at(b, tris[:, i], contrib)

    m = np.zeros(P)
    for i in range(3):
        np.add.at(m, tris[:, i], area / 3.0)

    # KKT system with a scalar multiplier enforcing zero mean
    K = sp.coo_matrix((vals, (rows, cols)), shape=(P, P)).tocsr()
    A = sp.bmat([[K, m[:, None]], [m[None, :], None]], format="csc")
    rhs = np.concatenate([b, [0.0]])
    sol = spla.spsolve(A, rhs)
    if not np.all(np.isfinite(sol)):
        raise ValidationError("torsion system is singular (disconnected mesh?)")
    chi = sol[:P]
    residual = np.linalg.norm(A @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if residual > 1e-10:
        raise ValidationError(f"torsion solve residual too large: {residual:.2e}")
    return chi


def section_constants(section: CrossSection, chi: np.ndarray | None = None) -> SectionConstants:
    """Moments I1, I2 and the torsion constant K on the section mesh."""
    if chi is None:
        chi = solve_torsion(section)
    S1 = section.rule_points[..., 0]
    S2 = section.rule_points[..., 1]
    I1 = section.integrate(S1 * S1)
    I2 = section.integrate(S2 * S2)
    grad_chi = np.einsum("tip,ti->tp", section.grads, chi[section.tris])
    g1 = grad_chi[:, 0][:, None] - S2
    g2 = grad_chi[:, 1][:, None] + S1
    K = section.integrate(g1 * g1 + g2 * g2)
    # K = I1 + I2 - int |grad chi|^2 is the integration-by-parts identity
    stiff = float(np.sum(section.tri_area * np.sum(grad_chi**2, axis=1)))
    residual = abs(K - (I1 + I2 - stiff))
    mean = float(section.integrate_nodal(chi))
    if abs(mean) > 1e-10 * section.area * max(1.0, np.max(np.abs(chi))):
        raise ValidationError("torsion function has nonzero mean")
    if min(I1, I2, K) <= 0:
        raise ValidationError("degenerate section: I1, I2, K must be positive")
    return SectionConstants(area=section.area, I1=I1, I2=I2, K=K, chi=chi,
                            grad_chi=grad_chi, torsion_residual=residual)
