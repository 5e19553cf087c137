"""Load data for the 1D limit models.

A load profile carries the axial force density f (per unit length of the
middle line), a section-resolved density g with zero mean over every cross
section, an optional traction profile f_tilde with
int_{s3}^L f = f_tilde t, and the scaling exponent kappa of the 3D forces
f_delta = delta^kappa f + delta^(kappa-1) g.

The load matrix G is the 3x3 field pairing rotations with the load work:

    int_0^L <G, R - I> = int F . (V - M) + sum_a int (int g S_a) . (R - I) n_a

for admissible (V, R) with dV/ds3 = R t, realized through the tail integral
H(s3) = int_{s3}^L F as G = H x t + sum_a m_a x n_a (outer products), where
F = |w| f + sum_a m_a det(n1 | n2 | dn_a/ds3) and m_a = int_w g S_a.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import CubicSpline, PPoly

from . import quadrature, so3
from .errors import ValidationError
from .geometry import FrameField, MiddleLine
from .section import CrossSection


class AxialPoly:
    """Piecewise-polynomial function of arc length, scalar or 3-vector valued."""

    def __init__(self, ppoly: PPoly, dim: int):
        self.ppoly = ppoly
        self.dim = dim
        self.length = float(ppoly.x[-1])

    @classmethod
    def zero(cls, length: float, dim: int = 3) -> "AxialPoly":
        shape = (1, 1) if dim == 0 else (1, 1, dim)
        return cls(PPoly(np.zeros(shape), [0.0, length]), dim)

    @classmethod
    def from_poly(cls, coeffs, length: float) -> "AxialPoly":
        """Polynomial with low-to-high coefficients; (deg+1,) or 3 rows of
        per-component coefficients (ragged rows are zero-padded)."""
        if (isinstance(coeffs, (list, tuple)) and len(coeffs) == 3
                and all(isinstance(row, (list, tuple, np.ndarray)) for row in coeffs)):
            deg = max(len(row) for row in coeffs)
            c = np.zeros((3, deg))
            for i, row in enumerate(coeffs):
                c[i, : len(row)] = row
        else:
            c = np.asarray(coeffs, dtype=float)
        if c.ndim == 1:
            cc = c[::-1, None]
            return cls(PPoly(cc, [0.0, length]), 0)
        if c.ndim == 2 and c.shape[0] == 3:
            cc = np.moveaxis(c, 0, -1)[::-1][:, None, :]
            return cls(PPoly(cc, [0.0, length]), 3)
        raise ValidationError("polynomial coefficients must be (deg+1,) or (3, deg+1)")

    @classmethod
    def from_samples(cls, s, values) -> "AxialPoly":
        """Piecewise-linear interpolant of a sample table."""
        s = np.asarray(s, dtype=float)
        v = np.asarray(values, dtype=float)
        if s.ndim != 1 or len(s) < 2 or np.any(np.diff(s) <= 0):
            raise ValidationError("sample abscissae must be strictly increasing")
        if v.shape[0] != len(s):
            raise ValidationError("sample table length mismatch")
        dim = 0 if v.ndim == 1 else v.shape[1]
        slope = np.diff(v, axis=0) / np.diff(s).reshape((-1,) + (1,) * (v.ndim - 1))
        coef = np.stack([slope, v[:-1]], axis=0)
        return cls(PPoly(coef, s), dim)

    def __call__(self, s):
        return self.ppoly(np.asarray(s, dtype=float))

    def tail_integral(self) -> "AxialPoly":
        """H with H(s) = integral of this function over [s, L] (exact)."""
        anti = self.ppoly.antiderivative()
        total = anti(self.length)
        c = -anti.c.copy()
        out = PPoly(c, anti.x)
        # shift the constant term per interval so that out(s) = total - anti(s)
        out.c[-1] += total
        return AxialPoly(out, self.dim)

    def integral(self) -> np.ndarray:
        return self.ppoly.antiderivative()(self.length)


def _axial_from_config(cfg, length: float, dim: int) -> AxialPoly:
    if cfg is None:
        return AxialPoly.zero(length, dim)
    if isinstance(cfg, AxialPoly):
        return cfg
    if isinstance(cfg, dict) and "poly" in cfg:
        out = AxialPoly.from_poly(cfg["poly"], length)
    elif isinstance(cfg, dict) and "samples" in cfg:
        tab = cfg["samples"]
        out = AxialPoly.from_samples(tab["s"], tab["values"])
        if abs(out.length - length) > 1e-10 * max(length, 1.0):
            raise ValidationError("sample table does not span [0, L]")
    else:
        raise ValidationError("axial field must provide 'poly' or 'samples'")
    if (dim == 0) != (out.dim == 0):
        raise ValidationError("axial field has the wrong arity (scalar vs vector)")
    return out


@dataclass
class SectionLoadTerm:
    """One separated term P(S1, S2) c(s3) of the section-resolved load g."""

    poly2d: np.ndarray       # coefficient matrix a[i, j] for S1^i S2^j
    axial: AxialPoly         # 3-vector amplitude

    def shape_at(self, S1, S2):
        return npoly.polyval2d(np.asarray(S1, float), np.asarray(S2, float), self.poly2d)


@dataclass
class SectionLoad:
    terms: list

    def moments(self, section: CrossSection):
        """Weights (w1, w2) with int_w P S_a per term; callables m_a(s3)."""
        S1 = section.rule_points[..., 0]
        S2 = section.rule_points[..., 1]
        w = np.array([
            [section.integrate(t.shape_at(S1, S2) * S1),
             section.integrate(t.shape_at(S1, S2) * S2)]
            for t in self.terms
        ])

        def m_alpha(alpha):
            def m(s):
                s = np.asarray(s, dtype=float)
                out = np.zeros(s.shape + (3,))
                for wt, term in zip(w[:, alpha], self.terms):
                    out += wt * term.axial(s)
                return out

            return m

        return m_alpha(0), m_alpha(1)

    def check_zero_mean(self, section: CrossSection):
        S1 = section.rule_points[..., 0]
        S2 = section.rule_points[..., 1]
        for t in self.terms:
            shape = t.shape_at(S1, S2)
            mean = section.integrate(shape)
            scale = max(float(np.max(np.abs(shape))), 1e-30) * section.area
            if abs(mean) > 1e-10 * scale:
                raise ValidationError(
                    "section load term has nonzero mean over the cross-section")

    def value(self, S1, S2, s3):
        """g(S1, S2, s3) with broadcasting over the section and axial shapes."""
        out = None
        for t in self.terms:
            v = t.shape_at(S1, S2)[..., None] * t.axial(s3)
            out = v if out is None else out + v
        return out


@dataclass
class LoadProfile:
    """Force data (f, g, f_tilde) and the scaling exponent kappa."""

    kappa: float
    f: AxialPoly
    g: SectionLoad | None = None
    f_tilde: AxialPoly | None = None

    def __post_init__(self):
        if self.kappa < 2:
            raise ValidationError("kappa must be >= 2")


def load_profile_from_config(cfg: dict, length: float) -> LoadProfile:
    if not isinstance(cfg, dict):
        raise ValidationError("loads config must be a mapping")
    kappa = float(cfg.get("kappa", 2))
    f = _axial_from_config(cfg.get("f"), length, 3)
    g = None
    if cfg.get("g"):
        terms = []
        for term in cfg["g"]:
            poly2d = np.asarray(term["poly2d"], dtype=float)
            if poly2d.ndim != 2:
                raise ValidationError("poly2d must be a 2D coefficient matrix")
            terms.append(SectionLoadTerm(poly2d, _axial_from_config(term["axial"], length, 3)))
        g = SectionLoad(terms)
    f_tilde = None
    if cfg.get("f_tilde") is not None:
        f_tilde = _axial_from_config(cfg["f_tilde"], length, 0)
    return LoadProfile(kappa=kappa, f=f, g=g, f_tilde=f_tilde)


@dataclass
class LoadMatrix:
    """The 3x3 matrix field G(s3) = H x t + sum_a m_a x n_a."""

    line: MiddleLine
    frame: FrameField
    area: float
    f: AxialPoly
    H: AxialPoly                       # tail integral of F
    m1: object = None                  # callables s -> (..., 3), or None
    m2: object = None

    def F(self, s):
        s = np.asarray(s, dtype=float)
        out = self.area * self.f(s)
        if self.m1 is not None:
            t = self.line.tangent(s)
            k1 = np.sum(self.frame.dn1(s) * t, axis=-1)
            k2 = np.sum(self.frame.dn2(s) * t, axis=-1)
            out = out + self.m1(s) * k1[..., None] + self.m2(s) * k2[..., None]
        return out

    def matrix(self, s):
        s = np.asarray(s, dtype=float)
        t = self.line.tangent(s)
        G = self.H(s)[..., :, None] * t[..., None, :]
        if self.m1 is not None:
            G = G + self.m1(s)[..., :, None] * self.frame.n1(s)[..., None, :]
            G = G + self.m2(s)[..., :, None] * self.frame.n2(s)[..., None, :]
        return G

    def norm_l2(self, n_sub: int = 256) -> float:
        grid = np.linspace(0.0, self.line.length, n_sub + 1)
        val = quadrature.integrate(lambda s: np.sum(self.matrix(s) ** 2, axis=(-2, -1)),
                                   grid, n=4)
        return float(np.sqrt(val))

    def work(self, v_minus_m_nodes, rot: so3.RotationField, grid):
        """Load work on an admissible pair (V, R) with d(V - M)/ds3 = (R - I) t.

        Direct form: int F . (V - M) + sum_a int m_a . (R - I) n_a.  V - M is
        evaluated exactly at the quadrature points from the nodal values plus
        nested Gauss partial integrals of (R - I) t.
        """
        grid = np.asarray(grid, dtype=float)
        vm = np.asarray(v_minus_m_nodes, dtype=float)

        def dv(s):
            R = rot.at(s)
            t = self.line.tangent(s)
            return np.einsum("...ij,...j->...i", R, t) - t

        pts, wts = quadrature.interval_rule(grid, n=4)
        gx, gw = np.polynomial.legendre.leggauss(4)
        # partial integral from the interval start to each outer Gauss point
        seg = pts - grid[:-1, None]                      # (M, 4)
        inner = (grid[:-1, None, None]
                 + 0.5 * seg[:, :, None] * (1.0 + gx[None, None, :]))  # (M, 4, 4)
        dv_inner = dv(inner.ravel()).reshape(inner.shape + (3,))
        partial = 0.5 * seg[:, :, None] * np.einsum("g,mog...->mo...", gw, dv_inner)
        vm_at = vm[:-1, None, :] + partial               # (M, 4, 3)

        s_flat = pts.ravel()
        total = np.sum(self.F(s_flat).reshape(pts.shape + (3,)) * vm_at, axis=-1)
        if self.m1 is not None:
            R = rot.at(s_flat)
            dR = R - np.eye(3)
            for m, nvec in ((self.m1, self.frame.n1), (self.m2, self.frame.n2)):
                term = np.sum(m(s_flat) * np.einsum("...ij,...j->...i", dR, nvec(s_flat)),
                              axis=-1)
                total = total + term.reshape(pts.shape)
        return float(np.sum(wts * total))


def assemble_load_matrix(loads: LoadProfile, line: MiddleLine, frame: FrameField,
                         section: CrossSection, verify: bool = True,
                         rng_seed: int = 1234) -> LoadMatrix:
    """Assemble G from the load profile; optionally verify the defining
    identity on random admissible pairs."""
    L = line.length
    if abs(loads.f.length - L) > 1e-10 * max(L, 1.0):
        raise ValidationError("load field length does not match the middle line")

    m1 = m2 = None
    if loads.g is not None:
        loads.g.check_zero_mean(section)
        m1, m2 = loads.g.moments(section)

    # H = area * tail(f) exactly, plus the interpolated curvature part when g
    # is present (the frame derivatives are not polynomial in general)
    H = loads.f.tail_integral()
    H_exact = AxialPoly(PPoly(section.area * H.ppoly.c, H.ppoly.x), 3)
    if m1 is not None:
        grid = np.linspace(0.0, L, 2049)
        t = line.tangent(grid)
        k1 = np.sum(frame.dn1(grid) * t, axis=-1)
        k2 = np.sum(frame.dn2(grid) * t, axis=-1)
        extra = m1(grid) * k1[:, None] + m2(grid) * k2[:, None]
        spline = CubicSpline(grid, extra, axis=0)
        anti = spline.antiderivative()
        tail = PPoly(-anti.c, anti.x)
        tail.c[-1] += anti(L)
        Hc = AxialPoly(tail, 3)

        def H_total(s):
            return H_exact(s) + Hc(s)
    else:
        H_total = H_exact

    if loads.f_tilde is not None:
        _check_traction_consistency(loads, line)

    lm = LoadMatrix(line=line, frame=frame, area=section.area, f=loads.f,
                    H=H_exact if m1 is None else _CallableField(H_total), m1=m1, m2=m2)
    if verify:
        verify_defining_identity(lm, rng_seed=rng_seed)
    return lm


class _CallableField:
    def __init__(self, fn):
        self._fn = fn

    def __call__(self, s):
        return self._fn(s)


def _check_traction_consistency(loads: LoadProfile, line: MiddleLine, tol: float = 1e-8):
    """When both f and f_tilde are given, int_{s3}^L f must equal f_tilde t."""
    if loads.f is None:
        return
    tail = loads.f.tail_integral()
    s = np.linspace(0.0, line.length, 65)
    lhs = tail(s)
    rhs = loads.f_tilde(s)[:, None] * line.tangent(s)
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))), 1e-30)
    err = float(np.max(np.abs(lhs - rhs)))
    if err > tol * max(scale, 1.0):
        raise ValidationError(
            f"f and f_tilde are inconsistent: max |int f - f_tilde t| = {err:.3e}")


def verify_defining_identity(lm: LoadMatrix, n_pairs: int = 5, rng_seed: int = 1234,
                             tol: float = 1e-6):
    """Check int <G, R - I> against the direct load work on random admissible
    pairs (V, R) with dV/ds3 = R t and V(0) = M(0)."""
    rng = np.random.default_rng(rng_seed)
    L = lm.line.length
    grid = np.linspace(0.0, L, 257)
    for _ in range(n_pairs):
        gen = 0.5 * rng.standard_normal((len(grid) - 1, 3))
        rot = so3.integrate_generator(grid, gen)

        def dv_minus_dm(s):
            R = rot.at(s)
            t = lm.line.tangent(s)
            return np.einsum("...ij,...j->...i", R, t) - t

        vm = quadrature.cumulative_integral(dv_minus_dm, grid, n=4)
        lhs = quadrature.integrate(
            lambda s: np.einsum("...ij,...ij->...", lm.matrix(s), rot.at(s) - np.eye(3)),
            grid, n=4)
        rhs = lm.work(vm, rot, grid)
        scale = max(abs(lhs), abs(rhs), 1e-12)
        if abs(lhs - rhs) > tol * scale:
            raise ValidationError(
                f"load matrix defining identity violated: {lhs:.6e} vs {rhs:.6e}")


@dataclass(frozen=True)
class GateReport:
    """Uniqueness gate: |G|_L2 < min(E I1, E I2, mu K / 2) / L^(3/2)."""

    norm: float
    threshold: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.threshold / self.norm if self.norm > 0 else np.inf


def check_uniqueness_gate(lm: LoadMatrix, constants, material) -> GateReport:
    L = lm.line.length
    norm = lm.norm_l2()
    threshold = min(material.E * constants.I1, material.E * constants.I2,
                    material.mu * constants.K / 2.0) / L**1.5
    return GateReport(norm=norm, threshold=threshold, passed=bool(norm < threshold))
