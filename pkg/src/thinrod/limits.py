"""The four 1D limit models of the thin-rod hierarchy.

The nonlinear inextensible model minimizes, over antisymmetric generator
fields A (axial vector a, with A x = a ^ x),

    G(A) = (E/2) int [I1 (A t.n1)^2 + I2 (A t.n2)^2]
         + (mu K / 4) int (A n1.n2)^2  -  int <Gmat, R_A - I>

where R_A solves dR/ds3 = R A with R(0) = I.  Stationary points satisfy an
integro-differential system solved here by a damped fixed point; under the
load gate |Gmat| < min(E I1, E I2, mu K/2)/L^(3/2) the minimizer is unique.

The linear bending-torsion model minimizes a quadratic functional of an
infinitesimal-rotation field (P1 elements, banded Cholesky); the extensional
model is a pointwise quadratic minimization; the coupled model adds a
traction-weighted mass term to the bending-torsion form.

Discrete consistency: the energy, its directional derivatives, and the fixed
point all share one discretization (2-point Gauss for the elastic terms,
nodal trapezoid for the load pairing, exact SO(3) flows), so the computed
gradient is the derivative of the computed energy to roundoff and the fixed
point is stationary to the requested tolerance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded

from . import _kernels, quadrature, so3
from .errors import NumericsError, ValidationError
from .geometry import FrameField, MiddleLine
from .loads import AxialPoly, GateReport, LoadMatrix, LoadProfile, check_uniqueness_gate
from .section import CrossSection, SectionConstants


@dataclass(frozen=True)
class Material:
    """Lame moduli; E and nu are the derived engineering constants."""

    lam: float
    mu: float

    def __post_init__(self):
        if self.mu <= 0 or self.lam < 0:
            raise ValidationError("material needs mu > 0 and lambda >= 0")

    @property
    def E(self) -> float:
        return self.mu * (3.0 * self.lam + 2.0 * self.mu) / (self.lam + self.mu)

    @property
    def nu(self) -> float:
        return self.lam / (2.0 * (self.lam + self.mu))

    @classmethod
    def from_youngs(cls, E: float, nu: float) -> "Material":
        if E <= 0 or not (0.0 <= nu < 0.5):
            raise ValidationError("need E > 0 and 0 <= nu < 1/2")
        lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        mu = E / (2.0 * (1.0 + nu))
        return cls(lam=lam, mu=mu)

    @classmethod
    def from_config(cls, cfg: dict) -> "Material":
        if not isinstance(cfg, dict):
            raise ValidationError("material config must be a mapping")
        has_lame = "lambda" in cfg or "mu" in cfg
        has_eng = "youngs" in cfg or "poisson" in cfg
        if has_lame and has_eng:
            raise ValidationError("give either (lambda, mu) or (youngs, poisson), not both")
        if has_lame:
            return cls(lam=float(cfg["lambda"]), mu=float(cfg["mu"]))
        if has_eng:
            return cls.from_youngs(float(cfg["youngs"]), float(cfg["poisson"]))
        raise ValidationError("material config must give (lambda, mu) or (youngs, poisson)")


def frame_components(frame: FrameField, line: MiddleLine, s3, w):
    """(A t.n1, A t.n2, A n1.n2) for the antisymmetric matrix with axial
    vector w: equals (w.n2, -w.n1, w.t)."""
    s3 = np.asarray(s3, dtype=float)
    w = np.asarray(w, dtype=float)
    t = line.tangent(s3)
    b1 = np.sum(w * frame.n2(s3), axis=-1)
    b2 = -np.sum(w * frame.n1(s3), axis=-1)
    c = np.sum(w * t, axis=-1)
    return b1, b2, c


def matrix_field_norm(values: np.ndarray, h: np.ndarray) -> float:
    """L2 norm of the antisymmetric matrix field with per-interval axial
    vectors: |||skew(a)|||^2 = 2 |a|^2."""
    return float(np.sqrt(np.sum(2.0 * h * np.sum(values**2, axis=-1))))


class ReducedFunctional:
    """Reduced rotation-field energy G with matched derivatives and solver."""

    def __init__(self, line: MiddleLine, frame: FrameField, constants: SectionConstants,
                 material: Material, grid: np.ndarray, load_matrix: LoadMatrix | None = None):
        self.line = line
        self.frame = frame
        self.constants = constants
        self.material = material
        self.grid = np.asarray(grid, dtype=float)
        if self.grid.ndim != 1 or len(self.grid) < 2 or np.any(np.diff(self.grid) <= 0):
            raise ValidationError("grid must be strictly increasing")
        self.h = np.diff(self.grid)
        self.load_matrix = load_matrix

        pts, wts = quadrature.interval_rule(self.grid, n=2)
        self._gauss_pts = pts
        self._gauss_wts = wts
        flat = pts.ravel()
        t = line.tangent(flat).reshape(pts.shape + (3,))
        n1 = frame.n1(flat).reshape(pts.shape + (3,))
        n2 = frame.n2(flat).reshape(pts.shape + (3,))
        E, mu, K = material.E, material.mu, constants.K
        I1, I2 = constants.I1, constants.I2
        # M_k = sum_g w_g [E I1 n2 n2^T + E I2 n1 n1^T + (mu K / 2) t t^T]
        self._elastic = np.einsum(
            "mg,mgi,mgj->mij", wts,
            np.sqrt(E * I1) * n2, np.sqrt(E * I1) * n2)
        self._elastic += np.einsum("mg,mgi,mgj->mij", wts,
                                   np.sqrt(E * I2) * n1, np.sqrt(E * I2) * n1)
        self._elastic += np.einsum("mg,mgi,mgj->mij", wts,
                                   np.sqrt(mu * K / 2.0) * t, np.sqrt(mu * K / 2.0) * t)
        self._tau = quadrature.trapezoid_weights(self.grid)
        if load_matrix is not None:
            self._g_nodes = np.ascontiguousarray(load_matrix.matrix(self.grid))
        else:
            self._g_nodes = np.zeros((len(self.grid), 3, 3))

    # -- energy and derivatives -------------------------------------------

    def _check_field(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape != (len(self.h), 3):
            raise ValidationError(f"generator field must have shape ({len(self.h)}, 3)")
        return np.ascontiguousarray(a)

    def rotation(self, a) -> so3.RotationField:
        return so3.integrate_generator(self.grid, self._check_field(a))

    def energy(self, a) -> float:
        a = self._check_field(a)
        elastic = 0.5 * float(np.einsum("mi,mij,mj->", a, self._elastic, a))
        rot = _kernels.chain_rotations(a, self.h)
        load = float(np.einsum("m,mij,mij->", self._tau, self._g_nodes,
                               rot - np.eye(3)))
        return elastic - load

    def gradient(self, a, b) -> float:
        a = self._check_field(a)
        b = self._check_field(b)
        out = float(np.einsum("mi,mij,mj->", b, self._elastic, a))
        rot = _kernels.chain_rotations(a, self.h)
        out += _kernels.grad_load_sweep(a, self.h, rot, self._g_nodes, self._tau, b)
        return out

    def hessian(self, a, b) -> float:
        a = self._check_field(a)
        b = self._check_field(b)
        out = float(np.einsum("mi,mij,mj->", b, self._elastic, b))
        rot = _kernels.chain_rotations(a, self.h)
        out += _kernels.hess_load_sweep(a, self.h, rot, self._g_nodes, self._tau, b)
        return out

    def _gradient_vectors(self, a) -> np.ndarray:
        """g_k with G'(A)(B) = sum_k b_k . g_k (exact for the discrete G)."""
        rot = _kernels.chain_rotations(a, self.h)
        load_vec = _kernels.solver_load_vectors(a, self.h, rot, self._g_nodes, self._tau)
        return np.einsum("mij,mj->mi", self._elastic, a) - load_vec

    def gradient_residual(self, a) -> float:
        """Dual norm: |G'(A)(B)| <= residual * |||B|||_L2 for all B."""
        a = self._check_field(a)
        g = self._gradient_vectors(a)
        return float(np.sqrt(np.sum(np.sum(g**2, axis=1) / (2.0 * self.h))))

    def norm(self, a) -> float:
        return matrix_field_norm(self._check_field(a), self.h)

    # -- solver ------------------------------------------------------------

    def solve(self, a0=None, damping: float = 0.5, tol: float = 1e-10,
              max_iter: int = 500):
        """Damped fixed point on the stationarity system M_k a_k = l_k(A).

        Returns (a, iterations, residual, converged); reaching max_iter
        reports converged=False with the last residual.
        """
        if not (0.0 < damping <= 1.0):
            raise ValidationError("damping must be in (0, 1]")
        m = len(self.h)
        a = np.zeros((m, 3)) if a0 is None else self._check_field(a0).copy()
        it = 0
        for it in range(1, max_iter + 1):
            rot = _kernels.chain_rotations(np.ascontiguousarray(a), self.h)
            load_vec = _kernels.solver_load_vectors(np.ascontiguousarray(a), self.h,
                                                    rot, self._g_nodes, self._tau)
            a_tilde = np.linalg.solve(self._elastic, load_vec[..., None])[..., 0]
            a_next = (1.0 - damping) * a + damping * a_tilde
            step = matrix_field_norm(a_next - a, self.h)
            a = a_next
            if step <= tol * (1.0 + matrix_field_norm(a, self.h)):
                return a, it, self.gradient_residual(a), True
        return a, it, self.gradient_residual(a), False


def integrate_rotated_tangent(rot: so3.RotationField, line: MiddleLine,
                              grid: np.ndarray) -> np.ndarray:
    """Nodal values of int_0^{s3} R(z) t(z) dz (4-point Gauss per interval)."""

    def fn(s):
        R = rot.at(s)
        return np.einsum("...ij,...j->...i", R, line.tangent(s))

    return quadrature.cumulative_integral(fn, grid, n=4)


@dataclass
class NonlinearSolution:
    """Converged data of the inextensible model: generator, rotation field,
    deformed middle line, energy, and diagnostics."""

    grid: np.ndarray
    generator: np.ndarray
    rotation: so3.RotationField
    V: np.ndarray                    # nodal deformed middle line
    energy: float
    residual: float
    iterations: int
    converged: bool
    gate: GateReport | None = None

    def components(self, frame: FrameField, line: MiddleLine, s3):
        return frame_components(frame, line, s3, self.rotation.generator_at(s3))


@dataclass(frozen=True)
class SolverOptions:
    n_intervals: int = 128
    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 500


def solve_nonlinear(loads: LoadProfile | None, line: MiddleLine, frame: FrameField,
                    section: CrossSection, constants: SectionConstants,
                    material: Material, options: SolverOptions = SolverOptions(),
                    load_matrix: LoadMatrix | None = None,
                    a0: np.ndarray | None = None) -> NonlinearSolution:
    """Solve the nonlinear inextensible model on a uniform grid."""
    from .loads import assemble_load_matrix

    grid = np.linspace(0.0, line.length, options.n_intervals + 1)
    gate = None
    lm = load_matrix
    if lm is None and loads is not None:
        lm = assemble_load_matrix(loads, line, frame, section)
    if lm is not None:
        gate = check_uniqueness_gate(lm, constants, material)
    rf = ReducedFunctional(line, frame, constants, material, grid, lm)
    a, iterations, residual, converged = rf.solve(
        a0=a0, damping=options.damping, tol=options.tol, max_iter=options.max_iter)
    rot = rf.rotation(a)
    V = line.point(np.array(0.0)) + integrate_rotated_tangent(rot, line, grid)
    return NonlinearSolution(grid=grid, generator=a, rotation=rot, V=V,
                             energy=rf.energy(a), residual=residual,
                             iterations=iterations, converged=converged, gate=gate)


def energy_f_nl(V_nodes: np.ndarray, rot: so3.RotationField, rf: ReducedFunctional,
                check_tol: float = 1e-8) -> float:
    """Energy of an admissible pair (V, R); equals G(generator of R).

    Admissibility (V(0) = M(0), R(0) = I, dV/ds3 = R t) is validated against
    the exact reconstruction of V from R; the change-of-variables identity
    with the generator energy is asserted at runtime.
    """
    V_nodes = np.asarray(V_nodes, dtype=float)
    grid = rf.grid
    if V_nodes.shape != (len(grid), 3):
        raise ValidationError("V must be sampled on the functional's grid")
    if so3.frob(rot.at(0.0) - np.eye(3)) > 1e-10:
        raise ValidationError("admissible rotation fields start at the identity")
    V_rec = rf.line.point(np.array(0.0)) + integrate_rotated_tangent(rot, rf.line, grid)
    scale = 1.0 + float(np.max(np.abs(V_rec)))
    if float(np.max(np.abs(V_nodes - V_rec))) > check_tol * scale:
        raise ValidationError("pair is not admissible: dV/ds3 != R t")
    if rot.grid.shape != grid.shape or np.max(np.abs(rot.grid - grid)) > 1e-12:
        raise ValidationError("rotation field must live on the functional's grid")
    value = rf.energy(rot.generator)
    # elastic part recomputed from the (IV-style) rotated-frame components;
    # identical to the generator form because dR/ds3 t . R n = A t . n
    b1, b2, c = frame_components(rf.frame, rf.line, rf._gauss_pts.ravel(),
                                 rot.generator_at(rf._gauss_pts.ravel()))
    E, mu, K = rf.material.E, rf.material.mu, rf.constants.K
    dens = (0.5 * E * (rf.constants.I1 * b1**2 + rf.constants.I2 * b2**2)
            + 0.25 * mu * K * c**2).reshape(rf._gauss_pts.shape)
    elastic_direct = float(np.sum(rf._gauss_wts * dens))
    rot_nodes = rot.at(grid)
    load = float(np.einsum("m,mij,mij->", rf._tau, rf._g_nodes, rot_nodes - np.eye(3)))
    direct = elastic_direct - load
    if abs(direct - value) > 1e-10 * (1.0 + abs(value)):
        raise NumericsError("change-of-variables identity violated beyond 1e-10")
    return value


# -- optimal correctors ----------------------------------------------------


@dataclass
class OptimalWarping:
    """Cross-section warping minimizing the limit energy at fixed rotation.

    In frame components (n1, n2, t), with (beta1, beta2, gamma)(s3) the
    strain components of the generator (or of the infinitesimal rotation
    rate in the linear regime):

        w . n1 = nu [ (S1^2 - S2^2)/2 beta1 + S1 S2 beta2 ] - mean
        w . n2 = nu [ S1 S2 beta1 + (S2^2 - S1^2)/2 beta2 ] - mean
        w . t  = chi(S1, S2) gamma

    The section means are removed so the warping has zero mean per section.
    """

    constants: SectionConstants
    material: Material
    components: object          # callable s3 -> (beta1, beta2, gamma)

    def eval(self, s3: float, S: np.ndarray, chi: np.ndarray, grad_chi: np.ndarray):
        """Frame components and S-derivatives at one axial location.

        Returns (w, d1, d2) of shape (N, 3): w and its S1- and S2-derivatives.
        """
        b1, b2, c = self.components(float(s3))
        nu = self.material.nu
        S1, S2 = S[:, 0], S[:, 1]
        area = self.constants.area
        mean1 = (self.constants.I1 - self.constants.I2) / (2.0 * area) * b1
        mean2 = (self.constants.I2 - self.constants.I1) / (2.0 * area) * b2
        w = np.empty((len(S), 3))
        w[:, 0] = nu * ((S1**2 - S2**2) / 2.0 * b1 + S1 * S2 * b2 - mean1)
        w[:, 1] = nu * (S1 * S2 * b1 + (S2**2 - S1**2) / 2.0 * b2 - mean2)
        w[:, 2] = chi * c
        d1 = np.empty_like(w)
        d1[:, 0] = nu * (S1 * b1 + S2 * b2)
        d1[:, 1] = nu * (S2 * b1 - S1 * b2)
        d1[:, 2] = grad_chi[:, 0] * c
        d2 = np.empty_like(w)
        d2[:, 0] = nu * (-S2 * b1 + S1 * b2)
        d2[:, 1] = nu * (S1 * b1 + S2 * b2)
        d2[:, 2] = grad_chi[:, 1] * c
        return w, d1, d2


@dataclass
class CorrectorBundle:
    """(V_S, warping, strain components) minimizing the limit energy."""

    warping: OptimalWarping
    components: object
    vs_is_zero: bool = True

    def dvs(self, s3):
        s3 = np.asarray(s3, dtype=float)
        return np.zeros(s3.shape + (3,))


def nonlinear_correctors(solution: NonlinearSolution, frame: FrameField,
                         line: MiddleLine, constants: SectionConstants,
                         material: Material) -> CorrectorBundle:
    """Correctors for the kappa = 2 regime: V_S = 0 and the optimal warping
    driven by the generator strain components."""

    def components(s3):
        return frame_components(frame, line, s3, solution.rotation.generator_at(s3))

    return CorrectorBundle(OptimalWarping(constants, material, components), components)


# -- linear bending-torsion model -------------------------------------------


@dataclass
class LinearSolution:
    """Bernoulli-Navier solution: displacement U, rotation vector Rvec, and
    (for extensional/coupled loads) the extensional displacement UE."""

    grid: np.ndarray
    U: np.ndarray
    rvec: np.ndarray
    energy: float
    UE: np.ndarray | None = None
    residual: float = 0.0
    warnings: tuple = ()

    def rvec_prime(self) -> np.ndarray:
        """Per-interval derivative of the P1 rotation vector."""
        return np.diff(self.rvec, axis=0) / np.diff(self.grid)[:, None]

    def rvec_prime_at(self, s3):
        s3 = np.asarray(s3, dtype=float)
        idx = np.clip(np.searchsorted(self.grid, s3, side="right") - 1, 0,
                      len(self.grid) - 2)
        return self.rvec_prime()[idx]

    def components(self, frame: FrameField, line: MiddleLine, s3):
        return frame_components(frame, line, s3, self.rvec_prime_at(s3))


def _linear_system(line, frame, constants, material, grid, lm,
                   coupling: AxialPoly | None = None, area: float | None = None):
    """Banded SPD system of the P1 bending-torsion discretization."""
    n_nodes = len(grid)
    m = n_nodes - 1
    h = np.diff(grid)
    pts, wts = quadrature.interval_rule(grid, n=2)
    flat = pts.ravel()
    t = line.tangent(flat).reshape(pts.shape + (3,))
    n1 = frame.n1(flat).reshape(pts.shape + (3,))
    n2 = frame.n2(flat).reshape(pts.shape + (3,))
    E, mu, K = material.E, material.mu, constants.K
    D = (E * constants.I1 * np.einsum("mgi,mgj->mgij", n2, n2)
         + E * constants.I2 * np.einsum("mgi,mgj->mgij", n1, n1)
         + 0.5 * mu * K * np.einsum("mgi,mgj->mgij", t, t))
    # stiffness: integral of (R'~)^T D (R') with P1 derivatives
    Dk = np.einsum("mg,mgij->mij", wts, D) / h[:, None, None] ** 2

    blocks = np.zeros((m, 2, 2, 3, 3))
    blocks[:, 0, 0] = Dk
    blocks[:, 1, 1] = Dk
    blocks[:, 0, 1] = -Dk
    blocks[:, 1, 0] = -Dk

    if coupling is not None:
        # (R ^ t).(R~ ^ t) = R.R~ - (R.t)(R~.t): traction-weighted mass term
        cvals = coupling(flat).reshape(pts.shape)
        C = 0.5 * area * cvals[..., None, None] * (
            np.eye(3) - np.einsum("mgi,mgj->mgij", t, t))
        lam = (pts - grid[:-1, None]) / h[:, None]
        for (i, Ni) in ((0, 1.0 - lam), (1, lam)):
            for (j, Nj) in ((0, 1.0 - lam), (1, lam)):
                blocks[:, i, j] += np.einsum("mg,mg,mg,mgij->mij", wts, Ni, Nj, C)

    # load vector: w(s) = t ^ H + n1 ^ m1 + n2 ^ m2 against P1 shapes
    rhs = np.zeros((n_nodes, 3))
    if lm is not None:
        H = lm.H(flat).reshape(pts.shape + (3,))
        wvec = np.cross(t, H)
        if lm.m1 is not None:
            wvec += np.cross(n1, lm.m1(flat).reshape(pts.shape + (3,)))
            wvec += np.cross(n2, lm.m2(flat).reshape(pts.shape + (3,)))
        lam = (pts - grid[:-1, None]) / h[:, None]
        rhs[:-1] += np.einsum("mg,mg,mgi->mi", wts, 1.0 - lam, wvec)
        rhs[1:] += np.einsum("mg,mg,mgi->mi", wts, lam, wvec)
    return blocks, rhs


def _solve_banded_blocks(blocks, rhs_free):
    """Assemble block-tridiagonal (node 0 eliminated) into banded storage and
    solve with Cholesky."""
    m = blocks.shape[0]            # intervals
    n_free = 3 * m                 # nodes 1..m
    ab = np.zeros((6, n_free))     # upper banded, bandwidth 5

    def add(i, j, val):
        # free-node indices i, j (0-based), val 3x3
        for p in range(3):
            for q in range(3):
                r, c = 3 * i + p, 3 * j + q
                if r <= c:
                    ab[5 + r - c, c] += val[p, q]

    for k in range(m):
        li, ri = k - 1, k          # free indices of nodes k and k+1
        if li >= 0:
            add(li, li, blocks[k, 0, 0])
            add(li, ri, blocks[k, 0, 1])
        add(ri, ri, blocks[k, 1, 1])
    try:
        x = solveh_banded(ab, rhs_free.ravel(), lower=False)
    except LinAlgError as exc:
        raise NumericsError(
            "linear system is not positive definite (coupling too negative?)") from exc
    return x.reshape(m, 3)


def solve_linear(loads: LoadProfile | None, line: MiddleLine, frame: FrameField,
                 section: CrossSection, constants: SectionConstants,
                 material: Material, n_intervals: int = 128,
                 load_matrix: LoadMatrix | None = None) -> LinearSolution:
    """Minimize the linear bending-torsion functional (kappa > 2)."""
    from .loads import assemble_load_matrix

    grid = np.linspace(0.0, line.length, n_intervals + 1)
    lm = load_matrix
    if lm is None and loads is not None:
        lm = assemble_load_matrix(loads, line, frame, section)
    blocks, rhs = _linear_system(line, frame, constants, material, grid, lm)
    x = _solve_banded_blocks(blocks, rhs[1:])
    rvec = np.vstack([np.zeros(3), x])

    energy = _linear_energy(blocks, rhs, rvec)
    residual = _linear_residual(blocks, rhs, rvec)
    U = _reconstruct_displacement(rvec, line, grid)
    return LinearSolution(grid=grid, U=U, rvec=rvec, energy=energy, residual=residual)


def _linear_energy(blocks, rhs, rvec) -> float:
    ax = _apply_blocks(blocks, rvec)
    return float(0.5 * np.sum(rvec * ax) - np.sum(rhs * rvec))


def _linear_residual(blocks, rhs, rvec) -> float:
    ax = _apply_blocks(blocks, rvec)
    r = (ax - rhs)[1:]
    scale = max(float(np.max(np.abs(rhs))), 1e-30)
    return float(np.max(np.abs(r)) / scale)


def _apply_blocks(blocks, rvec) -> np.ndarray:
    m = blocks.shape[0]
    out = np.zeros_like(rvec)
    for k in range(m):
        out[k] += blocks[k, 0, 0] @ rvec[k] + blocks[k, 0, 1] @ rvec[k + 1]
        out[k + 1] += blocks[k, 1, 0] @ rvec[k] + blocks[k, 1, 1] @ rvec[k + 1]
    return out


def _reconstruct_displacement(rvec, line, grid) -> np.ndarray:
    """Trapezoid integration of R ^ t from the clamped end."""
    t = line.tangent(grid)
    integrand = np.cross(rvec, t)
    h = np.diff(grid)[:, None]
    U = np.zeros_like(rvec)
    U[1:] = np.cumsum(0.5 * h * (integrand[:-1] + integrand[1:]), axis=0)
    return U


def linear_correctors(solution: LinearSolution, frame: FrameField, line: MiddleLine,
                      constants: SectionConstants, material: Material) -> CorrectorBundle:
    """Correctors for kappa > 2: V_S = 0 and the optimal warping driven by
    the strain components of dRvec/ds3."""

    def components(s3):
        return frame_components(frame, line, s3, solution.rvec_prime_at(s3))

    return CorrectorBundle(OptimalWarping(constants, material, components), components)


def solve_extensional(loads: LoadProfile, line: MiddleLine, section: CrossSection,
                      material: Material, n_intervals: int = 128) -> LinearSolution:
    """Pointwise minimizer of the extensional model: dU_E/ds3 . t = f_tilde/E
    and m = -(|w| / 2E) int f_tilde^2."""
    if loads.f_tilde is None:
        raise ValidationError("extensional model needs the traction profile f_tilde")
    grid = np.linspace(0.0, line.length, n_intervals + 1)
    ft = loads.f_tilde
    warn_list = []
    if loads.kappa == 3:
        vals = ft(grid)
        if np.any(vals < -1e-12 * max(1.0, float(np.max(np.abs(vals))))):
            warnings.warn("f_tilde changes sign at kappa = 3: the sign gate fails, "
                          "proceeding anyway")
            warn_list.append("sign-gate-failed")
    E = material.E

    def dUE(s):
        return (ft(s) / E)[..., None] * line.tangent(s)

    UE = quadrature.cumulative_integral(dUE, grid, n=4)
    # exact integral of f_tilde^2 (Gauss with enough points per breakpoint)
    deg = ft.ppoly.c.shape[0] - 1
    m_val = -(section.area / (2.0 * E)) * float(
        quadrature.integrate(lambda s: ft(s) ** 2, ft.ppoly.x, n=deg + 1))
    n_nodes = len(grid)
    zeros = np.zeros((n_nodes, 3))
    return LinearSolution(grid=grid, U=zeros, rvec=zeros.copy(), energy=m_val,
                          UE=UE, warnings=tuple(warn_list))


@dataclass
class CoupledSolution:
    linear: LinearSolution
    UE: np.ndarray
    energy: float


def solve_coupled(loads: LoadProfile, line: MiddleLine, frame: FrameField,
                  section: CrossSection, constants: SectionConstants,
                  material: Material, n_intervals: int = 128) -> CoupledSolution:
    """Coupled bending-torsion-extension model (kappa = 3).

    Solves the variational problem with the traction-weighted coupling term
    (|w|/2) int f1 dU0/ds3 . dU/ds3, then recovers the extensional
    displacement from dU_E/ds3 . t = -|dU0/ds3|^2 / 2 + f1/E.
    """
    from .loads import assemble_load_matrix

    if loads.f_tilde is None:
        raise ValidationError("coupled model needs the traction profile f_tilde")
    grid = np.linspace(0.0, line.length, n_intervals + 1)
    lm = assemble_load_matrix(
        LoadProfile(kappa=loads.kappa, f=loads.f, g=loads.g), line, frame, section)
    blocks, rhs = _linear_system(line, frame, constants, material, grid, lm,
                                 coupling=loads.f_tilde, area=section.area)
    x = _solve_banded_blocks(blocks, rhs[1:])
    rvec = np.vstack([np.zeros(3), x])
    U = _reconstruct_displacement(rvec, line, grid)
    lin = LinearSolution(grid=grid, U=U, rvec=rvec,
                         energy=_linear_energy(blocks, rhs, rvec),
                         residual=_linear_residual(blocks, rhs, rvec))

    ft = loads.f_tilde
    E = material.E
    rp = lin.rvec_prime()

    def du0_sq(s):
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(grid, s, side="right") - 1, 0, len(grid) - 2)
        lam = (s - grid[idx]) / np.diff(grid)[idx]
        rv = rvec[idx] * (1 - lam)[..., None] + rvec[idx + 1] * lam[..., None]
        du = np.cross(rv, line.tangent(s))
        return np.sum(du * du, axis=-1)

    def dUE(s):
        phi = -0.5 * du0_sq(s) + ft(s) / E
        return phi[..., None] * line.tangent(s)

    UE = quadrature.cumulative_integral(dUE, grid, n=4)

    # total limit energy at the recovered U_E:
    #   elastic - load work + (|w|/2) int f1 |U0'|^2 - (|w| / 2E) int f1^2,
    # where lin.energy = elastic - load work + (|w|/4) int f1 |U0'|^2
    def coupling_density(s):
        return 0.5 * section.area * ft(s) * du0_sq(s)

    coupling_term = float(quadrature.integrate(coupling_density, grid, n=4))
    deg = ft.ppoly.c.shape[0] - 1
    ext_term = -(section.area / (2.0 * E)) * float(
        quadrature.integrate(lambda s: ft(s) ** 2, ft.ppoly.x, n=deg + 1))
    energy = lin.energy + 0.5 * coupling_term + ext_term
    return CoupledSolution(linear=lin, UE=UE, energy=energy)
