"""3D St Venant-Kirchhoff energy, recovery sequences, limit Green-St Venant
tensors, and the numerical Gamma-convergence check.

The rescaled energy quotient (J(v_delta) - J(Id)) / delta^(2 kappa) of a
recovery deformation

    v = V + R (s1 n1 + s2 n2) + delta^(kappa-1) V_S + delta^kappa wbar(S, s3)

is compared against the limit functional evaluated on the same data: the
quadratic form of the limit strain integrated over the reference domain minus
the limit load work.  Both sides use the same section quadrature so the gap
measures the delta-dependence, not the mesh.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .errors import ValidationError
from .fields import DeformationField3D, cell_measures, gradient_xv
from .geometry import RodChart, grad_phi, phi
from .limits import (CorrectorBundle, LinearSolution, Material, NonlinearSolution,
                     OptimalWarping, frame_components)
from .loads import LoadMatrix, LoadProfile
from .section import CrossSection, SectionConstants
from .so3 import RotationField, frob, integrate_generator, skew


def svk_density(F: np.ndarray, material: Material) -> np.ndarray:
    """St Venant-Kirchhoff density (lam/8) tr(C - I)^2 + (mu/4) tr((C - I)^2)
    with C = F^T F; +inf where det F <= 0."""
    F = np.asarray(F, dtype=float)
    C = np.swapaxes(F, -1, -2) @ F
    C[..., 0, 0] -= 1.0
    C[..., 1, 1] -= 1.0
    C[..., 2, 2] -= 1.0
    tr = np.trace(C, axis1=-2, axis2=-1)
    tr2 = np.trace(C @ C, axis1=-2, axis2=-1)
    W = material.lam / 8.0 * tr**2 + material.mu / 4.0 * tr2
    det = np.linalg.det(F)
    return np.where(det > 0, W, np.inf)


@dataclass
class EnergyResult:
    value: float
    offending_point: tuple | None = None

    def __float__(self):
        return self.value


# -- limit Green-St Venant tensor -------------------------------------------


class GreenStVenantField:
    """Limit strain field in the frame (n1, n2, t).

    One shared closed form covers both regimes via the strain components
    (beta1, beta2, gamma) of the generator (kappa = 2) or of dRvec/ds3
    (kappa > 2); dvs holds the V_S-rate frame components (zero for the
    optimal correctors).
    """

    def __init__(self, section: CrossSection, constants: SectionConstants,
                 frame, line, components, warping: OptimalWarping | None = None,
                 dvs=None):
        self.section = section
        self.constants = constants
        self.frame = frame
        self.line = line
        self.components = components
        self.warping = warping
        self.dvs = dvs
        self._S = section.rule_points.reshape(-1, 2)
        chi = constants.chi
        bary_chi = np.einsum("qi,ti->tq", _dun_bary(), chi[section.tris])
        self._chi_rule = bary_chi.reshape(-1)
        self._gradchi_rule = np.repeat(constants.grad_chi, 6, axis=0)

    def hat(self, s3: float, S: np.ndarray, chi: np.ndarray,
            grad_chi: np.ndarray) -> np.ndarray:
        b1, b2, c = self.components(float(s3))
        S1, S2 = S[:, 0], S[:, 1]
        if self.warping is not None:
            _, d1, d2 = self.warping.eval(s3, S, chi, grad_chi)
        else:
            d1 = d2 = np.zeros((len(S), 3))
        dvs = np.zeros(3) if self.dvs is None else np.asarray(self.dvs(float(s3)))
        E = np.zeros((len(S), 3, 3))
        E[:, 0, 0] = d1[:, 0]
        E[:, 1, 1] = d2[:, 1]
        E[:, 0, 1] = E[:, 1, 0] = 0.5 * (d1[:, 1] + d2[:, 0])
        E[:, 0, 2] = E[:, 2, 0] = 0.5 * (d1[:, 2] - S2 * c + dvs[0])
        E[:, 1, 2] = E[:, 2, 1] = 0.5 * (d2[:, 2] + S1 * c + dvs[1])
        E[:, 2, 2] = -S1 * b1 - S2 * b2 + dvs[2]
        return E

    def hat_rule(self, s3: float) -> np.ndarray:
        return self.hat(s3, self._S, self._chi_rule, self._gradchi_rule)

    def world_rule(self, s3: float) -> np.ndarray:
        """E = (n1 | n2 | t) Ehat (n1 | n2 | t)^T on the section rule points."""
        N = _frame_matrix(self.frame, self.line, s3)
        return N @ self.hat_rule(s3) @ N.T

    def quadratic_form_rule(self, s3: float, material: Material) -> float:
        """int over the section of (lam/2) tr^2 + mu |||Ehat|||^2."""
        E = self.hat_rule(s3)
        tr = np.trace(E, axis1=-2, axis2=-1)
        q = 0.5 * material.lam * tr**2 + material.mu * np.sum(E**2, axis=(-2, -1))
        return float(np.sum(self.section.rule_weights.reshape(-1) * q))


def _dun_bary():
    from .section import _DUN4_BARY

    return _DUN4_BARY


def _frame_matrix(frame, line, s3: float) -> np.ndarray:
    s = np.asarray(float(s3))
    return np.stack([frame.n1(s), frame.n2(s), line.tangent(s)], axis=-1)


def limit_tensor(section, constants, frame, line, regime: str, rotation=None,
                 rvec_prime_at=None, warping=None, dvs=None) -> GreenStVenantField:
    """Assemble the limit strain evaluator for either regime.

    regime "nonlinear" takes the SO(3) field (kappa = 2); regime "linear"
    takes the infinitesimal rotation rate (kappa > 2).
    """
    if regime == "nonlinear":
        if rotation is None:
            raise ValidationError("nonlinear regime needs the rotation field")

        def components(s3):
            return frame_components(frame, line, s3, rotation.generator_at(s3))
    elif regime == "linear":
        if rvec_prime_at is None:
            raise ValidationError("linear regime needs the rotation-vector rate")

        def components(s3):
            return frame_components(frame, line, s3, rvec_prime_at(s3))
    else:
        raise ValidationError("regime must be 'nonlinear' or 'linear'")
    return GreenStVenantField(section, constants, frame, line, components,
                              warping=warping, dvs=dvs)


# -- recovery sequences ------------------------------------------------------


class _DeformedLine:
    """V(s3) = M(0) + int_0^s3 R t, exact rotations with Gauss partials."""

    def __init__(self, rot: RotationField, line, grid):
        from .limits import integrate_rotated_tangent

        self.rot = rot
        self.line = line
        self.grid = np.asarray(grid, dtype=float)
        self.nodes = line.point(np.array(0.0)) + integrate_rotated_tangent(rot, line, grid)
        self._gx, self._gw = np.polynomial.legendre.leggauss(4)

    def __call__(self, s3: float) -> np.ndarray:
        s3 = float(s3)
        idx = int(np.clip(np.searchsorted(self.grid, s3, side="right") - 1, 0,
                          len(self.grid) - 2))
        a, b = self.grid[idx], s3
        if b <= a:
            return self.nodes[idx]
        pts = 0.5 * (a + b) + 0.5 * (b - a) * self._gx
        R = self.rot.at(pts)
        t = self.line.tangent(pts)
        partial = 0.5 * (b - a) * np.einsum("g,gij,gj->i", self._gw, R, t)
        return self.nodes[idx] + partial


class RecoveryEvaluator:
    """Analytic recovery deformation and its exact gradient.

    kappa = 2 ("nonlinear"): v = V + R(s1 n1 + s2 n2) + delta^2 R (N w),
    kappa > 2 ("linear"):    v = V_d + R_d(s1 n1 + s2 n2) + delta^k (N w),
    where N = (n1 | n2 | t), w the warping frame components, and for the
    linear regime R_d integrates the scaled generator delta^(kappa-2) B.
    An optional stretching corrector V_S enters at order delta^(kappa-1).
    """

    def __init__(self, chart: RodChart, regime: str, rotation: RotationField,
                 deformed_line, warping: OptimalWarping | None, kappa: float,
                 components_rate=None, vs=None, vs_rate=None):
        self.chart = chart
        self.regime = regime
        self.rotation = rotation
        self.V = deformed_line
        self.warping = warping
        self.kappa = float(kappa)
        self.components_rate = components_rate
        self.vs = vs
        self.vs_rate = vs_rate
        sec = chart.section
        self._S_rule = sec.rule_points.reshape(-1, 2)
        chi = warping.constants.chi if warping is not None else np.zeros(len(sec.nodes))
        self._chi_nodes = chi
        bary_chi = np.einsum("qi,ti->tq", _dun_bary(), chi[sec.tris])
        self._chi_rule = bary_chi.reshape(-1)
        if warping is not None:
            self._gradchi_rule = np.repeat(warping.constants.grad_chi, 6, axis=0)
        else:
            self._gradchi_rule = np.zeros((len(self._S_rule), 2))

    # -- helpers -----------------------------------------------------------

    def _warp_terms(self, s3: float, S, chi, grad_chi):
        if self.warping is None:
            z = np.zeros((len(S), 3))
            return z, z.copy(), z.copy(), z.copy()
        w, d1, d2 = self.warping.eval(s3, S, chi, grad_chi)
        if self.components_rate is not None:
            rate = OptimalWarping(self.warping.constants, self.warping.material,
                                  self.components_rate)
            wdot, _, _ = rate.eval(s3, S, chi, grad_chi)
        else:
            wdot = np.zeros_like(w)
        return w, d1, d2, wdot

    def _frames(self, s3: float):
        s = np.asarray(float(s3))
        frame = self.chart.frame
        line = self.chart.line
        return (frame.n1(s), frame.n2(s), line.tangent(s),
                frame.dn1(s), frame.dn2(s), line.dtangent(s))

    def _orders(self):
        # (order of V_S, order of warping) relative to delta
        if self.regime == "nonlinear":
            return 1.0, 2.0
        return self.kappa - 1.0, self.kappa

    # -- evaluation ---------------------------------------------------------

    def value(self, S: np.ndarray, s3: float, chi: np.ndarray) -> np.ndarray:
        d = self.chart.delta
        n1, n2, t, *_ = self._frames(s3)
        R = self.rotation.at(float(s3))
        N = np.stack([n1, n2, t], axis=-1)
        w, _, _, _ = self._warp_terms(s3, S, chi, np.zeros((len(S), 2)))
        p_vs, p_w = self._orders()
        base = self.V(s3) + d * (S @ np.stack([R @ n1, R @ n2]))
        if self.regime == "nonlinear":
            warp_world = (R @ N @ w.T).T
        else:
            warp_world = (N @ w.T).T
        out = base + d**p_w * warp_world
        if self.vs is not None:
            out = out + d**p_vs * self.vs(float(s3))
        return out

    def value_rule(self, s3: float) -> np.ndarray:
        return self.value(self._S_rule, s3, self._chi_rule)

    def value_nodes(self, s3: float) -> np.ndarray:
        return self.value(self.chart.section.nodes, s3, self._chi_nodes)

    def grad_rule(self, s3: float) -> np.ndarray:
        """Exact deformation gradient at the section rule points, (N, 3, 3)."""
        d = self.chart.delta
        S = self._S_rule
        n1, n2, t, dn1, dn2, dt = self._frames(s3)
        R = self.rotation.at(float(s3))
        gen = self.rotation.generator_at(float(s3))
        A = skew(gen)
        N = np.stack([n1, n2, t], axis=-1)
        Np = np.stack([dn1, dn2, dt], axis=-1)
        w, d1, d2, wdot = self._warp_terms(s3, S, self._chi_rule, self._gradchi_rule)
        p_vs, p_w = self._orders()

        if self.regime == "nonlinear":
            carrier = R @ N          # columns R n1, R n2, R t
            warp_s3 = (R @ (A @ N + Np) @ w.T + carrier @ wdot.T).T
        else:
            carrier = N
            warp_s3 = (Np @ w.T + N @ wdot.T).T

        col1 = np.broadcast_to(R @ n1, (len(S), 3)) + d ** (p_w - 1.0) * (carrier @ d1.T).T
        col2 = np.broadcast_to(R @ n2, (len(S), 3)) + d ** (p_w - 1.0) * (carrier @ d2.T).T
        col3 = (np.broadcast_to(R @ t, (len(S), 3))
                + d * (S @ np.stack([R @ (A @ n1 + dn1), R @ (A @ n2 + dn2)]))
                + d**p_w * warp_s3)
        if self.vs_rate is not None:
            col3 = col3 + d**p_vs * self.vs_rate(float(s3))
        grad_s = np.stack([col1, col2, col3], axis=-1)

        s1 = d * S[:, 0]
        s2 = d * S[:, 1]
        s3a = np.full(len(S), float(s3))
        gphi = grad_phi(self.chart, s1, s2, s3a)
        return grad_s @ np.linalg.inv(gphi)


def _sample_evaluator(ev: RecoveryEvaluator, chart: RodChart, axial_grid):
    vals = np.stack([ev.value_nodes(s) for s in np.asarray(axial_grid, dtype=float)])
    return DeformationField3D(chart=chart, axial_grid=axial_grid, values=vals,
                              analytic=ev)


def recovery_nl(solution: NonlinearSolution, bundle: CorrectorBundle,
                chart: RodChart, axial_grid=None) -> DeformationField3D:
    """Recovery deformation of the nonlinear regime on the given chart."""
    if frob(solution.rotation.at(0.0) - np.eye(3)) > 1e-10:
        raise ValidationError("recovery data must have R(0) = I")
    grid = solution.grid if axial_grid is None else np.asarray(axial_grid, float)
    line = chart.line
    V = _DeformedLine(solution.rotation, line, solution.grid)

    def rate(s3):
        gen = solution.rotation.generator_at(np.asarray(s3, dtype=float))
        s = np.asarray(s3, dtype=float)
        return (np.sum(gen * chart.frame.dn2(s), axis=-1),
                -np.sum(gen * chart.frame.dn1(s), axis=-1),
                np.sum(gen * line.dtangent(s), axis=-1))

    ev = RecoveryEvaluator(chart, "nonlinear", solution.rotation, V,
                           bundle.warping if bundle is not None else None,
                           kappa=2.0, components_rate=rate)
    return _sample_evaluator(ev, chart, grid)


def recovery_lin(solution: LinearSolution, bundle: CorrectorBundle,
                 chart: RodChart, kappa: float, axial_grid=None) -> DeformationField3D:
    """Recovery deformation of the linear regime: the rotation field
    integrates the scaled generator delta^(kappa-2) dRvec/ds3."""
    if np.max(np.abs(solution.rvec[0])) > 1e-12:
        raise ValidationError("recovery data must have Rvec(0) = 0")
    grid = solution.grid if axial_grid is None else np.asarray(axial_grid, float)
    d = chart.delta
    gen = d ** (kappa - 2.0) * solution.rvec_prime()
    rot = integrate_generator(solution.grid, gen)
    V = _DeformedLine(rot, chart.line, solution.grid)

    def rate(s3):
        rp = solution.rvec_prime_at(np.asarray(s3, dtype=float))
        s = np.asarray(s3, dtype=float)
        return (np.sum(rp * chart.frame.dn2(s), axis=-1),
                -np.sum(rp * chart.frame.dn1(s), axis=-1),
                np.sum(rp * chart.line.dtangent(s), axis=-1))

    ev = RecoveryEvaluator(chart, "linear", rot, V,
                           bundle.warping if bundle is not None else None,
                           kappa=kappa, components_rate=rate)
    return _sample_evaluator(ev, chart, grid)


# -- total 3D energy ---------------------------------------------------------


def total_energy(fld: DeformationField3D, loads: LoadProfile | None,
                 material: Material, n_gauss: int = 4) -> EnergyResult:
    """J(v) - J(Id) over the physical rod.

    Uses the analytic gradient when the field carries a recovery evaluator;
    otherwise P1/finite-difference gradients on the sampling grid.
    """
    if fld.analytic is not None:
        return _total_energy_analytic(fld, loads, material, n_gauss)
    return _total_energy_sampled(fld, loads, material)


def _force_density(loads, delta, S, s3_arr):
    if loads is None:
        return 0.0
    kap = loads.kappa
    out = delta**kap * loads.f(s3_arr)
    if np.ndim(out) == 1:
        out = np.broadcast_to(out, (len(S), 3))
    if loads.g is not None:
        out = out + delta ** (kap - 1.0) * loads.g.value(S[:, 0], S[:, 1], s3_arr)
    return out


def _total_energy_analytic(fld, loads, material, n_gauss):
    ev: RecoveryEvaluator = fld.analytic
    chart = fld.chart
    sec = chart.section
    delta = chart.delta
    S = sec.rule_points.reshape(-1, 2)
    rule_w = sec.rule_weights.reshape(-1)
    pts, wts = quadrature.interval_rule(fld.axial_grid, n=n_gauss)
    total = 0.0
    for k in range(pts.shape[0]):
        for g in range(pts.shape[1]):
            s3 = float(pts[k, g])
            F = ev.grad_rule(s3)
            W = svk_density(F, material)
            if not np.all(np.isfinite(W)):
                bad = int(np.argmax(~np.isfinite(W)))
                return EnergyResult(np.inf, (S[bad, 0], S[bad, 1], s3))
            k1, k2 = chart.curvature_coefficients(np.asarray(s3))
            det = np.abs(1.0 + delta * S[:, 0] * k1 + delta * S[:, 1] * k2)
            integrand = W
            if loads is not None:
                v_m_id = ev.value_rule(s3) - phi(
                    chart, delta * S[:, 0], delta * S[:, 1], np.full(len(S), s3),
                    validate=False)
                fdl = _force_density(loads, delta, S, np.full(len(S), s3))
                integrand = integrand - np.sum(fdl * v_m_id, axis=-1)
            total += wts[k, g] * float(np.sum(rule_w * integrand * det))
    return EnergyResult(delta**2 * total)


def _total_energy_sampled(fld, loads, material):
    chart = fld.chart
    sec = chart.section
    delta = chart.delta
    F = gradient_xv(fld)                      # (A, T, 3, 3)
    W = svk_density(F, material)
    meas = cell_measures(fld, weighted=True)  # (A, T)
    if not np.all(np.isfinite(W)):
        a, t = np.unravel_index(int(np.argmax(~np.isfinite(W))), W.shape)
        c = sec.centroids[t]
        return EnergyResult(np.inf, (c[0], c[1], float(fld.axial_grid[a])))
    total = float(np.sum(meas * W))
    if loads is not None:
        cent = sec.centroids
        A, T = W.shape
        v_cent = fld.values[:, sec.tris, :].mean(axis=2)     # (A, T, 3)
        s3 = np.broadcast_to(fld.axial_grid[:, None], (A, T)).ravel()
        id_cent = phi(chart, delta * np.tile(cent[:, 0], A), delta * np.tile(cent[:, 1], A),
                      s3, validate=False).reshape(A, T, 3)
        fdl = _force_density(loads, delta, np.tile(cent, (A, 1)), s3).reshape(A, T, 3)
        total -= float(np.sum(meas * np.sum(fdl * (v_cent - id_cent), axis=-1)))
    return EnergyResult(total)


# -- Gamma-convergence check --------------------------------------------------


@dataclass
class GammaReport:
    kappa: float
    deltas: list
    quotients: list
    gaps: list
    tensor_gaps: list
    limit_energy: float
    slope: float
    tensor_slope: float
    dropped: list = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.gaps, self.gaps[1:]))


def _fit_slope(deltas, gaps):
    good = [(d, g) for d, g in zip(deltas, gaps) if g > 0]
    if len(good) < 2:
        return float("nan")
    x = np.log([d for d, _ in good])
    y = np.log([g for _, g in good])
    return float(np.polyfit(x, y, 1)[0])


def _limit_elastic(gsv: GreenStVenantField, material, grid, n_gauss=4) -> float:
    pts, wts = quadrature.interval_rule(grid, n=n_gauss)
    total = 0.0
    for k in range(pts.shape[0]):
        for g in range(pts.shape[1]):
            total += wts[k, g] * gsv.quadratic_form_rule(float(pts[k, g]), material)
    return total


def _tensor_gap(ev: RecoveryEvaluator, gsv: GreenStVenantField, grid, kappa,
                n_gauss=4) -> float:
    delta = ev.chart.delta
    sec = ev.chart.section
    rule_w = sec.rule_weights.reshape(-1)
    pts, wts = quadrature.interval_rule(grid, n=n_gauss)
    acc = 0.0
    for k in range(pts.shape[0]):
        for g in range(pts.shape[1]):
            s3 = float(pts[k, g])
            F = ev.grad_rule(s3)
            green = 0.5 * (np.swapaxes(F, -1, -2) @ F - np.eye(3)) / delta ** (kappa - 1.0)
            diff = green - gsv.world_rule(s3)
            acc += wts[k, g] * float(np.sum(rule_w * np.sum(diff**2, axis=(-2, -1))))
    return float(np.sqrt(acc))


def gamma_check(regime: str, solution, bundle: CorrectorBundle,
                loads: LoadProfile | None, load_matrix: LoadMatrix | None,
                line, frame, section: CrossSection, constants: SectionConstants,
                material: Material, deltas, kappa: float,
                n_gauss: int = 4) -> GammaReport:
    """Evaluate the energy quotient along a delta-sweep against the limit.

    regime "nonlinear" takes a NonlinearSolution (kappa = 2); "linear" takes
    a LinearSolution (kappa > 2).  Deltas that make the chart invalid or the
    3D energy infinite are dropped with a warning.
    """
    deltas = list(deltas)
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValidationError("delta list must be strictly decreasing")
    grid = solution.grid

    if regime == "nonlinear":
        if kappa != 2:
            raise ValidationError("nonlinear regime means kappa = 2")
        gsv = limit_tensor(section, constants, frame, line, "nonlinear",
                           rotation=solution.rotation, warping=bundle.warping)
    elif regime == "linear":
        if kappa <= 2:
            raise ValidationError("linear regime means kappa > 2")
        gsv = limit_tensor(section, constants, frame, line, "linear",
                           rvec_prime_at=solution.rvec_prime_at, warping=bundle.warping)
    else:
        raise ValidationError("regime must be 'nonlinear' or 'linear'")

    elastic = _limit_elastic(gsv, material, grid, n_gauss)
    load_work = 0.0
    if load_matrix is not None:
        if regime == "nonlinear":
            vm = solution.V - line.point(grid)
            load_work = load_matrix.work(vm, solution.rotation, grid)
        else:
            load_work = _linear_load_work(load_matrix, solution, frame)
    limit_energy = elastic - load_work

    report = GammaReport(kappa=kappa, deltas=[], quotients=[], gaps=[],
                         tensor_gaps=[], limit_energy=limit_energy,
                         slope=float("nan"), tensor_slope=float("nan"))
    for d in deltas:
        try:
            chart = RodChart(line, frame, section, d)
        except ValidationError as exc:
            warnings.warn(f"delta = {d:g} dropped: {exc}")
            report.dropped.append(d)
            continue
        if regime == "nonlinear":
            fld = recovery_nl(solution, bundle, chart)
        else:
            fld = recovery_lin(solution, bundle, chart, kappa)
        res = total_energy(fld, loads, material, n_gauss=n_gauss)
        if not np.isfinite(res.value):
            warnings.warn(f"delta = {d:g} dropped: infinite 3D energy at "
                          f"{res.offending_point}")
            report.dropped.append(d)
            continue
        quotient = res.value / d ** (2.0 * kappa)
        report.deltas.append(d)
        report.quotients.append(quotient)
        report.gaps.append(abs(quotient - limit_energy))
        report.tensor_gaps.append(_tensor_gap(fld.analytic, gsv, grid, kappa, n_gauss))
    report.slope = _fit_slope(report.deltas, report.gaps)
    report.tensor_slope = _fit_slope(report.deltas, report.tensor_gaps)
    return report


def _linear_load_work(lm: LoadMatrix, solution: LinearSolution, frame) -> float:
    """int F . U + sum_a int m_a . (Rvec ^ n_a) for the P1 solution.

    U is the exact integral of (P1 Rvec) ^ t (nodal cumulative Gauss plus
    partials), matching the limit of the recovery sequence.
    """
    grid = solution.grid
    rvec = solution.rvec
    line = lm.line
    h = np.diff(grid)

    def rv_at(s):
        idx = np.clip(np.searchsorted(grid, s, side="right") - 1, 0, len(grid) - 2)
        lam = (s - grid[idx]) / h[idx]
        return rvec[idx] * (1 - lam)[..., None] + rvec[idx + 1] * lam[..., None]

    def du(s):
        return np.cross(rv_at(s), line.tangent(s))

    u_nodes = quadrature.cumulative_integral(du, grid, n=4)
    gx, gw = np.polynomial.legendre.leggauss(4)

    def u_at(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        idx = np.clip(np.searchsorted(grid, s, side="right") - 1, 0, len(grid) - 2)
        seg = s - grid[idx]
        inner = grid[idx][:, None] + 0.5 * seg[:, None] * (1.0 + gx[None, :])
        du_inner = du(inner.ravel()).reshape(inner.shape + (3,))
        partial = 0.5 * seg[:, None] * np.einsum("g,sgi->si", gw, du_inner)
        return u_nodes[idx] + partial

    def integrand(s):
        out = np.sum(lm.F(s) * u_at(s), axis=-1)
        if lm.m1 is not None:
            rv = rv_at(s)
            out = out + np.sum(lm.m1(s) * np.cross(rv, frame.n1(s)), axis=-1)
            out = out + np.sum(lm.m2(s) * np.cross(rv, frame.n2(s)), axis=-1)
        return out

    return float(quadrature.integrate(integrand, grid, n=4))
