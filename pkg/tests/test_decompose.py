import numpy as np
import pytest

from thinrod import DegenerateSliceError, ValidationError
from thinrod.decompose import (
    decompose,
    default_slice_count,
    estimate_report,
    fit_slice_rotations,
    section_means,
    split_bending_stretching,
)
from thinrod.energy3d import recovery_nl
from thinrod.fields import dist_to_so3, gradient_xv, identity_field, rescale, sample_field
from thinrod.geometry import RodChart, phi
from thinrod.limits import (SolverOptions, integrate_rotated_tangent,
                            nonlinear_correctors, solve_nonlinear)
from thinrod.loads import load_profile_from_config
from thinrod.so3 import frob, integrate_generator, rodrigues


@pytest.fixture(scope="module")
def straight_chart(straight_z, disc2):
    line, frame = straight_z
    return RodChart(line, frame, disc2, 0.05)


@pytest.fixture(scope="module")
def arc_chart(quarter_arc, disc2):
    line, frame = quarter_arc
    return RodChart(line, frame, disc2, 0.05)


def test_section_means_identity(arc_chart):
    grid = np.linspace(0, arc_chart.line.length, 33)
    fld = identity_field(arc_chart, grid)
    V = section_means(fld)
    assert np.max(np.abs(V - arc_chart.line.point(grid))) < 1e-13


def test_section_means_rigid(arc_chart):
    grid = np.linspace(0, arc_chart.line.length, 17)
    Q = rodrigues(np.array([1.0, 0.0, 0.0]), 0.5)
    a = np.array([0.1, 0.2, -0.3])
    fld = sample_field(arc_chart, grid,
                       lambda s1, s2, s3: a + phi(arc_chart, s1, s2, s3,
                                                  validate=False) @ Q.T)
    V = section_means(fld)
    expect = a + arc_chart.line.point(grid) @ Q.T
    assert np.max(np.abs(V - expect)) < 1e-13


def test_section_means_shifted(arc_chart):
    grid = np.linspace(0, arc_chart.line.length, 17)
    c = np.array([0.3, -0.1, 0.7])
    fld = sample_field(arc_chart, grid,
                       lambda s1, s2, s3: phi(arc_chart, s1, s2, s3,
                                              validate=False) + c)
    V = section_means(fld)
    assert np.max(np.abs(V - (arc_chart.line.point(grid) + c))) < 1e-13


def test_fit_rigid_rotation_exact(straight_chart):
    grid = np.linspace(0, 1, 33)
    Q = rodrigues(np.array([0.0, 1.0, 0.0]), 0.7)
    fld = sample_field(straight_chart, grid,
                       lambda s1, s2, s3: phi(straight_chart, s1, s2, s3,
                                              validate=False) @ Q.T)
    samples, _ = fit_slice_rotations(fld, n_slices=8)
    assert np.max(np.abs(samples - Q)) < 1e-13


def test_fit_identity_exact(straight_chart):
    grid = np.linspace(0, 1, 33)
    fld = identity_field(straight_chart, grid)
    samples, _ = fit_slice_rotations(fld, n_slices=8)
    assert np.max(np.abs(samples - np.eye(3))) < 1e-13


def test_fit_degenerate_slice_raises(straight_chart):
    grid = np.linspace(0, 1, 33)
    fld = sample_field(straight_chart, grid,
                       lambda s1, s2, s3: np.zeros(s1.shape + (3,)))
    with pytest.raises(DegenerateSliceError):
        fit_slice_rotations(fld, n_slices=4)


def test_fit_too_few_nodes_per_slice(straight_chart):
    grid = np.linspace(0, 1, 9)
    fld = identity_field(straight_chart, grid)
    with pytest.raises(ValidationError):
        fit_slice_rotations(fld, n_slices=16)


def test_fit_synthetic_error_scales_with_delta(straight_z, disc2):
    # field with known R(s3) and warping of amplitude delta^2: the fitted
    # samples converge to R at rate O(delta)
    line, frame = straight_z
    grid = np.linspace(0, 1, 65)
    rot = integrate_generator(grid, np.tile([0.4, 0.0, 0.3], (64, 1)))
    V_nodes = line.point(np.array(0.0)) + integrate_rotated_tangent(rot, line, grid)
    errs = []
    for d in (0.1, 0.05):
        chart = RodChart(line, frame, disc2, d)

        def fn(s1, s2, s3, delta=d):
            idx = np.searchsorted(grid, s3)
            R = rot.at(s3)
            arm = s1[..., None] * frame.n1(s3) + s2[..., None] * frame.n2(s3)
            warp = delta**2 * np.stack(
                [np.sin(5 * s1 / delta), np.zeros_like(s1),
                 np.cos(4 * s2 / delta)], axis=-1)
            return V_nodes[idx] + np.einsum("...ij,...j->...i", R, arm) + warp

        fld = sample_field(chart, grid, fn)
        samples, edges = fit_slice_rotations(fld, n_slices=10)
        mids = 0.5 * (edges[:-1] + edges[1:])
        err = max(frob(samples[k] - rot.at(float(mids[k]))) for k in range(10))
        errs.append(err)
    assert errs[1] < 0.7 * errs[0]


def test_decompose_identity(straight_chart):
    grid = np.linspace(0, 1, 33)
    fld = identity_field(straight_chart, grid)
    dec = decompose(fld)
    assert np.max(np.abs(dec.warping)) < 1e-13
    assert np.max(np.abs(dec.V - straight_chart.line.point(grid))) < 1e-13
    assert np.max(np.abs(dec.VS)) < 1e-13
    assert all(v == 0.0 for v in estimate_report(dec).values())


def test_decompose_rigid(straight_chart):
    grid = np.linspace(0, 1, 33)
    Q = rodrigues(np.array([0.0, 1.0, 0.0]), 0.7)
    a = np.array([0.3, -0.2, 0.5])
    fld = sample_field(straight_chart, grid,
                       lambda s1, s2, s3: a + phi(straight_chart, s1, s2, s3,
                                                  validate=False) @ Q.T)
    dec = decompose(fld, clamp_left=False)
    assert np.max(np.abs(dec.warping)) < 1e-12
    assert max(frob(dec.rotation.at(s) - Q) for s in grid) < 1e-12
    assert all(v == 0.0 for v in estimate_report(dec).values())


def test_decompose_reconstruct_is_identity(arc_chart):
    rng = np.random.default_rng(8)
    grid = np.linspace(0, arc_chart.line.length, 49)
    fld = sample_field(arc_chart, grid,
                       lambda s1, s2, s3: phi(arc_chart, s1, s2, s3, validate=False)
                       + 0.01 * np.stack([np.sin(3 * s3), s1 * 10, s2 - s1], axis=-1))
    dec = decompose(fld)
    assert np.max(np.abs(dec.reconstruct() - fld.values)) < 1e-12


def test_decompose_clamp_left(arc_chart):
    grid = np.linspace(0, arc_chart.line.length, 49)
    fld = identity_field(arc_chart, grid)
    dec = decompose(fld, clamp_left=True)
    assert frob(dec.rotation.at(0.0) - np.eye(3)) == 0.0


def test_split_bending_stretching_trivials(quarter_arc):
    line, frame = quarter_arc
    grid = np.linspace(0, line.length, 33)
    rot = integrate_generator(grid, np.zeros((32, 3)))
    # R = I: VB = V(0) + (M - M(0))
    V = line.point(grid) + np.array([0.5, 0.0, 0.0])
    VB, VS = split_bending_stretching(V, rot, line, grid)
    expect = V[0] + line.point(grid) - line.point(np.array(0.0))
    assert np.max(np.abs(VB - expect)) < 1e-12
    assert np.max(np.abs(VS - (V - VB))) == 0.0
    assert np.max(np.abs(VS[0])) == 0.0


def test_split_inextensible_has_zero_stretch(quarter_arc):
    # V built as the integral of R t: V_S vanishes to quadrature precision
    line, frame = quarter_arc
    grid = np.linspace(0, line.length, 65)
    rng = np.random.default_rng(9)
    rot = integrate_generator(grid, 0.5 * rng.standard_normal((64, 3)))
    V = line.point(np.array(0.0)) + integrate_rotated_tangent(rot, line, grid)
    VB, VS = split_bending_stretching(V, rot, line, grid)
    h1 = np.sqrt(np.sum(np.diff(VS, axis=0) ** 2) + np.sum(VS**2))
    assert h1 < 1e-8


def test_pure_stretch_distance_closed_form(straight_chart):
    # v = M + (1 + e)(s1 n1 + s2 n2): grad = diag(1+e, 1+e, 1),
    # dist = e sqrt(2)
    e = 0.01
    grid = np.linspace(0, 1, 33)
    line = straight_chart.line
    frame = straight_chart.frame

    def fn(s1, s2, s3):
        return (line.point(s3) + (1 + e) * (s1[..., None] * frame.n1(s3)
                                            + s2[..., None] * frame.n2(s3)))

    fld = sample_field(straight_chart, grid, fn)
    F = gradient_xv(fld)
    d = dist_to_so3(F)
    assert np.max(np.abs(d - e * np.sqrt(2.0))) < 1e-8


def test_estimate_ratios_bounded_over_sweep(quarter_arc, disc2, material):
    from thinrod.section import section_constants

    line, frame = quarter_arc
    constants = section_constants(disc2)
    lp = load_profile_from_config(
        {"kappa": 2, "f": {"poly": [[0.02], [0.0], [0.0]]}}, line.length)
    sol = solve_nonlinear(lp, line, frame, disc2, constants, material,
                          SolverOptions(n_intervals=96))
    bundle = nonlinear_correctors(sol, frame, line, constants, material)
    ratios = {}
    for d in (0.1, 0.05, 0.025):
        chart = RodChart(line, frame, disc2, d)
        fld = recovery_nl(sol, bundle, chart,
                          axial_grid=np.linspace(0, line.length, 97))
        dec = decompose(fld)
        for k, v in estimate_report(dec).items():
            ratios.setdefault(k, []).append(v)
    for k, vals in ratios.items():
        assert max(vals) <= 1.5 * min(vals), (k, vals)


def test_default_slice_count_window():
    n = default_slice_count(1.0, 0.05)
    assert 2 * 1.0 / (3 * 0.05) <= n <= 1.0 / 0.05


def test_rescale_roundtrip():
    rng = np.random.default_rng(10)
    vals = rng.standard_normal((4, 7, 3))
    coords = rng.standard_normal((7, 2))
    v1, c1 = rescale(vals, coords, 0.1, to_reference=True)
    v2, c2 = rescale(v1, c1, 0.1, to_reference=False)
    assert v2 is vals or np.all(v2 == vals)
    assert np.max(np.abs(v2 - vals)) == 0.0


def test_warping_has_zero_section_mean(arc_chart):
    # consequence of defining V as the section mean
    rng = np.random.default_rng(11)
    grid = np.linspace(0, arc_chart.line.length, 49)
    fld = sample_field(arc_chart, grid,
                       lambda s1, s2, s3: phi(arc_chart, s1, s2, s3, validate=False)
                       + 0.02 * np.stack([np.sin(2 * s3) + 5 * s1 * s2,
                                          np.cos(s3) * s2 * 20,
                                          s1 * 10], axis=-1))
    dec = decompose(fld)
    sec = arc_chart.section
    means = sec.integrate_nodal(np.moveaxis(dec.warping, 0, 1)) / sec.area
    scale = max(np.abs(dec.warping).max(), 1e-30)
    assert np.max(np.abs(means)) < 1e-10 * scale


def test_decompose_field_with_offset_axial_grid(straight_chart):
    # a field spanning [0.25, 0.75] decomposes against the right rotations
    grid = np.linspace(0.25, 0.75, 33)
    Q = rodrigues(np.array([1.0, 0.0, 0.0]), 0.4)
    fld = sample_field(straight_chart, grid,
                       lambda s1, s2, s3: phi(straight_chart, s1, s2, s3,
                                              validate=False) @ Q.T)
    dec = decompose(fld, n_slices=8)
    assert np.max(np.abs(dec.warping)) < 1e-12
    assert max(frob(dec.rotation.at(s) - Q) for s in grid) < 1e-12
