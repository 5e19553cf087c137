import numpy as np
import pytest

from thinrod import ValidationError
from thinrod.geometry import (
    RodChart,
    build_frame,
    build_middle_line,
    circular_arc,
    grad_phi,
    helix,
    jac_det,
    phi,
    spline_line,
    straight_line,
)
from thinrod.section import build_section


@pytest.fixture(scope="module")
def disc():
    return build_section({"kind": "disc", "radius": 1.0, "refine": 2})


def test_straight_line_basic():
    line = straight_line((1.0, 0.0, 0.0), (0.0, 0.0, 2.0), 2.0)
    s = np.linspace(0, 2, 11)
    assert np.allclose(line.point(s)[:, 2], s)
    assert np.allclose(line.tangent(s), [0, 0, 1])
    line.check_arc_length()


def test_circle_arc_length_and_curvature():
    rho = 0.7
    line = circular_arc(rho, 1.5)
    s = np.linspace(0, line.length, 33)
    assert np.max(np.abs(np.linalg.norm(line.tangent(s), axis=1) - 1)) < 1e-12
    assert np.max(np.abs(np.linalg.norm(line.dtangent(s), axis=1) - 1 / rho)) < 1e-10


def test_helix_arc_length():
    rho, pitch = 1.0, 2 * np.pi * 0.5
    line = helix(rho, pitch, 3.0)
    line.check_arc_length()
    # curvature rho / (rho^2 + b^2)
    b = 0.5
    s = np.linspace(0, 3, 17)
    kappa = np.linalg.norm(line.dtangent(s), axis=1)
    assert np.max(np.abs(kappa - rho / (rho**2 + b**2))) < 1e-10


def test_spline_reparametrization():
    t = np.linspace(0, 1, 24)
    pts = np.stack([np.cos(2 * t), np.sin(2 * t), 0.5 * t**2], axis=1)
    line = spline_line(pts)
    line.check_arc_length()
    assert np.allclose(line.point(np.array(0.0)), pts[0], atol=1e-10)


def test_spline_rejects_short_input():
    with pytest.raises(ValidationError):
        spline_line([[0, 0, 0], [1, 0, 0], [2, 0, 0]])


def test_frame_invariants_all_kinds():
    lines = [
        straight_line((0, 0, 0), (0, 0, 1), 1.0),
        circular_arc(1.0, np.pi / 2),
        helix(1.0, 2 * np.pi * 0.3, 2.0),
    ]
    for line in lines:
        for method in ("analytic", "rotation-minimizing"):
            frame = build_frame(line, method)
            frame.check(line)


def test_analytic_frame_rejected_for_spline():
    t = np.linspace(0, 1, 12)
    pts = np.stack([t, t**2, np.zeros_like(t)], axis=1)
    line = spline_line(pts)
    with pytest.raises(ValidationError):
        build_frame(line, "analytic")
    build_frame(line, "rotation-minimizing").check(line)


def test_circle_analytic_frame_is_inward_with_constant_binormal():
    line = circular_arc(2.0, 1.0)
    frame = build_frame(line, "analytic")
    s = np.linspace(0, line.length, 9)
    center = np.zeros(3)
    inward = center - line.point(s)
    inward /= np.linalg.norm(inward, axis=1, keepdims=True)
    assert np.max(np.linalg.norm(frame.n1(s) - inward, axis=1)) < 1e-10
    n2 = frame.n2(s)
    assert np.max(np.linalg.norm(n2 - n2[0], axis=1)) < 1e-10


def test_rmf_on_straight_line_is_constant():
    line = straight_line((0, 0, 0), (1.0, 2.0, 2.0), 3.0)
    frame = build_frame(line, "rotation-minimizing")
    s = np.linspace(0, 3, 21)
    n1 = frame.n1(s)
    assert np.max(np.linalg.norm(n1 - n1[0], axis=1)) < 1e-12


def test_phi_trivials(disc):
    line = straight_line((0, 0, 0), (0, 0, 1), 1.0)
    frame = build_frame(line)
    chart = RodChart(line, frame, disc, 0.1)
    pt = phi(chart, np.array(0.05), np.array(-0.03), np.array(0.4))
    # identity-frame straight rod: Phi = (s1, s2, s3) up to the frame layout
    n1 = frame.n1(np.array(0.4))
    n2 = frame.n2(np.array(0.4))
    assert np.allclose(pt, 0.05 * n1 - 0.03 * n2 + np.array([0, 0, 0.4]))
    assert np.allclose(phi(chart, np.array(0.0), np.array(0.0), np.array(0.7)),
                       line.point(np.array(0.7)))


def test_phi_rejects_out_of_domain(disc):
    line = straight_line((0, 0, 0), (0, 0, 1), 1.0)
    chart = RodChart(line, build_frame(line), disc, 0.1)
    with pytest.raises(ValidationError):
        phi(chart, np.array(0.2), np.array(0.0), np.array(0.5))  # |S| = 2 > 1
    with pytest.raises(ValidationError):
        phi(chart, np.array(0.0), np.array(0.0), np.array(1.5))


def test_jac_det_straight_is_one(disc):
    line = straight_line((0, 0, 0), (0, 1, 0), 2.0)
    chart = RodChart(line, build_frame(line), disc, 0.2)
    s3 = np.linspace(0, 2, 7)
    det = jac_det(chart, np.full(7, 0.1), np.full(7, -0.1), s3)
    assert np.allclose(det, 1.0, atol=1e-12)


def test_jac_det_circle_closed_form(disc):
    # inward normal n1: moving toward the center shortens arcs, so
    # det(grad Phi) = 1 - s1 / rho
    rho = 2.0
    line = circular_arc(rho, 1.0)
    chart = RodChart(line, build_frame(line), disc, 0.15)
    s1 = np.array([0.1, -0.08, 0.0])
    s2 = np.array([0.02, 0.1, -0.1])
    s3 = np.array([0.3, 0.9, 1.5])
    det = jac_det(chart, s1, s2, s3)
    assert np.allclose(det, 1.0 - s1 / rho, atol=1e-8)


def test_jac_det_matches_fd_jacobian_random_charts(disc):
    rng = np.random.default_rng(11)
    lines = [circular_arc(1.5, 1.2), helix(1.0, 2 * np.pi * 0.4, 2.0)]
    for line in lines:
        for method in ("analytic", "rotation-minimizing"):
            chart = RodChart(line, build_frame(line, method), disc, 0.1)
            for _ in range(5):
                s3 = rng.uniform(0.1, line.length - 0.1)
                r = 0.07 * np.sqrt(rng.uniform(0, 1))
                ang = rng.uniform(0, 2 * np.pi)
                s1, s2 = r * np.cos(ang), r * np.sin(ang)
                det = jac_det(chart, np.array(s1), np.array(s2), np.array(s3))
                h = 1e-5
                cols = []
                for d in np.eye(3):
                    p = phi(chart, np.array(s1 + h * d[0]), np.array(s2 + h * d[1]),
                            np.array(s3 + h * d[2]), validate=False)
                    q = phi(chart, np.array(s1 - h * d[0]), np.array(s2 - h * d[1]),
                            np.array(s3 - h * d[2]), validate=False)
                    cols.append((p - q) / (2 * h))
                fd_det = np.linalg.det(np.stack(cols, axis=-1))
                assert abs(det - fd_det) < 1e-6


def test_grad_phi_consistency(disc):
    line = circular_arc(1.0, 1.0)
    chart = RodChart(line, build_frame(line), disc, 0.1)
    G = grad_phi(chart, np.array(0.05), np.array(-0.02), np.array(0.4))
    det = jac_det(chart, np.array(0.05), np.array(-0.02), np.array(0.4))
    assert abs(np.linalg.det(G) - det) < 1e-10


def test_delta0_enforced(disc):
    line = circular_arc(1.0, 1.0)  # curvature 1, max radius 1 -> delta0 = 0.9
    frame = build_frame(line)
    RodChart(line, frame, disc, 0.85)
    with pytest.raises(ValidationError):
        RodChart(line, frame, disc, 0.95)


def test_build_middle_line_dispatch():
    line = build_middle_line({"kind": "helix", "radius": 1.0, "pitch": 1.0, "length": 2.0})
    assert line.kind == "helix"
    with pytest.raises(ValidationError):
        build_middle_line({"kind": "lemniscate"})
    with pytest.raises(ValidationError):
        build_middle_line({"kind": "straight"})  # missing length


def test_injectivity_check(disc):
    # overlapping tubes are rejected; curled-but-clear tubes pass
    thick_arc = circular_arc(1.0, 4.5)
    RodChart(thick_arc, build_frame(thick_arc), disc, 0.55)
    closed = circular_arc(1.0, 6.28)
    with pytest.raises(ValidationError):
        RodChart(closed, build_frame(closed), disc, 0.2)
    tight = helix(1.0, 0.15, 13.0)
    with pytest.raises(ValidationError):
        RodChart(tight, build_frame(tight), disc, 0.2)
