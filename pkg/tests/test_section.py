import numpy as np
import pytest

from thinrod import ValidationError
from thinrod.section import (
    build_section,
    section_constants,
    solve_torsion,
    _polygon_moments,
)


def square_torsion_series(a=1.0, n_terms=200):
    # classical Saint-Venant series for the square torsion constant
    s = sum(np.tanh(n * np.pi / 2.0) / n**5 for n in range(1, 2 * n_terms, 2))
    return a**4 * (1.0 / 3.0 - (64.0 / np.pi**5) * s)


def ellipse_polygon(a, b, m=512):
    th = 2.0 * np.pi * np.arange(m) / m
    return np.stack([a * np.cos(th), b * np.sin(th)], axis=1)


L_SHAPE = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]


@pytest.fixture(scope="module")
def disc4():
    return build_section({"kind": "disc", "radius": 1.0, "refine": 4})


@pytest.fixture(scope="module")
def square4():
    return build_section({"kind": "rectangle", "a": 1.0, "b": 1.0, "refine": 4})


def test_disc_area_and_moments(disc4):
    assert abs(disc4.area - np.pi) < 1e-6
    sc = section_constants(disc4)
    assert abs(sc.I1 - np.pi / 4) < 0.005 * np.pi / 4
    assert abs(sc.I2 - np.pi / 4) < 0.005 * np.pi / 4


def test_disc_torsion_function_vanishes(disc4):
    # the torsion right-hand side vanishes identically on a disc
    chi = solve_torsion(disc4)
    assert np.max(np.abs(chi)) < 1e-10


def test_disc_torsion_constant(disc4):
    sc = section_constants(disc4)
    assert abs(sc.K - np.pi / 2) < 0.01 * np.pi / 2


def test_rectangle_recentering_and_moments():
    # off-origin 1 x 2 rectangle: I1 = 1/6, I2 = 2/3 after recentering
    sec = build_section({"kind": "rectangle", "a": 1.0, "b": 2.0, "refine": 3})
    centroid, inertia = sec.moments()
    assert np.max(np.abs(centroid)) < 1e-12
    sc = section_constants(sec)
    assert abs(sc.I1 - 1.0 / 6.0) < 1e-12
    assert abs(sc.I2 - 2.0 / 3.0) < 1e-12


def test_square_torsion_constant_vs_series(square4):
    oracle = square_torsion_series()
    sc = section_constants(square4)
    assert abs(sc.K - oracle) < 0.01 * oracle


def test_square_chi_antisymmetry(square4):
    # continuum chi is odd under the swap (S1,S2) -> (S2,S1); the mesh is
    # swap-symmetric so the discrete solution inherits it
    chi = solve_torsion(square4)
    order = np.lexsort((square4.nodes[:, 1], square4.nodes[:, 0]))
    swapped = square4.nodes[:, ::-1]
    order_sw = np.lexsort((swapped[:, 1], swapped[:, 0]))
    scale = np.max(np.abs(chi))
    assert np.max(np.abs(chi[order] + chi[order_sw])) < 1e-8 * scale


def test_torsion_constant_mesh_convergence():
    oracle = square_torsion_series()
    errs = []
    for level in (3, 4, 5):
        sc = section_constants(build_section({"kind": "rectangle", "a": 1.0, "b": 1.0,
                                              "refine": level}))
        errs.append(abs(sc.K - oracle))
    assert errs[1] / errs[2] >= 3.0
    assert errs[0] / errs[1] >= 3.0


def test_ellipse_torsion_constant():
    sec = build_section({"kind": "polygon", "vertices": ellipse_polygon(2.0, 1.0).tolist(),
                         "refine": 5})
    sc = section_constants(sec)
    a, b = 2.0, 1.0
    oracle = np.pi * a**3 * b**3 / (a**2 + b**2)
    assert abs(sc.K - oracle) < 0.01 * oracle


def test_torsion_identity_on_shipped_meshes():
    specs = [
        {"kind": "disc", "radius": 1.0, "refine": 4},
        {"kind": "rectangle", "a": 1.0, "b": 1.0, "refine": 4},
        {"kind": "rectangle", "a": 1.0, "b": 2.0, "refine": 3},
        {"kind": "polygon", "vertices": L_SHAPE, "refine": 4},
    ]
    for spec in specs:
        sc = section_constants(build_section(spec))
        assert sc.torsion_residual < 1e-8


def test_chi_zero_mean_everywhere():
    for spec in ({"kind": "disc", "radius": 0.7, "refine": 3},
                 {"kind": "polygon", "vertices": L_SHAPE, "refine": 3}):
        sec = build_section(spec)
        chi = solve_torsion(sec)
        assert abs(sec.integrate_nodal(chi)) < 1e-10 * sec.area * max(1.0, np.abs(chi).max())


def test_l_shape_principal_axes():
    sec = build_section({"kind": "polygon", "vertices": L_SHAPE, "refine": 4})
    centroid, inertia = sec.moments()
    assert np.max(np.abs(centroid)) < 1e-10 * sec.area * sec.diam
    assert abs(inertia[0, 1]) < 1e-8 * sec.area * sec.diam**2


def test_polygon_K_rotation_invariant():
    base = np.asarray(L_SHAPE)
    k_vals = []
    for ang in (0.0, 0.3):
        c, s = np.cos(ang), np.sin(ang)
        rot = base @ np.array([[c, s], [-s, c]]) + np.array([0.4, -1.2])
        sc = section_constants(build_section({"kind": "polygon",
                                              "vertices": rot.tolist(), "refine": 4}))
        k_vals.append(sc.K)
    assert abs(k_vals[0] - k_vals[1]) < 1e-6 * abs(k_vals[0])


def test_degenerate_and_bad_polygons_rejected():
    with pytest.raises(ValidationError):
        build_section({"kind": "polygon", "vertices": [[0, 0], [1, 0], [2, 0]]})
    with pytest.raises(ValidationError):
        build_section({"kind": "polygon", "vertices": [[0, 0], [0, 1], [1, 0], [1, 1]]})
    with pytest.raises(ValidationError):
        # clockwise ordering
        build_section({"kind": "polygon", "vertices": [[0, 0], [0, 1], [1, 1], [1, 0]]})
    with pytest.raises(ValidationError):
        build_section({"kind": "disc", "radius": -1.0})


def test_polygon_exact_moments_against_quadrature():
    verts = np.asarray(L_SHAPE, dtype=float)
    area, centroid, inertia = _polygon_moments(verts)
    assert abs(area - 3.0) < 1e-14
    sec = build_section({"kind": "polygon", "vertices": L_SHAPE, "refine": 4})
    # mesh inertia in its principal frame has the same eigenvalues as the
    # exact polygon inertia about its centroid
    ixx = inertia[0, 0] - area * centroid[0] ** 2
    iyy = inertia[1, 1] - area * centroid[1] ** 2
    ixy = inertia[0, 1] - area * centroid[0] * centroid[1]
    eig_exact = np.sort(np.linalg.eigvalsh(np.array([[ixx, ixy], [ixy, iyy]])))
    _, mesh_inertia = sec.moments()
    eig_mesh = np.sort(np.linalg.eigvalsh(mesh_inertia))
    assert np.allclose(eig_mesh, eig_exact, rtol=2e-3)


def test_contains():
    disc = build_section({"kind": "disc", "radius": 1.0, "refine": 2})
    assert disc.contains(0.3, -0.2)
    assert not disc.contains(1.2, 0.0)
    sq = build_section({"kind": "rectangle", "a": 1.0, "b": 1.0, "refine": 2})
    assert sq.contains(0.49, 0.49)
    assert not sq.contains(0.51, 0.0)
