import csv

import numpy as np
import pytest

from hameo import calabi as cb
from hameo import flow as fl
from hameo import geometry as geo
from hameo import hamiltonian as hm
from hameo.errors import ContractError, DomainError, IntegrationError

from conftest import random_disc_points, random_sphere_points


def rot_z(p, angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.stack([c * p[..., 0] - s * p[..., 1], s * p[..., 0] + c * p[..., 1], p[..., 2]], -1)


COARSE = fl.StepControl(step=1 / 64, frames=4)


def test_vector_field_zero():
    v = fl.vector_field_at(hm.zero(geo.sphere()), 0.2, geo.cylinder(0.1, 0.4))
    assert v.components == (0.0, 0.0)


def test_vector_field_height_rotates():
    v = fl.vector_field_at(hm.sphere_height(), 0.0, geo.cylinder(0.3, 1.0))
    assert v.chart == geo.CYLINDER
    assert v.components[0] == pytest.approx(0.0, abs=1e-15)
    assert v.components[1] == pytest.approx(-1.0, abs=1e-14)


def test_vector_field_pole_cap():
    with pytest.raises(DomainError):
        fl.vector_field_at(hm.sphere_height(), 0.0, geo.cylinder(1.0, 0.0))


def test_vector_field_disc_radial():
    H = hm.radial(geo.disc(), lambda r: r ** 3, lambda r: 3 * r ** 2)
    v = fl.vector_field_at(H, 0.0, geo.polar(0.5, 2.0))
    assert v.chart == geo.POLAR
    assert v.components[0] == pytest.approx(0.0, abs=1e-14)
    assert v.components[1] == pytest.approx(-3 * 0.25 / 0.5, rel=1e-12)
    assert fl.vector_field_at(H, 0.0, geo.polar(0.0, 0.0)).chart == geo.EUCLIDEAN


@pytest.mark.parametrize("kind", ["height", "random_sphere", "random_disc", "radial"])
def test_contraction_residual(rng, kind):
    if kind == "height":
        H, pts = hm.sphere_height(), random_sphere_points(rng, 1000)
    elif kind == "random_sphere":
        H, pts = hm.random_sphere(rng), random_sphere_points(rng, 1000)
    elif kind == "random_disc":
        H, pts = hm.random_disc(rng), random_disc_points(rng, 1000, 0.95)
    else:
        H = hm.radial(geo.disc(), lambda r: np.sin(3 * r), lambda r: 3 * np.cos(3 * r))
        pts = random_disc_points(rng, 1000, 0.95)
    if H.surface.kind == geo.SPHERE:
        pts = pts[np.abs(pts[:, 2]) < 0.99]
    else:
        pts = pts[np.linalg.norm(pts, axis=-1) > 1e-3]
    assert fl.contraction_residual(H, 0.4, pts) < 1e-6


def test_flow_of_zero_is_identity():
    path = fl.integrate_flow(hm.zero(geo.sphere((8, 8))), cfg=COARSE)
    for img in path.images:
        np.testing.assert_array_equal(img, path.points)


def test_height_flow_quarter_turn():
    H = hm.sphere_height()
    p0 = geo.cylinder(0.0, 0.0).cartesian()[None]
    path = fl.FlowPath(H, (0.0, np.pi / 2), fl.StepControl(frames=1), p0)
    expected = geo.cylinder(0.0, -np.pi / 2).cartesian()
    assert geo.distance(H.surface, path.images[-1][0], expected) < 1e-8


def test_identity_at_start_exact(rng):
    path = fl.FlowPath(hm.random_sphere(rng, geo.sphere((8, 8))), cfg=COARSE)
    assert np.array_equal(path.images[0], path.points)
    assert not path.images.flags.writeable


def test_twist_flow_matches_exact_map():
    prof = cb.calibrated_profile()
    F = cb.twist_generating_ham(prof)
    pts = random_disc_points(np.random.default_rng(5), 300)
    path = fl.FlowPath(F, (0, 1), fl.StepControl(frames=1), pts)
    exact = cb.TwistMap(prof)(pts)
    assert np.max(geo.distance(F.surface, path.images[-1], exact)) < 1e-6


def test_rotation_convergence_order():
    a = np.array([0.3, -1.2, 2.0])
    H = hm.linear(geo.sphere((8, 8)), a)
    pts = geo.grid(H.surface).points
    # closed-form rigid rotation about a, angle |a| t, sense given by X = p × a
    from hameo.maps import rotation_matrix
    exact = pts @ rotation_matrix(a, -np.linalg.norm(a)).T
    errs = []
    for h in (0.1, 0.05, 0.025):
        img = fl.integrate(H, 0.0, 1.0, pts, int(round(1 / h)))
        errs.append(np.max(geo.distance(H.surface, img, exact)))
    slope = np.polyfit(np.log([0.1, 0.05, 0.025]), np.log(errs), 1)[0]
    assert abs(slope - 4) <= 0.3


def test_area_preservation(rng):
    H = hm.random_sphere(rng, geo.sphere((8, 8)), scale=0.5)
    d_default = fl.FlowPath(H, cfg=fl.StepControl(frames=1)).area_defect()
    d_fine = fl.FlowPath(H, cfg=fl.StepControl(step=2.5e-4, frames=1)).area_defect()
    assert d_default < 1e-4
    assert d_fine < 1e-6


def test_compact_support_collar_fixed(rng):
    H = hm.random_disc(rng, outer=0.7)
    pts = random_disc_points(rng, 400)
    path = fl.FlowPath(H, cfg=COARSE, points=pts)
    collar = np.linalg.norm(pts, axis=-1) > 0.7
    assert collar.any()
    assert np.max(np.abs(path.images[-1][collar] - pts[collar])) <= 1e-12


def test_leaving_the_disc_is_an_error():
    H = hm.from_expression("y", geo.disc(grid=(8, 8)))
    with pytest.raises(IntegrationError):
        fl.integrate(H, 0.0, 1.0, geo.grid(H.surface).points, 10)


def test_time_t_map():
    H = hm.sphere_height(surface=geo.sphere((8, 8)))
    path = fl.FlowPath(H, (0.0, 1.0), fl.StepControl(frames=4))
    m0 = fl.time_t_map(path, 0.0)
    np.testing.assert_array_equal(m0.images, path.points)
    m1 = fl.time_t_map(path, 1.0)
    np.testing.assert_array_equal(m1.images, path.images[-1])
    mid = fl.time_t_map(path, 0.375)
    assert np.max(geo.distance(H.surface, mid.images, rot_z(path.points, -0.375))) < 1e-6
    with pytest.raises(DomainError):
        fl.time_t_map(path, 1.5)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0])
def test_c0_distance_rotation(alpha):
    s = geo.sphere()
    pts = geo.from_chart(s, np.stack([np.zeros(16), np.linspace(0, 2 * np.pi, 16, endpoint=False)], -1))
    ident = fl.DiscreteMap(s, pts, pts, pts)
    rot = fl.DiscreteMap(s, pts, rot_z(pts, alpha), rot_z(pts, -alpha))
    assert fl.c0_distance_maps(ident, rot) == pytest.approx(2 * np.sin(alpha / 2), rel=1e-12)
    assert fl.c0_distance_maps(ident, ident) == 0.0
    assert fl.c0_distance_maps(rot, ident) == fl.c0_distance_maps(ident, rot)


def test_c0_distance_contracts():
    s = geo.sphere()
    pts = random_sphere_points(np.random.default_rng(0), 10)
    f = fl.DiscreteMap(s, pts, pts)
    with pytest.raises(ContractError):
        fl.c0_distance_maps(f, f)
    assert fl.c0_distance_maps(f, f, with_inverses=False) == 0.0
    g = fl.DiscreteMap(s, pts[:5], pts[:5], pts[:5])
    with pytest.raises(ContractError):
        fl.c0_distance_maps(f, g)


def test_c0_distance_paths_height_vs_double():
    s = geo.sphere((8, 8))
    lam = fl.FlowPath(hm.sphere_height(surface=s), cfg=COARSE)
    mu = fl.FlowPath(hm.sphere_height(2.0, s), cfg=COARSE)
    assert fl.c0_distance_paths(lam, lam) == 0.0
    rho = np.max(np.hypot(lam.points[:, 0], lam.points[:, 1]))
    # the angle gap t grows monotonically, so the max sits at t = 1
    assert fl.c0_distance_paths(lam, mu) == pytest.approx(2 * np.sin(0.5) * rho, abs=1e-7)  # RK4 at h = 1/64
    other = fl.FlowPath(hm.sphere_height(surface=s), (0.0, 0.5), COARSE)
    with pytest.raises(ContractError):
        fl.c0_distance_paths(lam, other)


def test_c0_path_triangle_inequality(rng):
    s = geo.sphere((8, 8))
    for _ in range(100):
        a, b, c = (fl.FlowPath(hm.linear(s, rng.normal(size=3)), cfg=COARSE) for _ in range(3))
        assert fl.c0_distance_paths(a, c) <= fl.c0_distance_paths(a, b) + fl.c0_distance_paths(b, c) + 1e-14


def test_invert_identity_and_rotation():
    s = geo.sphere((8, 8))
    ident = fl.invert_path(fl.identity_path(s, COARSE))
    np.testing.assert_array_equal(ident.images[-1], ident.points)
    inv = fl.invert_path(fl.FlowPath(hm.sphere_height(surface=s), cfg=fl.StepControl(frames=2)))
    assert np.max(geo.distance(s, inv.images[-1], rot_z(inv.points, 1.0))) < 1e-6


def test_inverse_self_composition(rng):
    s = geo.sphere((8, 8))
    H = hm.random_sphere(rng, s, scale=0.5)
    pts = geo.grid(s).points[::4]
    h = 1 / 32
    path = fl.FlowPath(H, cfg=fl.StepControl(step=h, eval_step=h, frames=1), points=pts)
    inv = fl.invert_path(path)
    back = inv.evaluate(1.0, path.images[-1], step=h)
    # RK4 at h = 1/32 on both legs leaves ~1e-7
    assert np.max(geo.distance(s, back, pts)) < 1e-6


def test_write_csv(tmp_path):
    s = geo.disc(grid=(8, 8))
    path = fl.FlowPath(hm.random_disc(np.random.default_rng(1), s), cfg=fl.StepControl(step=1 / 32, frames=2))
    out = tmp_path / "flow.csv"
    fl.write_csv(path, out)
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["t", "grid_index", "chart", "c1", "c2"]
    assert len(rows) == 1 + 3 * 64
    assert rows[1][2] == "polar"
