import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hameo import geometry as geo
from hameo.errors import ConfigurationError, DomainError

from conftest import random_disc_points, random_sphere_points


@pytest.mark.parametrize("surface, area", [(geo.disc(), np.pi), (geo.sphere(), 4 * np.pi),
                                           (geo.disc(0.5), np.pi / 4)])
def test_total_area(surface, area):
    assert geo.total_area(surface) == pytest.approx(area, rel=1e-15)


@pytest.mark.parametrize("surface, n, area", [(geo.disc(grid=(8, 8)), 64, np.pi),
                                              (geo.sphere((16, 16)), 256, 4 * np.pi),
                                              (geo.disc(0.5, grid=(8, 8)), 64, np.pi / 4)])
def test_sample_grid_weights(surface, n, area):
    samples = geo.sample_grid(surface)
    assert len(samples) == n
    w = np.array([s[1] for s in samples])
    assert np.all(w > 0)
    assert abs(w.sum() - area) <= 1e-10 * area
    assert geo.integrate(surface, np.ones(n)) == pytest.approx(area, rel=1e-10)


def test_grid_points_on_surface():
    g = geo.grid(geo.sphere((24, 40)))
    assert np.max(np.abs(np.linalg.norm(g.points, axis=-1) - 1)) < 1e-12
    assert np.max(np.abs(g.points[:, 2])) < 1 - geo.EPS_POLE
    d = geo.grid(geo.disc(0.7, grid=(12, 20)))
    assert np.max(np.linalg.norm(d.points, axis=-1)) <= 0.7


def test_resolution_below_minimum():
    with pytest.raises(ConfigurationError):
        geo.grid(geo.sphere((4, 16)))


def test_disc_quadrature_of_polynomial():
    # ∫_D r² dA = π/2; the midpoint rule in u = r²/2 is exact for linear u
    s = geo.disc(grid=(8, 8))
    g = geo.grid(s)
    assert geo.integrate(s, np.sum(g.points ** 2, -1)) == pytest.approx(np.pi / 2, rel=1e-12)


def test_point_distance_examples():
    sph, dsk = geo.sphere(), geo.disc()
    n, s = geo.cylinder(1.0, 0.0), geo.cylinder(-1.0, 0.0)
    assert geo.point_distance(sph, n, s) == pytest.approx(2.0)
    assert geo.point_distance(sph, n, n) == 0.0
    assert geo.point_distance(dsk, geo.polar(1, 0), geo.polar(1, np.pi)) == pytest.approx(2.0)


def test_point_distance_off_surface():
    with pytest.raises(DomainError):
        geo.point_distance(geo.sphere(), np.array([0, 0, 1.1]), np.array([0, 0, 1.0]))
    with pytest.raises(DomainError):
        geo.point_distance(geo.disc(), np.array([1.5, 0]), np.array([0, 0.0]))


@pytest.mark.parametrize("kind", ["sphere", "disc"])
def test_distance_axioms(rng, kind):
    surf = geo.sphere() if kind == "sphere" else geo.disc()
    draw = random_sphere_points if kind == "sphere" else random_disc_points
    p, q, r = (draw(rng, 1000) for _ in range(3))
    dpq, dqp = geo.distance(surf, p, q), geo.distance(surf, q, p)
    assert np.all(dpq >= 0)
    assert np.array_equal(dpq, dqp)
    assert np.all(geo.distance(surf, p, r) <= dpq + geo.distance(surf, q, r) + 1e-15)


@given(st.floats(0, 1), st.floats(-20, 20))
def test_polar_chart_reduction(r, theta):
    a, b = geo.polar(r, theta), geo.polar(r, theta + 2 * np.pi)
    assert 0 <= a.coords[1] < 2 * np.pi
    np.testing.assert_allclose(a.cartesian(), b.cartesian(), atol=1e-12)


@given(st.floats(-1, 1), st.floats(-20, 20))
def test_cylinder_chart_roundtrip(z, phi):
    s = geo.sphere()
    p = geo.cylinder(z, phi).cartesian()
    assert abs(np.linalg.norm(p) - 1) < 1e-12
    back = geo.from_chart(s, geo.to_chart(s, p))
    np.testing.assert_allclose(back, p, atol=1e-12)


def test_surface_point_ranges():
    with pytest.raises(DomainError):
        geo.cylinder(1.5, 0.0)
    with pytest.raises(DomainError):
        geo.polar(-0.1, 0.0)


def test_surface_config():
    s = geo.surface_from_config({"surface": "disc", "radius": 0.5, "grid": [10, 12]})
    assert s == geo.disc(0.5, (10, 12))
    assert geo.surface_from_json('{"surface": "sphere"}').kind == geo.SPHERE
    with pytest.raises(ConfigurationError):
        geo.surface_from_config({"surface": "disc", "colour": 1})
    with pytest.raises(ConfigurationError):
        geo.surface_from_config({"surface": "sphere", "radius": 2})


def test_tangent_frame_orientation(rng):
    p = random_sphere_points(rng, 200)
    e1, e2 = geo.tangent_frame(geo.sphere(), p)
    np.testing.assert_allclose(np.cross(e1, e2), p, atol=1e-12)
    assert np.max(np.abs(np.sum(e1 * p, -1))) < 1e-12


@settings(max_examples=30)
@given(st.integers(8, 40), st.integers(8, 40))
def test_grid_weights_sum_any_resolution(n1, n2):
    for s in (geo.sphere((n1, n2)), geo.disc(grid=(n1, n2))):
        assert geo.grid(s).weights.sum() == pytest.approx(geo.total_area(s), rel=1e-10)
