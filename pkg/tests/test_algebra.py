import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hameo import algebra as al
from hameo import flow as fl
from hameo import geometry as geo
from hameo import hamiltonian as hm
from hameo.errors import ContractError, DomainError
from hameo.maps import DiscRotation, SphereRotation

from conftest import random_disc_points, random_sphere_points

CHEAP = fl.StepControl(step=1 / 32, eval_step=1 / 32, frames=4)
ORACLE = 1 / 256
FINE = fl.StepControl(step=ORACLE, eval_step=ORACLE, frames=4)


def _flow(H, T, x):
    return fl.integrate(H, 0.0, T, x, fl._steps(1.0, ORACLE))


def test_composition_order_experiment(rng):
    """Pins which composition the product generator produces under the sign X = p × ∇H."""
    s = geo.sphere((8, 8))
    H = hm.random_sphere(rng, s, scale=0.3)
    F = hm.random_sphere(rng, s, scale=0.3)
    pts = random_sphere_points(rng, 16)
    pH = fl.FlowPath(H, cfg=CHEAP, points=pts)
    hf = _flow(H, 1.0, _flow(F, 1.0, pts))
    fh = _flow(F, 1.0, _flow(H, 1.0, pts))
    err = {}
    for conv in (al.COMPOSITION, al.VERBATIM):
        G = fl.FlowPath(al.product_ham(H, F, pH, conv), cfg=CHEAP, points=pts).images[-1]
        err[conv] = (np.max(geo.distance(s, G, hf)), np.max(geo.distance(s, G, fh)))
    assert err[al.COMPOSITION][0] < 1e-5
    assert err[al.COMPOSITION][1] > 1e-3
    # the literal formula matches neither order
    assert min(err[al.VERBATIM]) > 1e-3


def test_product_with_zero_is_identity_op(rng):
    H = hm.random_sphere(rng, geo.sphere((8, 8)))
    pH = fl.FlowPath(H, cfg=CHEAP)
    assert al.product_ham(H, hm.zero(H.surface), pH) is H


def test_product_contracts(rng):
    H = hm.random_sphere(rng, geo.sphere((8, 8)))
    F = hm.random_sphere(rng, geo.sphere((8, 8)))
    D = hm.random_disc(rng)
    pH = fl.FlowPath(H, cfg=CHEAP)
    with pytest.raises(ContractError):
        al.product_ham(H, D, pH)
    with pytest.raises(ContractError):
        al.product_ham(F, H, pH)


def _radial_pair():
    d = geo.disc(grid=(8, 8))
    H = hm.radial(d, lambda r: (1 - r ** 2) ** 3, lambda r: -6 * r * (1 - r ** 2) ** 2)
    F = hm.radial(d, lambda r: np.cos(np.pi * r) + 1, lambda r: -np.pi * np.sin(np.pi * r))
    return H, F


def test_radial_product_is_sum(rng):
    # radial flows keep radii, so F∘(φ_H^t)^{-1} = F up to the RK4 radial drift
    H, F = _radial_pair()
    G = al.product_ham(H, F, fl.FlowPath(H, cfg=FINE))
    pts = random_disc_points(rng, 50)
    t = rng.uniform(0, 1, 50)
    np.testing.assert_allclose(G(t, pts), H(t, pts) + F(t, pts), atol=1e-9)


def test_radial_inverse_is_negation(rng):
    H, _ = _radial_pair()
    Hb = al.inverse_ham(H, fl.FlowPath(H, cfg=FINE))
    pts = random_disc_points(rng, 50)
    t = rng.uniform(0, 1, 50)
    np.testing.assert_allclose(Hb(t, pts), -H(t, pts), atol=1e-9)


def test_time_rescale(rng):
    H = hm.random_sphere(rng, geo.sphere((8, 8)))
    assert al.time_rescale_ham(H, 1.0) is H
    Z = al.time_rescale_ham(H, 0.0)
    assert Z.label == "zero"
    half = al.time_rescale_ham(H, 0.5)
    pts = random_sphere_points(rng, 20)
    t = rng.uniform(0, 1, 20)
    np.testing.assert_allclose(half(t, pts), 0.5 * H(0.5 * t, pts), rtol=1e-14)
    for bad in (-0.1, 1.5):
        with pytest.raises(DomainError):
            al.time_rescale_ham(H, bad)


def test_rescaled_flow_reaches_time_s(rng):
    s = geo.sphere((8, 8))
    H = hm.random_sphere(rng, s, scale=0.3)
    pts = random_sphere_points(rng, 20)
    img = fl.FlowPath(al.time_rescale_ham(H, 0.4), cfg=fl.StepControl(frames=1), points=pts).images[-1]
    assert np.max(geo.distance(s, img, _flow(H, 0.4, pts))) < 1e-8


def test_reparameterization_basics():
    with pytest.raises(DomainError):
        al.Reparameterization.smooth(0.0)
    z = al.Reparameterization.smooth(0.2)
    assert z.check()
    assert z(0.05) == 0.0 and z(0.95) == 1.0
    assert z(0.5) == pytest.approx(0.5, abs=1e-15)


def test_reparameterize_identity_and_endpoint(rng):
    s = geo.sphere((8, 8))
    H = hm.random_sphere(rng, s, scale=0.3)
    assert al.reparameterize_ham(H, al.Reparameterization.identity_map()) is H
    pts = random_sphere_points(rng, 20)
    Hz = al.reparameterize_ham(H, al.Reparameterization.smooth(0.2))
    img = fl.FlowPath(Hz, cfg=fl.StepControl(frames=1), points=pts).images[-1]
    assert np.max(geo.distance(s, img, _flow(H, 1.0, pts))) < 1e-6


def test_zeta_norm():
    assert al.zeta_norm(al.Reparameterization.identity_map()) == 0.0
    # sup|t² - t| = 1/4, ∫|2t - 1| = 1/2
    sq = al.Reparameterization.from_functions(lambda t: t ** 2, lambda t: 2 * t)
    assert al.zeta_norm(sq) == pytest.approx(0.75, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.9))
def test_zeta_norm_shrinks_with_flat_width(eps):
    a = al.zeta_norm(al.Reparameterization.smooth(eps))
    b = al.zeta_norm(al.Reparameterization.smooth(eps / 2))
    assert 0 < b <= a + 1e-12


def test_conjugate_by_rotation(rng):
    s = geo.sphere((8, 8))
    H = hm.sphere_height(surface=s)
    R = SphereRotation.about([1.0, 0.0, 0.0], 0.7)
    C = al.conjugate_ham(H, R)
    pts = random_sphere_points(rng, 50)
    np.testing.assert_allclose(C(0.3, pts), pts @ (R.matrix.T @ [0, 0, 1]), atol=1e-14)


def test_conjugate_disc_rotation_keeps_support(rng):
    H = hm.random_disc(rng, outer=0.6)
    C = al.conjugate_ham(H, DiscRotation(1.1))
    assert C.support == H.support


def test_conjugate_rejects_non_symplectic():
    H = hm.random_disc(np.random.default_rng(0))
    with pytest.raises(ContractError):
        al.conjugate_ham(H, lambda p: 0.5 * np.asarray(p))


def test_tan_map(rng):
    s = geo.sphere((8, 8))
    H = hm.random_sphere(rng, s, autonomous=True)
    path = fl.FlowPath(H, cfg=fl.StepControl(frames=4))
    # autonomous flows conserve H, so Tan(λ)(t, ·) is H itself
    for t in path.times:
        assert np.max(np.abs(al.tan_map(path, t, path.points) - H(0.0, path.points))) < 1e-6
    G = hm.random_sphere(rng, s)
    gp = fl.FlowPath(G, cfg=fl.StepControl(frames=4))
    np.testing.assert_array_equal(al.tan_map(gp, 0.5, gp.points), G(0.5, gp.images[2]))
    x = random_sphere_points(rng, 10)
    assert np.max(np.abs(al.tan_map(gp, 0.3, x) - G(0.3, gp.evaluate(0.3, x)))) < 1e-9
    assert al.dev(gp) is G


def test_dev_of_product(rng):
    s = geo.sphere((8, 8))
    H = hm.random_sphere(rng, s, scale=0.3)
    lam = fl.FlowPath(H, cfg=CHEAP)
    assert al.dev_of_product_check(lam, fl.identity_path(s, CHEAP)) == 0.0
    R1, R2 = _radial_pair()
    r1 = fl.FlowPath(R1, cfg=CHEAP)
    assert al.dev_of_product_check(r1, fl.FlowPath(R2, cfg=CHEAP)) < 1e-9
    F = hm.random_sphere(rng, s, scale=0.3)
    res = al.dev_of_product_check(lam, fl.FlowPath(F, cfg=CHEAP), times=[0.0, 0.5, 1.0])
    # two independent integrations at h = 1/32
    assert res < 1e-6


def test_path_product_spans(rng):
    s = geo.sphere((8, 8))
    a = fl.FlowPath(hm.random_sphere(rng, s), cfg=CHEAP)
    b = fl.FlowPath(hm.random_sphere(rng, s), (0.0, 0.5), CHEAP)
    with pytest.raises(ContractError):
        al.path_product(a, b)
