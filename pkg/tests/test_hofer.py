import numpy as np
import pytest

from hameo import algebra as al
from hameo import calabi as cb
from hameo import flow as fl
from hameo import geometry as geo
from hameo import hamiltonian as hm
from hameo import hofer as ho
from hameo.errors import ConfigurationError, ContractError, EmptyFeasibleSetError

CHEAP = fl.StepControl(step=1 / 32, eval_step=1 / 32, frames=4)
SPH = geo.sphere((8, 8))


def test_leng_basics():
    assert ho.leng(fl.identity_path(SPH, CHEAP)) == 0.0
    assert ho.leng(fl.FlowPath(hm.sphere_height(surface=SPH), cfg=CHEAP)) == pytest.approx(2.0, abs=1e-12)
    bare = fl.FlowPath(None, surface=SPH, points=geo.grid(SPH).points)
    with pytest.raises(ContractError):
        ho.leng(bare)


def test_leng_of_inverse_path(rng):
    H = hm.random_sphere(rng, SPH, scale=0.3, autonomous=True)
    path = fl.FlowPath(H, cfg=CHEAP)
    a, b = ho.leng(path), ho.leng(fl.invert_path(path))
    assert b == pytest.approx(a, rel=1e-9)


def test_d_ham_zero_on_diagonal(rng):
    lam = fl.FlowPath(hm.random_sphere(rng, SPH, scale=0.3), cfg=CHEAP)
    assert ho.d_ham(lam, lam, n_t=5) == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_d_ham_small_rotation(eps):
    ident = fl.identity_path(SPH, CHEAP)
    mu = fl.FlowPath(hm.sphere_height(eps, SPH), cfg=CHEAP)
    rho = np.max(np.hypot(*ident.points[:, :2].T))
    # leng(εz) = 2ε plus the largest chord of a rotation by ε on the grid
    expected = 2 * eps + 2 * np.sin(eps / 2) * rho
    assert ho.d_ham(ident, mu) == pytest.approx(expected, rel=1e-9)
    assert ho.d_ham(ident, mu) >= fl.c0_distance_paths(ident, mu)


def test_d_ham_symmetry(rng):
    for _ in range(2):
        lam = fl.FlowPath(hm.random_sphere(rng, SPH, scale=0.3), cfg=CHEAP)
        mu = fl.FlowPath(hm.random_sphere(rng, SPH, scale=0.3), cfg=CHEAP)
        a, b = ho.d_ham(lam, mu, n_t=5), ho.d_ham(mu, lam, n_t=5)
        assert abs(a - b) < 1e-5 * max(a, 1.0)


def _rotation_target(alpha):
    pts = geo.grid(SPH).points
    c, s = np.cos(-alpha), np.sin(-alpha)
    img = np.stack([c * pts[:, 0] - s * pts[:, 1], s * pts[:, 0] + c * pts[:, 1], pts[:, 2]], -1)
    return fl.DiscreteMap(SPH, pts, img)


def test_intrinsic_norm_upper():
    ident = fl.DiscreteMap(SPH, geo.grid(SPH).points, geo.grid(SPH).points)
    assert ho.intrinsic_norm_upper(ident, [fl.identity_path(SPH, CHEAP)]) == 0.0
    target = _rotation_target(0.6)
    cfg = fl.StepControl(frames=1)
    cands = [fl.FlowPath(hm.sphere_height(c, SPH), cfg=cfg) for c in (0.3, 0.6 + 2 * np.pi, 0.9)]
    with pytest.raises(EmptyFeasibleSetError):
        ho.intrinsic_norm_upper(target, [cands[0], cands[2]])
    assert ho.intrinsic_norm_upper(target, cands) == pytest.approx(2 * (0.6 + 2 * np.pi), rel=1e-12)
    cands.append(fl.FlowPath(hm.sphere_height(0.6, SPH), cfg=cfg))
    # more candidates can only lower the minimum
    assert ho.intrinsic_norm_upper(target, cands) == pytest.approx(1.2, rel=1e-12)


def test_conjugation_invariance_disc_twist(rng):
    H = hm.random_disc(rng, geo.disc(grid=(24, 48)))
    psi = cb.TwistMap(cb.bump_profile(0.5, 0.3, 2.0))
    a = hm.hofer_norm_l1inf(H, n_t=9)
    b = hm.hofer_norm_l1inf(al.conjugate_ham(H, psi), n_t=9)
    assert b == pytest.approx(a, abs=1e-6)


def test_floor():
    assert ho.energy_capacity_floor(0.1) == pytest.approx(np.pi / 200, rel=1e-15)
    assert ho.energy_capacity_floor(0.0) == 0.0
    assert ho.energy_capacity_floor(ho.DiscTarget((0, 0), 0.1)) == pytest.approx(np.pi / 200)


def test_translation_bump_norm_oracle():
    T = ho.DiscTarget((0.0, 0.0), 0.1)
    for params in [(0.3, 0.12, 0.05), (0.25, 0.1, 0.1)]:
        H = ho.translation_bump(params, T, geo.disc(grid=(96, 192)))
        assert hm.oscillation(H, 0.0) == pytest.approx(ho.translation_bump_norm(params), rel=1e-6)


def test_explicit_translation_displaces():
    T = ho.DiscTarget((0.0, 0.0), 0.1)
    prob = ho.DisplacementProblem(T, "translation_bump")
    norm, slack, H = ho.evaluate_candidate(prob, ho.explicit_translation(T, prob.spacing))
    assert slack >= 0
    assert norm >= ho.energy_capacity_floor(T)


def test_displace_cap_with_x_rotation():
    T = ho.CapTarget(0.9)
    prob = ho.DisplacementProblem(T, "x_rotation", budget=40, starts=2, norm_grid=(16, 16))
    res = ho.displacement_energy_upper(prob)
    assert res.feasible
    H = prob.build(res.params)
    # H = c x has oscillation 2c
    assert res.value <= hm.oscillation(H, 0.0) + 1e-12
    assert res.value == pytest.approx(2 * res.params[0], rel=1e-9)
    assert res.value >= res.floor


def test_displace_large_cap_infeasible():
    res = ho.displacement_energy_upper(ho.DisplacementProblem(ho.CapTarget(-0.1), "x_rotation"))
    assert not res.feasible
    assert res.to_dict()["value"] is None
    assert "half" in res.reason


def test_small_budget_never_beats_floor():
    T = ho.DiscTarget((0.0, 0.0), 0.1)
    res = ho.displacement_energy_upper(ho.DisplacementProblem(T, "translation_bump", budget=16, starts=2,
                                                              norm_grid=(24, 48)))
    if res.feasible:
        assert res.value >= res.floor


def test_problem_validation():
    T = ho.DiscTarget((0.0, 0.0), 0.1)
    with pytest.raises(ConfigurationError):
        ho.DisplacementProblem(T, "nope")
    with pytest.raises(ConfigurationError):
        ho.DisplacementProblem(T, "translation_bump", box=[(0.5, 0.1), (0.1, 0.2), (0.02, 0.1)])
    with pytest.raises(ConfigurationError):
        ho.DisplacementProblem(T, "x_rotation")
    with pytest.raises(ConfigurationError):
        ho.target_from_config({"kind": "cap", "height": 1.5})
    assert ho.target_from_config({"kind": "disc", "radius": 0.2}) == ho.DiscTarget((0.0, 0.0), 0.2)
