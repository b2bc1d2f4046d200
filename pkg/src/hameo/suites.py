"""Invariant checks shared by ``hameo verify`` and the acceptance tests.

Each check returns a Check with the measured value, the tolerance it is held
to and whether it passed. Sizes are parameters so the CLI can run smaller
versions of the same checks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import calabi as cb
from . import geometry as geo
from . import hamiltonian as hm
from . import hofer as ho
from . import limits as lm
from .algebra import (Reparameterization, conjugate_ham, inverse_ham, product_ham, reparameterize_ham,
                      time_rescale_ham)
from .flow import DEFAULT_STEPS, FlowPath, StepControl, _steps, integrate
from .maps import random_sphere_map

FLOW_FIELD_SCALE = 0.3


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<28} value={self.value:.3e}  tol={self.tol:.1e}"

    def to_dict(self):
        return {"name": self.name, "value": float(self.value), "tol": float(self.tol), "passed": bool(self.passed),
                "detail": self.detail}


# ----------------------------------------------------------------------------
# calabi

def calabi_calibration(k_max=6, tol=1e-6):
    errs = [abs(cb.cal_twist(cb.dyadic_profile(k)) - 1.0) for k in range(1, k_max + 1)]
    v = max(errs)
    return Check("calabi_calibration", v, tol, v < tol, {"errors": errs})


def conjugation_identity(k=2, n=200, tol=1e-10, extended=False):
    v = cb.conjugation_residual(k, n=n, extended=extended)
    return Check(f"conjugation_identity_k{k}", v, tol, v < tol)


def a4_law(rng, n_ham=20, factors=(0.3, 0.5, 0.9), tol=1e-8):
    worst = 0.0
    for _ in range(n_ham):
        H = hm.random_disc(rng)
        c = cb.cal_path(H)
        for a in factors:
            r = cb.cal_path(cb.alexander_rescale(H, a)) / c
            worst = max(worst, abs(r / a ** 4 - 1.0))
    return Check("a4_law", worst, tol, worst < tol)


def wild_divergence(K_max=10, tol=1e-5):
    errs = [abs(cb.wild_truncated(K, points=np.zeros((1, 2)))[1] - K) for K in range(1, K_max + 1)]
    v = max(errs)
    return Check("wild_divergence", v, tol, v < tol, {"errors": errs})


# ----------------------------------------------------------------------------
# flows

def conservation(step=1e-3, tol=1e-8, ratio=(12.0, 20.0)):
    H = hm.sphere_height()
    cfg = StepControl(step=step, frames=16)
    r1 = lm.conservation_residual(H, FlowPath(H, (0, 1), cfg))
    r2 = lm.conservation_residual(H, FlowPath(H, (0, 1), StepControl(step=step / 2, frames=16)))
    q = r1 / r2 if r2 > 0 else float("inf")
    ok = r1 < tol and ratio[0] <= q <= ratio[1]
    return Check("conservation", r1, tol, ok, {"residual_half_step": r2, "ratio": q})


def conservation_order(step=0.05, tol=(3.5, 4.5)):
    """Order-4 drift of H = x z under step halving (H = z is conserved to roundoff)."""
    surf = geo.sphere((16, 16))
    H = hm.Hamiltonian(surf, lambda t, p: p[..., 0] * p[..., 2],
                       lambda t, p: np.stack([p[..., 2], np.zeros(p.shape[:-1]), p[..., 0]], -1),
                       autonomous=True, label="x*z")
    rows = lm.conservation_study(H, steps=(step, step / 2, step / 4))
    order = rows[-1]["observed_order"]
    return Check("conservation_order_xz", order, tol[0], tol[0] <= order <= tol[1], {"rows": rows})


def one_parameter(n=5, tol=1e-7, floor=0.01, grid=(16, 16)):
    surf = geo.sphere(grid)
    H = hm.sphere_height(surface=surf)
    ts = np.linspace(0.0, 0.5, n)
    samples = [(t, s) for t in ts for s in ts]
    r = lm.one_param_residual(H, samples)
    tz = hm.Hamiltonian(surf, lambda t, p: t * p[..., 2],
                        lambda t, p: np.stack([0 * p[..., 0], 0 * p[..., 0], t + 0 * p[..., 0]], -1),
                        normalized=True, label="t*z")
    c = lm.one_param_residual(tz, [(0.5, 0.5)])
    return Check("one_parameter", r, tol, r < tol and c >= floor, {"counterexample": c, "floor": floor})


ORACLE_STEP = 1 / 256


def _flow_errors(H, F, s, zeta, points, cfg):
    """Sup errors of the four generated flows against their oracles at the frame times.

    Oracles integrate the base generators directly (step 1/256, error ~1e-10
    for these fields), never through the derived Hamiltonians.
    """
    pH = FlowPath(H, (0, 1), cfg, points)
    ts = pH.times
    tt = np.broadcast_to(ts[:, None], (len(ts), len(points)))
    P = np.broadcast_to(points[None], tt.shape + points.shape[-1:])
    n = _steps(1.0, ORACLE_STEP)

    def flow(G, T, x):
        return integrate(G, 0.0, T, x, n)
    surf = H.surface
    out = {}
    G = FlowPath(product_ham(H, F, pH), (0, 1), cfg, points)
    out["product"] = np.max(geo.distance(surf, G.images, flow(H, tt, flow(F, tt, P))))
    Hb = FlowPath(inverse_ham(H, pH), (0, 1), cfg, points)
    out["inverse"] = np.max(geo.distance(surf, Hb.images, pH.inverse_images))
    Hs = FlowPath(time_rescale_ham(H, s), (0, 1), cfg, points)
    out["rescale"] = np.max(geo.distance(surf, Hs.images, flow(H, s * tt, P)))
    Hz = FlowPath(reparameterize_ham(H, zeta), (0, 1), cfg, points)
    out["reparameterize"] = np.max(geo.distance(surf, Hz.images, flow(H, zeta(tt), P)))
    return {k: float(v) for k, v in out.items()}


def group_algebra(rng, n_pairs=20, tol=1e-5, grid=(8, 8), frames=8, scale=FLOW_FIELD_SCALE):
    surf = geo.sphere(grid)
    points = geo.grid(surf).points
    cfg = StepControl(step=DEFAULT_STEPS.step, eval_step=DEFAULT_STEPS.eval_step, frames=frames)
    worst = {}
    for _ in range(n_pairs):
        H = hm.random_sphere(rng, surf, scale=scale)
        F = hm.random_sphere(rng, surf, scale=scale)
        s = float(rng.uniform(0.1, 0.9))
        zeta = Reparameterization.smooth(float(rng.uniform(0.05, 0.3)))
        for k, v in _flow_errors(H, F, s, zeta, points, cfg).items():
            worst[k] = max(worst.get(k, 0.0), v)
    v = max(worst.values())
    return Check("group_algebra", v, tol, v < tol, worst)


# ----------------------------------------------------------------------------
# Hofer geometry

NORM_GRID = (16, 16)
NORM_TIMES = 33
TRIANGLE_TIMES = 9


def triangle_inequality(rng, n_cases=100, tol=1e-6, scale=FLOW_FIELD_SCALE):
    """leng(λμ) ≤ leng(λ) + leng(μ) on random sphere pairs; value is the worst excess."""
    surf = geo.sphere(NORM_GRID)
    cfg = StepControl(frames=1)
    worst = -np.inf
    for _ in range(n_cases):
        H = hm.random_sphere(rng, surf, scale=scale)
        F = hm.random_sphere(rng, surf, scale=scale)
        G = product_ham(H, F, FlowPath(H, (0, 1), cfg, np.zeros((1, 3)) + [0, 0, 1]))
        # osc G_t ≤ osc H_t + osc F_t node by node, and Simpson weights are positive,
        # so a short rule tests the same inequality
        lhs = hm.hofer_norm_l1inf(G, n_t=TRIANGLE_TIMES)
        rhs = hm.hofer_norm_l1inf(H, n_t=TRIANGLE_TIMES) + hm.hofer_norm_l1inf(F, n_t=TRIANGLE_TIMES)
        worst = max(worst, lhs - rhs)
    return Check("triangle_inequality", worst, tol, worst <= tol)


def conjugation_invariance(rng, n_cases=100, tol=1e-6, scale=1.0):
    # twisted conjugates are wiggly; the coarse grid can miss the basin of an extremum
    surf = geo.sphere((32, 32))
    worst = 0.0
    for _ in range(n_cases):
        H = hm.random_sphere(rng, surf, scale=scale)
        psi = random_sphere_map(rng)
        a = hm.hofer_norm_l1inf(H, n_t=NORM_TIMES)
        b = hm.hofer_norm_l1inf(conjugate_ham(H, psi), n_t=NORM_TIMES)
        worst = max(worst, abs(a - b))
    return Check("conjugation_invariance", worst, tol, worst < tol)


def reparameterization_invariance(rng, n_cases=3, tol=1e-6):
    surf = geo.sphere(NORM_GRID)
    worst = 0.0
    for _ in range(n_cases):
        H = hm.random_sphere(rng, surf)
        zeta = Reparameterization.smooth(float(rng.uniform(0.05, 0.3)))
        a = hm.hofer_norm_l1inf(H, quadrature="adaptive")
        b = hm.hofer_norm_l1inf(reparameterize_ham(H, zeta), quadrature="adaptive")
        worst = max(worst, abs(a - b))
    return Check("reparameterization_norm", worst, tol, worst < tol)


def displacement_bracket(radius=0.1, slack=0.10, **problem_kw):
    T = ho.DiscTarget((0.0, 0.0), radius)
    prob = ho.DisplacementProblem(T, "translation_bump", **problem_kw)
    res = ho.displacement_energy_upper(prob)
    explicit_norm, explicit_slack, _ = ho.evaluate_candidate(prob, ho.explicit_translation(T, prob.spacing))
    floor = ho.energy_capacity_floor(radius)
    ok = res.feasible and explicit_slack >= 0 and floor <= res.value <= (1 + slack) * explicit_norm
    return Check("displacement_bracket", res.value, slack, ok,
                 {"floor": floor, "explicit": explicit_norm, "params": list(res.params or ())})


# ----------------------------------------------------------------------------
# limits

def limits_suite(prefix=lm.PREFIX):
    flags, monotone = {}, True
    for name in lm.FAMILIES:
        rep = lm.run_suite(name, prefix)
        flags[name] = {"uniqueness": rep["uniqueness"].flags, "limit": rep["limit"].flags}
        for m in rep["limit"].moduli.values():
            monotone &= all(b <= a + 1e-15 for a, b in zip(m, m[1:]))
    violations = sum(lm.VIOLATION in f["uniqueness"] for f in flags.values())
    expected = {"decay": (lm.CONSISTENT, "cauchy"), "constant": (lm.INAPPLICABLE, "constant"),
                "oscillatory": (lm.HYPOTHESIS_NOT_MET, "not_cauchy"), "geometric": (lm.INAPPLICABLE, "cauchy"),
                "alexander": (lm.INAPPLICABLE, "cauchy")}
    as_expected = all(tuple(f["uniqueness"] + f["limit"]) == expected[k] for k, f in flags.items())
    return Check("limits_suite", float(violations), 0.0, violations == 0 and monotone and as_expected, flags)


# ----------------------------------------------------------------------------
# runner

SUITES = ("calabi", "flow", "algebra", "hofer", "limits")


def run(suite="all", seed=7, quick=True):
    """Run one suite (or all); quick=True shrinks the random case counts."""
    rng = np.random.default_rng(seed)
    names = SUITES if suite == "all" else (suite,)
    out = []
    for name in names:
        if name == "calabi":
            out += [calabi_calibration(), conjugation_identity(), a4_law(rng, 4 if quick else 20),
                    wild_divergence()]
        elif name == "flow":
            out += [conservation_order(), one_parameter(grid=(8, 8) if quick else (16, 16))]
        elif name == "algebra":
            out += [group_algebra(rng, 2 if quick else 20)]
        elif name == "hofer":
            out += [triangle_inequality(rng, 3 if quick else 100), conjugation_invariance(rng, 5 if quick else 100),
                    reparameterization_invariance(rng, 1 if quick else 3)]
        elif name == "limits":
            out += [limits_suite()]
        else:
            raise ValueError(f"unknown suite {name!r}")
    return out
