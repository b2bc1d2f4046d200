"""Hofer length, the Hamiltonian metric, intrinsic-norm bounds and displacement energy.

Displacement energy is bracketed: below by half the capacity of the target
(πr²/2 for a round disc), above by the best Hofer norm found over a
parametric family of Hamiltonians whose time-1 map verifiably moves the
target off itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from . import geometry as geo
from .algebra import path_product
from .errors import ConfigurationError, ContractError, EmptyFeasibleSetError
from .flow import DiscreteMap, FlowPath, StepControl, c0_distance_paths, integrate, invert_path
from .hamiltonian import Hamiltonian, hofer_norm_l1inf, oscillation
from .runtime import pmap


def leng(path: FlowPath, **norm_kw) -> float:
    path._require_generator()
    return hofer_norm_l1inf(path.hamiltonian, span=path.span, **norm_kw)


def d_ham(lam: FlowPath, mu: FlowPath, **norm_kw) -> float:
    """d̄(λ, μ) + leng(λ^{-1} μ)."""
    return c0_distance_paths(lam, mu) + leng(path_product(invert_path(lam), mu), **norm_kw)


def intrinsic_norm_upper(h_target: DiscreteMap, candidates, delta_match=1e-6, **norm_kw) -> float:
    """min leng over candidate paths whose time-1 map matches h_target on its points."""
    best = None
    for cand in candidates:
        end = cand.span[1]
        if cand.points.shape == h_target.points.shape and np.array_equal(cand.points, h_target.points):
            img = cand.images[-1]
        else:
            img = cand.evaluate(end, h_target.points)
        if np.max(geo.distance(h_target.surface, img, h_target.images)) > delta_match:
            continue
        val = leng(cand, **norm_kw)
        best = val if best is None else min(best, val)
    if best is None:
        raise EmptyFeasibleSetError("no candidate path reaches the target map")
    return best


# ----------------------------------------------------------------------------
# targets

@dataclass(frozen=True)
class DiscTarget:
    """Closed round disc B(center, radius) inside the unit disc."""
    center: tuple
    radius: float
    kind: str = "disc"

    def area(self):
        return np.pi * self.radius ** 2

    def sample(self, spacing):
        c = np.asarray(self.center, dtype=float)
        n_b = max(16, int(np.ceil(2 * np.pi * self.radius / spacing)))
        th = np.arange(n_b) * 2 * np.pi / n_b
        ring = c + self.radius * np.stack([np.cos(th), np.sin(th)], -1)
        xs = np.arange(-self.radius, self.radius + 1e-12, spacing)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        inner = np.stack([X.ravel(), Y.ravel()], -1)
        inner = inner[np.hypot(inner[:, 0], inner[:, 1]) < self.radius] + c
        return np.concatenate([ring, inner])

    def separation(self, pts):
        """Signed distance outside the target (negative inside)."""
        return np.hypot(*(pts - np.asarray(self.center)).T) - self.radius


@dataclass(frozen=True)
class CapTarget:
    """Closed spherical cap {z ≥ height}."""
    height: float
    kind: str = "cap"

    def area(self):
        return 2 * np.pi * (1 - self.height)

    @property
    def angle(self):
        return float(np.arccos(self.height))

    def sample(self, spacing):
        a = self.angle
        n_r = max(2, int(np.ceil(a / spacing)))
        pts = [np.array([[0.0, 0.0, 1.0]])]
        for k in range(1, n_r + 1):
            al = a * k / n_r
            n_p = max(8, int(np.ceil(2 * np.pi * np.sin(al) / spacing)))
            ph = np.arange(n_p) * 2 * np.pi / n_p
            pts.append(np.stack([np.sin(al) * np.cos(ph), np.sin(al) * np.sin(ph), np.full(n_p, np.cos(al))], -1))
        return np.concatenate(pts)

    def separation(self, pts):
        """Geodesic distance outside the cap (negative inside)."""
        return np.arccos(np.clip(pts[..., 2], -1, 1)) - self.angle


def target_from_config(cfg) -> object:
    kind = cfg.get("kind")
    if kind == "disc":
        extra = set(cfg) - {"kind", "center", "radius"}
        if extra:
            raise ConfigurationError(f"unknown target keys {sorted(extra)}")
        r = float(cfg["radius"])
        if not r > 0:
            raise ConfigurationError("target radius must be positive")
        return DiscTarget(tuple(cfg.get("center", (0.0, 0.0))), r)
    if kind == "cap":
        extra = set(cfg) - {"kind", "height"}
        if extra:
            raise ConfigurationError(f"unknown target keys {sorted(extra)}")
        h = float(cfg["height"])
        if not -1 < h < 1:
            raise ConfigurationError("cap height must lie in (-1, 1)")
        return CapTarget(h)
    raise ConfigurationError(f"unknown target kind {kind!r}")


def energy_capacity_floor(B) -> float:
    """Half the capacity of a round disc: πr²/2 (or half the area of a cap)."""
    if isinstance(B, (int, float)):
        return float(np.pi * B * B / 2)
    return float(B.area() / 2)


# ----------------------------------------------------------------------------
# families

def _step(x):
    from .algebra import _smoothstep
    return _smoothstep(x)


def x_rotation(params, target=None, surface=None) -> Hamiltonian:
    """H = c·x on the sphere: rigid rotation by angle c about the x-axis."""
    from .hamiltonian import linear
    (c,) = params
    return linear(surface or geo.sphere(), (c, 0.0, 0.0), label=f"x_rotation({c:.6g})")


def translation_bump(params, target: DiscTarget, surface=None, eta=0.02, margin=None) -> Hamiltonian:
    """H = d·v·χ_v(v)·χ_x(x), v = y - y_c: rigid translation by d along x on the plateau.

    The plateau |v| ≤ w, x ∈ [x_c - r - m, x_c + d + r + m] carries the whole
    translated target when w ≥ r; cutoffs use a C^∞ step of width τ.
    """
    surface = surface or geo.disc()
    d, w, tau = (float(q) for q in params)
    cx, cy = target.center
    r = target.radius
    m = 0.0 if margin is None else margin
    x_lo, x_hi = cx - r - m, cx + d + r + m

    def parts(p):
        x, v = p[..., 0], p[..., 1] - cy
        av = np.abs(v)
        sv, dsv = _step((w + tau - av) / tau)
        s1, ds1 = _step((x - (x_lo - tau)) / tau)
        s2, ds2 = _step(((x_hi + tau) - x) / tau)
        return x, v, av, sv, dsv, s1, ds1, s2, ds2

    def func(t, p):
        x, v, av, sv, dsv, s1, ds1, s2, ds2 = parts(p)
        return d * v * sv * s1 * s2

    def grad(t, p):
        x, v, av, sv, dsv, s1, ds1, s2, ds2 = parts(p)
        chi_x = s1 * s2
        dchi_x = (ds1 * s2 - s1 * ds2) / tau
        dv = d * (sv - v * np.sign(v) * dsv / tau) * chi_x
        dx = d * v * sv * dchi_x
        return np.stack([dx, dv], -1)

    H = Hamiltonian(surface, func, grad, autonomous=True, label=f"translation_bump({d:.4g},{w:.4g},{tau:.4g})")
    # support rectangle must stay inside D(1 - η)
    xs = np.array([x_lo - tau, x_hi + tau])
    ys = cy + np.array([-(w + tau), w + tau])
    corner = np.max(np.hypot(xs[:, None], ys[None, :]))
    H.support = float(corner)
    H.fits = bool(corner <= surface.radius * (1 - eta))
    return H


def translation_bump_norm(params):
    """Closed-form oscillation 2 d max_v v χ_v(v), used as an oracle in tests."""
    d, w, tau = params
    v = np.linspace(w, w + tau, 20001)
    val = np.max(v * _step((w + tau - v) / tau)[0])
    res = optimize.minimize_scalar(lambda s: -s * float(_step((w + tau - s) / tau)[0]),
                                   bounds=(w, w + tau), method="bounded", options={"xatol": 1e-12})
    return 2 * d * max(val, -res.fun)


FAMILIES = {
    "x_rotation": dict(builder=x_rotation, surface="sphere", box=[(0.0, np.pi)], names=("angle",)),
    "translation_bump": dict(builder=translation_bump, surface="disc",
                             box=[(0.02, 0.8), (0.02, 0.4), (0.02, 0.2)], names=("shift", "half_height", "transition")),
}


@dataclass
class DisplacementProblem:
    target: object
    family: str
    box: Optional[list] = None
    budget: int = 400
    tolerance: float = 1e-4
    starts: int = 8
    seed: int = 0
    spacing: Optional[float] = None
    steps: StepControl = field(default_factory=lambda: StepControl(step=1 / 128, frames=1))
    norm_grid: tuple = (96, 192)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        spec = FAMILIES[self.family]
        if self.box is None:
            self.box = list(spec["box"])
        if any(lo > hi for lo, hi in self.box) or len(self.box) != len(spec["box"]):
            raise ConfigurationError("parameter box is empty or has the wrong dimension")
        if not self.target.area() > 0:
            raise ConfigurationError("target must have positive area")
        kind = spec["surface"]
        if (kind == "disc") != isinstance(self.target, DiscTarget):
            raise ConfigurationError(f"family {self.family} does not act on a {self.target.kind} target")
        if self.spacing is None:
            self.spacing = (self.target.radius if isinstance(self.target, DiscTarget) else self.target.angle) / 10

    @property
    def surface(self):
        return geo.disc(grid=self.norm_grid) if FAMILIES[self.family]["surface"] == "disc" else geo.sphere(self.norm_grid)

    @property
    def delta_sep(self):
        return 2 * self.spacing

    def build(self, params) -> Hamiltonian:
        return FAMILIES[self.family]["builder"](tuple(params), self.target, self.surface)


@dataclass
class DisplacementResult:
    value: float
    params: Optional[tuple]
    certificate: Optional[Hamiltonian]
    feasible: bool
    floor: float
    evaluations: int
    separation: Optional[float] = None
    reason: str = ""

    def to_dict(self):
        return {"value": None if not self.feasible else self.value,
                "params": None if self.params is None else [float(p) for p in self.params],
                "feasible": self.feasible, "floor": self.floor, "evaluations": self.evaluations,
                "separation": self.separation, "reason": self.reason}


def verify_displacement(p: DisplacementProblem, H: Hamiltonian, sample=None):
    """min over the sample of the signed separation of φ_H^1(A) from A, minus δ_sep."""
    sample = p.target.sample(p.spacing) if sample is None else sample
    n = max(1, int(np.ceil(1.0 / p.steps.step)))
    img = integrate(H, 0.0, 1.0, sample, n)
    return float(np.min(p.target.separation(img)) - p.delta_sep)


def evaluate_candidate(p: DisplacementProblem, params, sample=None):
    """(norm, separation slack, Hamiltonian); slack ≥ 0 means displaced with margin."""
    H = p.build(params)
    if not getattr(H, "fits", True):
        return np.inf, -np.inf, H
    try:
        slack = verify_displacement(p, H, sample)
    except Exception:   # trajectory left the disc, etc.
        return np.inf, -np.inf, H
    return oscillation(H, 0.0), slack, H


def displacement_energy_upper(p: DisplacementProblem) -> DisplacementResult:
    floor = energy_capacity_floor(p.target)
    surf_area = geo.total_area(p.surface)
    if p.target.area() > surf_area / 2:
        return DisplacementResult(float("inf"), None, None, False, floor, 0,
                                  reason="target area exceeds half the surface area")
    sample = p.target.sample(p.spacing)
    lo = np.array([b[0] for b in p.box])
    hi = np.array([b[1] for b in p.box])
    span = np.where(hi > lo, hi - lo, 1.0)
    rng = np.random.default_rng(p.seed)
    starts = lo + rng.uniform(size=(p.starts, len(lo))) * (hi - lo)
    per_start = max(4, p.budget // p.starts)
    big = 10.0 * (1.0 + float(np.max(hi)))

    def run(x0):
        seen = []

        def objective(u):
            params = lo + np.clip(u, 0, 1) * (hi - lo)
            norm, slack, _ = evaluate_candidate(p, params, sample)
            seen.append((tuple(params), norm, slack))
            if slack >= 0 and np.isfinite(norm):
                return norm
            return big + (0.0 if not np.isfinite(slack) else -slack) * big
        u0 = (x0 - lo) / span
        optimize.minimize(objective, u0, method="Nelder-Mead", bounds=[(0, 1)] * len(lo),
                          options=dict(maxfev=per_start, xatol=p.tolerance, fatol=p.tolerance * 1e-2,
                                       initial_simplex=_simplex(u0)))
        return seen

    history = [rec for chunk in pmap(run, list(starts)) for rec in chunk]
    feasible = [(norm, params, slack) for params, norm, slack in history if slack >= 0 and np.isfinite(norm)]
    if not feasible:
        return DisplacementResult(float("inf"), None, None, False, floor, len(history),
                                  reason="no feasible parameter within budget")
    feasible.sort(key=lambda rec: (rec[0], rec[1]))
    value, params, slack = feasible[0]
    return DisplacementResult(float(value), params, p.build(params), True, floor, len(history), float(slack))


def _simplex(u0):
    n = len(u0)
    pts = [u0]
    for i in range(n):
        e = np.zeros(n)
        e[i] = 0.25 if u0[i] < 0.5 else -0.25
        pts.append(np.clip(u0 + e, 0, 1))
    return np.array(pts)


def explicit_translation(target: DiscTarget, spacing=None, transition=0.05):
    """Parameters of the hand-built displacing translation: shift 2r + δ_sep, plateau half-height r."""
    spacing = target.radius / 10 if spacing is None else spacing
    return (2 * target.radius + 2 * spacing, target.radius, transition)
