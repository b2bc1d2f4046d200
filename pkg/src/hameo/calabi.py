"""Radial profiles, exact twist maps, the Calabi invariant and the dyadic wild construction.

Calabi value of a twist: the generator F(r) = ∫_r^1 s ρ(s) ds integrates
over the disc to π ∫_0^1 r³ ρ(r) dr, which is what ``cal_twist`` returns
(raw area form; pass normalized=True to divide by the disc area).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate as sci_integrate

from . import geometry as geo
from .errors import ConfigurationError, ContractError, DomainError, RangeError
from .flow import DiscreteMap
from .hamiltonian import Hamiltonian, _unbroadcast

K_MAX = 20
CALIBRATED_HALF_WIDTH = 0.24
_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


@dataclass(frozen=True)
class RadialProfile:
    rho: Callable
    support: tuple
    center: float = float("nan")
    width: float = float("nan")
    amplitude: float = float("nan")
    label: str = "rho"
    pieces: tuple = field(default=(), repr=False)   # sub-profiles with disjoint supports

    def __post_init__(self):
        lo, hi = self.support
        if not (0.0 < lo <= hi < 1.0):
            raise DomainError(f"profile support {self.support} must close up inside (0, 1)")

    def __call__(self, r):
        r = np.asarray(r)
        return self.rho(r if r.dtype == np.longdouble else r.astype(float))

    def scaled(self, c) -> "RadialProfile":
        c = float(c)
        base = self.rho
        return RadialProfile(lambda r: c * base(r), self.support, self.center, self.width,
                             self.amplitude * c, f"{c:g}*{self.label}",
                             tuple(p.scaled(c) for p in self.pieces))

    @property
    def is_zero(self):
        return self.support[0] == self.support[1]


def zero_profile() -> RadialProfile:
    return RadialProfile(lambda r: np.zeros_like(np.asarray(r, dtype=float)), (0.5, 0.5), label="zero")


def bump_profile(center, width, amplitude=1.0) -> RadialProfile:
    """amplitude·exp(-1/(1-s²)), s = (r - center)/width."""
    c, w, A = float(center), float(width), float(amplitude)
    if w <= 0:
        raise DomainError("bump width must be positive")

    def rho(r):
        r = np.asarray(r)
        s = (r - c) / w
        return A * _bump_value(s * s)
    return RadialProfile(rho, (c - w, c + w), c, w, A, f"bump({c:g},{w:g})")


def _bump_value(q):
    # dtype-preserving so extended-precision inputs stay extended
    inside = q < 1
    safe = np.where(inside, 1 - q, 1)
    return np.where(inside, np.exp(-1 / safe), 0)


def _quad_support(fn, prof, pieces=True):
    parts = prof.pieces if (pieces and prof.pieces) else (prof,)
    total = 0.0
    for p in parts:
        lo, hi = p.support
        if hi > lo:
            v, _ = sci_integrate.quad(fn(p), lo, hi, limit=200, epsabs=0.0, epsrel=1e-13)
            total += v
    return total


def cal_twist(rho: RadialProfile, normalized=False) -> float:
    """π ∫_0^1 r³ ρ(r) dr."""
    if rho.is_zero:
        return 0.0
    val = np.pi * _quad_support(lambda p: (lambda r: r ** 3 * float(p(r))), rho)
    return val / np.pi if normalized else val


@lru_cache(maxsize=None)
def calibrated_profile() -> RadialProfile:
    """Smooth bump on (0.51, 0.99) ⊂ (1/2, 1), scaled so that cal_twist = 1."""
    unit = bump_profile(0.75, CALIBRATED_HALF_WIDTH, 1.0)
    return bump_profile(0.75, CALIBRATED_HALF_WIDTH, 1.0 / cal_twist(unit))


def dyadic_profile(k: int, rho1: RadialProfile = None) -> RadialProfile:
    """ρ_k(r) = 16^{k-1} ρ₁(2^{k-1} r), supported in (2^{-k}, 2^{1-k})."""
    rho1 = rho1 or calibrated_profile()
    if int(k) != k or k < 1:
        raise DomainError("k must be a positive integer")
    if k > K_MAX:
        raise RangeError(f"k = {k} exceeds K_max = {K_MAX}")
    lo, hi = rho1.support
    if lo < 0.5 or hi > 1.0:
        raise ContractError("ρ₁ must be supported in (1/2, 1)")
    if k == 1:
        return rho1
    s, amp = 2.0 ** (k - 1), 16.0 ** (k - 1)
    base = rho1.rho
    return RadialProfile(lambda r: amp * base(s * np.asarray(r)), (lo / s, hi / s),
                         rho1.center / s, rho1.width / s, rho1.amplitude * amp, f"rho_{k}")


def sum_profiles(profiles) -> RadialProfile:
    profiles = [p for p in profiles if not p.is_zero]
    if not profiles:
        return zero_profile()
    sup = sorted(p.support for p in profiles)
    for (a0, a1), (b0, b1) in zip(sup, sup[1:]):
        if b0 < a1:
            raise ContractError("profiles overlap")

    def rho(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for p in profiles:
            lo, hi = p.support
            m = (r > lo) & (r < hi)
            out = out + np.where(m, p(np.where(m, r, p.center)), 0.0)
        return out
    return RadialProfile(rho, (sup[0][0], sup[-1][1]), label="+".join(p.label for p in profiles),
                         pieces=tuple(profiles))


def profile_from_config(cfg) -> RadialProfile:
    if not cfg or cfg.get("kind", "calibrated") == "calibrated":
        extra = set(cfg or {}) - {"kind", "k"}
        if extra:
            raise ConfigurationError(f"unknown profile keys {sorted(extra)}")
        return dyadic_profile(int(cfg.get("k", 1)) if cfg else 1)
    if cfg.get("kind") == "bump":
        extra = set(cfg) - {"kind", "center", "width", "amplitude"}
        if extra:
            raise ConfigurationError(f"unknown profile keys {sorted(extra)}")
        return bump_profile(cfg["center"], cfg["width"], cfg.get("amplitude", 1.0))
    raise ConfigurationError(f"unknown profile kind {cfg.get('kind')!r}")


class TwistMap:
    """(r, θ) ↦ (r, θ + ρ(r)), evaluated exactly in Cartesian coordinates."""
    preserves_radius = True

    def __init__(self, profile: RadialProfile, surface=None):
        self.profile = profile
        self.surface = surface or geo.disc()

    def _turn(self, p, sign):
        p = np.asarray(p)
        if p.dtype != np.longdouble:
            p = p.astype(float)
        a = sign * self.profile(np.hypot(p[..., 0], p[..., 1]))
        c, s = np.cos(a), np.sin(a)
        return np.stack([c * p[..., 0] - s * p[..., 1], s * p[..., 0] + c * p[..., 1]], -1)

    def __call__(self, p):
        return self._turn(p, 1.0)

    def inverse(self, p):
        return self._turn(p, -1.0)

    def power(self, n) -> "TwistMap":
        return TwistMap(self.profile.scaled(n), self.surface)

    def jacobian(self, p):
        """Analytic Jacobian determinant; identically 1."""
        return np.ones(np.shape(p)[:-1])

    def discrete(self, points=None) -> DiscreteMap:
        return DiscreteMap.from_callables(self.surface, self, self.inverse, points)


def _flow_gl(r, profile):
    """∫_r^{r_max} s ρ(s) ds by Gauss-Legendre on [max(r, r_min), r_max]."""
    lo, hi = profile.support
    a = np.clip(r, lo, hi)[..., None]
    half = (hi - a) / 2
    s = a + half * (_GL_X + 1)
    return np.sum(half * _GL_W * s * profile(s), -1)


def twist_generating_ham(rho: RadialProfile, surface=None) -> Hamiltonian:
    """F(r) = ∫_r^1 s ρ(s) ds; its time-1 flow is the twist by ρ."""
    surface = surface or geo.disc()
    if rho.is_zero:
        from .hamiltonian import zero
        return zero(surface)
    parts = rho.pieces or (rho,)

    def func(t, p):
        r = np.hypot(p[..., 0], p[..., 1])
        return sum(_flow_gl(r, q) for q in parts)

    def grad(t, p):
        r = np.hypot(p[..., 0], p[..., 1])
        return -rho(r)[..., None] * p

    return Hamiltonian(surface, func, grad, autonomous=True, support=rho.support[1], label=f"F[{rho.label}]")


def _support_radius(H: Hamiltonian):
    R = H.surface.radius
    if H.support is not None:
        if H.support >= R:
            raise ContractError("Hamiltonian support touches the boundary")
        return H.support
    ring = geo.from_chart(H.surface, np.stack([np.full(256, R * (1 - 1e-9)),
                                               np.linspace(0, 2 * np.pi, 256, endpoint=False)], -1))
    if np.max(np.abs(H(np.linspace(0, 1, 9)[:, None], ring[None]))) > 1e-12:
        raise ContractError("Hamiltonian does not vanish at the boundary")
    return R


def cal_path(H: Hamiltonian, n=384, n_t=8, normalized=False, chunk=1 << 16) -> float:
    """∫₀¹∫ H dA dt.

    Space: trapezoid rule on a uniform n×n Cartesian grid over the square
    around the support disc. H vanishes to all orders near the edge of the
    square, so the rule converges like the periodic trapezoid rule.
    Time: Gauss-Legendre with n_t nodes.
    """
    if H.surface.kind != geo.DISC:
        raise ContractError("the Calabi invariant is defined on the disc")
    if H.label == "zero":
        return 0.0
    s = _support_radius(H)
    h = 2 * s / n
    x = -s + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], -1)
    pts = pts[X.ravel() ** 2 + Y.ravel() ** 2 < s * s]
    if H.autonomous:
        ts, wt = np.zeros(1), np.ones(1)
    else:
        xt, wt = np.polynomial.legendre.leggauss(n_t)
        ts, wt = (xt + 1) / 2, wt / 2
    total = 0.0
    step = max(1, chunk // len(ts))
    for i in range(0, len(pts), step):
        total += float(wt @ H(ts[:, None], pts[None, i:i + step]).sum(1))
    val = total * h * h
    return val / geo.total_area(H.surface) if normalized else val


def rescale_conjugate(a, m):
    """R_a ∘ m ∘ R_a^{-1} on D(a), identity outside."""
    a = float(a)
    if not 0.0 < a <= 1.0:
        raise DomainError("rescaling factor must lie in (0, 1]")
    if isinstance(m, TwistMap):
        base = m.profile
        lo, hi = base.support
        prof = RadialProfile(lambda r: np.where(np.asarray(r) < a, base(np.asarray(r) / a), 0.0),
                             (lo * a, hi * a), base.center * a, base.width * a, base.amplitude,
                             f"R{a:g}[{base.label}]")
        return TwistMap(prof, m.surface)
    if isinstance(m, DiscreteMap):
        if m.forward is not None:
            inv = None if m.inverse is None else _conj(a, m.inverse)
            return DiscreteMap.from_callables(m.surface, _conj(a, m.forward), inv, m.points)
        inv = None if m.inverse_images is None else a * m.inverse_images
        return DiscreteMap(m.surface, a * m.points, a * m.images, inv)
    if callable(m):
        return _conj(a, m)
    raise ContractError("cannot rescale this kind of map")


def _conj(a, fn):
    def g(p):
        p = np.asarray(p)
        out = p.copy()
        inside = np.hypot(p[..., 0], p[..., 1]) < a
        if np.any(inside):
            out[inside] = a * np.asarray(fn(p[inside] / a))
        return out
    return g


def iterate(fn, n):
    def g(p):
        for _ in range(n):
            p = fn(p)
        return p
    return g


def alexander_rescale(H: Hamiltonian, a, eta=0.0) -> Hamiltonian:
    """a² H(t, x/a), supported in D(a(1-η))."""
    a = float(a)
    if not 0.0 < a <= 1.0:
        raise DomainError("rescaling factor must lie in (0, 1]")
    if H.surface.kind != geo.DISC:
        raise ContractError("Alexander rescaling acts on the disc")
    R = H.surface.radius
    if H.support is None or H.support > R * (1 - eta) + 1e-15:
        raise ContractError(f"support must lie in D({R * (1 - eta):g})")
    if a == 1.0:
        return H

    def scaled_points(p):
        # keep stride-0 broadcast axes intact so the inner evaluation stays cheap
        base = _unbroadcast(p)
        m = np.hypot(base[..., 0], base[..., 1]) < a * R
        q = np.where(m[..., None], base / a, 0.0)
        return np.broadcast_to(m, p.shape[:-1]), np.broadcast_to(q, p.shape)

    def func(t, p):
        m, q = scaled_points(p)
        return np.where(m, a * a * H(t, q), 0.0)

    def grad(t, p):
        m, q = scaled_points(p)
        return np.where(m[..., None], a * H.gradient(t, q), 0.0)

    return H.derived(func, grad, support=a * H.support, label=f"alex({H.label},{a:g})")


def wild_profiles(K, rho1=None):
    if K > K_MAX:
        raise RangeError(f"K = {K} exceeds K_max = {K_MAX}")
    return [dyadic_profile(k, rho1) for k in range(1, K + 1)]


def wild_truncated(K: int, rho1: RadialProfile = None, points=None):
    """(ψ_K, Cal ψ_K) with ψ_K = φ₁∘…∘φ_K (disjoint supports, so order is irrelevant)."""
    if int(K) != K or K < 1:
        raise DomainError("K must be a positive integer")
    profs = wild_profiles(int(K), rho1)
    twist = TwistMap(sum_profiles(profs))
    cal = sum(cal_twist(p) for p in profs)
    return twist.discrete(points), cal


def conjugation_residual(k, rho1=None, n=200, extended=False):
    """sup over an n×n grid of |R_{1/2}∘φ_{k-1}^{16}∘R_{1/2}^{-1} - φ_k|, φ^{16} by literal iteration.

    The twist shear r·ρ_k' grows like 32^k, so for k ≥ 6 one-ulp radius
    roundoff inside the 16 iterations is amplified past 1e-10 in double
    precision; ``extended=True`` runs the same evaluators in long double.
    """
    prev = TwistMap(dyadic_profile(k - 1, rho1))
    cur = TwistMap(dyadic_profile(k, rho1))
    lhs = rescale_conjugate(0.5, iterate(prev, 16))
    xs = np.linspace(-1, 1, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], -1)
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) <= 1.0]
    if extended:
        pts = pts.astype(np.longdouble)
    return float(np.max(np.linalg.norm(lhs(pts) - cur(pts), axis=-1)))
