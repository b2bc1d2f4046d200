"""Time-dependent Hamiltonians H(t, x), normalization, oscillation and Hofer norms.

A Hamiltonian is a closure over Cartesian points: ``H(t, p)`` with p of
shape (..., d) and t a scalar or an array broadcastable to p.shape[:-1].
Gradients are ambient (only the tangential part matters on the sphere).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate as sci_integrate

from . import geometry as geo
from .errors import ConfigurationError, NormalizationError
from .expr import compile_expression

MEAN_ZERO = "mean_zero"
COMPACT_SUPPORT = "compact_support"

FD_STEP = 1e-5
HESS_STEP = 1e-4
MEAN_TOL = 1e-8
N_T = 129


def broadcast(t, p):
    """Broadcast times against the point shape; returns (t, p) views of a common shape."""
    p = np.asarray(p, dtype=float)
    t = np.asarray(t, dtype=float)
    if t.shape == p.shape[:-1]:
        return t, p
    shape = np.broadcast_shapes(t.shape, p.shape[:-1])
    return np.broadcast_to(t, shape), np.broadcast_to(p, shape + p.shape[-1:])


class Hamiltonian:
    """Scalar field H(t, x) on a surface.

    ``support`` is the radius of a centred disc outside of which H vanishes
    (disc surfaces only). ``depth`` counts how many flows must be integrated
    to evaluate H once; it decides step sizes downstream.
    """

    def __init__(self, surface: geo.Surface, func: Callable, grad: Optional[Callable] = None, *,
                 normalization=None, support=None, autonomous=False, smooth=True,
                 normalized=False, depth=0, label="H"):
        self.surface = surface
        self.func = func
        self._grad = grad
        self.normalization = normalization or (MEAN_ZERO if surface.is_closed else COMPACT_SUPPORT)
        self.support = None if support is None else float(support)
        self.autonomous = bool(autonomous)
        self.smooth = bool(smooth)
        self.normalized = bool(normalized)
        self.depth = int(depth)
        self.label = label

    def __repr__(self):
        return f"Hamiltonian({self.label!r}, {self.surface.kind})"

    def __call__(self, t, p):
        t, p = broadcast(t, p)
        out = self.func(t, p)
        return np.broadcast_to(np.asarray(out, dtype=float), p.shape[:-1])

    @property
    def has_analytic_gradient(self):
        return self._grad is not None

    def gradient(self, t, p):
        t, p = broadcast(t, p)
        if self._grad is not None:
            g = np.asarray(self._grad(t, p), dtype=float)
            return np.broadcast_to(g, p.shape)
        return fd_gradient(self, t, p)

    def at(self, t, x):
        """Evaluate at SurfacePoint(s)."""
        return self(t, geo.as_points(self.surface, x))

    def derived(self, func, grad=None, **kw):
        opts = dict(normalization=self.normalization, support=self.support, autonomous=self.autonomous,
                    smooth=self.smooth, normalized=self.normalized, depth=self.depth, label=self.label)
        opts.update(kw)
        return Hamiltonian(self.surface, func, grad, **opts)


def fd_gradient(H, t, p, step=FD_STEP):
    """Central differences along an orthonormal tangent frame, all offsets in one call."""
    p = np.asarray(p, dtype=float)
    e1, e2 = geo.tangent_frame(H.surface, p)
    offs = np.stack([p + step * e1, p - step * e1, p + step * e2, p - step * e2])
    offs = geo.project(H.surface, offs)
    tt = np.broadcast_to(np.asarray(t, dtype=float), p.shape[:-1])
    v = H(np.broadcast_to(tt, offs.shape[:-1]), offs)
    d1 = (v[0] - v[1]) / (2 * step)
    d2 = (v[2] - v[3]) / (2 * step)
    return d1[..., None] * e1 + d2[..., None] * e2


@dataclass
class HamiltonianSequence:
    terms: Callable           # i -> Hamiltonian, i >= 1
    description: str = ""
    length: Optional[int] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, i) -> Hamiltonian:
        if i < 1 or (self.length is not None and i > self.length):
            raise IndexError(i)
        if i not in self._cache:
            self._cache[i] = self.terms(i)
        return self._cache[i]

    def prefix(self, n):
        hs = [self[i] for i in range(1, n + 1)]
        surf = {h.surface for h in hs}
        modes = {h.normalization for h in hs}
        if len(surf) > 1 or len(modes) > 1:
            raise ConfigurationError("sequence terms must share surface and normalization")
        return hs


# ----------------------------------------------------------------------------
# normalization

def _mean_rule(surface, n=48):
    """Gauss-Legendre in z times uniform φ; exact for low-degree polynomials."""
    z, wz = np.polynomial.legendre.leggauss(n)
    phi = (np.arange(2 * n) + 0.5) * np.pi / n
    Z, P = np.meshgrid(z, phi, indexing="ij")
    pts = geo.from_chart(surface, np.stack([Z.ravel(), P.ravel()], -1))
    w = (wz[:, None] * np.full(2 * n, np.pi / n)[None]).ravel()
    return pts, w


def slice_means(H, times):
    """Spatial mean of H_t for each t in ``times`` (sphere)."""
    pts, w = _mean_rule(H.surface)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    vals = H(times[:, None], pts[None])
    return vals @ w / geo.total_area(H.surface)


def is_mean_zero(H, n_t=9, tol=MEAN_TOL):
    times = [0.0] if H.autonomous else np.linspace(0, 1, n_t)
    return bool(np.all(np.abs(slice_means(H, times)) <= tol))


def normalize(H: Hamiltonian) -> Hamiltonian:
    if H.normalization == COMPACT_SUPPORT:
        R = H.surface.radius
        if H.support is not None:
            if H.support >= R:
                raise NormalizationError("declared support touches the boundary")
            return H
        ring = geo.from_chart(H.surface, np.stack([np.full(256, R * (1 - 1e-9)),
                                                   np.linspace(0, 2 * np.pi, 256, endpoint=False)], -1))
        times = np.linspace(0, 1, 9)
        if np.max(np.abs(H(times[:, None], ring[None]))) > 1e-12:
            raise NormalizationError("Hamiltonian does not vanish near the boundary")
        return H
    if H.normalized:
        return H
    if is_mean_zero(H):
        return H.derived(H.func, H._grad, normalized=True)
    pts, w = _mean_rule(H.surface)
    area = geo.total_area(H.surface)
    base = H

    if H.autonomous:
        m = float(slice_means(H, [0.0])[0])

        def func(t, p):
            return base(t, p) - m
    else:
        def func(t, p):
            p = np.asarray(p, dtype=float)
            tt = np.broadcast_to(np.asarray(t, dtype=float), p.shape[:-1])
            u, inv = np.unique(tt, return_inverse=True)
            means = (base(u[:, None], pts[None]) @ w) / area
            return base(tt, p) - means[inv].reshape(tt.shape)

    grad = (lambda t, p: base.gradient(t, p))
    return H.derived(func, grad, normalized=True, label=f"normalize({H.label})")


# ----------------------------------------------------------------------------
# extrema and oscillation

def _local_max_candidates(vals, shape, k):
    """Indices of the k largest grid-local maxima per row of vals (T, N)."""
    T = vals.shape[0]
    n1, n2 = shape
    v = vals.reshape(T, n1, n2)
    pad = np.full((T, n1 + 2, n2), -np.inf)
    pad[:, 1:-1] = v
    is_max = np.ones_like(v, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = np.roll(pad, -dj, axis=2)[:, 1 + di:n1 + 1 + di]
            is_max &= v >= nb
    score = np.where(is_max, v, -np.inf).reshape(T, -1)
    k = min(k, score.shape[1])
    idx = np.argpartition(-score, k - 1, axis=1)[:, :k]
    # rows with fewer than k local maxima fall back to the plain top values
    fallback = np.argpartition(-vals, k - 1, axis=1)[:, :k]
    bad = ~np.isfinite(np.take_along_axis(score, idx, 1))
    return np.where(bad, fallback, idx)


def polish(H, t, x, sign, iters=40, trust=None):
    """Newton ascent of sign*H from x (…, d); returns improved (values, points).

    Steps are accepted only if they increase sign*H, so the result never
    drops below the starting values.
    """
    surf = H.surface
    x = np.array(x, dtype=float)
    sign = np.broadcast_to(sign, x.shape[:-1]).astype(float)
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
    f = sign * H(t, x)
    rad = np.full(x.shape[:-1], geo.grid(surf).spacing if trust is None else trust)
    active = np.ones(x.shape[:-1], dtype=bool)
    for _ in range(iters):
        if not active.any():
            break
        xa, ta, sa = x[active], t[active], sign[active]
        e1, e2 = geo.tangent_frame(surf, xa)
        h = HESS_STEP
        stack = np.stack([xa, xa + h * e1, xa - h * e1, xa + h * e2, xa - h * e2])
        stack = geo.project(surf, stack)
        G = H.gradient(np.broadcast_to(ta, stack.shape[:-1]), stack)
        proj = np.stack([np.sum(G * e1, -1), np.sum(G * e2, -1)], -1) * sa[None, ..., None]
        g = proj[0]
        hess = np.stack([(proj[1] - proj[2]) / (2 * h), (proj[3] - proj[4]) / (2 * h)], -2)
        hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
        if surf.kind == geo.SPHERE:
            # Riemannian correction on the unit sphere: Hess = P D²H P - (∇H·p) I
            radial = np.sum(G[0] * xa, -1) * sa
            hess = hess - radial[..., None, None] * np.eye(2)
        det = hess[..., 0, 0] * hess[..., 1, 1] - hess[..., 0, 1] ** 2
        tr = hess[..., 0, 0] + hess[..., 1, 1]
        concave = (det > 1e-14) & (tr < 0)
        safe = np.where(concave[..., None, None], hess, -np.eye(2))
        newton = -np.linalg.solve(safe, g[..., None])[..., 0]
        gn = np.linalg.norm(g, axis=-1, keepdims=True)
        r = rad[active][..., None]
        ascent = np.where(gn > 0, g / np.where(gn > 0, gn, 1.0) * r, 0.0)
        s = np.where(concave[..., None], newton, ascent)
        sn = np.linalg.norm(s, axis=-1, keepdims=True)
        s = np.where(sn > r, s * r / np.where(sn > 0, sn, 1.0), s)
        cand = geo.project(surf, xa + s[..., :1] * e1 + s[..., 1:] * e2)
        fc = sa * H(ta, cand)
        ok = fc > f[active]
        if surf.kind == geo.DISC:
            ok &= np.linalg.norm(cand, axis=-1) <= surf.radius
        idx = np.flatnonzero(active.ravel())
        xf, ff, rf = x.reshape(-1, x.shape[-1]), f.reshape(-1), rad.reshape(-1)
        xf[idx[ok]] = cand[ok]
        ff[idx[ok]] = fc[ok]
        rf[idx[~ok]] *= 0.25
        # value error near a maximum is O(|s|²), so 1e-8 steps already give ~1e-16
        small = (np.linalg.norm(s, axis=-1) < 1e-8) | (rf[idx] < 1e-9)
        act = active.reshape(-1)
        act[idx[small]] = False
    return sign * f, x


def extrema(H, times, grid=None, refine=True, k=4):
    """(max, min) of H_t over the grid for each t, optionally Newton-polished."""
    g = geo.grid(H.surface) if grid is None else grid
    times = np.atleast_1d(np.asarray(times, dtype=float))
    vals = H(times[:, None], g.points[None])
    hi, lo = vals.max(1), vals.min(1)
    if not refine:
        return hi, lo
    ih = _local_max_candidates(vals, g.shape, k)
    il = _local_max_candidates(-vals, g.shape, k)
    cand = np.concatenate([g.points[ih], g.points[il]], axis=1)
    sign = np.concatenate([np.ones(ih.shape[1]), -np.ones(il.shape[1])])[None, :]
    tt = np.broadcast_to(times[:, None], cand.shape[:-1])
    best, _ = polish(H, tt, cand, sign)
    kh = ih.shape[1]
    hi = np.maximum(hi, best[:, :kh].max(1))
    lo = np.minimum(lo, best[:, kh:].min(1))
    return hi, lo


def oscillation(H, t, grid=None, refine=True):
    hi, lo = extrema(H, t, grid, refine)
    out = np.maximum(hi - lo, 0.0)
    return float(out[0]) if np.ndim(t) == 0 else out


def hofer_norm_l1inf(H, n_t=N_T, grid=None, refine=True, quadrature="simpson", span=(0.0, 1.0)):
    a, b = span
    if H.autonomous:
        return oscillation(H, a, grid, refine) * (b - a)
    if quadrature == "adaptive":
        val, _ = sci_integrate.quad(lambda s: oscillation(H, s, grid, refine), a, b,
                                    limit=400, epsabs=1e-11, epsrel=1e-11)
        return float(val)
    if quadrature != "simpson":
        raise ConfigurationError(f"unknown quadrature {quadrature!r}")
    ts = np.linspace(a, b, n_t)
    return float(sci_integrate.simpson(oscillation(H, ts, grid, refine), x=ts))


def hofer_norm_linf(H, n_t=N_T, grid=None, refine=True, span=(0.0, 1.0)):
    if H.autonomous:
        return oscillation(H, span[0], grid, refine)
    ts = np.linspace(span[0], span[1], n_t)
    return float(np.max(oscillation(H, ts, grid, refine)))


def sup_norm(H, n_t=33, grid=None, span=(0.0, 1.0)):
    """max |H| over grid × time samples (the C⁰ norm used by the limits harness)."""
    g = geo.grid(H.surface) if grid is None else grid
    ts = np.array([span[0]]) if H.autonomous else np.linspace(*span, n_t)
    return float(np.max(np.abs(H(ts[:, None], g.points[None]))))


# ----------------------------------------------------------------------------
# builtins

def zero(surface) -> Hamiltonian:
    return Hamiltonian(surface, lambda t, p: np.zeros(np.shape(p)[:-1]), lambda t, p: np.zeros(np.shape(p)),
                       autonomous=True, normalized=True, support=0.0 if surface.kind == geo.DISC else None,
                       label="zero")


def linear(surface, vector, label=None) -> Hamiltonian:
    """H(p) = a·p on the sphere: rigid rotation about the axis a with speed |a|."""
    a = np.asarray(vector, dtype=float)
    if surface.kind != geo.SPHERE:
        raise ConfigurationError("linear Hamiltonians are defined on the sphere")
    return Hamiltonian(surface, lambda t, p: np.asarray(p) @ a, lambda t, p: np.broadcast_to(a, np.shape(p)),
                       autonomous=True, normalized=True, label=label or f"linear{tuple(a)}")


def sphere_height(c=1.0, surface=None) -> Hamiltonian:
    surface = surface or geo.sphere()
    return linear(surface, (0.0, 0.0, c), label="sphere_height" if c == 1.0 else f"{c}*z")


def scaled(c, inner: Hamiltonian) -> Hamiltonian:
    c = float(c)
    return inner.derived(lambda t, p: c * inner(t, p), lambda t, p: c * inner.gradient(t, p),
                         label=f"{c}*{inner.label}")


def shifted(inner: Hamiltonian, c) -> Hamiltonian:
    c = float(c)
    return inner.derived(lambda t, p: inner(t, p) + c, inner.gradient, normalized=False,
                         support=None, label=f"{inner.label}+{c}")


def radial(surface, f, df, support=None, label="radial") -> Hamiltonian:
    """Autonomous H = f(|x|) on the disc, gradient f'(r) x/r."""
    def grad(t, p):
        p = np.asarray(p, dtype=float)
        r = np.linalg.norm(p, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        return (np.where(r > 0, df(r) / safe, 0.0))[..., None] * p
    return Hamiltonian(surface, lambda t, p: f(np.linalg.norm(p, axis=-1)), grad, autonomous=True,
                       support=support, label=label)


def from_expression(text, surface, support=None) -> Hamiltonian:
    value, grad, auto = compile_expression(text, surface.kind)
    return Hamiltonian(surface, value, grad, autonomous=auto, support=support, label=text)


def _unbroadcast(p):
    """Collapse leading axes of p that are stride-0 broadcasts (results broadcast back)."""
    idx = tuple(slice(0, 1) if (st == 0 and n > 1) else slice(None)
                for st, n in zip(p.strides[:-1], p.shape[:-1]))
    return p[idx + (slice(None),)]


def _time_poly(coef, t):
    # coef (..., 3) per-term coefficients a + b t + c t²
    t = np.asarray(t, dtype=float)
    return coef[0] + coef[1] * t[..., None] + coef[2] * t[..., None] ** 2


def random_sphere(rng, surface=None, scale=1.0, autonomous=False) -> Hamiltonian:
    """a(t)·p + pᵀQ(t)p with Q traceless: mean zero, degree-2 spherical harmonics.

    Coefficients are quadratic in t: a(t) = a0 + a1 t + a2 t², same for Q.
    """
    surface = surface or geo.sphere()
    A = rng.normal(size=(3, 3)) * scale
    Qs = rng.normal(size=(3, 3, 3)) * scale / 2
    Qs = 0.5 * (Qs + np.swapaxes(Qs, 1, 2))
    Qs -= np.trace(Qs, axis1=1, axis2=2)[:, None, None] * np.eye(3) / 3
    if autonomous:
        A[1:] = 0
        Qs[1:] = 0
    # columns k*3 + i: gradient component i of the t^k coefficient, up to the a_k shift
    M = np.concatenate([2 * Qs[k] for k in range(3)], axis=1)
    shift = A.reshape(-1)

    def powers(t):
        return np.stack([np.ones_like(t), t, t * t], -1)

    def func(t, p):
        grads = (p @ M + 2 * shift).reshape(p.shape[:-1] + (3, 3))
        # a_k·p + pᵀQ_k p = ½ p·(2a_k + 2Q_k p)
        vals = 0.5 * np.einsum("...ki,...i->...k", grads, p)
        return np.einsum("...k,...k->...", vals, powers(t))

    def grad(t, p):
        grads = (p @ M + shift).reshape(p.shape[:-1] + (3, 3))
        return np.einsum("...k,...ki->...i", powers(t), grads)

    return Hamiltonian(surface, func, grad, autonomous=autonomous, normalized=True, label="random_sphere")


def bump(q):
    """exp(-1/(1-q)) for q = |s|² < 1, else 0; and its q-derivative."""
    inside = q < 1.0
    qi = np.where(inside, q, 0.0)
    b = np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - qi, 1.0)), 0.0)
    db = np.where(inside, -b / np.where(inside, (1.0 - qi) ** 2, 1.0), 0.0)
    return b, db


def random_disc(rng, surface=None, n_bumps=3, outer=0.85, autonomous=False, scale=1.0) -> Hamiltonian:
    """Sum of smooth bumps c_i(t) β((x - x_i)/w_i), compactly supported in D(outer)."""
    surface = surface or geo.disc()
    R = outer * surface.radius
    w = rng.uniform(0.2, 0.45, n_bumps) * R
    rc = rng.uniform(0, 1, n_bumps) * (R - w)
    ang = rng.uniform(0, 2 * np.pi, n_bumps)
    centers = np.stack([rc * np.cos(ang), rc * np.sin(ang)], -1)
    coef = rng.normal(size=(3, n_bumps)) * scale
    if autonomous:
        coef[1:] = 0

    def spatial(p):
        # bumps depend on x only; evaluate once per distinct point of a broadcast view
        base = _unbroadcast(p)
        s = (base[..., None, :] - centers) / w[:, None]
        b, db = bump(np.sum(s * s, -1))
        return s, b, db

    def func(t, p):
        _, b, _ = spatial(p)
        c = _time_poly(coef, t)
        return np.sum(c * b, -1)

    def grad(t, p):
        s, _, db = spatial(p)
        c = _time_poly(coef, t)
        return np.sum((c * db)[..., None] * 2 * s / w[:, None], -2)

    return Hamiltonian(surface, func, grad, autonomous=autonomous, support=R, label="random_disc")


BUILTINS = ("zero", "sphere_height", "scaled", "twist", "expr", "linear")


def from_config(cfg, surface=None) -> Hamiltonian:
    """Build from {"ham": name, ...}; "twist" is resolved by the calabi module."""
    if isinstance(cfg, str):
        cfg = {"ham": cfg} if cfg in BUILTINS else {"ham": "expr", "expr": cfg}
    if not isinstance(cfg, dict) or "ham" not in cfg:
        raise ConfigurationError("hamiltonian config needs a 'ham' key")
    name = cfg["ham"]
    allowed = {"zero": {"ham"}, "sphere_height": {"ham", "c"}, "scaled": {"ham", "c", "inner"},
               "twist": {"ham", "profile"}, "expr": {"ham", "expr", "support"}, "linear": {"ham", "vector"}}
    if name not in allowed:
        raise ConfigurationError(f"unknown hamiltonian {name!r}")
    extra = set(cfg) - allowed[name]
    if extra:
        raise ConfigurationError(f"unknown keys for {name}: {sorted(extra)}")
    if name == "sphere_height":
        return sphere_height(float(cfg.get("c", 1.0)), surface if surface and surface.is_closed else None)
    surface = surface or geo.sphere()
    if name == "zero":
        return zero(surface)
    if name == "linear":
        return linear(surface, cfg["vector"])
    if name == "scaled":
        if "inner" not in cfg:
            raise ConfigurationError("scaled needs 'inner'")
        return scaled(float(cfg.get("c", 1.0)), from_config(cfg["inner"], surface))
    if name == "expr":
        return from_expression(cfg["expr"], surface, cfg.get("support"))
    from .calabi import twist_generating_ham, profile_from_config
    if surface.kind != geo.DISC:
        raise ConfigurationError("twist Hamiltonians live on the disc")
    return twist_generating_ham(profile_from_config(cfg.get("profile", {})), surface)
