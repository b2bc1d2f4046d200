"""Hamiltonian vector fields, RK4 flows, discrete maps and C⁰ distances.

Convention: dH = X⌟ω. On the disc ω = dx∧dy (= r dr∧dθ) so
X = (∂H/∂y, -∂H/∂x). On the sphere ω = dz∧dφ, which in the ℝ³ embedding
gives X = p × ∇H; for H = z the sphere rotates with dφ/dt = -1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from . import geometry as geo
from .errors import ContractError, ConvergenceError, DomainError, IntegrationError
from .hamiltonian import Hamiltonian, broadcast


@dataclass(frozen=True)
class StepControl:
    step: float = 1e-3          # base generators, frame integration
    eval_step: float = 1 / 32   # off-grid evaluation and derived generators
    frames: int = 64
    order: int = 4

    def __post_init__(self):
        if self.order != 4:
            raise ValueError("only the order-4 Runge-Kutta integrator is implemented")
        if not (self.step > 0 and self.eval_step > 0 and self.frames >= 1):
            raise ValueError("step sizes and frame count must be positive")


DEFAULT_STEPS = StepControl()


@dataclass(frozen=True)
class TangentVector:
    chart: str
    components: tuple


def _cross(a, b):
    return np.stack([a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
                     a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
                     a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]], axis=-1)


def vector_field(H: Hamiltonian, t, p):
    """Ambient components of X_H at Cartesian points."""
    t, p = broadcast(t, p)
    g = H.gradient(t, p)
    if H.surface.kind == geo.SPHERE:
        return _cross(p, g)
    return np.stack([g[..., 1], -g[..., 0]], axis=-1)


def vector_field_at(H: Hamiltonian, t, x) -> TangentVector:
    """X_H at one SurfacePoint in the chart where ω has constant density."""
    p = geo.check_on_surface(H.surface, geo.as_points(H.surface, x))
    v = vector_field(H, t, p[None])[0]
    if H.surface.kind == geo.SPHERE:
        if abs(p[2]) > 1 - geo.EPS_POLE:
            raise DomainError("point inside the excluded pole cap")
        rho2 = p[0] ** 2 + p[1] ** 2
        return TangentVector(geo.CYLINDER, (float(v[2]), float((p[0] * v[1] - p[1] * v[0]) / rho2)))
    r = math.hypot(p[0], p[1])
    if r < 1e-12:
        return TangentVector(geo.EUCLIDEAN, (float(v[0]), float(v[1])))
    return TangentVector(geo.POLAR, (float((p[0] * v[0] + p[1] * v[1]) / r),
                                     float((p[0] * v[1] - p[1] * v[0]) / r ** 2)))


def contraction_residual(H: Hamiltonian, t, points, step=1e-6):
    """max |dH - X⌟ω| in chart coordinates, with dH taken by finite differences.

    Sphere chart (z, φ), ω = dz∧dφ: ∂H/∂z = -X^φ, ∂H/∂φ = X^z.
    Disc chart (r, θ), ω = r dr∧dθ: ∂H/∂r = -r X^θ, ∂H/∂θ = r X^r.
    """
    surf = H.surface
    c = geo.to_chart(surf, points)
    res = 0.0
    dH = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        hp = H(t, geo.from_chart(surf, c + e))
        hm = H(t, geo.from_chart(surf, c - e))
        dH.append((hp - hm) / (2 * step))
    comps = np.array([vector_field_at(H, t, geo.SurfacePoint(
        geo.CYLINDER if surf.kind == geo.SPHERE else geo.POLAR, tuple(ci))).components for ci in c])
    if surf.kind == geo.SPHERE:
        res = np.maximum(np.abs(dH[0] + comps[:, 1]), np.abs(dH[1] - comps[:, 0]))
    else:
        r = c[:, 0]
        res = np.maximum(np.abs(dH[0] + r * comps[:, 1]), np.abs(dH[1] - r * comps[:, 0]))
    return float(np.max(res))


def _field_fn(H):
    sphere = H.surface.kind == geo.SPHERE
    grad = H.gradient

    def f(t, p):
        if sphere:
            p = p / np.sqrt(np.sum(p * p, -1, keepdims=True))
            return _cross(p, grad(t, p))
        g = grad(t, p)
        return np.stack([g[..., 1], -g[..., 0]], axis=-1)
    return f


def integrate(H: Hamiltonian, t0, t1, p, n):
    """n RK4 steps from t0 to t1 (scalars or arrays matching p.shape[:-1])."""
    surf = H.surface
    t0 = np.asarray(t0, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    t0, p = broadcast(t0, p)
    t1 = np.broadcast_to(t1, t0.shape)
    p = np.array(p, dtype=float)
    h = (t1 - t0) / n
    hb = h[..., None]
    f = _field_fn(H)
    sphere = surf.kind == geo.SPHERE
    for i in range(n):
        t = t0 + i * h
        k1 = f(t, p)
        k2 = f(t + h / 2, p + hb / 2 * k1)
        k3 = f(t + h / 2, p + hb / 2 * k2)
        k4 = f(t + h, p + hb * k3)
        dp = hb / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        p = p + dp
        if sphere:
            # points at rest keep their exact coordinates
            moved = np.any(dp != 0, -1, keepdims=True)
            p = np.where(moved, p / np.sqrt(np.sum(p * p, -1, keepdims=True)), p)
    if not np.all(np.isfinite(p)):
        raise ConvergenceError("non-finite trajectory; step too large for this field")
    if not sphere and np.any(np.sum(p * p, -1) > (surf.radius * (1 + 1e-9)) ** 2):
        raise IntegrationError("trajectory left the disc")
    return p


def _steps(span_len, step):
    return max(1, int(math.ceil(abs(span_len) / step - 1e-9)))


class FlowPath:
    """t ↦ φ_H^t on [a, b], stored as images of a point set at frame times.

    ``images`` and ``inverse_images`` are computed on first access. Off-grid
    evaluation integrates directly from the initial time.
    """

    def __init__(self, hamiltonian: Optional[Hamiltonian], span=(0.0, 1.0), cfg: StepControl = DEFAULT_STEPS,
                 points=None, inverse_of: Optional["FlowPath"] = None, surface=None):
        self.hamiltonian = hamiltonian
        self.surface = hamiltonian.surface if hamiltonian is not None else surface
        a, b = (float(s) for s in span)
        if not b > a:
            raise DomainError("flow span must be increasing")
        self.span = (a, b)
        self.cfg = cfg
        g = geo.grid(self.surface)
        self.points = g.points if points is None else np.asarray(points, dtype=float)
        self.times = np.linspace(a, b, cfg.frames + 1)
        self.inverse_of = inverse_of

    @property
    def main_step(self):
        H = self.hamiltonian
        return self.cfg.step if H is None or H.depth == 0 else max(self.cfg.step, self.cfg.eval_step)

    def _require_generator(self):
        if self.hamiltonian is None:
            raise ContractError("path has no generating Hamiltonian attached")

    @cached_property
    def images(self):
        self._require_generator()
        out = np.empty((len(self.times),) + self.points.shape)
        out[0] = self.points
        p = self.points
        for k in range(1, len(self.times)):
            t0, t1 = self.times[k - 1], self.times[k]
            p = integrate(self.hamiltonian, t0, t1, p, _steps(t1 - t0, self.main_step))
            out[k] = p
        out.setflags(write=False)
        return out

    @cached_property
    def inverse_images(self):
        """(φ^{t_k})^{-1} of the points for every frame, by integrating backward."""
        ts = np.broadcast_to(self.times[:, None], (len(self.times), len(self.points)))
        pts = np.broadcast_to(self.points[None], ts.shape + self.points.shape[-1:])
        if self.inverse_of is not None:
            out = self.inverse_of.evaluate(ts, pts, step=self.main_step)
        else:
            self._require_generator()
            out = integrate(self.hamiltonian, ts, self.span[0], pts, _steps(self.span[1] - self.span[0], self.main_step))
        out[0] = self.points
        out.setflags(write=False)
        return out

    def _check_t(self, t):
        a, b = self.span
        t = np.asarray(t, dtype=float)
        if np.any(t < a - 1e-12) or np.any(t > b + 1e-12):
            raise DomainError("time outside the flow span")
        return np.clip(t, a, b)

    def evaluate(self, t, x, step=None):
        """φ_H^t(x) for arbitrary points; t may be an array broadcast against x."""
        self._require_generator()
        t = self._check_t(t)
        x = geo.as_points(self.surface, x)
        a = self.span[0]
        n = _steps(np.max(np.abs(t - a)) if t.size else 0.0, step or self.main_step)
        return integrate(self.hamiltonian, a, t, x, n)

    def evaluate_inverse(self, t, x, step=None):
        """(φ_H^t)^{-1}(x): integrate backward from t to the start of the span."""
        t = self._check_t(t)
        x = geo.as_points(self.surface, x)
        if self.inverse_of is not None:
            return self.inverse_of.evaluate(t, x, step=step)
        self._require_generator()
        a = self.span[0]
        n = _steps(np.max(np.abs(t - a)) if t.size else 0.0, step or self.main_step)
        return integrate(self.hamiltonian, t, a, x, n)

    def area_defect(self, frame=-1, h=1e-5):
        """max |det Dφ - 1| over the points at one frame, by finite differences."""
        t = self.times[frame]
        return jacobian_defect(self.surface, lambda q: self.evaluate(t, q), self.points, h)


def identity_path(surface, cfg=DEFAULT_STEPS, span=(0.0, 1.0)):
    from .hamiltonian import zero
    return FlowPath(zero(surface), span, cfg)


def integrate_flow(H: Hamiltonian, span=(0.0, 1.0), cfg: StepControl = DEFAULT_STEPS, points=None) -> FlowPath:
    path = FlowPath(H, span, cfg, points)
    path.images  # noqa: B018  (build frames eagerly)
    return path


def jacobian_determinant(surface, fn: Callable, points, h=1e-5):
    """det of Dψ in orthonormal tangent frames at p and ψ(p), central differences."""
    p = np.asarray(points, dtype=float)
    e1, e2 = geo.tangent_frame(surface, p)
    stack = geo.project(surface, np.stack([p + h * e1, p - h * e1, p + h * e2, p - h * e2]))
    img = np.asarray(fn(stack.reshape(-1, p.shape[-1]))).reshape(stack.shape)
    c = fn(p)
    f1, f2 = geo.tangent_frame(surface, np.asarray(c))
    d1 = (img[0] - img[1]) / (2 * h)
    d2 = (img[2] - img[3]) / (2 * h)
    a11, a21 = np.sum(d1 * f1, -1), np.sum(d1 * f2, -1)
    a12, a22 = np.sum(d2 * f1, -1), np.sum(d2 * f2, -1)
    return a11 * a22 - a12 * a21


def jacobian_defect(surface, fn, points, h=1e-5):
    return float(np.max(np.abs(jacobian_determinant(surface, fn, points, h) - 1.0)))


class DiscreteMap:
    """A homeomorphism known through its images on a point set.

    ``forward``/``inverse`` callables, when present, evaluate off the point
    set; ``inverse_images`` is filled from ``inverse`` on demand.
    """

    def __init__(self, surface, points, images, inverse_images=None, forward=None, inverse=None):
        self.surface = surface
        self.points = np.asarray(points, dtype=float)
        self.images = np.asarray(images, dtype=float)
        self._inverse_images = None if inverse_images is None else np.asarray(inverse_images, dtype=float)
        self.forward = forward
        self.inverse = inverse

    @property
    def inverse_images(self):
        if self._inverse_images is None and self.inverse is not None:
            self._inverse_images = np.asarray(self.inverse(self.points), dtype=float)
        return self._inverse_images

    @property
    def has_inverse(self):
        return self._inverse_images is not None or self.inverse is not None

    def __call__(self, x):
        if self.forward is None:
            raise ContractError("map has no off-grid evaluator")
        return self.forward(geo.as_points(self.surface, x))

    @classmethod
    def from_callables(cls, surface, forward, inverse=None, points=None):
        pts = geo.grid(surface).points if points is None else np.asarray(points, dtype=float)
        return cls(surface, pts, forward(pts), None, forward, inverse)

    def surface_images(self):
        chart = geo.POLAR if self.surface.kind == geo.DISC else geo.CYLINDER
        return [geo.SurfacePoint(chart, tuple(c)) for c in geo.to_chart(self.surface, self.images)]


def time_t_map(path: FlowPath, t) -> DiscreteMap:
    a, b = path.span
    if not (a - 1e-12 <= t <= b + 1e-12):
        raise DomainError(f"t={t} outside span {path.span}")
    k = int(np.searchsorted(path.times, t, side="right") - 1)
    k = min(max(k, 0), len(path.times) - 1)
    if abs(path.times[k] - t) <= 1e-13 * max(1.0, abs(t)):
        images = path.images[k]
        inv = path.inverse_images[k] if "inverse_images" in path.__dict__ else None
    else:
        tk = path.times[k]
        images = integrate(path.hamiltonian, tk, t, path.images[k], _steps(t - tk, path.main_step))
        inv = None
    tt = float(t)
    return DiscreteMap(path.surface, path.points, images, inv,
                       forward=lambda x: path.evaluate(tt, x),
                       inverse=lambda x: path.evaluate_inverse(tt, x))


def _same_points(f, g):
    if f.surface != g.surface and f.surface.kind != g.surface.kind:
        raise ContractError("maps live on different surfaces")
    if f.points.shape != g.points.shape or not np.allclose(f.points, g.points, atol=1e-14, rtol=0):
        raise ContractError("maps are sampled on different point sets")


def c0_distance_maps(f: DiscreteMap, g: DiscreteMap, with_inverses=True) -> float:
    _same_points(f, g)
    d = float(np.max(geo.distance(f.surface, f.images, g.images)))
    if with_inverses:
        fi, gi = f.inverse_images, g.inverse_images
        if fi is None or gi is None:
            raise ContractError("inverse images are required for the d-bar distance")
        d = max(d, float(np.max(geo.distance(f.surface, fi, gi))))
    return d


def c0_distance_paths(lam: FlowPath, mu: FlowPath) -> float:
    if lam.span != mu.span or len(lam.times) != len(mu.times):
        raise ContractError("paths have different spans or frame grids")
    if lam.points.shape != mu.points.shape or not np.allclose(lam.points, mu.points, atol=1e-14, rtol=0):
        raise ContractError("paths are sampled on different point sets")
    fwd = np.max(geo.distance(lam.surface, lam.images, mu.images))
    inv = np.max(geo.distance(lam.surface, lam.inverse_images, mu.inverse_images))
    return float(max(fwd, inv))


def invert_path(path: FlowPath) -> FlowPath:
    """Flow of the inverse Hamiltonian H̄(t, x) = -H(t, φ_H^t(x))."""
    from .algebra import inverse_ham
    path._require_generator()
    return FlowPath(inverse_ham(path.hamiltonian, path), path.span, path.cfg, path.points, inverse_of=path)


def write_csv(path: FlowPath, out, frames=None):
    """CSV rows t, grid_index, chart, c1, c2 for the stored frames."""
    import csv
    chart = geo.POLAR if path.surface.kind == geo.DISC else geo.CYLINDER
    idx = range(len(path.times)) if frames is None else frames
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "grid_index", "chart", "c1", "c2"])
        for k in idx:
            c = geo.to_chart(path.surface, path.images[k])
            for i, (c1, c2) in enumerate(c):
                w.writerow([f"{path.times[k]:.12g}", i, chart, f"{c1:.15g}", f"{c2:.15g}"])
