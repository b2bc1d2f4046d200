"""Surfaces, charts, grids and distances.

Points are handled internally as Cartesian arrays: shape (..., 2) on the
disc and (..., 3) on the unit sphere. ``SurfacePoint`` is the chart-level
view used at the API boundary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DomainError

DISC = "disc"
SPHERE = "sphere"

POLAR = "polar"
CYLINDER = "cylinder"
EUCLIDEAN = "euclidean"

EPS_POLE = 1e-6
MIN_RESOLUTION = (8, 8)
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Surface:
    kind: str
    radius: float = 1.0
    grid_resolution: tuple = (32, 32)

    def __post_init__(self):
        if self.kind not in (DISC, SPHERE):
            raise ConfigurationError(f"unknown surface kind {self.kind!r}")
        if not self.radius > 0:
            raise ConfigurationError("radius must be positive")
        if self.kind == SPHERE and self.radius != 1.0:
            raise ConfigurationError("only the unit sphere is supported")
        res = tuple(int(n) for n in self.grid_resolution)
        if len(res) != 2:
            raise ConfigurationError("grid_resolution must be a pair")
        object.__setattr__(self, "grid_resolution", res)

    @property
    def dim(self) -> int:
        return 2 if self.kind == DISC else 3

    @property
    def is_closed(self) -> bool:
        return self.kind == SPHERE

    def with_grid(self, n1, n2) -> "Surface":
        return Surface(self.kind, self.radius, (n1, n2))


def disc(radius=1.0, grid=(32, 32)) -> Surface:
    return Surface(DISC, radius, grid)


def sphere(grid=(32, 32)) -> Surface:
    return Surface(SPHERE, 1.0, grid)


def total_area(surface: Surface) -> float:
    if surface.kind == DISC:
        return float(np.pi * surface.radius ** 2)
    return 4.0 * np.pi


def reduce_angle(a):
    """a mod 2π in [0, 2π); tiny negative inputs would otherwise round to 2π."""
    a = np.mod(a, TWO_PI)
    return np.where(a >= TWO_PI, 0.0, a)


@dataclass(frozen=True)
class SurfacePoint:
    chart: str
    coords: tuple

    def __post_init__(self):
        a, b = (float(c) for c in self.coords)
        if self.chart == POLAR:
            if a < 0:
                raise DomainError("negative radius")
            b = float(reduce_angle(b))
        elif self.chart == CYLINDER:
            if abs(a) > 1.0:
                raise DomainError("z outside [-1, 1]")
            b = float(reduce_angle(b))
        elif self.chart != EUCLIDEAN:
            raise ConfigurationError(f"unknown chart {self.chart!r}")
        object.__setattr__(self, "coords", (a, b))

    def cartesian(self) -> np.ndarray:
        a, b = self.coords
        if self.chart == POLAR:
            return np.array([a * np.cos(b), a * np.sin(b)])
        if self.chart == CYLINDER:
            s = np.sqrt(max(1.0 - a * a, 0.0))
            return np.array([s * np.cos(b), s * np.sin(b), a])
        return np.array([a, b])


def polar(r, theta) -> SurfacePoint:
    return SurfacePoint(POLAR, (r, theta))


def cylinder(z, phi) -> SurfacePoint:
    return SurfacePoint(CYLINDER, (z, phi))


def to_chart(surface: Surface, p) -> np.ndarray:
    """Cartesian (..., d) -> chart coordinates (..., 2): (r, θ) or (z, φ)."""
    p = np.asarray(p, dtype=float)
    ang = reduce_angle(np.arctan2(p[..., 1], p[..., 0]))
    if surface.kind == DISC:
        return np.stack([np.hypot(p[..., 0], p[..., 1]), ang], axis=-1)
    return np.stack([p[..., 2], ang], axis=-1)


def from_chart(surface: Surface, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    a, b = c[..., 0], c[..., 1]
    if surface.kind == DISC:
        return np.stack([a * np.cos(b), a * np.sin(b)], axis=-1)
    s = np.sqrt(np.clip(1.0 - a * a, 0.0, None))
    return np.stack([s * np.cos(b), s * np.sin(b), a], axis=-1)


def as_points(surface: Surface, x) -> np.ndarray:
    """Accept a SurfacePoint, a sequence of them, or a Cartesian array."""
    if isinstance(x, SurfacePoint):
        return _point_cartesian(surface, x)
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], SurfacePoint):
        return np.stack([_point_cartesian(surface, q) for q in x])
    return np.asarray(x, dtype=float)


def _point_cartesian(surface, q: SurfacePoint):
    if surface.kind == DISC and q.chart == CYLINDER:
        raise DomainError("cylinder chart on a disc")
    if surface.kind == SPHERE and q.chart == POLAR:
        raise DomainError("polar chart on a sphere")
    p = q.cartesian()
    if surface.kind == SPHERE and p.shape[-1] != 3:
        raise DomainError("sphere points need three coordinates")
    return p


def check_on_surface(surface: Surface, p, tol=1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != surface.dim:
        raise DomainError(f"expected points with {surface.dim} coordinates")
    n = np.linalg.norm(p, axis=-1)
    if surface.kind == DISC:
        bad = n > surface.radius * (1.0 + tol)
    else:
        bad = np.abs(n - 1.0) > tol
    if np.any(bad) or not np.all(np.isfinite(p)):
        raise DomainError("point off the surface")
    return p


def distance(surface: Surface, p, q) -> np.ndarray:
    """Unchecked vectorized distance (Euclidean on the disc, chordal on the sphere)."""
    return np.linalg.norm(np.asarray(p) - np.asarray(q), axis=-1)


def point_distance(surface: Surface, p, q):
    p = check_on_surface(surface, as_points(surface, p))
    q = check_on_surface(surface, as_points(surface, q))
    d = distance(surface, p, q)
    return float(d) if np.ndim(d) == 0 else d


def project(surface: Surface, p) -> np.ndarray:
    if surface.kind == SPHERE:
        return p / np.linalg.norm(p, axis=-1, keepdims=True)
    return p


def tangent_frame(surface: Surface, p):
    """Orthonormal tangent frame (e1, e2) at each point (e1 × e2 = outward normal)."""
    p = np.asarray(p, dtype=float)
    if surface.kind == DISC:
        e1 = np.zeros_like(p)
        e2 = np.zeros_like(p)
        e1[..., 0] = 1.0
        e2[..., 1] = 1.0
        return e1, e2
    # helper axis that is never parallel to p
    ref = np.zeros_like(p)
    use_x = np.abs(p[..., 2]) > 0.9
    ref[..., 0] = use_x
    ref[..., 2] = ~use_x
    e1 = np.cross(ref, p)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(p, e1)
    return e1, e2


@dataclass(frozen=True)
class Grid:
    surface: Surface
    points: np.ndarray    # Cartesian, (N, d)
    coords: np.ndarray    # chart coordinates, (N, 2)
    weights: np.ndarray   # area weights, (N,)
    shape: tuple
    spacing: float        # characteristic spacing in length units

    def __len__(self):
        return len(self.weights)

    def surface_points(self):
        chart = POLAR if self.surface.kind == DISC else CYLINDER
        return [(SurfacePoint(chart, tuple(c)), float(w)) for c, w in zip(self.coords, self.weights)]


@lru_cache(maxsize=64)
def grid(surface: Surface) -> Grid:
    n1, n2 = surface.grid_resolution
    if n1 < MIN_RESOLUTION[0] or n2 < MIN_RESOLUTION[1]:
        raise ConfigurationError(f"grid resolution {surface.grid_resolution} below minimum {MIN_RESOLUTION}")
    ang = (np.arange(n2) + 0.5) * TWO_PI / n2
    if surface.kind == DISC:
        # midpoint rule in u = r²/2, where the area density is constant
        umax = surface.radius ** 2 / 2
        u = (np.arange(n1) + 0.5) * umax / n1
        first = np.sqrt(2 * u)
        du = umax / n1
        spacing = max(surface.radius / n1, surface.radius * TWO_PI / n2)
    else:
        # midpoint rows in z never come closer than 1/n1 to a pole, so the
        # EPS_POLE caps are excluded automatically
        first = -1.0 + (np.arange(n1) + 0.5) * 2.0 / n1
        du = 2.0 / n1
        spacing = max(2.0 / n1, TWO_PI / n2)
    A, B = np.meshgrid(first, ang, indexing="ij")
    coords = np.stack([A.ravel(), B.ravel()], axis=-1)
    weights = np.full(n1 * n2, du * TWO_PI / n2)
    pts = from_chart(surface, coords)
    for arr in (pts, coords, weights):
        arr.setflags(write=False)
    return Grid(surface, pts, coords, weights, (n1, n2), spacing)


def sample_grid(surface: Surface):
    """List of (SurfacePoint, area weight) pairs."""
    return grid(surface).surface_points()


def integrate(surface: Surface, values) -> float:
    g = grid(surface)
    return float(np.asarray(values) @ g.weights)


def surface_from_config(cfg: dict) -> Surface:
    allowed = {"surface", "radius", "grid"}
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigurationError(f"unknown surface keys: {sorted(unknown)}")
    if "surface" not in cfg:
        raise ConfigurationError("surface config needs 'surface'")
    kind = cfg["surface"]
    radius = float(cfg.get("radius", 1.0))
    res = cfg.get("grid", (32, 32))
    if not (isinstance(res, (list, tuple)) and len(res) == 2 and all(isinstance(n, int) for n in res)):
        raise ConfigurationError("grid must be a pair of integers")
    if kind == SPHERE and "radius" in cfg and radius != 1.0:
        raise ConfigurationError("sphere radius is fixed to 1")
    return Surface(kind, radius, tuple(res))


def surface_from_json(text: str) -> Surface:
    return surface_from_config(json.loads(text))
