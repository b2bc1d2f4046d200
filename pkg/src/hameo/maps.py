"""Exact area-preserving maps with closed-form inverses."""
from __future__ import annotations

import numpy as np

from . import geometry as geo


def rotation_matrix(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


class SphereRotation:
    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        self.surface = geo.sphere()

    @classmethod
    def about(cls, axis, angle):
        return cls(rotation_matrix(axis, angle))

    @classmethod
    def random(cls, rng):
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q = q * np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] *= -1
        return cls(q)

    def __call__(self, p):
        return np.asarray(p) @ self.matrix.T

    def inverse(self, p):
        return np.asarray(p) @ self.matrix


class SphereTwist:
    """(z, φ) ↦ (z, φ + f(z)); preserves dz∧dφ exactly."""

    def __init__(self, f):
        self.f = f

    def _turn(self, p, sign):
        p = np.asarray(p, dtype=float)
        a = sign * self.f(p[..., 2])
        c, s = np.cos(a), np.sin(a)
        return np.stack([c * p[..., 0] - s * p[..., 1], s * p[..., 0] + c * p[..., 1], p[..., 2]], -1)

    def __call__(self, p):
        return self._turn(p, 1.0)

    def inverse(self, p):
        return self._turn(p, -1.0)


class Composite:
    """ψ = first applied, then second."""

    def __init__(self, *maps):
        self.maps = maps
        self.preserves_radius = all(getattr(m, "preserves_radius", False) for m in maps)

    def __call__(self, p):
        for m in self.maps:
            p = m(p)
        return p

    def inverse(self, p):
        for m in reversed(self.maps):
            p = m.inverse(p)
        return p


class DiscRotation:
    preserves_radius = True

    def __init__(self, angle):
        self.angle = float(angle)

    def _rot(self, p, a):
        p = np.asarray(p, dtype=float)
        c, s = np.cos(a), np.sin(a)
        return np.stack([c * p[..., 0] - s * p[..., 1], s * p[..., 0] + c * p[..., 1]], -1)

    def __call__(self, p):
        return self._rot(p, self.angle)

    def inverse(self, p):
        return self._rot(p, -self.angle)


def random_sphere_map(rng):
    """Random rotation composed with a random z-twist."""
    c = rng.normal(size=3)

    def f(z):
        return c[0] * z + c[1] * z ** 2 + c[2] * np.sin(2 * z)
    return Composite(SphereTwist(f), SphereRotation.random(rng))
