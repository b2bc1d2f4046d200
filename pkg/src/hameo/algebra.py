"""Algebra of Hamiltonians and Hamiltonian paths.

Product convention: ``product_ham(H, F, flowH)`` returns
H(t,x) + F(t, (φ_H^t)^{-1}(x)), which generates the pointwise composition
φ_H^t ∘ φ_F^t. The literally transcribed H(t,x) + F(t, φ_H^t(x)) is kept
behind ``convention="verbatim"``; it generates neither composition order
(see tests/test_algebra.py::test_composition_order_experiment).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate as sci_integrate
from scipy import optimize

from . import geometry as geo
from .errors import ConfigurationError, ContractError, DomainError
from .flow import FlowPath, jacobian_defect, invert_path
from .hamiltonian import Hamiltonian, normalize, zero

COMPOSITION = "composition"
VERBATIM = "verbatim"


def _union_support(a, b):
    if a is None or b is None:
        return None
    return max(a, b)


def product_ham(H: Hamiltonian, F: Hamiltonian, flowH: FlowPath, convention=COMPOSITION) -> Hamiltonian:
    if flowH.hamiltonian is not H:
        raise ContractError("flowH is not generated by H")
    if flowH.span != (0.0, 1.0) and flowH.span[0] != 0.0:
        raise ContractError("product needs a flow starting at t = 0")
    if H.surface.kind != F.surface.kind:
        raise ContractError("factors live on different surfaces")
    if convention not in (COMPOSITION, VERBATIM):
        raise ConfigurationError(f"unknown product convention {convention!r}")
    if F.autonomous and F.depth == 0 and _is_zero(F):
        return H
    step = flowH.cfg.eval_step
    move = flowH.evaluate_inverse if convention == COMPOSITION else flowH.evaluate

    def func(t, p):
        return H(t, p) + F(t, move(t, p, step=step))

    out = Hamiltonian(H.surface, func, None, normalization=H.normalization,
                      support=_union_support(H.support, F.support), autonomous=False,
                      smooth=H.smooth and F.smooth, normalized=H.normalized and F.normalized,
                      depth=max(H.depth, F.depth, flowH.hamiltonian.depth if flowH.hamiltonian else 0) + 1,
                      label=f"({H.label})#({F.label})")
    if H.surface.is_closed and not out.normalized:
        out = normalize(out)
    return out


def _is_zero(F):
    return F.label == "zero"


def inverse_ham(H: Hamiltonian, flowH: FlowPath) -> Hamiltonian:
    """H̄(t, x) = -H(t, φ_H^t(x)); generates t ↦ (φ_H^t)^{-1}."""
    if _is_zero(H):
        return H
    step = flowH.cfg.eval_step

    def func(t, p):
        return -H(t, flowH.evaluate(t, p, step=step))

    return Hamiltonian(H.surface, func, None, normalization=H.normalization, support=H.support,
                       autonomous=False, smooth=H.smooth, normalized=H.normalized, depth=H.depth + 1,
                       label=f"inv({H.label})")


def time_rescale_ham(H: Hamiltonian, s) -> Hamiltonian:
    """H^s(t, x) = s H(st, x); its time-1 map is φ_H^s."""
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise DomainError("rescaling factor must lie in [0, 1]")
    if s == 1.0:
        return H
    if s == 0.0:
        return zero(H.surface)
    return H.derived(lambda t, p: s * H(s * np.asarray(t), p),
                     lambda t, p: s * H.gradient(s * np.asarray(t), p), label=f"{H.label}^{s:g}")


def _smoothstep(x):
    """C^∞ step: 0 for x ≤ 0, 1 for x ≥ 1, and its derivative."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def f(s):
        pos = s > 0
        return np.where(pos, np.exp(-1.0 / np.where(pos, s, 1.0)), 0.0)

    def df(s):
        pos = s > 0
        sp = np.where(pos, s, 1.0)
        return np.where(pos, np.exp(-1.0 / sp) / sp ** 2, 0.0)

    a, b = f(x), f(1 - x)
    S = a / (a + b)
    dS = (df(x) * b + a * df(1 - x)) / (a + b) ** 2
    return S, dS


@dataclass(frozen=True)
class Reparameterization:
    """Monotone ζ: [0,1] → [0,1], flat near both ends."""
    zeta: Callable
    dzeta: Callable
    flat_width: float = 0.0
    admissible: bool = True
    identity: bool = False

    def __call__(self, t):
        return self.zeta(np.asarray(t, dtype=float))

    def derivative(self, t):
        return self.dzeta(np.asarray(t, dtype=float))

    @classmethod
    def smooth(cls, flat_width):
        eps = float(flat_width)
        if not 0.0 < eps < 1.0:
            raise DomainError("flat width must lie in (0, 1)")

        def z(t):
            return _smoothstep((t - eps / 2) / (1 - eps))[0]

        def dz(t):
            return _smoothstep((t - eps / 2) / (1 - eps))[1] / (1 - eps)
        return cls(z, dz, eps)

    @classmethod
    def identity_map(cls):
        return cls(lambda t: np.asarray(t, dtype=float), lambda t: np.ones_like(np.asarray(t, dtype=float)),
                   0.0, True, True)

    @classmethod
    def from_functions(cls, zeta, dzeta):
        """Arbitrary monotone ζ (no flatness check); used for test stubs like ζ(t) = t²."""
        return cls(zeta, dzeta, 0.0, admissible=False)

    def check(self, n=2001):
        t = np.linspace(0, 1, n)
        ok = np.all(self.derivative(t) >= -1e-12)
        if self.admissible and not self.identity:
            e = self.flat_width
            lo, hi = t[t <= e / 2], t[t >= 1 - e / 2]
            ok &= np.allclose(self(lo), 0.0, atol=1e-14) and np.allclose(self(hi), 1.0, atol=1e-14)
        return bool(ok)


def reparameterize_ham(H: Hamiltonian, zeta: Reparameterization) -> Hamiltonian:
    """H^ζ(t, x) = ζ'(t) H(ζ(t), x), generating t ↦ φ_H^{ζ(t)}."""
    if zeta.identity:
        return H
    return H.derived(lambda t, p: zeta.derivative(t) * H(zeta(t), p),
                     lambda t, p: zeta.derivative(t)[..., None] * H.gradient(zeta(t), p),
                     autonomous=False, label=f"{H.label}^zeta")


def zeta_norm(zeta: Reparameterization) -> float:
    """sup|ζ - id| + ∫|ζ' - 1| dt."""
    if zeta.identity:
        return 0.0
    t = np.linspace(0, 1, 4001)
    dev = np.abs(zeta(t) - t)
    i = int(np.argmax(dev))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, len(t) - 1)]
    res = optimize.minimize_scalar(lambda s: -abs(float(zeta(s)) - s), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    sup = max(dev[i], -res.fun)
    # kinks of |ζ'-1| sit where ζ' = 1; split the quadrature there
    g = zeta.derivative(t) - 1.0
    roots = t[:-1][np.sign(g[:-1]) * np.sign(g[1:]) < 0]
    l1, _ = sci_integrate.quad(lambda s: abs(float(zeta.derivative(s)) - 1.0), 0, 1, points=list(roots) or None,
                               limit=400, epsabs=1e-13, epsrel=1e-12)
    return float(sup + l1)


def check_area_preserving(surface, psi, points=None, tol=1e-6):
    pts = geo.grid(surface).points if points is None else points
    defect = jacobian_defect(surface, psi, pts)
    if defect > tol:
        raise ContractError(f"map is not area preserving (Jacobian defect {defect:.2e})")
    return defect


def conjugate_ham(H: Hamiltonian, psi, check=True) -> Hamiltonian:
    """H∘ψ, the generator of ψ^{-1} φ_H^t ψ. ψ must be an evaluable area-preserving map."""
    fn = getattr(psi, "forward", None) or psi
    if not callable(fn):
        raise ContractError("conjugation needs an evaluable map")
    if getattr(psi, "is_identity", False):
        return H
    if check:
        sample = geo.grid(H.surface.with_grid(12, 12)).points
        check_area_preserving(H.surface, fn, sample)
    keeps_radius = getattr(psi, "preserves_radius", False)
    return H.derived(lambda t, p: H(t, fn(np.asarray(p))), None,
                     support=H.support if keeps_radius else None, label=f"{H.label}∘psi")


def tan_map(path: FlowPath, t, x):
    """Tan(λ)(t, x) = H(t, φ_H^t(x)). Uses stored frames when x is the path's point set."""
    path._require_generator()
    H = path.hamiltonian
    x = geo.as_points(path.surface, x)
    k = np.flatnonzero(np.isclose(path.times, t, rtol=0, atol=1e-13))
    if k.size and x.shape == path.points.shape and np.array_equal(x, path.points):
        return H(t, path.images[k[0]])
    return H(t, path.evaluate(t, x))


def dev(path: FlowPath) -> Hamiltonian:
    path._require_generator()
    return path.hamiltonian


def path_product(lam: FlowPath, mu: FlowPath) -> FlowPath:
    """λμ: t ↦ λ(t)∘μ(t), generated by product_ham(H, F, λ)."""
    if lam.span != mu.span:
        raise ContractError("paths have different spans")
    G = product_ham(dev(lam), dev(mu), lam)
    return FlowPath(G, lam.span, lam.cfg, lam.points)


def dev_of_product_check(lam1: FlowPath, lam2: FlowPath, times=None) -> float:
    """sup |Dev(λ₁λ₂) - (Dev λ₁ + Dev λ₂ ∘ λ₁^{-1})| over points × times.

    The right-hand side moves points with the flow of H̄₁ (an independent
    integration), the left-hand side with the backward flow of H₁.
    """
    H1, H2 = dev(lam1), dev(lam2)
    G = product_ham(H1, H2, lam1)
    inv1 = invert_path(lam1)
    ts = lam1.times if times is None else np.asarray(times, dtype=float)
    pts = lam1.points
    tt = np.broadcast_to(ts[:, None], (len(ts), len(pts)))
    P = np.broadcast_to(pts[None], tt.shape + pts.shape[-1:])
    lhs = G(tt, P)
    if G is H1:
        rhs = H1(tt, P)
    else:
        moved = _inverse_path_evaluate(inv1, tt, P, lam1.cfg.eval_step)
        rhs = H1(tt, P) + H2(tt, moved)
    if H1.surface.is_closed and not (H1.normalized and H2.normalized):
        # the product was re-normalized; compare modulo per-time constants
        diff = lhs - rhs
        return float(np.max(np.abs(diff - diff.mean(axis=1, keepdims=True))))
    return float(np.max(np.abs(lhs - rhs)))


def _inverse_path_evaluate(inv_path, t, x, step):
    """Forward flow of H̄ (not the shortcut through the original path)."""
    a = inv_path.span[0]
    from .flow import integrate, _steps
    n = _steps(np.max(np.abs(np.asarray(t) - a)), step)
    return integrate(inv_path.hamiltonian, a, t, x, n)
