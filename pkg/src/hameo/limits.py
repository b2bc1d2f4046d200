"""Numerical probes of limit, uniqueness, conservation and one-parameter statements.

Nothing here proves anything: each probe computes a finite prefix of a
sequence (or a handful of step sizes) and reports the raw tables together
with ratio-test flags.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry as geo
from .errors import ConfigurationError, ContractError
from .flow import FlowPath, StepControl, _steps, c0_distance_paths, integrate
from .hamiltonian import (Hamiltonian, HamiltonianSequence, hofer_norm_l1inf, linear, random_disc,
                          sup_norm)
from .runtime import pmap

RATIO = 0.1
PREFIX = 12
CONSISTENT = "consistent"
INAPPLICABLE = "inapplicable"
HYPOTHESIS_NOT_MET = "hypothesis_not_met"
VIOLATION = "violation_candidate"

# coarse settings for sequence studies: the probes compare decay, not digits
PROBE_STEPS = StepControl(step=1 / 128, eval_step=1 / 64, frames=8)
PROBE_GRID = (12, 12)


# ----------------------------------------------------------------------------
# conservation and one-parameter subgroups

def conservation_residual(H: Hamiltonian, path: FlowPath) -> float:
    """max |H(φ^s(x)) - H(x)| over the path's points and frame times."""
    if not H.autonomous:
        raise ContractError("conservation needs a time-independent Hamiltonian")
    if path.hamiltonian is not H:
        raise ContractError("path is not generated by H")
    base = H(0.0, path.points)
    return float(np.max(np.abs(H(0.0, path.images) - base[None])))


def conservation_study(H: Hamiltonian, steps=(1e-2, 5e-3, 2.5e-3), frames=4, points=None):
    """Rows (step, residual, observed_order); order from consecutive residual ratios."""
    rows = []
    prev = None
    for h in steps:
        path = FlowPath(H, (0.0, 1.0), StepControl(step=h, frames=frames), points)
        res = conservation_residual(H, path)
        order = None
        if prev is not None and prev[1] > 0 and res > 0:
            order = math.log(prev[1] / res) / math.log(prev[0] / h)
        rows.append({"step": h, "residual": res, "observed_order": order})
        prev = (h, res)
    return rows


def one_param_residual(H: Hamiltonian, samples, cfg: StepControl = StepControl(), points=None) -> float:
    """max over (t, s) of sup_x dist(φ^{t+s}(x), φ^t(φ^s(x))), every flow started at time 0."""
    pts = geo.grid(H.surface).points if points is None else np.asarray(points, dtype=float)
    worst = 0.0
    for t, s in samples:
        t, s = float(t), float(s)
        if min(t, s) < 0 or t + s > 1 + 1e-12:
            raise ContractError("t, s and t + s must lie in [0, 1]")

        def run(T, x):
            return x if T == 0 else integrate(H, 0.0, T, x, _steps(T, cfg.step))
        lhs = run(t + s, pts)
        rhs = run(t, run(s, pts))
        worst = max(worst, float(np.max(geo.distance(H.surface, lhs, rhs))))
    return worst


def one_param_study(H: Hamiltonian, samples, steps=(1 / 16, 1 / 32, 1 / 64), points=None):
    rows, prev = [], None
    for h in steps:
        res = one_param_residual(H, samples, StepControl(step=h), points)
        order = None
        if prev is not None and prev[1] > 0 and res > 0:
            order = math.log(prev[1] / res) / math.log(prev[0] / h)
        rows.append({"step": h, "residual": res, "observed_order": order})
        prev = (h, res)
    return rows


# ----------------------------------------------------------------------------
# sequence reports

@dataclass
class ConvergenceReport:
    label: str
    rows: list = field(default_factory=list)          # pairwise {i, j, ham_gap, flow_gap}
    columns: dict = field(default_factory=dict)       # per-index metrics
    moduli: dict = field(default_factory=dict)        # Cauchy moduli per gap kind
    lipschitz: Optional[float] = None
    flags: list = field(default_factory=list)

    def to_dict(self):
        def clean(v):
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (float, np.floating)):
                return float(v) if np.isfinite(v) else None
            if isinstance(v, np.integer):
                return int(v)
            return v
        return clean({"label": self.label, "rows": self.rows, "columns": self.columns,
                      "moduli": self.moduli, "lipschitz": self.lipschitz, "flags": self.flags})

    def gap_matrix(self, key):
        n = max([r["j"] for r in self.rows], default=0)
        m = np.zeros((n, n))
        for r in self.rows:
            m[r["i"] - 1, r["j"] - 1] = m[r["j"] - 1, r["i"] - 1] = r[key]
        return m


def _paths(hs, cfg, points):
    def build(H):
        path = FlowPath(H, (0.0, 1.0), cfg, points)
        path.images, path.inverse_images  # noqa: B018
        return path
    return pmap(build, hs)


def _difference(a: Hamiltonian, b: Hamiltonian):
    return a.derived(lambda t, p: a(t, p) - b(t, p), None, autonomous=a.autonomous and b.autonomous,
                     label=f"{a.label}-{b.label}")


def _distance_to_identity(path: FlowPath):
    fwd = np.max(geo.distance(path.surface, path.images, path.points[None]))
    inv = np.max(geo.distance(path.surface, path.inverse_images, path.points[None]))
    return float(max(fwd, inv))


def cauchy_moduli(gaps: np.ndarray):
    """m[n] = max_{i, j ≥ n} gap(i, j) for n = 1..N-1 (nonincreasing by construction)."""
    n = gaps.shape[0]
    return [float(np.max(gaps[k:, k:])) for k in range(n - 1)]


def _decays(col, ratio):
    head = col[0]
    return head > 0 and col[-1] / head < ratio


def _prepare(seq: HamiltonianSequence, prefix):
    hs = seq.prefix(prefix)
    return hs, hs[0].surface


def hamiltonian_limit_table(seq: HamiltonianSequence, prefix=PREFIX, ratio=RATIO,
                            cfg=PROBE_STEPS, paths=None) -> ConvergenceReport:
    """Pairwise sup-norm gaps of generators and d̄ gaps of flows, with Cauchy moduli."""
    hs, surf = _prepare(seq, prefix)
    paths = paths or _paths(hs, cfg, geo.grid(surf).points)
    n = len(hs)
    ham = np.zeros((n, n))
    flw = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def gap(ij):
        i, j = ij
        return sup_norm(_difference(hs[i], hs[j])), c0_distance_paths(paths[i], paths[j])
    rows = []
    for (i, j), (hg, fg) in zip(pairs, pmap(gap, pairs)):
        ham[i, j] = ham[j, i] = hg
        flw[i, j] = flw[j, i] = fg
        rows.append({"i": i + 1, "j": j + 1, "ham_gap": hg, "flow_gap": fg})
    rep = ConvergenceReport(seq.description, rows)
    rep.moduli = {"ham_gap": cauchy_moduli(ham), "flow_gap": cauchy_moduli(flw)}
    rep.columns = {"leng": [hofer_norm_l1inf(H, n_t=33) for H in hs]}
    ratios = [r["flow_gap"] / r["ham_gap"] for r in rows if r["ham_gap"] > 1e-12]
    rep.lipschitz = max(ratios) if ratios else 0.0
    mh, mf = rep.moduli["ham_gap"], rep.moduli["flow_gap"]
    if max(mh + [0.0]) <= 1e-12 and max(mf + [0.0]) <= 1e-12:
        rep.flags.append("constant")
    elif _decays(mh, ratio) and _decays(mf, ratio):
        rep.flags.append("cauchy")
    else:
        rep.flags.append("not_cauchy")
    return rep


def uniqueness_probe(seq: HamiltonianSequence, prefix=PREFIX, ratio=RATIO, eps=None,
                     cfg=PROBE_STEPS, paths=None) -> ConvergenceReport:
    """Pairs d̄(φ_{H_i}, id) with ‖H_i‖_∞ and flags the pattern.

    consistent          flows collapse and generators decay
    inapplicable        flows do not collapse to the identity
    hypothesis_not_met  flows collapse but the generators are not Cauchy
    violation_candidate flows collapse, generators Cauchy, yet ‖H_i‖_∞ stays ≥ ε
    """
    hs, surf = _prepare(seq, prefix)
    paths = paths or _paths(hs, cfg, geo.grid(surf).points)
    c0 = [_distance_to_identity(p) for p in paths]
    linf = [sup_norm(H) for H in hs]
    l1inf = [hofer_norm_l1inf(H, n_t=33) for H in hs]
    n = len(hs)
    ham = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            ham[i, j] = ham[j, i] = sup_norm(_difference(hs[i], hs[j]))
    rows = [{"i": i + 1, "j": j + 1, "ham_gap": ham[i, j]} for i in range(n) for j in range(i + 1, n)]
    rep = ConvergenceReport(seq.description, rows, {"c0": c0, "linf": linf, "l1inf": l1inf})
    rep.moduli = {"ham_gap": cauchy_moduli(ham)}
    eps = ratio * linf[0] if eps is None else eps
    collapse = _decays(c0, ratio)
    if not collapse:
        flag = INAPPLICABLE
    elif _decays(linf, ratio):
        flag = CONSISTENT
    elif not _decays(rep.moduli["ham_gap"], ratio):
        flag = HYPOTHESIS_NOT_MET
    elif linf[-1] >= eps:
        flag = VIOLATION
    else:
        flag = CONSISTENT
    rep.flags.append(flag)
    return rep


# ----------------------------------------------------------------------------
# bundled families

def _z(c, surface):
    return linear(surface, (0.0, 0.0, c), label=f"{c:.6g}*z")


def _oscillatory(i, surface):
    w = 2 * np.pi * i

    def func(t, p):
        return w * np.cos(w * t) * p[..., 2] / i

    def grad(t, p):
        g = np.zeros(np.shape(p))
        g[..., 2] = w * np.cos(w * t) / i
        return g
    return Hamiltonian(surface, func, grad, normalized=True, label=f"osc{i}")


def family(name, grid=PROBE_GRID) -> HamiltonianSequence:
    """Bundled sequences, built on a coarse grid (the probes compare decay rates)."""
    sph = geo.sphere(grid)
    if name == "decay":
        return HamiltonianSequence(lambda i: _z(1.0 / i, sph), "H_i = z / i")
    if name == "constant":
        return HamiltonianSequence(lambda i: _z(1.0, sph), "H_i = z")
    if name == "oscillatory":
        # rotation angle sin(2πit)/i -> 0 while every sup norm is 2π
        return HamiltonianSequence(lambda i: _oscillatory(i, sph), "H_i = 2π cos(2π i t) z")
    if name == "geometric":
        return HamiltonianSequence(lambda i: _z(1.0 + 2.0 ** -i, sph), "H_i = z (1 + 2^-i)")
    if name == "alexander":
        from .calabi import alexander_rescale
        base = random_disc(np.random.default_rng(3), geo.disc(grid=grid), autonomous=True)
        return HamiltonianSequence(lambda i: alexander_rescale(base, 0.5 + 0.25 * 2.0 ** -i),
                                   "alexander rescale, a_i = 0.5 + 0.25 * 2^-i")
    raise ConfigurationError(f"unknown family {name!r}")


FAMILIES = ("decay", "constant", "oscillatory", "geometric", "alexander")


def run_suite(name, prefix=PREFIX, ratio=RATIO):
    """Both reports for one bundled family."""
    seq = family(name)
    hs, surf = _prepare(seq, prefix)
    paths = _paths(hs, PROBE_STEPS, geo.grid(surf).points)
    return {"uniqueness": uniqueness_probe(seq, prefix, ratio, paths=paths),
            "limit": hamiltonian_limit_table(seq, prefix, ratio, paths=paths)}
