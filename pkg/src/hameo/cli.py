"""Command-line front end: ``hameo <subcommand> [options]``.

Exit codes: 0 success, 1 a check failed or an output could not be written,
2 usage error or malformed configuration.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import calabi as cb
from . import geometry as geo
from . import hamiltonian as hm
from . import hofer as ho
from . import limits as lm
from . import suites
from .errors import ConfigurationError, DomainError, HameoError, RangeError
from .flow import FlowPath, StepControl, c0_distance_paths, write_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
CONJ_K_MAX = 6
COMMON = ("config", "out", "csv", "seed")


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    def __init__(self, msg, payload=None):
        super().__init__(msg)
        self.payload = payload


# ----------------------------------------------------------------------------
# parsing helpers

def _json_arg(text, what):
    """JSON object, or a bare string (builtin name / expression)."""
    if isinstance(text, (dict, list)) or text is None:
        return text
    s = str(text).strip()
    if s.startswith("{") or s.startswith("["):
        try:
            return json.loads(s)
        except json.JSONDecodeError as e:
            raise UsageError(f"malformed JSON in {what}: line {e.lineno} column {e.colno}: {e.msg}")
    return s


def _load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e.strerror}")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}")
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return cfg


def _positive(name, v, integer=False, lo=None, hi=None):
    if v is None:
        return v
    try:
        v = int(v) if integer else float(v)
    except (TypeError, ValueError):
        raise UsageError(f"{name} must be a number")
    if integer and lo is None and v < 1 or not integer and lo is None and not v > 0:
        raise UsageError(f"{name} must be positive")
    if lo is not None and v < lo or hi is not None and v > hi:
        raise UsageError(f"{name} must lie in [{lo}, {hi}]")
    return v


def _surface(spec, default):
    spec = _json_arg(spec, "--surface")
    if spec is None:
        return default
    if isinstance(spec, str):
        spec = {"surface": spec}
    return geo.surface_from_config(spec)


def _ham(spec, surface):
    spec = _json_arg(spec, "--ham")
    if isinstance(spec, dict) and spec.get("ham") == "random":
        extra = set(spec) - {"ham", "seed", "scale"}
        if extra:
            raise ConfigurationError(f"unknown keys for random: {sorted(extra)}")
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        scale = float(spec.get("scale", suites.FLOW_FIELD_SCALE))
        if surface.kind == geo.SPHERE:
            return hm.random_sphere(rng, surface, scale=scale)
        return hm.random_disc(rng, surface, scale=scale)
    return hm.from_config(spec, surface)


def config_hash(cfg) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    return v


def emit_report(results, out=None, csv_path=None, csv_rows=None, columns=None, cfg=None, seed=None, stream=None):
    """JSON report {"header", "results"} plus an optional CSV with a commented header.

    The header embeds the config hash and seed; there is no timestamp, so the
    same config and seed give byte-identical files.
    """
    cfg = cfg or {}
    header = {"tool": "hameo", "version": __version__, "config_hash": config_hash(cfg), "seed": seed}
    doc = {"header": header, "results": _clean(results if results is not None else [])}
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    try:
        if out:
            Path(out).write_text(text)
        elif stream is not None:
            stream.write(text)
        if csv_path and columns:
            buf = io.StringIO()
            buf.write(f"# hameo {__version__} config_hash={header['config_hash']} seed={seed}\n")
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(columns)
            for row in csv_rows or []:
                w.writerow(["" if row.get(c) is None else _fmt(row.get(c)) for c in columns])
            Path(csv_path).write_text(buf.getvalue())
    except OSError as e:
        raise CheckFailed(f"cannot write report: {e.strerror}: {e.filename}")
    return doc


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.15g}"
    return str(v)


# ----------------------------------------------------------------------------
# subcommands

def cmd_flow(a, cfg):
    if a.ham is None:
        raise UsageError("flow needs --ham")
    surf = _surface(a.surface, geo.sphere((16, 16)))
    H = _ham(a.ham, surf)
    steps = StepControl(step=_positive("step", a.step or 1e-3), frames=_positive("frames", a.frames or 16, True))
    t0 = float(a.t0) if a.t0 is not None else 0.0
    t1 = float(a.t1) if a.t1 is not None else 1.0
    if not t1 > t0:
        raise UsageError("t1 must exceed t0")
    path = FlowPath(H, (t0, t1), steps)
    res = {"hamiltonian": H.label, "surface": surf.kind, "span": [t0, t1], "frames": steps.frames,
           "points": len(path.points), "area_defect": path.area_defect(),
           "displacement": float(np.max(geo.distance(surf, path.images[-1], path.points)))}
    if H.autonomous:
        res["conservation_residual"] = lm.conservation_residual(H, path)
    if a.out and str(a.out).endswith(".csv"):
        # trajectories go to the CSV, the summary to stdout
        a.csv, a.out = a.out, None
    if a.csv:
        try:
            write_csv(path, a.csv)
        except OSError as e:
            raise CheckFailed(f"cannot write {a.csv}: {e.strerror}")
    return res, None, None


def cmd_algebra(a, cfg):
    surf = geo.sphere((8, 8))
    rng = np.random.default_rng(a.seed)
    H = _ham(a.ham, surf) if a.ham is not None else hm.random_sphere(rng, surf, scale=suites.FLOW_FIELD_SCALE)
    F = _ham(a.ham2, surf) if a.ham2 is not None else hm.random_sphere(rng, surf, scale=suites.FLOW_FIELD_SCALE)
    s = _positive("s", a.s if a.s is not None else 0.5, lo=0.0, hi=1.0)
    eps = _positive("flat_width", a.flat_width if a.flat_width is not None else 0.2, lo=1e-6, hi=1 - 1e-6)
    tol = _positive("tol", a.tol or 1e-5)
    cfg_steps = StepControl(frames=_positive("frames", a.frames or 4, True))
    from .algebra import Reparameterization
    errs = suites._flow_errors(H, F, s, Reparameterization.smooth(eps), geo.grid(surf).points, cfg_steps)
    res = {"errors": errs, "tol": tol, "passed": max(errs.values()) < tol}
    rows = [{"check": k, "error": v} for k, v in sorted(errs.items())]
    if not res["passed"]:
        raise CheckFailed("flow-level algebra check failed", (res, rows, ["check", "error"]))
    return res, rows, ["check", "error"]


def cmd_hofer(a, cfg):
    if a.ham is None:
        raise UsageError("hofer needs --ham")
    surf = _surface(a.surface, geo.sphere())
    H = _ham(a.ham, surf)
    n_t = _positive("n_t", a.n_t or 33, True)
    res = {"hamiltonian": H.label, "leng": hm.hofer_norm_l1inf(H, n_t=n_t), "linf": hm.hofer_norm_linf(H, n_t=n_t),
           "sup_norm": hm.sup_norm(H)}
    if a.ham2 is not None:
        F = _ham(a.ham2, surf)
        steps = StepControl(frames=4)
        lam, mu = FlowPath(H, (0, 1), steps), FlowPath(F, (0, 1), steps)
        res["c0_distance"] = c0_distance_paths(lam, mu)
        res["d_ham"] = ho.d_ham(lam, mu, n_t=n_t)
    return res, None, None


def cmd_displace(a, cfg):
    if a.target is None or a.family is None:
        raise UsageError("displace needs --target and --family")
    tgt = _json_arg(a.target, "--target")
    if not isinstance(tgt, dict):
        raise UsageError("--target must be a JSON object")
    target = ho.target_from_config(tgt)
    budget = _positive("budget", a.budget or 400, True)
    starts = _positive("starts", a.starts or 8, True)
    prob = ho.DisplacementProblem(target, a.family, budget=budget, starts=starts, seed=a.seed)
    r = ho.displacement_energy_upper(prob)
    res = r.to_dict()
    return res, None, None


def cmd_cal(a, cfg):
    if a.ham is not None:
        H = _ham(a.ham, _surface(a.surface, geo.disc()))
        return {"hamiltonian": H.label, "cal": cb.cal_path(H)}, None, None
    if a.profile is not None:
        prof = cb.profile_from_config(_json_arg(a.profile, "--profile"))
    else:
        k = _positive("k", a.k or 1, True, 1, cb.K_MAX)
        prof = cb.dyadic_profile(k)
    return {"profile": prof.label, "support": list(prof.support), "cal": cb.cal_twist(prof),
            "cal_normalized": cb.cal_twist(prof, normalized=True)}, None, None


def cmd_wild(a, cfg):
    K = _positive("K", a.K if a.K is not None else 5, True, 1, cb.K_MAX)
    _, cal = cb.wild_truncated(K, points=np.zeros((1, 2)))
    rows, total = [], 0.0
    for k, p in enumerate(cb.wild_profiles(K), 1):
        c = cb.cal_twist(p)
        total += c
        # the conjugation identity is checked where the twist shear stays resolvable
        conj = cb.conjugation_residual(k, extended=k >= 6) if 2 <= k <= CONJ_K_MAX else None
        rows.append({"k": k, "cal": c, "cumulative": total, "conjugation_residual": conj})
    res = {"K": K, "cal": cal, "pieces": rows, "strictly_increasing": all(
        b["cumulative"] > r["cumulative"] for r, b in zip(rows, rows[1:]))}
    cols = ["k", "cal", "cumulative", "conjugation_residual"]
    if abs(cal - K) > 1e-5:
        raise CheckFailed(f"truncated Calabi value {cal} differs from K = {K}", (res, rows, cols))
    return res, rows, cols


def cmd_limits(a, cfg):
    suite = a.suite or "decay"
    prefix = _positive("prefix", a.prefix or lm.PREFIX, True, 2, 50)
    if suite == "conservation":
        H = hm.Hamiltonian(geo.sphere((16, 16)), lambda t, p: p[..., 0] * p[..., 2],
                           lambda t, p: np.stack([p[..., 2], np.zeros(p.shape[:-1]), p[..., 0]], -1),
                           autonomous=True, label="x*z")
        rows = lm.conservation_study(H, steps=(0.05, 0.025, 0.0125))
        return {"label": "conservation of H = x z", "rows": rows, "flags": []}, rows, \
            ["step", "residual", "observed_order"]
    if suite not in lm.FAMILIES:
        raise UsageError(f"unknown limits suite {suite!r}; choose from conservation, {', '.join(lm.FAMILIES)}")
    rep = lm.run_suite(suite, prefix)
    lim, uni = rep["limit"].to_dict(), rep["uniqueness"].to_dict()
    res = {"label": lim["label"], "rows": lim["rows"], "flags": uni["flags"] + lim["flags"],
           "moduli": lim["moduli"], "lipschitz": lim["lipschitz"], "columns": uni["columns"]}
    if lm.VIOLATION in res["flags"]:
        raise CheckFailed("uniqueness probe flagged a violation candidate",
                          (res, lim["rows"], ["i", "j", "ham_gap", "flow_gap"]))
    return res, lim["rows"], ["i", "j", "ham_gap", "flow_gap"]


def cmd_verify(a, cfg):
    suite = a.suite or "all"
    if suite != "all" and suite not in suites.SUITES:
        raise UsageError(f"unknown verify suite {suite!r}")
    checks = suites.run(suite, a.seed, quick=not a.full)
    print(f"{'status':<6}{'check':<29}value")
    for c in checks:
        print(c.line())
    n_ok = sum(c.passed for c in checks)
    print(f"{n_ok}/{len(checks)} checks passed")
    rows = [{"name": c.name, "value": c.value, "tol": c.tol, "passed": c.passed} for c in checks]
    res = {"suite": suite, "checks": [c.to_dict() for c in checks], "passed": n_ok == len(checks)}
    if not res["passed"]:
        raise CheckFailed("some checks failed", (res, rows, ["name", "value", "tol", "passed"]))
    return res, rows, ["name", "value", "tol", "passed"]


COMMANDS = {
    "flow": (cmd_flow, ("ham", "surface", "t0", "t1", "step", "frames")),
    "algebra": (cmd_algebra, ("ham", "ham2", "s", "flat_width", "tol", "frames")),
    "hofer": (cmd_hofer, ("ham", "ham2", "surface", "n_t")),
    "displace": (cmd_displace, ("target", "family", "budget", "starts")),
    "cal": (cmd_cal, ("ham", "surface", "profile", "k")),
    "wild": (cmd_wild, ("K",)),
    "limits": (cmd_limits, ("suite", "prefix")),
    "verify": (cmd_verify, ("suite", "full")),
}


def build_parser():
    p = argparse.ArgumentParser(prog="hameo", description="Hamiltonian flows, Hofer geometry and Calabi experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file whose keys mirror the options")
        sp.add_argument("--out", help="JSON report path (stdout if omitted)")
        sp.add_argument("--csv", help="CSV output path")
        sp.add_argument("--seed", type=int, default=None, help="seed for randomized parts (default 7)")

    sp = sub.add_parser("flow", help="integrate a Hamiltonian flow")
    sp.add_argument("--ham", help="builtin name, expression, or JSON config")
    sp.add_argument("--surface", help='"sphere", "disc" or JSON {"surface", "grid"}')
    sp.add_argument("--t0", type=float)
    sp.add_argument("--t1", type=float)
    sp.add_argument("--step", type=float)
    sp.add_argument("--frames", type=int)
    common(sp)

    sp = sub.add_parser("algebra", help="flow-level checks of product, inverse, rescale and reparameterize")
    sp.add_argument("--ham")
    sp.add_argument("--ham2")
    sp.add_argument("--s", type=float, help="time-rescaling factor in [0, 1]")
    sp.add_argument("--flat-width", dest="flat_width", type=float)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--frames", type=int)
    common(sp)

    sp = sub.add_parser("hofer", help="Hofer length and norms, optional d_ham")
    sp.add_argument("--ham")
    sp.add_argument("--ham2")
    sp.add_argument("--surface")
    sp.add_argument("--n-t", dest="n_t", type=int)
    common(sp)

    sp = sub.add_parser("displace", help="displacement-energy bracket")
    sp.add_argument("--target", help='JSON, e.g. {"kind": "disc", "center": [0, 0], "radius": 0.1}')
    sp.add_argument("--family", choices=sorted(ho.FAMILIES))
    sp.add_argument("--budget", type=int)
    sp.add_argument("--starts", type=int)
    common(sp)

    sp = sub.add_parser("cal", help="Calabi invariant of a twist profile or a disc Hamiltonian")
    sp.add_argument("--ham")
    sp.add_argument("--surface")
    sp.add_argument("--profile")
    sp.add_argument("--k", type=int)
    common(sp)

    sp = sub.add_parser("wild", help="truncated dyadic twist products")
    sp.add_argument("--K", type=int)
    common(sp)
    sp.add_argument("--report", dest="out", help="alias of --out")

    sp = sub.add_parser("limits", help="sequence probes and conservation study")
    sp.add_argument("--suite")
    sp.add_argument("--prefix", type=int)
    common(sp)

    sp = sub.add_parser("verify", help="run invariant suites and print a summary table")
    sp.add_argument("--suite")
    sp.add_argument("--full", action="store_true", default=None, help="acceptance-size case counts")
    common(sp)
    return p


def _merge(args, keys):
    """Fill unset options from --config; unknown keys are rejected."""
    cfg = {}
    if args.config:
        cfg = _load_config(args.config)
        allowed = set(keys) | {"command", "seed", "out", "csv"}
        unknown = set(cfg) - allowed
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if cfg.get("command", args.command) != args.command:
            raise UsageError(f"config is for {cfg['command']!r}, not {args.command!r}")
        for k, v in cfg.items():
            if k != "command" and getattr(args, k, None) is None:
                setattr(args, k, v)
    if args.seed is None:
        args.seed = 7
    if not isinstance(args.seed, int) or args.seed < 0:
        raise UsageError("seed must be a nonnegative integer")
    effective = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    effective["command"] = args.command
    return effective


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    fn, keys = COMMANDS[args.command]
    try:
        cfg = _merge(args, keys)
        res, rows, cols = fn(args, cfg)
    except UsageError as e:
        print(f"hameo {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, DomainError, RangeError) as e:
        print(f"hameo {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CheckFailed as e:
        print(f"hameo {args.command}: check failed: {e}", file=sys.stderr)
        if e.payload:
            res, rows, cols = e.payload
            try:
                emit_report(res, args.out, args.csv, rows, cols, cfg, args.seed,
                            stream=None if args.command == "verify" else sys.stdout)
            except CheckFailed:
                pass
        return EXIT_FAIL
    except HameoError as e:
        print(f"hameo {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL
    try:
        emit_report(res, args.out, args.csv if cols else None, rows, cols, cfg, args.seed,
                    stream=None if args.command == "verify" else sys.stdout)
    except CheckFailed as e:
        print(f"hameo {args.command}: {e}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
