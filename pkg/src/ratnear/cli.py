"""Command line driver: ``run <manifest>``, ``selftest`` and ``catalog``.

A manifest is an INI file with an ``[experiment]`` section (kind, out,
seed, threads), a ``[manifold]`` section (name plus catalog parameters,
domain as ``lo,hi``) and a ``[params]`` section whose keys depend on the
kind.  Each run writes ``results.csv`` and ``summary.json`` to the output
directory.  The exit status is 1 when a hard invariant fails and 2 for
invalid manifests.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import multivector as mv
from .errors import DomainError, InvariantViolation, PreconditionError
from .manifold import CATALOG, Box, Manifold, _num, from_config, parse_domain

KINDS = ("count", "coverage", "cells", "pbox-decay", "dual-check", "dim", "ubiquity")


class ManifestError(ValueError):
    pass


# -- formatting ------------------------------------------------------------------

def fmt(v: Any) -> str:
    """Full-precision decimal for floats, p/q for rationals."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if isinstance(v, (tuple, list)):
        return " ".join(fmt(x) for x in v)
    return str(v)


def _jsonable(v: Any):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, Fraction):
        return fmt(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# -- manifest ---------------------------------------------------------------------

def _list(text: str, conv=_num) -> list:
    items = [t for t in text.replace(";", ",").split(",") if t.strip()]
    return [conv(t) for t in items]


def _rule(text: str):
    from .ubiquity import PsiRule
    return PsiRule.parse(text.lower())


def load_manifest(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    if "experiment" not in cp:
        raise ManifestError("manifest needs an [experiment] section")
    kind = cp["experiment"].get("kind", "").strip()
    if kind not in KINDS:
        raise ManifestError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    if not cp.has_section("params"):
        cp.add_section("params")
    return cp


def _manifold(cp) -> Manifold:
    if "manifold" not in cp:
        raise ManifestError("this kind needs a [manifold] section")
    try:
        return from_config(dict(cp["manifold"]))
    except (ValueError, KeyError) as exc:
        raise ManifestError(f"bad [manifold] section: {exc}") from exc


def _box(p, M: Manifold | None, key: str = "box") -> Box | None:
    if key not in p:
        return None
    lo, hi = parse_domain(p[key])
    return Box(lo, hi)


def _required_grid(p, key: str, conv=_num) -> list:
    if key not in p:
        raise ManifestError(f"[params] needs {key}")
    vals = _list(p[key], conv)
    if not vals:
        raise ManifestError(f"[params] {key} is empty")
    return vals


# -- experiment kinds -------------------------------------------------------------

def _run_count(cp, M, p, threads, seed):
    from .rats import count_N
    Qs = _required_grid(p, "Q", int)
    rule = _rule(p.get("eps", "0.01"))
    B = _box(p, M)
    rows = []
    for Q in sorted(Qs):
        rep = count_N(M, Q, rule(Q), B, workers=threads)
        rows.append({"Q": Q, "eps": rule(Q), "count": rep.count, "ambiguous": rep.ambiguous})
    return ["Q", "eps", "count", "ambiguous"], rows, {"eps_rule": str(rule)}, []


def _run_coverage(cp, M, p, threads, seed):
    from .rats import coverage_measure, enumerate_R
    Qs = _required_grid(p, "Q", int)
    psi = _rule(p.get("psi", "0.5"))
    rho = _rule(p.get("rho", "q^-1"))
    delta = float(_num(p.get("delta", "0")))
    B = _box(p, M)
    rows = []
    for Q in sorted(Qs):
        pts = enumerate_R(M, Q, psi(Q), delta, B, workers=threads)
        fr = coverage_measure(M, Q, psi(Q), delta, rho(Q), B, points=pts)
        rows.append({"Q": Q, "psi": psi(Q), "rho": rho(Q), "points": len(pts), "fraction": fr})
    return ["Q", "psi", "rho", "points", "fraction"], rows, {"psi_rule": str(psi), "rho_rule": str(rho)}, []


def _cells_grid(M, B, per_axis):
    half = B.scaled(Fraction(1, 2))
    return half, half.sample_grid(per_axis)


def _cells_chunk(args):
    from .cells import CellParams, detect, find_integer_point, good_set_member
    from .frames import frame_at
    M, B, X, Qs, ps, kappa, c0 = args
    out = []
    for x in X:
        F = frame_at(M, [float(v) for v in x], B)
        P = CellParams.for_frame(F, Qs, ps, kappa, c0=c0)
        good = good_set_member(F, P)
        row = {"x": tuple(float(v) for v in x), "good": good, "q": "", "a": "", "b": "", "ok": "", "failed": ""}
        mink = find_integer_point(F, P, kappa=max(P.kappa0, P.kappa)) is not None
        if good:
            det = detect(F, P, B, strict=False)
            row.update(q=det.point.q, a=det.point.a, b=det.point.b, ok=det.ok,
                       failed=" ".join(sorted(k for k, v in det.checks.items() if not v)))
        row["minkowski"] = mink
        out.append(row)
    return out


def _run_cells(cp, M, p, threads, seed):
    from .cells import CellParams, default_kappa
    from .rats import covered_mask, enumerate_R
    Qstars = _required_grid(p, "Q_star", float)
    psi_rule = _rule(p.get("psi_star", "q^-0.5"))
    kappa = float(_num(p.get("kappa", str(default_kappa(M.d, M.m)))))
    c0 = float(_num(p["c0"])) if "c0" in p else None
    per_axis = int(p.get("points", "201"))
    B = _box(p, M) or M.domain
    half, X = _cells_grid(M, B, per_axis)
    rows, summary, failures = [], {"kappa": kappa}, []
    for Qs in sorted(Qstars):
        ps = psi_rule(Qs)
        chunks = [c for c in np.array_split(X, max(1, threads)) if len(c)]
        args = [(M, B, c, Qs, ps, kappa, c0) for c in chunks]
        if threads > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(threads) as ex:
                parts = list(ex.map(_cells_chunk, args))
        else:
            parts = [_cells_chunk(a) for a in args]
        res = [r for part in parts for r in part]
        P = CellParams(Qs, ps, kappa, M.d, M.m, c0=c0)
        pts = enumerate_R(M, int(math.floor(P.Q)), P.psi, P.delta0, B, workers=threads)
        centers = np.array([[ai / pt.q for ai in pt.a] for pt in pts], dtype=float).reshape(-1, M.d)
        good_x = np.array([r["x"] for r in res if r["good"]], dtype=float).reshape(-1, M.d)
        cov = covered_mask(centers, P.rho, good_x) if len(good_x) else np.zeros(0, dtype=bool)
        it = iter(cov)
        for r in res:
            r["covered"] = bool(next(it)) if r["good"] else ""
            rows.append({"Q_star": Qs, "psi_star": ps, **r})
        if not all(r["minkowski"] for r in res):
            failures.append(f"Minkowski guarantee failed at Q*={Qs}")
        summary[f"Q*={fmt(Qs)}"] = {**P.report(), "good_points": int(len(good_x)),
                                    "uncovered": int((~cov).sum()), "detections_ok": sum(1 for r in res if r["ok"] is True)}
    cols = ["Q_star", "psi_star", "x", "good", "q", "a", "b", "ok", "failed", "covered", "minkowski"]
    return cols, rows, summary, failures


def _run_pbox(cp, M, p, threads, seed):
    from .pbox import decay, membership_A, membership_A_bruteforce, wronski_family
    funcs = [s.strip() for s in p.get("functions", "1, x, x**2").split(",") if s.strip()]
    lo, hi = parse_domain(p.get("domain", "0,1"))
    fam = wronski_family(funcs, Box(lo, hi))
    theta = tuple(float(v) for v in _required_grid(p, "theta", float))
    if len(theta) != fam.k:
        raise ManifestError(f"theta needs {fam.k} entries")
    rep = decay(fam, theta, halvings=int(p.get("halvings", "4")), workers=threads)
    rows = [{"t": t, "fraction": f} for t, f in zip(rep.scales, rep.fractions)]
    rng = np.random.default_rng(seed)
    nver = int(p.get("verify", "20"))
    mism = 0
    for x in rng.uniform(float(lo[0]), float(hi[0]), nver):
        for t in rep.scales:
            th = tuple(v * t for v in theta)
            if membership_A(fam, th, [x]) != membership_A_bruteforce(fam, th, [x]):
                mism += 1
    summary = {"family": fam.name, "alpha": rep.alpha, "r2": rep.fit.r2 if rep.fit else None,
               "strictly_decreasing": rep.strictly_decreasing, "bruteforce_mismatches": mism}
    failures = [f"{mism} membership mismatches against the brute-force scan"] if mism else []
    return ["t", "fraction"], rows, summary, failures


def _run_dual(cp, M, p, threads, seed):
    from .dual import DualCurve
    N = int(p.get("points", "100"))
    lo, hi = M.domain.lo[0], M.domain.hi[0]
    D = DualCurve(M)
    rows, failures = [], []
    for i in range(N):
        x = Fraction(lo) + (Fraction(hi) - Fraction(lo)) * Fraction(i + 1, N + 1)
        x = x if M.is_polynomial else float(x)
        Wy, Wz = D.W_y(x), D.W_z(x)
        ratio = Fraction(abs(Wz)) / Fraction(abs(Wy)) ** D.n if M.is_polynomial else abs(float(Wz)) / abs(float(Wy)) ** D.n
        res = D.relation_residual(x)
        rows.append({"x": x, "W_y": Wy, "W_z": Wz, "ratio": ratio, "relation_residual": res})
        tol = 0.0 if M.is_polynomial else 1e-8
        if res > tol:
            failures.append(f"dual relations fail at x={fmt(x)} (residual {res:.3g})")
        if ratio < 1 - (0 if M.is_polynomial else 1e-9):
            failures.append(f"|W_z| < |W_y|^n at x={fmt(x)}")
    summary = {"min_ratio": min(float(r["ratio"]) for r in rows),
               "max_relation_residual": max(r["relation_residual"] for r in rows), "method": D.method}
    return ["x", "W_y", "W_z", "ratio", "relation_residual"], rows, summary, failures


def _run_dim(cp, M, p, threads, seed):
    from .ubiquity import dim_estimate
    tau = float(_num(p.get("tau", "0.75")))
    Qs = _required_grid(p, "Q", int)
    est = dim_estimate(M, tau, sorted(Qs), _box(p, M))
    rows = [{"Q": Q, "scale": s, "count": c} for Q, s, c in zip(est.Qs, est.scales, est.counts)]
    summary = {"tau": tau, "estimate": est.value, "slope": est.fit.slope if est.fit else None,
               "r2": est.r2, "stable": est.stable, "prefix_slopes": list(est.prefix_slopes),
               "caveat": "finite-scale box-counting surrogate for a limsup set"}
    return ["Q", "scale", "count"], rows, summary, []


def _run_ubiquity(cp, M, p, threads, seed):
    from .ubiquity import ResonantSystem, lambda_in_S_check, ubiquity_fraction, ubiquity_fraction_inclusion
    ts = _required_grid(p, "t", int)
    psi = _rule(p.get("psi", "q^-0.8"))
    rho0 = float(_num(p.get("rho0", "1")))
    delta0 = float(_num(p.get("delta0", "0.5")))
    B = _box(p, M) or M.domain
    S = ResonantSystem(M, psi, B, rho0)
    rows, failures = [], []
    for t in sorted(ts):
        direct = ubiquity_fraction(S, t)
        incl = ubiquity_fraction_inclusion(S, t, delta0)
        checked, bad = lambda_in_S_check(S, t, seed=seed)
        rows.append({"t": t, "J": len(S.J(t)), "fraction": direct, "inclusion_fraction": incl,
                     "lambda_checked": checked, "lambda_failures": bad})
        if incl > direct + 1e-12:
            failures.append(f"inclusion fraction exceeds direct fraction at t={t}")
        if bad:
            failures.append(f"{bad} points of Lambda_R outside S_f at t={t}")
    counts = [r["J"] for r in rows]
    if any(b < a for a, b in zip(counts, counts[1:])):
        failures.append("J(t) counts decrease")
    summary = {"psi_rule": str(psi), "rho0": rho0, "delta0": delta0}
    return ["t", "J", "fraction", "inclusion_fraction", "lambda_checked", "lambda_failures"], rows, summary, failures


RUNNERS = {"count": _run_count, "coverage": _run_coverage, "cells": _run_cells, "pbox-decay": _run_pbox,
           "dual-check": _run_dual, "dim": _run_dim, "ubiquity": _run_ubiquity}


def _canonical(rows: list[dict], cols: Sequence[str]) -> list[dict]:
    def key(r):
        out = []
        for c in cols:
            v = r.get(c, "")
            if isinstance(v, tuple) and all(isinstance(t, (int, float, Fraction)) for t in v):
                out.append((0, tuple(float(t) for t in v), ""))
            elif isinstance(v, bool) or not isinstance(v, (int, float, Fraction, np.integer, np.floating)):
                out.append((1, (), fmt(v)))
            else:
                out.append((0, (float(v),), ""))
        return tuple(out)
    return sorted(rows, key=key)


def run_manifest(path: str, out: str | None = None, threads: int | None = None, seed: int | None = None,
                 log=print) -> int:
    cp = load_manifest(path)
    e = cp["experiment"]
    kind = e["kind"].strip()
    threads = int(e.get("threads", "1")) if threads is None else threads
    seed = int(e.get("seed", "0")) if seed is None else seed
    out = e.get("out", "results") if out is None else out
    if threads < 1:
        raise ManifestError("threads must be >= 1")
    M = _manifold(cp) if kind != "pbox-decay" else None
    p = cp["params"]
    # validate the grids before any work or file output
    grid_key = {"count": "Q", "coverage": "Q", "cells": "Q_star", "pbox-decay": "theta", "dim": "Q", "ubiquity": "t"}
    if kind in grid_key:
        _required_grid(p, grid_key[kind])
    t0 = time.perf_counter()
    cols, rows, summary, failures = RUNNERS[kind](cp, M, p, threads, seed)
    rows = _canonical(rows, cols)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([fmt(r.get(c, "")) for c in cols])
    (outdir / "results.csv").write_text(buf.getvalue())
    doc = {"kind": kind, "manifest": {s: dict(cp[s]) for s in cp.sections()}, "seed": seed,
           "manifold": None if M is None else M.spec, "summary": summary, "invariant_failures": failures,
           "status": "fail" if failures else "ok"}
    (outdir / "summary.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    log(f"{kind}: {len(rows)} rows -> {outdir}/results.csv ({time.perf_counter() - t0:.1f} s)")
    for f in failures:
        log(f"INVARIANT FAILED: {f}")
    return 1 if failures else 0


def selftest(seed: int = 0, quick: bool = False, mutate_hodge: bool = False, log=print) -> int:
    from ._selftest import run_all
    mv._HODGE_DEFECT[0] = bool(mutate_hodge)
    try:
        t0 = time.perf_counter()
        res = run_all(seed, quick)
    finally:
        mv._HODGE_DEFECT[0] = False
    for name, ok, secs in res:
        log(f"{'PASS' if ok else 'FAIL'}  {name}  ({secs:.2f} s)")
    nfail = sum(1 for _, ok, _ in res if not ok)
    log(f"{len(res) - nfail}/{len(res)} invariants passed in {time.perf_counter() - t0:.1f} s")
    return 1 if nfail else 0


def list_catalog(log=print) -> int:
    defaults = {"parabola": "x^2 on [-2, 2]", "veronese": "n=2..: (x^2, ..., x^n) on [-9/10, 9/10]",
                "circle": "r: sqrt(r - x^2) on [-sqrt(r)/2, sqrt(r)/2]",
                "power-block": "d, m, k: (x_d^(k+1), ..., x_d^(k+m)) on [-9/10, 9/10]^d",
                "custom": "f = comma-separated expressions in x1..xd, d, domain required"}
    for name in CATALOG:
        log(f"{name:12s} {defaults[name]}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="ratnear", description="Rational points near manifolds: experiments and checks.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment manifest")
    r.add_argument("manifest")
    s = sub.add_parser("selftest", help="run the invariant suite")
    s.add_argument("--quick", action="store_true", help="smaller random samples")
    s.add_argument("--mutate-hodge", action="store_true", help="flip the Hodge sign to check the suite catches it")
    sub.add_parser("catalog", help="list built-in manifolds")
    for p in (r, s):
        p.add_argument("--seed", type=int, default=None)
    r.add_argument("--threads", type=int, default=None)
    r.add_argument("--out", default=None)
    args = ap.parse_args(argv)
    if args.cmd == "catalog":
        return list_catalog()
    if args.cmd == "selftest":
        return selftest(0 if args.seed is None else args.seed, args.quick, args.mutate_hodge)
    try:
        return run_manifest(args.manifest, args.out, args.threads, args.seed)
    except (ManifestError, PreconditionError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"INVARIANT FAILED: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
