"""The eleven acceptance criteria, each at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line; the lines are printed
together at the end of the pytest run.
"""
import json
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE
from oracles import circle_hits, parabola_count
from ratnear._selftest import ALGEBRA
from ratnear.cells import CellParams, find_integer_point, inclusion_check, kappa0
from ratnear.cli import main
from ratnear.dual import DualCurve, wronskian_inequality_check
from ratnear.frames import decomposition_residuals, frame_at
from ratnear.manifold import Box, catalog
from ratnear.pbox import decay, good_estimate, membership_A, membership_A_bruteforce, wronski_family
from ratnear.rats import count_N, exponent_fit
from ratnear.ubiquity import dim_estimate, dim_target

UNIT = Box.interval(0, 1)


def record(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE.append(line)
    print(line)


def test_criterion_01_algebra_exactness():
    t0 = time.perf_counter()
    res = {name: fn(random.Random(f"acceptance:{name}"), 1000, 8) for name, fn in ALGEBRA.items()}
    secs = time.perf_counter() - t0
    ok = all(res.values()) and secs <= 10
    record(1, ok, f"{len(res)} identities x 1000 exact instances, k <= 8, {secs:.1f} s")
    assert all(res.values()), res
    assert secs <= 10


def test_criterion_02_frame_decomposition():
    rng = np.random.default_rng(2)
    worst, bad = 0.0, 0
    for M in (catalog("parabola"), catalog("veronese", n=3), catalog("circle", r=3)):
        lo, hi = float(M.domain.lo[0]), float(M.domain.hi[0])
        for x in rng.uniform(lo, hi, 1000):
            r = decomposition_residuals(frame_at(M, [x]))
            worst = max(worst, r["residual"])
            bad += r["total"] != M.n + 1
    ok = worst <= 1e-9 and bad == 0
    record(2, ok, f"3000 points, max orthogonality residual {worst:.2e}, dimension-sum failures {bad}")
    assert ok


@pytest.mark.xfail(strict=True, reason="circle(3) has points at distance about 1/(2 sqrt(3) q^2) from the "
                                       "integer solutions of a^2 + b^2 - 3q^2 = +-1, +-2, far inside Q^-2.2 "
                                       "for Q below about 500")
def test_criterion_03_circle3_zero_count():
    M = catalog("circle", r=3)
    counts, oracle = {}, {}
    for Q in (50, 100, 200, 400):
        counts[Q] = count_N(M, Q, Q ** -2.2).count
        oracle[Q] = len(circle_hits(3, Q, Q ** -2.2))
    assert counts == oracle  # the two routes agree; only the zero claim fails
    ok = all(c == 0 for c in counts.values())
    record(3, ok, f"N(Q, Q^-2.2) on circle(3) = {counts} (exact oracle agrees; expected failure, see ledger)")
    assert ok


def test_criterion_04_heuristic_exponent():
    M = catalog("parabola")
    series, mism = [], []
    for Q in (100, 200, 400, 800):
        n = count_N(M, Q, 0.02, UNIT).count
        if n != parabola_count(Q, 0.02):
            mism.append(Q)
        series.append((Q, n))
    fit = exponent_fit(series)
    ok = not mism and abs(fit.slope - 3) <= 0.2
    record(4, ok, f"counts {dict(series)}, slope {fit.slope:.3f} (target 3 +- 0.2), oracle mismatches {mism}")
    assert ok


def test_criterion_05_minkowski_guarantee():
    rng = np.random.default_rng(5)
    fails, tried = 0, 0
    for name, kw, B in (("parabola", {}, UNIT), ("veronese", {"n": 3}, Box.interval(-0.9, 0.9))):
        M = catalog(name, **kw)
        k0 = kappa0(M.d, M.m)
        for _ in range(100):
            x = float(rng.uniform(float(B.lo[0]), float(B.hi[0])))
            F = frame_at(M, [x], B)
            Qs = float(rng.choice([10, 20, 50, 100, 200]))
            lo = CellParams.for_frame(F, Qs, 1.0, k0).psi_window()[0]
            ps = float(np.exp(rng.uniform(np.log(lo), 0.0)))
            P = CellParams.for_frame(F, Qs, ps, k0)
            tried += 1
            fails += find_integer_point(F, P) is None
    record(5, fails == 0, f"{tried} random configurations with kappa = kappa0, {fails} failures")
    assert fails == 0


def test_criterion_06_detection_inclusion():
    c0, kappa = 1.0, 0.5
    parts, ok = [], True
    for Qs in (200, 400):
        rep = inclusion_check(catalog("parabola"), UNIT, Qs, Qs ** -0.5, kappa, c0=c0, per_axis=2001)
        ok &= rep.ok and rep.good > 0
        parts.append(f"Q*={Qs}: {rep.good} good grid points, {len(rep.uncovered)} uncovered, "
                     f"ambient coverage {rep.ambient:.3f}")
    record(6, ok, f"c0 = {c0}, kappa = {kappa}; " + "; ".join(parts))
    assert ok


def test_criterion_07_dual_identities():
    xs = [Fraction(-9, 10) + Fraction(9, 5) * Fraction(i, 101) for i in range(1, 101)]
    assert len(set(xs)) == 100
    res = {}
    for n in (2, 3):
        M = catalog("veronese", n=n)
        D = DualCurve(M)
        rel = all(val == want for x in xs for val, want in D.relations(x).values())
        rep = wronskian_inequality_check(M, xs, hard=False)
        res[n] = (rel, rep.exact, min(rep.ratios), max(rep.ratios))
    ok = (all(r[0] and r[1] for r in res.values()) and res[3][2] >= 1
          and res[2][2] == res[2][3] == 1)
    record(7, ok, f"relations exact at 100 rationals on veronese(2), veronese(3); ratio on veronese(2) "
                  f"in [{res[2][2]}, {res[2][3]}], min ratio on veronese(3) {res[3][2]}")
    assert ok


def test_criterion_08_parallelepiped_decay():
    fam = wronski_family(["1", "x", "x**2"], UNIT)
    theta = (0.05, 0.5, 40.0)
    rep = decay(fam, theta, halvings=4)
    mism = 0
    for x in np.linspace(0.01, 0.99, 25):
        for t in rep.scales:
            th = tuple(v * t for v in theta)
            mism += membership_A(fam, th, [x]) != membership_A_bruteforce(fam, th, [x])
    ok = rep.strictly_decreasing and rep.alpha > 0.3 and mism == 0
    fr = ", ".join(f"{f:.4f}" for f in rep.fractions)
    record(8, ok, f"fractions {fr}; alpha {rep.alpha:.3f}; brute-force mismatches {mism}/125")
    assert ok


def test_criterion_09_goodness():
    g1 = good_estimate(lambda X: X[:, 0], UNIT, 1.0)
    g2 = good_estimate(lambda X: X[:, 0] ** 2, Box.interval(-1, 1), 0.5)
    # closed form on the whole interval: mu{x^2 < eps} / (eps^(1/2) mu[-1, 1]) = 2 sqrt(eps) / (2 sqrt(eps))
    ok = abs(g1.C - 1) <= 0.02 and g2.C <= 2.05
    record(9, ok, f"x on [0,1] alpha 1: C = {g1.C:.4f}; x^2 on [-1,1] alpha 1/2: C = {g2.C:.4f} (bound 2.05)")
    assert ok


def test_criterion_10_dimension_surrogates():
    t0 = time.perf_counter()
    circ = dim_estimate(catalog("circle", r=1), 1.5, [2 ** k for k in range(8, 17)], UNIT)
    para = dim_estimate(catalog("parabola"), 0.75, [2 ** k for k in range(6, 13)], UNIT)
    secs = time.perf_counter() - t0
    tc, tp = dim_target("unit-circle", 1.5), dim_target("planar", 0.75)
    ok = (abs(circ.value - tc) <= 0.12 and abs(para.value - tp) <= 0.12
          and circ.r2 >= 0.95 and para.r2 >= 0.95 and secs <= 600)
    record(10, ok, f"unit circle {circ.value:.3f} vs {tc:.3f} (R^2 {circ.r2:.4f}); parabola {para.value:.3f} "
                   f"vs {tp:.3f} (R^2 {para.r2:.4f}); {secs:.0f} s")
    assert ok


def test_criterion_11_determinism(tmp_path):
    man = tmp_path / "cells.ini"
    man.write_text("[experiment]\nkind = cells\nseed = 11\nthreads = 1\n"
                   "[manifold]\nname = parabola\n"
                   "[params]\nQ_star = 100, 200\npsi_star = q^-0.5\nkappa = 0.5\nc0 = 1\npoints = 101\nbox = 0,1\n")
    outs = {}
    for tag, extra in (("a", []), ("b", []), ("mt", ["--threads", "2"])):
        assert main(["run", str(man), "--out", str(tmp_path / tag), *extra]) == 0
        outs[tag] = {f: (tmp_path / tag / f).read_bytes() for f in ("results.csv", "summary.json")}
    same = outs["a"] == outs["b"]
    mt = outs["a"]["results.csv"] == outs["mt"]["results.csv"]
    sa = json.loads(outs["a"]["summary.json"])["summary"]
    smt = json.loads(outs["mt"]["summary.json"])["summary"]
    ok = same and mt and sa == smt
    record(11, ok, f"two single-thread runs byte-identical: {same}; 2-thread rows equal after canonical sort: {mt}")
    assert ok
