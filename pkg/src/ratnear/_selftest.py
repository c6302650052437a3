"""Invariant suite shared by the ``selftest`` command."""
from __future__ import annotations

import random
import time
from fractions import Fraction
from typing import Callable

import numpy as np

from . import multivector as mv
from ._lattice import det_exact


def _rand_vec(rng: random.Random, k: int, lo: int = -5, hi: int = 5) -> list:
    return [Fraction(rng.randint(lo, hi), rng.randint(1, 4)) for _ in range(k)]


def _rand_decomposable(rng: random.Random, k: int, p: int) -> mv.MultiVector:
    if p == 0:
        return mv.scalar(k, Fraction(rng.randint(1, 5)))
    return mv.wedge_all([_rand_vec(rng, k) for _ in range(p)], k)


def _rand_mv(rng: random.Random, k: int, p: int) -> mv.MultiVector:
    import math as _m
    return mv.MultiVector(k, p, [Fraction(rng.randint(-5, 5), rng.randint(1, 3)) for _ in range(_m.comb(k, p))])


def check_wedge_minors(rng, count, kmax):
    for _ in range(count):
        k = rng.randint(2, kmax)
        p = rng.randint(1, k)
        xs = [_rand_vec(rng, k) for _ in range(p)]
        w = mv.wedge_all(xs, k)
        for I in mv.subsets(k, p):
            idx = mv.indices(I)
            if w.coeff(idx) != det_exact([[x[i] for i in idx] for x in xs]):
                return False
    return True


def check_laplace(rng, count, kmax):
    for _ in range(count):
        k = rng.randint(2, kmax)
        p = rng.randint(1, k)
        vs = [_rand_vec(rng, k) for _ in range(p)]
        us = [_rand_vec(rng, k) for _ in range(p)]
        gram = [[sum(a * b for a, b in zip(v, u)) for u in us] for v in vs]
        if mv.inner(mv.wedge_all(vs, k), mv.wedge_all(us, k)) != det_exact(gram):
            return False
    return True


def check_wedge_norm(rng, count, kmax):
    for _ in range(count):
        k = rng.randint(2, kmax)
        p = rng.randint(0, k)
        q = rng.randint(0, k - p)
        u = _rand_decomposable(rng, k, p)
        v = _rand_mv(rng, k, q)
        if mv.norm_sq(mv.wedge(u, v)) > mv.norm_sq(u) * mv.norm_sq(v):
            return False
    return True


def check_interior_assoc(rng, count, kmax):
    for _ in range(count):
        k = rng.randint(2, kmax)
        p = rng.randint(0, k)
        q = rng.randint(0, p)
        r = rng.randint(0, p - q)
        a, b, c = _rand_mv(rng, k, p), _rand_mv(rng, k, q), _rand_mv(rng, k, r)
        if mv.interior(a, mv.wedge(b, c)) != mv.interior(mv.interior(a, b), c):
            return False
        if mv.interior_rev(mv.wedge(c, b), a) != mv.interior_rev(c, mv.interior_rev(b, a)):
            return False
    return True


def check_hodge_duality(rng, count, kmax):
    for _ in range(count):
        k = rng.randint(2, kmax)
        p = rng.randint(0, k)
        v = _rand_mv(rng, k, p)
        if mv.hodge(mv.hodge(v)) != v * (-1) ** ((k - p) * p):
            return False
    return True


def check_hodge_norm(rng, count, kmax):
    for _ in range(count):
        k = rng.randint(2, kmax)
        p = rng.randint(0, k)
        q = rng.randint(0, k - p)
        v = _rand_decomposable(rng, k, q)
        u = _rand_decomposable(rng, k, p)
        if mv.norm_sq(mv.interior(mv.hodge(v), u)) != mv.norm_sq(mv.wedge(v, u)):
            return False
    return True


ALGEBRA: dict[str, Callable] = {
    "wedge = minors": check_wedge_minors,
    "Laplace identity": check_laplace,
    "|u^v| <= |u||v|": check_wedge_norm,
    "interior associativity": check_interior_assoc,
    "Hodge duality sign": check_hodge_duality,
    "|v^perp . u| = |v ^ u|": check_hodge_norm,
}


def run_algebra(seed: int = 0, count: int = 1000, kmax: int = 8) -> dict[str, bool]:
    out = {}
    for name, fn in ALGEBRA.items():
        out[name] = bool(fn(random.Random(f"{seed}:{name}"), count, kmax))
    return out


def run_all(seed: int = 0, quick: bool = False) -> list[tuple[str, bool, float]]:
    """(name, passed, seconds) for every invariant in the suite."""
    from .cells import CellParams, find_integer_point, integer_points, integer_points_scan, kappa0
    from .dual import wronskian_inequality_check, DualCurve
    from .frames import decomposition_residuals, frame_at
    from .manifold import Box, catalog
    from .pbox import good_estimate, membership_A, membership_A_bruteforce, membership_A_lattice, wronski_family
    from .rats import count_N
    from .ubiquity import PsiRule, ResonantSystem, lambda_in_S_check

    results = []

    def record(name, fn):
        t = time.perf_counter()
        try:
            ok = bool(fn())
        except Exception:  # a crash is a failed invariant
            ok = False
        results.append((name, ok, time.perf_counter() - t))

    n_alg = 200 if quick else 1000
    for name, fn in ALGEBRA.items():
        record(f"algebra: {name}", lambda fn=fn, name=name: fn(random.Random(f"{seed}:{name}"), n_alg, 8))

    rng = np.random.default_rng(seed)

    def frames_ok():
        for M in (catalog("parabola"), catalog("veronese", n=3), catalog("circle", r=3)):
            for x in M.domain.sample_grid(41):
                r = decomposition_residuals(frame_at(M, x))
                if r["residual"] > 1e-9 or r["total"] != M.n + 1:
                    return False
        return True
    record("frames: orthogonal split", frames_ok)

    def minkowski_ok():
        M = catalog("parabola")
        B = Box.interval(0, 1)
        for _ in range(40):
            x = float(rng.uniform(0, 1))
            Qs = float(rng.choice([20, 50, 100]))
            F = frame_at(M, [x], B)
            lo = CellParams.for_frame(F, Qs, 0.5, kappa0(1, 1)).psi_window()[0]
            P = CellParams.for_frame(F, Qs, float(rng.uniform(lo, 1)), kappa0(1, 1))
            if find_integer_point(F, P) is None:
                return False
        return True
    record("cells: Minkowski guarantee", minkowski_ok)

    def search_oracle_ok():
        M = catalog("parabola")
        B = Box.interval(0, 1)
        for x in (0.13, 0.5, 0.77):
            F = frame_at(M, [x], B)
            P = CellParams.for_frame(F, 10, 0.5, 0.8)
            if integer_points(F, P) != integer_points_scan(F, P):
                return False
        return True
    record("cells: search matches box scan", search_oracle_ok)

    def dual_ok():
        for n in (2, 3):
            M = catalog("veronese", n=n)
            xs = [Fraction(i, 17) for i in range(-15, 16)]
            D = DualCurve(M)
            if any(D.relation_residual(x) != 0 for x in xs):
                return False
            rep = wronskian_inequality_check(M, xs, hard=False)
            if not rep.ok:
                return False
        return True
    record("dual: relations and Wronskian inequality", dual_ok)

    def pbox_ok():
        P = wronski_family(["1", "x", "x**2"], Box.interval(0, 1))
        th = (0.1, 0.1, 10)
        for x in np.linspace(0.05, 0.95, 7 if quick else 19):
            a = membership_A(P, th, [x])
            if a != membership_A_bruteforce(P, th, [x]) or a != membership_A_lattice(P, th, [x]):
                return False
        return True
    record("pbox: membership routes agree", pbox_ok)

    def good_ok():
        g = good_estimate(lambda X: X[:, 0], Box.interval(0, 1), 1.0)
        return abs(g.C - 1) <= 0.02
    record("pbox: (C, alpha)-good of x", good_ok)

    def count_ok():
        return count_N(catalog("circle", r=3), 50, 50 ** -2.2).count == 12
    record("rats: circle(3) near points at Q=50", count_ok)

    def ubiquity_ok():
        S = ResonantSystem(catalog("parabola"), PsiRule(0.8), Box.interval(0, 1))
        return lambda_in_S_check(S, 7)[1] == 0
    record("ubiquity: Lambda_R inside S_f", ubiquity_ok)
    return results
