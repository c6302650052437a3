"""Ground-truth enumeration of rational points near a Monge manifold.

``enumerate_R`` lists the primitive triples (q, a, b) with
delta*Q < q <= Q, a/q in B and |q f(a/q) - b|_inf <= psi.  ``count_N``
counts rational points p/q within euclidean distance eps of the graph of
f over B.  Both scan q independently, so q-ranges can be split across
worker processes.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

import numpy as np
import sympy as sp
from scipy import stats

from .errors import DomainError, PreconditionError
from .manifold import Box, Manifold

FLOAT_MARGIN = 1e-9


@dataclass(frozen=True, order=True)
class RationalPoint:
    q: int
    a: tuple
    b: tuple
    residual: object = field(compare=False)

    @property
    def x(self) -> tuple:
        return tuple(Fraction(ai, self.q) for ai in self.a)

    def as_row(self) -> dict:
        return {"q": self.q, "a": list(self.a), "b": list(self.b), "residual": str(self.residual)}


@dataclass
class CountReport:
    Q: int
    param: float
    delta: float
    box: Box
    count: int
    seconds: float
    points: list | None = None
    per_q: dict | None = None
    ambiguous: int = 0
    kind: str = "R"

    def row(self, fraction: float | None = None) -> dict:
        return {"Q": self.Q, "psi_or_eps": self.param, "delta": self.delta, "count": self.count,
                "fraction": "" if fraction is None else fraction, "seconds": self.seconds}


def _check_box(M: Manifold, B: Box | None) -> Box:
    B = M.domain if B is None else B
    if B.dim != M.d:
        raise DomainError(f"box of dimension {B.dim} for a manifold with d = {M.d}")
    if not M.domain.contains_box(B):
        raise DomainError(f"box {B} is not inside the domain of {M.name}")
    return B


def _a_grid(q: int, B: Box, pad: float = 0.0) -> np.ndarray:
    """All integer a with a/q in B (padded by ``pad``), shape (N, d)."""
    axes = []
    for lo, hi in zip(B.lo, B.hi):
        a0 = math.ceil(Fraction(lo) * q - Fraction(pad) * q) if pad else math.ceil(Fraction(lo) * q)
        a1 = math.floor(Fraction(hi) * q + Fraction(pad) * q) if pad else math.floor(Fraction(hi) * q)
        axes.append(np.arange(a0, a1 + 1, dtype=np.int64))
    if len(axes) == 1:
        return axes[0][:, None]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _scan_R(M: Manifold, q: int, psi: float, B: Box) -> list[RationalPoint]:
    A = _a_grid(q, B)
    if len(A) == 0:
        return []
    X = A / q
    V = q * M.f_array(X)
    margin = FLOAT_MARGIN * np.maximum(1.0, np.abs(V))
    lo = np.ceil(V - psi - margin).astype(np.int64)
    hi = np.floor(V + psi + margin).astype(np.int64)
    keep = np.all(hi >= lo, axis=1)
    out = []
    psi_exact = Fraction(psi)
    for idx in np.nonzero(keep)[0]:
        a = tuple(int(v) for v in A[idx])
        if M.is_polynomial:
            vals = [p.scaled_value(a, q) for p in M.polys]
        else:
            vals = [float(v) for v in V[idx]]
        ranges = [range(int(lo[idx, l]), int(hi[idx, l]) + 1) for l in range(M.m)]
        for b in product(*ranges):
            res = max(abs(v - bl) for v, bl in zip(vals, b))
            if M.is_polynomial:
                if res > psi_exact:
                    continue
            elif res > psi + FLOAT_MARGIN * max(1.0, abs(vals[0])):
                continue
            if math.gcd(q, *a, *b) != 1:
                continue
            out.append(RationalPoint(q, a, tuple(b), res))
    return out


def _q_range(Q: int, delta: float) -> range:
    # q > delta*Q, decided exactly
    qmin = math.floor(Fraction(delta) * Q) + 1
    return range(max(1, qmin), Q + 1)


def _chunks(qs: range, workers: int) -> list[range]:
    if workers <= 1 or len(qs) < 2:
        return [qs]
    step = max(1, math.ceil(len(qs) / (4 * workers)))
    return [range(s, min(s + step, qs.stop)) for s in range(qs.start, qs.stop, step)]


def _scan_R_chunk(args) -> list[RationalPoint]:
    M, qs, psi, B = args
    out = []
    for q in qs:
        out.extend(_scan_R(M, q, psi, B))
    return out


def _run_chunks(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) == 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def enumerate_R(M: Manifold, Q: int, psi: float, delta: float = 0.0, B: Box | None = None,
                workers: int = 1) -> list[RationalPoint]:
    """Primitive (q, a, b) with delta*Q < q <= Q, a/q in B, |q f(a/q) - b|_inf <= psi.

    Exact for polynomial models.  For smooth models the residual test is
    float with a relative margin of 1e-9.
    """
    if Q < 1:
        raise PreconditionError("Q must be >= 1")
    if psi < 0:
        raise PreconditionError("psi must be >= 0")
    if not 0 <= delta < 1:
        raise PreconditionError("delta must satisfy 0 <= delta < 1")
    B = _check_box(M, B)
    tasks = [(M, qs, psi, B) for qs in _chunks(_q_range(Q, delta), workers)]
    pts = [p for part in _run_chunks(_scan_R_chunk, tasks, workers) for p in part]
    pts.sort()
    return pts


def count_R(M: Manifold, Q: int, psi: float, delta: float = 0.0, B: Box | None = None,
            keep_points: bool = False, workers: int = 1) -> CountReport:
    """N^delta(Q, psi, B), read as the number of elements of R^delta(Q, psi, B)."""
    t0 = time.perf_counter()
    pts = enumerate_R(M, Q, psi, delta, B, workers)
    per_q: dict = {}
    for p in pts:
        per_q[p.q] = per_q.get(p.q, 0) + 1
    return CountReport(Q, psi, delta, _check_box(M, B), len(pts), time.perf_counter() - t0,
                       pts if keep_points else None, per_q, 0, "R")


# -- counting near the manifold ---------------------------------------------

def _circle_dist_le(P: int, q: int, r: Fraction, eps: Fraction) -> bool:
    """Exact test |sqrt(P)/q - sqrt(r)| <= eps for integers P = |p|^2, q."""
    R = r * q * q
    e = eps * q
    # sqrt(P) <= sqrt(R) + e
    lhs = P - R - e * e
    upper = lhs <= 0 or lhs * lhs <= 4 * e * e * R
    if not upper:
        return False
    # sqrt(P) >= sqrt(R) - e
    if e * e >= R:
        return True
    lhs = R + e * e - P
    return lhs <= 0 or lhs * lhs <= 4 * e * e * R


def _count_circle_q(M: Manifold, q: int, eps: float, B: Box) -> tuple[int, list]:
    r = Fraction(dict(M.params)["r"])
    root = math.sqrt(float(r))
    e = Fraction(repr(float(eps)))  # the decimal the caller wrote
    lo, hi = float(B.lo[0]), float(B.hi[0])
    found = []
    a0 = math.floor((lo - eps) * q) - 1
    a1 = math.ceil((hi + eps) * q) + 1
    for a in range(a0, a1 + 1):
        u = a / q
        # points within eps of the circle have |v| within root +- eps
        inner = max(0.0, (root - eps) ** 2 - u * u)
        outer = (root + eps) ** 2 - u * u
        if outer < 0:
            continue
        b0 = math.floor(math.sqrt(inner) * q) - 1
        b1 = math.ceil(math.sqrt(outer) * q) + 1
        for b in range(max(b0, 0), b1 + 1):
            if math.gcd(q, a, b) != 1:
                continue
            P = a * a + b * b
            if P == 0 or not _circle_dist_le(P, q, r, e):
                continue
            # nearest point of the full circle is the radial projection; keep it if on the arc
            x_near = a * root / math.sqrt(P)
            if b > 0 and lo <= x_near <= hi:
                found.append((q, a, b))
    return len(found), found


def _nearest_sq_dist(M: Manifold, U: np.ndarray, V: np.ndarray, B: Box, iters: int = 40) -> np.ndarray:
    """Squared distance from points (U, V) to the graph of f over B by projected Newton."""
    d = M.d
    lo = np.array([float(v) for v in B.lo])
    hi = np.array([float(v) for v in B.hi])
    X = np.clip(U.copy(), lo, hi)
    unit = np.eye(d)
    alphas1 = [tuple(unit[i].astype(int)) for i in range(d)]
    for _ in range(iters):
        F = M.f_array(X)
        R = F - V
        J = np.stack([M.f_array(X, a) for a in alphas1], axis=2)  # (N, m, d)
        grad = (X - U) + np.einsum("nm,nmd->nd", R, J)
        H = np.broadcast_to(unit, (X.shape[0], d, d)).copy() + np.einsum("nmi,nmj->nij", J, J)
        for i in range(d):
            for j in range(i, d):
                alpha = [0] * d
                alpha[i] += 1
                alpha[j] += 1
                Hij = np.einsum("nm,nm->n", R, M.f_array(X, alpha))
                H[:, i, j] += Hij
                if i != j:
                    H[:, j, i] += Hij
        # keep the step a descent direction when curvature is lost
        w, _ = np.linalg.eigh(H)
        bad = w[:, 0] < 1e-3
        H[bad] += (1e-3 - w[bad, 0])[:, None, None] * unit
        step = np.linalg.solve(H, grad[..., None])[..., 0]
        Xn = np.clip(X - step, lo, hi)
        if np.max(np.abs(Xn - X), initial=0.0) < 1e-15:
            X = Xn
            break
        X = Xn
    F = M.f_array(X)
    return np.sum((X - U) ** 2, axis=1) + np.sum((F - V) ** 2, axis=1)


def _within_exact(M: Manifold, q: int, a: int, b: Sequence[int], eps: float, B: Box) -> bool:
    """Exact dist((a, b)/q, graph over B) <= eps for a polynomial curve.

    With h(t) = (t - a/q)^2 + |f(t) - b/q|^2 - eps^2 the question is whether
    h <= 0 somewhere on B: at an endpoint or at a real root inside, found by
    exact root counting.  A float eps is read as its shortest decimal.
    """
    t = M.symbols[0]
    e = sp.Rational(repr(float(eps)))  # 0.02 means 1/50
    h = (t - sp.Rational(a, q)) ** 2 + sum((f - sp.Rational(bl, q)) ** 2 for f, bl in zip(M.exprs, b)) - e ** 2
    P = sp.Poly(sp.expand(h), t, domain="QQ")
    lo, hi = (sp.Rational(str(Fraction(B.lo[0]))), sp.Rational(str(Fraction(B.hi[0]))))
    if P.eval(lo) <= 0 or P.eval(hi) <= 0:
        return True
    return P.count_roots(lo, hi) > 0


def _count_monge_q(M: Manifold, q: int, eps: float, B: Box, c1: float, K2: float) -> tuple[int, int, list]:
    pad = eps
    A = _a_grid(q, B, pad)
    if len(A) == 0:
        return 0, 0, []
    dom_lo = np.array([float(v) for v in M.domain.lo])
    dom_hi = np.array([float(v) for v in M.domain.hi])
    U = A / q
    Uc = np.clip(U, dom_lo, dom_hi)
    Fu = M.f_array(Uc)
    # p/q within eps of (x, f(x)) with x in B forces |v - f(u)| <= eps (1 + c1)
    width = eps * (1 + c1) + np.max(np.abs(U - Uc), axis=1, initial=0.0)[:, None] * c1
    lo = np.ceil((Fu - width) * q - 1e-9).astype(np.int64)
    hi = np.floor((Fu + width) * q + 1e-9).astype(np.int64)
    found = []
    accepted = 0
    ambiguous = 0
    span = hi - lo + 1
    # expand candidates
    counts = np.prod(np.maximum(span, 0), axis=1)
    idx = np.repeat(np.arange(len(A)), counts)
    if len(idx) == 0:
        return 0, 0, []
    offs = np.arange(len(idx)) - np.repeat(np.cumsum(counts) - counts, counts)
    Bv = np.empty((len(idx), M.m), dtype=np.int64)
    rem = offs.copy()
    for l in range(M.m - 1, -1, -1):
        s = span[idx, l]
        Bv[:, l] = lo[idx, l] + rem % s
        rem //= s
    Av = A[idx]
    g = np.gcd(np.int64(q), np.gcd.reduce(np.concatenate([Av, Bv], axis=1), axis=1))
    prim = g == 1
    Av, Bv = Av[prim], Bv[prim]
    Uv = Av / q
    Vv = Bv / q
    inside = np.all((Uv >= np.array([float(v) for v in B.lo])) & (Uv <= np.array([float(v) for v in B.hi])), axis=1)
    # vertical residual is an upper bound on the distance when u lies in B
    Ucl = np.clip(Uv, dom_lo, dom_hi)
    h = np.sqrt(np.sum((Vv - M.f_array(Ucl)) ** 2, axis=1))
    hi_eps = eps * (1 + 1e-6)
    lo_eps = eps * (1 - 1e-6)
    sure = inside & (h <= lo_eps)
    # graphs of L-Lipschitz maps: dist >= vertical residual / sqrt(1 + L^2), L local to u
    J2 = np.zeros(len(Uv))
    for i in range(M.d):
        alpha = tuple(1 if j == i else 0 for j in range(M.d))
        J2 += np.sum(M.f_array(Ucl, alpha) ** 2, axis=1)
    L = np.sqrt(J2) + K2 * (eps + np.max(np.abs(Uv - Ucl), axis=1, initial=0.0))
    far = h > hi_eps * np.sqrt(1 + L * L)
    maybe = ~sure & ~far
    if np.any(maybe):
        D2 = _nearest_sq_dist(M, Uv[maybe], Vv[maybe], B)
        D = np.sqrt(np.maximum(D2, 0.0))
        acc = D <= lo_eps
        amb = (D > lo_eps) & (D < hi_eps)
        sel = sure.copy()
        sel[np.nonzero(maybe)[0][acc]] = True
        if M.is_polynomial and M.d == 1 and np.any(amb):
            for i in np.nonzero(maybe)[0][amb]:
                if _within_exact(M, q, int(Av[i, 0]), [int(v) for v in Bv[i]], eps, B):
                    sel[i] = True
            amb[:] = False
        ambiguous = int(np.count_nonzero(amb))
    else:
        sel = sure
    accepted = int(np.count_nonzero(sel))
    found = [(q, tuple(int(v) for v in a), tuple(int(v) for v in b)) for a, b in zip(Av[sel], Bv[sel])]
    return accepted, ambiguous, found


def _count_chunk(args):
    M, qs, eps, B, c1, K2, keep = args
    res = []
    for q in qs:
        if M.name == "circle":
            c, pts = _count_circle_q(M, q, eps, B)
            amb = 0
        else:
            c, amb, pts = _count_monge_q(M, q, eps, B, c1, K2)
        res.append((q, c, amb, pts if keep else None))
    return res


def count_N(M: Manifold, Q: int, eps: float, B: Box | None = None, keep_points: bool = False,
            workers: int = 1) -> CountReport:
    """Number of rational points p/q (1 <= q <= Q) within distance eps of the graph over B.

    Circles use the exact test | |p/q| - sqrt(r) | <= eps (the radial
    projection must land on the arc).  Other models refine the vertical
    residual by projected Newton; values within a relative 1e-6 band of eps
    are settled by exact root counting on polynomial curves and otherwise
    left out of the count and reported as ``ambiguous``.
    """
    if Q < 1:
        raise PreconditionError("Q must be >= 1")
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    t0 = time.perf_counter()
    B = _check_box(M, B)
    padded = Box(tuple(max(float(a) - eps, float(l)) for a, l in zip(B.lo, M.domain.lo)),
                 tuple(min(float(b) + eps, float(h)) for b, h in zip(B.hi, M.domain.hi)))
    c1 = K2 = 0.0
    if M.name != "circle":
        c1 = M.lipschitz(padded)
        # bound on the norm of the second derivative, for local Lipschitz constants
        K2 = math.sqrt(M.m) * M.d * M.derivative_bound(padded)
    tasks = [(M, qs, eps, B, c1, K2, keep_points) for qs in _chunks(range(1, Q + 1), workers)]
    rows = [r for part in _run_chunks(_count_chunk, tasks, workers) for r in part]
    per_q = {q: c for q, c, _, _ in rows if c}
    amb = sum(a for _, _, a, _ in rows)
    pts = sorted(p for *_, ps in rows if ps for p in ps) if keep_points else None
    return CountReport(Q, eps, 0.0, B, sum(per_q.values()), time.perf_counter() - t0, pts, per_q,
                       amb, "N")


def prefix_counts(report: CountReport, Qs: Iterable[int]) -> list[tuple[int, int]]:
    """Counts for smaller Q read off a single report (valid because eps does not depend on q)."""
    per_q = report.per_q or {}
    out = []
    for Q in Qs:
        if Q > report.Q:
            raise PreconditionError(f"Q = {Q} exceeds the report's Q = {report.Q}")
        out.append((Q, sum(c for q, c in per_q.items() if q <= Q)))
    return out


# -- coverage ------------------------------------------------------------------

def covered_mask(centers: np.ndarray, rho: float, X: np.ndarray) -> np.ndarray:
    """Which rows of X lie in some open sup-norm ball B(center, rho)."""
    X = np.atleast_2d(X)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.size == 0:
        return np.zeros(len(X), dtype=bool)
    if X.shape[1] == 1:
        c = np.unique(centers[:, 0])
        x = X[:, 0]
        j = np.searchsorted(c, x)
        left = np.abs(x - c[np.clip(j - 1, 0, len(c) - 1)])
        right = np.abs(c[np.clip(j, 0, len(c) - 1)] - x)
        return np.minimum(left, right) < rho
    out = np.zeros(len(X), dtype=bool)
    for c in centers:
        out |= np.all(np.abs(X - c) < rho, axis=1)
    return out


def coverage_measure(M: Manifold, Q: int, psi: float, delta: float, rho: float, B: Box | None = None,
                     grid_h: float | None = None, points: Sequence[RationalPoint] | None = None,
                     workers: int = 1) -> float:
    """Grid measure of the union of B(a/q, rho) over R^delta(Q, psi, B), relative to B."""
    B = _check_box(M, B)
    if grid_h is None:
        grid_h = rho / 10
    if not grid_h <= rho / 10 * (1 + 1e-12):
        raise PreconditionError(f"grid_h = {float(grid_h):.3g} is coarser than rho/10 = {rho / 10:.3g}")
    if points is None:
        points = enumerate_R(M, Q, psi, delta, B, workers)
    X = B.grid(grid_h)
    centers = np.array([[ai / p.q for ai in p.a] for p in points], dtype=float).reshape(-1, M.d)
    return float(np.mean(covered_mask(centers, rho, X)))


# -- exponent fits ---------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    width: float
    r2: float
    residuals: tuple

    def within(self, target: float, tol: float) -> bool:
        return abs(self.slope - target) <= tol


def exponent_fit(series: Sequence[tuple[float, float]]) -> FitResult:
    """Least-squares slope of log(count) against log(Q) with a 95% half-width."""
    pts = list(series)
    if len(pts) < 4:
        raise PreconditionError("need at least 4 points")
    if any(c <= 0 for _, c in pts):
        raise PreconditionError("counts must be positive")
    lx = np.log([float(q) for q, _ in pts])
    ly = np.log([float(c) for _, c in pts])
    fit = stats.linregress(lx, ly)
    tcrit = stats.t.ppf(0.975, len(pts) - 2)
    resid = ly - (fit.intercept + fit.slope * lx)
    return FitResult(float(fit.slope), float(fit.intercept), float(tcrit * fit.stderr),
                     float(fit.rvalue ** 2), tuple(float(r) for r in resid))
