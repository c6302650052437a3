"""Integer points in smoothly varying parallelepipeds.

A family x -> G(x) in GL_k(R) and weights theta_1..theta_k define the
parallelepipeds |sum_j g_ij(x) a_j| <= theta_i.  A(G, theta) is the set of
x whose parallelepiped holds a non-zero integer point.  This module decides
membership exactly, estimates the measure of A on grids, computes the
theta-weights and fits (C, alpha)-good constants.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from . import multivector as mv
from ._lattice import ellipsoid_points
from .errors import DomainError, InvariantViolation, PreconditionError
from .manifold import Box
from .rats import FitResult, exponent_fit


# -- weights -------------------------------------------------------------------

@dataclass(frozen=True)
class WeightProfile:
    """A k-tuple of positive weights with its geometric mean and Theta-tilde."""

    thetas: tuple

    def __post_init__(self):
        if not self.thetas:
            raise PreconditionError("empty weight profile")
        if any(t <= 0 for t in self.thetas):
            raise PreconditionError("weights must be positive")

    @property
    def k(self) -> int:
        return len(self.thetas)

    @property
    def exact(self) -> bool:
        return all(isinstance(t, (int, Fraction)) for t in self.thetas)

    @property
    def theta_pow_k(self):
        """theta^k = theta_1 ... theta_k (exact for rational weights)."""
        out = Fraction(1) if self.exact else 1.0
        for t in self.thetas:
            out *= t
        return out

    @property
    def theta(self) -> float:
        return math.exp(sum(math.log(float(t)) for t in self.thetas) / self.k)

    def scaled(self, t) -> "WeightProfile":
        return WeightProfile(tuple(th * t for th in self.thetas))

    def tilde_pow_k(self):
        """Theta-tilde^k = max over r of (theta_1...theta_r)^k / (theta^k)^r."""
        P = self.theta_pow_k
        best = None
        acc = Fraction(1) if self.exact else 1.0
        for r in range(1, self.k):
            acc = acc * self.thetas[r - 1]
            v = acc ** self.k / P ** r
            best = v if best is None or v > best else best
        return best

    @property
    def tilde(self) -> float:
        if self.k == 1:
            raise PreconditionError("Theta-tilde needs k >= 2")
        return float(self.tilde_pow_k()) ** (1 / self.k)

    @property
    def is_sorted(self) -> bool:
        return all(a <= b for a, b in zip(self.thetas, self.thetas[1:]))

    def ratio_bound_pow_k(self):
        """theta_{k-1} / theta_k, the k-th power of the sorted-weights bound on Theta-tilde."""
        a, b = self.thetas[-2], self.thetas[-1]
        return Fraction(a) / Fraction(b) if self.exact else a / b


# -- families --------------------------------------------------------------------

class ParallelepipedFamily:
    """x -> G(x), rows g_1(x)..g_k(x), on a domain box.

    Families built from sympy expressions pickle by their expressions, so
    grid loops can be spread over worker processes.
    """

    def __init__(self, k: int, G: Callable[[Sequence], np.ndarray] | None, domain: Box,
                 exprs: Sequence[Sequence[str]] | None = None, symbols: Sequence[str] | None = None,
                 name: str = "family"):
        self.k = k
        self.domain = domain
        self.name = name
        self.exprs = None if exprs is None else tuple(tuple(str(e) for e in row) for row in exprs)
        self.symbols = None if symbols is None else tuple(symbols)
        self._G = G
        self._sym = None
        if G is None and exprs is None:
            raise PreconditionError("family needs a callable or expressions")

    def __reduce__(self):
        if self.exprs is None:
            raise TypeError("callable-only families do not pickle; use workers=1")
        return (ParallelepipedFamily, (self.k, None, self.domain, self.exprs, self.symbols, self.name))

    def _compile(self):
        syms = sp.symbols(self.symbols)
        mat = sp.Matrix([[sp.sympify(e) for e in row] for row in self.exprs])
        self._sym = (syms, mat)
        f = sp.lambdify(syms, mat, "numpy")
        self._G = lambda x: np.array(f(*[float(v) for v in x]), dtype=float)

    def G(self, x: Sequence) -> np.ndarray:
        if self._G is None:
            self._compile()
        out = np.asarray(self._G(x), dtype=float)
        if out.shape != (self.k, self.k):
            raise PreconditionError(f"G(x) has shape {out.shape}, expected {(self.k, self.k)}")
        return out

    def symbolic(self) -> sp.Matrix:
        if self.exprs is None:
            raise PreconditionError("family has no symbolic form")
        if self._sym is None:
            self._compile()
        return self._sym[1]

    def det_check(self, per_axis: int = 33) -> float:
        """Smallest |det G| on a sample grid; raises if it vanishes."""
        vals = [abs(np.linalg.det(self.G(x))) for x in self.domain.sample_grid(per_axis)]
        low = min(vals)
        if low < 1e-12:
            raise PreconditionError(f"G is singular somewhere on the domain (|det| = {low:.3g})")
        return low


def wronski_family(funcs: Sequence[str], domain: Box, var: str = "x", base: float | None = None) -> ParallelepipedFamily:
    """Rows are successive derivatives: G(x) = (g_j^(i-1)(x))."""
    x = sp.Symbol(var)
    g = [sp.sympify(s, locals={var: x}) for s in funcs]
    k = len(g)
    rows = [[sp.diff(gj, x, i) if i else gj for gj in g] for i in range(k)]
    fam = ParallelepipedFamily(k, None, domain, rows, (var,), name="wronski(" + ", ".join(funcs) + ")")
    x0 = domain.center[0] if base is None else base
    W = sp.Matrix(rows).det().subs(x, x0)
    if abs(complex(sp.N(W))) < 1e-12:
        raise PreconditionError(f"Wronskian vanishes at the base point {x0}")
    return fam


def _as_profile(theta) -> WeightProfile:
    return theta if isinstance(theta, WeightProfile) else WeightProfile(tuple(theta))


# -- membership ------------------------------------------------------------------

def _check_G(P: ParallelepipedFamily, x) -> np.ndarray:
    if not P.domain.contains(x, slack=1e-12):
        raise DomainError(f"x = {tuple(x)} is outside the family's domain")
    G = P.G(x)
    if abs(np.linalg.det(G)) < 1e-14:
        raise PreconditionError(f"G(x) is singular at x = {tuple(x)}")
    return G


def _in_box(G: np.ndarray, th: np.ndarray, a) -> bool:
    return bool(np.all(np.abs(G @ np.asarray(a, dtype=float)) <= th * (1 + 1e-12)))


def solutions_A(P: ParallelepipedFamily, theta, x) -> list[tuple[int, ...]]:
    """Non-zero integer points of the parallelepiped at x, one per sign pair."""
    G = _check_G(P, x)
    th = np.asarray([float(t) for t in _as_profile(theta).thetas])
    Gs = G / th[:, None]
    out = []
    # the parallelepiped sits inside the ellipsoid |G a / theta|_2^2 <= k
    for a in ellipsoid_points(Gs.T @ Gs, float(P.k)):
        if any(a) and a[next(i for i, c in enumerate(a) if c)] > 0 and _in_box(G, th, a):
            out.append(a)
    return out


def membership_A(P: ParallelepipedFamily, theta, x) -> bool:
    """Whether x lies in A(G, theta): some non-zero integer a has |G(x) a|_i <= theta_i for all i."""
    G = _check_G(P, x)
    th = np.asarray([float(t) for t in _as_profile(theta).thetas])
    Gs = G / th[:, None]
    for a in ellipsoid_points(Gs.T @ Gs, float(P.k)):
        if any(a) and _in_box(G, th, a):
            return True
    return False


def scan_bound(P: ParallelepipedFamily, theta, x) -> int:
    G = _check_G(P, x)
    th = _as_profile(theta).thetas
    return int(math.ceil(np.linalg.norm(np.linalg.inv(G), np.inf) * float(max(th))))


def membership_A_bruteforce(P: ParallelepipedFamily, theta, x, bound: int | None = None) -> bool:
    """Oracle: every a with |a|_inf <= ceil(|G^-1|_inf max theta), which holds all solutions."""
    G = _check_G(P, x)
    th = np.asarray([float(t) for t in _as_profile(theta).thetas])
    R = scan_bound(P, theta, x) if bound is None else bound
    rng = np.arange(-R, R + 1)
    k = P.k
    # vectorise over the last coordinate, loop over the rest
    for head in product(rng, repeat=k - 1):
        A = np.empty((len(rng), k))
        A[:, :-1] = head
        A[:, -1] = rng
        ok = np.all(np.abs(A @ G.T) <= th * (1 + 1e-12), axis=1)
        ok &= np.any(A != 0, axis=1)
        if ok.any():
            return True
    return False


def membership_A_lattice(P: ParallelepipedFamily, theta, x) -> bool:
    """Lattice form: delta(h Z^k) <= theta with h = g_t G(x), g_t = diag(theta / theta_i), det g_t = 1."""
    G = _check_G(P, x)
    W = _as_profile(theta)
    th = np.asarray([float(t) for t in W.thetas])
    h = np.diag(W.theta / th) @ G
    target = W.theta
    # sup-norm shortest vector of h Z^k, searched inside the euclidean ball of radius sqrt(k) target
    best = math.inf
    for a in ellipsoid_points(h.T @ h, P.k * target ** 2):
        if any(a):
            best = min(best, float(np.max(np.abs(h @ np.asarray(a, dtype=float)))))
    return best <= target * (1 + 1e-12)


# -- measure ---------------------------------------------------------------------

def default_grid_h(P: ParallelepipedFamily, theta, B: Box, per_axis: int = 17) -> float:
    """min theta_i / (10 max row norm of G) over a sample of B."""
    th = _as_profile(theta).thetas
    rn = max(float(np.max(np.linalg.norm(P.G(x), axis=1))) for x in B.sample_grid(per_axis))
    return float(min(th)) / (10 * rn)


def _membership_chunk(args) -> np.ndarray:
    P, theta, X = args
    return np.array([membership_A(P, theta, x) for x in X], dtype=bool)


def measure_A(P: ParallelepipedFamily, theta, B: Box | None = None, grid_h: float | None = None,
              workers: int = 1, enforce_grid: bool = True) -> float:
    """Grid fraction of B lying in A(G, theta)."""
    B = P.domain if B is None else B
    need = default_grid_h(P, theta, B)
    if grid_h is None:
        grid_h = need
    elif enforce_grid and grid_h > need * (1 + 1e-12):
        raise PreconditionError(f"grid_h = {float(grid_h):.3g} is coarser than the resolution rule {need:.3g}")
    X = B.grid(grid_h)
    if workers > 1 and P.exprs is not None:
        parts = np.array_split(X, workers)
        with ProcessPoolExecutor(workers) as ex:
            mask = np.concatenate(list(ex.map(_membership_chunk, [(P, theta, p) for p in parts])))
    else:
        mask = _membership_chunk((P, theta, X))
    return float(mask.mean())


@dataclass(frozen=True)
class DecayReport:
    scales: tuple
    fractions: tuple
    fit: FitResult | None

    @property
    def alpha(self) -> float:
        return math.nan if self.fit is None else self.fit.slope

    @property
    def strictly_decreasing(self) -> bool:
        return all(a > b for a, b in zip(self.fractions, self.fractions[1:]))


def decay(P: ParallelepipedFamily, theta, B: Box | None = None, halvings: int = 4,
          grid_h: float | None = None, workers: int = 1) -> DecayReport:
    """Fractions for theta, theta/2, ..., theta/2^halvings and the log-log slope against t.

    The same grid (fine enough for the smallest weights) is used at every scale.
    """
    W = _as_profile(theta)
    B = P.domain if B is None else B
    scales = tuple(2.0 ** -j for j in range(halvings + 1))
    if grid_h is None:
        grid_h = default_grid_h(P, W.scaled(scales[-1]), B)
    fr = tuple(measure_A(P, W.scaled(t), B, grid_h, workers, enforce_grid=False) for t in scales)
    pos = [(t, f) for t, f in zip(scales, fr) if f > 0]
    fit = exponent_fit(pos) if len(pos) >= 4 else None
    return DecayReport(scales, fr, fit)


# -- theta weights ---------------------------------------------------------------

def _direct_sum(Vw: mv.MultiVector, rows: np.ndarray, tol: float = 1e-9) -> bool:
    gw = mv.wedge_all([mv.vector(list(map(float, r))) for r in rows], Vw.k)
    w = mv.wedge(Vw, gw)
    scale = mv.norm(Vw) * float(np.prod(np.linalg.norm(rows, axis=1)))
    return mv.norm(w) > tol * max(scale, 1e-300)


def theta_weight(P: ParallelepipedFamily, theta, x, V: mv.Subspace) -> float:
    """Theta(x, V): least theta^-r prod theta_j over index sets J whose rows complement V."""
    W = _as_profile(theta)
    k = P.k
    if V.k != k:
        raise PreconditionError("subspace lives in the wrong dimension")
    r = V.codim
    if not 1 <= r < k:
        raise PreconditionError(f"codim V must be in [1, {k - 1}], got {r}")
    G = _check_G(P, x)
    Vw = V.multivector()
    logt = math.log(W.theta)
    best = math.inf
    for J in combinations(range(k), r):
        if _direct_sum(Vw, G[list(J)]):
            val = math.exp(sum(math.log(float(W.thetas[j])) for j in J) - r * logt)
            best = min(best, val)
    if best == math.inf:
        raise InvariantViolation("no complementing index set for an invertible G")
    return best


def sample_subspaces(k: int, count: int, rng: np.random.Generator) -> list[mv.Subspace]:
    """Coordinate subspaces of every codimension plus random ones."""
    out = []
    for r in range(1, k):
        for keep in combinations(range(k), k - r):
            out.append(mv.Subspace(k, [np.eye(k)[i] for i in keep]))
    for _ in range(count):
        r = int(rng.integers(1, k))
        out.append(mv.Subspace(k, list(rng.standard_normal((k - r, k)))))
    return out


@dataclass(frozen=True)
class ThetaHat:
    value: float
    trace: tuple
    stable: bool


def theta_hat(P: ParallelepipedFamily, theta, x0: Sequence, radii: Sequence[float] = (1e-1, 3e-2, 1e-2, 3e-3),
              subspaces: Sequence[mv.Subspace] | None = None, per_axis: int = 9, n_random: int = 24,
              seed: int = 0) -> ThetaHat:
    """Estimate of sup_V liminf_{x -> x0} Theta(x, V) from a shrinking radius trace."""
    radii = list(radii)
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise PreconditionError("radii must decrease")
    if subspaces is None:
        subspaces = sample_subspaces(P.k, n_random, np.random.default_rng(seed))
    trace = []
    for rad in radii:
        near = Box.ball(x0, rad).intersect(P.domain)
        X = near.sample_grid(per_axis)
        trace.append(max(min(theta_weight(P, theta, x, V) for x in X) for V in subspaces))
    stable = len(trace) >= 2 and math.isclose(trace[-1], trace[-2], rel_tol=1e-9)
    return ThetaHat(trace[-1], tuple(trace), stable)


def hierarchic_density(P: ParallelepipedFamily, V: mv.Subspace, X: np.ndarray) -> float:
    """Fraction of the points x with V + span(g_1(x)..g_r(x)) = R^k, r = codim V."""
    r = V.codim
    Vw = V.multivector()
    hits = [_direct_sum(Vw, P.G(x)[:r]) for x in X]
    return float(np.mean(hits))


# -- (C, alpha)-good -------------------------------------------------------------

@dataclass(frozen=True)
class GoodnessEstimate:
    alpha: float
    C: float
    worst_ball: Box | None
    worst_eps: float | None


def good_estimate(f: Callable[[np.ndarray], np.ndarray], B: Box, alpha: float,
                  eps_grid: Sequence[float] | None = None, n_balls: int = 24, resolution: int = 20000,
                  seed: int = 0) -> GoodnessEstimate:
    """Largest mu{|f| < eps sup|f|} / (eps^alpha mu(ball)) over B, random sub-boxes and an eps grid.

    ``f`` maps an (N, d) array to N values.  Measures are grid fractions with
    ``resolution`` cell-centred points per ball.
    """
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    eps_grid = list(np.geomspace(1e-3, 1, 31)) if eps_grid is None else list(eps_grid)
    rng = np.random.default_rng(seed)
    balls = [B]
    lo, hi = np.array(B.lo, dtype=float), np.array(B.hi, dtype=float)
    for _ in range(n_balls):
        a = rng.uniform(lo, hi)
        b = rng.uniform(lo, hi)
        l, h = np.minimum(a, b), np.maximum(a, b)
        if np.all(h - l > 1e-6):
            balls.append(Box(tuple(l), tuple(h)))
    best, where, at = 0.0, None, None
    for ball in balls:
        per = max(2, int(round(resolution ** (1 / ball.dim))))
        h = float(min(np.array(ball.hi) - np.array(ball.lo))) / per
        X = ball.grid(h)
        v = np.abs(np.asarray(f(X), dtype=float).reshape(len(X)))
        sup = float(v.max())
        if sup == 0:
            raise PreconditionError(f"f vanishes on the sampled ball {ball}")
        for eps in eps_grid:
            ratio = float(np.mean(v < eps * sup)) / eps ** alpha
            if ratio > best:
                best, where, at = ratio, ball, float(eps)
    return GoodnessEstimate(alpha, best, where, at)


__all__ = ["WeightProfile", "ParallelepipedFamily", "wronski_family", "solutions_A", "membership_A",
           "membership_A_bruteforce", "membership_A_lattice", "scan_bound", "measure_A", "default_grid_h",
           "decay", "DecayReport", "theta_weight", "sample_subspaces", "theta_hat", "ThetaHat",
           "hierarchic_density", "good_estimate", "GoodnessEstimate"]
