"""Minkowski bodies at a frame and the detection of nearby rational points.

At a frame (y, g, u) the body

    |g.r|/|g| < psi*,   |u.r|/|u| < (psi*^m Q*)^(-1/d),   |y.r|/|y| <= kappa Q*

is convex and symmetric with volume 2^(n+1) kappa v_m v_d.  Once
kappa >= kappa0 = (v_d v_m)^-1 it holds a non-zero integer point, and a
primitive such point with r0 > 0 is the rational point that detection
returns.  Parameters x whose kappa-body is free of integer points make up
the good set G_f.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from . import multivector as mv
from ._lattice import ellipsoid_points
from .errors import InvariantViolation, PreconditionError
from .frames import Frame, K_const, frame_at
from .manifold import Box, Manifold
from .rats import RationalPoint

SIZE_RULES = ("local", "uniform")


def ball_volume(j: int) -> float:
    """Volume v_j of the j-ball of diameter 1."""
    return math.pi ** (j / 2) / (2 ** j * math.gamma(j / 2 + 1))


def ball_volume_exact(j: int) -> sp.Expr:
    return sp.pi ** sp.Rational(j, 2) / (2 ** j * sp.gamma(sp.Rational(j, 2) + 1))


def kappa0(d: int, m: int) -> float:
    if d < 1 or m < 1:
        raise PreconditionError(f"kappa0 needs d, m >= 1, got d={d}, m={m}")
    return 1.0 / (ball_volume(d) * ball_volume(m))


def default_c0(d: int, m: int, C: float, r_B: float, rule: str = "uniform") -> float:
    """The max-of-four absorbing constant; the uniform rule cubes it and divides by min(1, r_B)."""
    n = d + m
    k0 = kappa0(d, m)
    e0 = min(1.0, r_B) / (4 * d * (n + 1) * C)
    K = 14 * (n + 1) ** 3 * (C + 1) ** 5 * d ** 2
    c = max(e0 ** -2, k0 + 1, 16 * C ** 2 * (n + 1) ** 4, 6 * K * (k0 + 1) * (n + 1) ** 2 * C ** 2)
    if rule == "uniform":
        return c ** 3 / min(1.0, r_B)
    return c


@dataclass(frozen=True)
class CellParams:
    """Scale parameters (Q*, psi*, kappa) and the constants derived from them.

    ``c0`` defaults to the conservative closed form; an explicit value is an
    empirical override and is reported as such.
    """

    Q_star: float
    psi_star: float
    kappa: float
    d: int
    m: int
    C: float = 1.0
    r_B: float = 1.0
    c0: float | None = None
    size_rule: str = "uniform"

    def __post_init__(self):
        if self.size_rule not in SIZE_RULES:
            raise PreconditionError(f"size_rule must be one of {SIZE_RULES}")
        if not 0 < self.kappa:
            raise PreconditionError("kappa must be positive")
        if self.Q_star <= 0 or self.psi_star <= 0:
            raise PreconditionError("Q* and psi* must be positive")

    @classmethod
    def for_frame(cls, F: Frame, Q_star, psi_star, kappa=None, **kw) -> "CellParams":
        kw.setdefault("C", F.C)
        kw.setdefault("r_B", float(F.box.radius))
        if kappa is None:
            kappa = default_kappa(F.d, F.m)
        return cls(Q_star, psi_star, kappa, F.d, F.m, **kw)

    @property
    def n(self) -> int:
        return self.d + self.m

    @property
    def kappa0(self) -> float:
        return kappa0(self.d, self.m)

    @property
    def c0_overridden(self) -> bool:
        return self.c0 is not None

    @property
    def c0_value(self) -> float:
        if self.c0 is not None:
            return float(self.c0)
        return default_c0(self.d, self.m, self.C, self.r_B, self.size_rule)

    @property
    def eps0(self) -> float:
        return min(1.0, self.r_B) / (4 * self.d * (self.n + 1) * self.C)

    @property
    def K(self) -> float:
        return 14 * (self.n + 1) ** 3 * (self.C + 1) ** 5 * self.d ** 2

    @property
    def Q(self) -> float:
        return self.c0_value * self.Q_star

    @property
    def psi(self) -> float:
        c0, k = self.c0_value, self.kappa
        if self.size_rule == "local":
            return c0 ** 3 * self.psi_star / k ** 2
        return c0 * self.psi_star / k ** 2

    @property
    def delta0(self) -> float:
        c0 = self.c0_value
        return self.kappa / (c0 ** 2 if self.size_rule == "local" else c0)

    @property
    def rho(self) -> float:
        d, m = self.d, self.m
        return self.c0_value / self.kappa ** 2 * (self.psi_star ** m * self.Q_star ** (d + 1)) ** (-1 / d)

    @property
    def thresholds(self) -> tuple[float, float, float]:
        base = self.psi_star ** self.m * self.Q_star
        tu = 1 / base if self.d == 1 else base ** (-1 / self.d)
        return (self.psi_star, tu, self.kappa * self.Q_star)

    def psi_window(self) -> tuple[float, float]:
        """Admissible psi* range for the current kappa and Q*."""
        n, d = self.n, self.d
        return (self.kappa ** (-d / (2 * n - d)) * self.Q_star ** (-(d + 2) / (2 * n - d)), 1.0)

    def admissible(self) -> bool:
        lo, hi = self.psi_window()
        return self.kappa < 1 and lo <= self.psi_star <= hi

    def size_ok(self) -> bool:
        c0, k = self.c0_value, self.kappa
        if self.size_rule == "local":
            return self.Q_star >= max(c0 / k ** 2, c0 ** 2 / (k ** 4 * self.r_B))
        return self.Q_star >= 4 * c0 ** 2 / k ** 4

    def with_kappa(self, kappa: float) -> "CellParams":
        return replace(self, kappa=kappa)

    def report(self) -> dict:
        return {"Q_star": self.Q_star, "psi_star": self.psi_star, "kappa": self.kappa,
                "kappa0": self.kappa0, "c0": self.c0_value, "c0_overridden": self.c0_overridden,
                "Q": self.Q, "psi": self.psi, "delta0": self.delta0, "rho": self.rho,
                "size_rule": self.size_rule, "admissible": self.admissible(), "size_ok": self.size_ok()}


def default_kappa(d: int, m: int) -> float:
    return 0.5 * min(1.0, kappa0(d, m))


# -- the body ----------------------------------------------------------------

@dataclass(frozen=True)
class CellBody:
    """The three linear-form thresholds of the body at one frame."""

    frame: Frame
    t_g: float
    t_u: float
    t_y: float
    params: CellParams = field(repr=False)

    @classmethod
    def at(cls, F: Frame, P: CellParams, kappa: float | None = None) -> "CellBody":
        P = P if kappa is None else P.with_kappa(kappa)
        tg, tu, ty = P.thresholds
        return cls(F, tg, tu, ty, P)

    @property
    def volume(self) -> float:
        d, m = self.frame.d, self.frame.m
        return (ball_volume(m) * (2 * self.t_g) ** m) * (ball_volume(d) * (2 * self.t_u) ** d) * (2 * self.t_y)

    def projectors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Orthogonal projectors onto V(g), V(u), V(y), built from y and its partials by QR."""
        F = self.frame
        y = F.y.to_array()
        A = np.array([y, *[v.to_array() for v in F.dy]]).T
        Qm, _ = np.linalg.qr(A)
        P_tan = Qm @ Qm.T
        P_y = np.outer(y, y) / (y @ y)
        return np.eye(len(y)) - P_tan, P_tan - P_y, P_y

    def quadratic_form(self) -> np.ndarray:
        Pg, Pu, Py = self.projectors()
        return Pg / self.t_g ** 2 + Pu / self.t_u ** 2 + Py / self.t_y ** 2

    def form_values(self, r) -> tuple:
        """Squared ratios (|g.r|^2/|g|^2, |u.r|^2/|u|^2, (y.r)^2/|y|^2); exact for exact frames."""
        F = self.frame
        rv = mv.as_vector(r, F.n + 1)
        vals = []
        for w in (F.g, F.u, F.y):
            num, den = mv.norm_sq(mv.interior(w, rv)), mv.norm_sq(w)
            if w.exact and rv.exact:
                vals.append(Fraction(num) / Fraction(den))
            else:
                vals.append(float(num) / float(den))
        return tuple(vals)

    def contains(self, r) -> bool:
        sg, su, sy = self.form_values(r)
        P = self.params
        if all(isinstance(v, Fraction) for v in (sg, su, sy)):
            ps, Qs, k = Fraction(P.psi_star), Fraction(P.Q_star), Fraction(P.kappa)
            # |u.r|/|u| < (psi*^m Q*)^(-1/d)  <=>  su^d (psi*^m Q*)^2 < 1
            return (sg < ps * ps and su ** P.d * (ps ** P.m * Qs) ** 2 < 1 and sy <= (k * Qs) ** 2)
        return (sg < self.t_g ** 2 and su < self.t_u ** 2 and sy <= self.t_y ** 2 * (1 + 1e-12))


def body_volumes(d: int, m: int, Q_star, psi_star, kappa, exact: bool = False):
    """Volumes of the three factor balls and their product next to 2^(n+1) kappa v_m v_d."""
    if exact:
        Qs, ps, k = (sp.nsimplify(v) if not isinstance(v, Fraction) else sp.Rational(v.numerator, v.denominator)
                     for v in (Q_star, psi_star, kappa))
        vm, vd = ball_volume_exact(m), ball_volume_exact(d)
        tu = (ps ** m * Qs) ** sp.Rational(-1, d)
    else:
        Qs, ps, k = float(Q_star), float(psi_star), float(kappa)
        vm, vd = ball_volume(m), ball_volume(d)
        tu = (ps ** m * Qs) ** (-1 / d)
    parts = (vm * (2 * ps) ** m, vd * (2 * tu) ** d, 2 * k * Qs)
    prod = parts[0] * parts[1] * parts[2]
    target = 2 ** (d + m + 1) * k * vm * vd
    if exact:
        prod, target = sp.simplify(prod), sp.simplify(target)
    return parts, prod, target


# -- search ------------------------------------------------------------------

def _normalize(r: Sequence[int]) -> tuple[int, ...]:
    g = math.gcd(*r)
    r = [v // g for v in r]
    lead = next(v for v in r if v != 0)
    if lead < 0:
        r = [-v for v in r]
    return tuple(r)


def _pick(sols: set) -> tuple[int, ...] | None:
    if not sols:
        return None
    return min(sols, key=lambda r: (sum(v * v for v in r), r))


def integer_points(F: Frame, P: CellParams, kappa: float | None = None) -> list[tuple[int, ...]]:
    """All non-zero integer solutions of the body (up to sign), by ellipsoid enumeration.

    The body lies inside the ellipsoid r^T M r <= 3 with M the sum of the
    scaled projectors, so the enumeration is complete.
    """
    body = CellBody.at(F, P, kappa)
    out = set()
    for v in ellipsoid_points(body.quadratic_form(), 3.0):
        if any(v) and body.contains(v):
            s = tuple(v)
            if s[next(i for i, c in enumerate(s) if c)] > 0:
                out.add(s)
    return sorted(out)


def integer_points_scan(F: Frame, P: CellParams, kappa: float | None = None) -> list[tuple[int, ...]]:
    """Oracle: scan the cube |r|_inf <= t_g + t_u + t_y, which contains the body."""
    body = CellBody.at(F, P, kappa)
    R = int(math.floor(body.t_g + body.t_u + body.t_y))
    out = []
    for v in product(range(-R, R + 1), repeat=F.n + 1):
        if not any(v) or v[next(i for i, c in enumerate(v) if c)] < 0:
            continue
        if body.contains(v):
            out.append(tuple(v))
    return sorted(out)


def find_integer_point(F: Frame, P: CellParams, kappa: float | None = None) -> tuple[int, ...] | None:
    """A non-zero integer point of the body, primitive and sign-normalised, or None.

    Among all solutions the one of least norm (then lexicographically least) is returned.
    """
    sols = integer_points(F, P, kappa)
    return _pick({_normalize(r) for r in sols})


def good_set_member(F: Frame, P: CellParams) -> bool:
    """Whether x is in G_f(Q*, psi*, kappa): the kappa-body has no non-zero integer point."""
    return find_integer_point(F, P) is None


# -- detection ---------------------------------------------------------------

@dataclass(frozen=True)
class Detection:
    point: RationalPoint
    r: tuple
    rho: float
    params: CellParams
    checks: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _residual(M: Manifold, q: int, a: tuple, b: tuple):
    if M.is_polynomial:
        return max(abs(p.scaled_value(a, q) - bl) for p, bl in zip(M.polys, b))
    fx = M.f([Fraction(ai, q) for ai in a])
    return max(abs(q * float(v) - bl) for v, bl in zip(fx, b))


def detect(F: Frame, P: CellParams, B: Box | None = None, strict: bool | None = None) -> Detection:
    """Rational point (q, a, b) attached to a good parameter x.

    The kappa0-body at x is solved, its solution made primitive with r0 >= 0
    and read as (q, a, b).  The returned checks are the guaranteed
    conclusions: delta0 Q <= q <= Q, |x - a/q| < rho and residual < psi.
    With ``strict`` (default: whenever every hypothesis holds) a failed
    check raises InvariantViolation.
    """
    B = F.box if B is None else B
    if not B.contains(F.x):
        raise PreconditionError(f"x = {F.x} is outside B")
    if not P.admissible():
        lo, hi = P.psi_window()
        raise PreconditionError(f"psi* = {float(P.psi_star):.4g} outside the admissible window [{float(lo):.4g}, {float(hi):.4g}]"
                                f" or kappa >= 1")
    if not good_set_member(F, P):
        raise PreconditionError(f"x = {F.x} is not in the good set")
    if strict is None:
        strict = P.size_ok()
    r = find_integer_point(F, P, kappa=max(P.kappa0, P.kappa))
    if r is None:
        raise InvariantViolation("no integer point in the kappa0-body, contradicting Minkowski's theorem")
    if r[0] < 0:
        r = tuple(-v for v in r)
    d = F.d
    q, a, b = r[0], r[1:d + 1], r[d + 1:]
    checks = {"q_positive": q > 0}
    if q > 0:
        res = _residual(F.manifold, q, a, b)
        dist = max(abs(float(Fraction(ai, q)) - float(xi)) for ai, xi in zip(a, F.x))
        checks["q_range"] = P.delta0 * P.Q <= q <= P.Q
        checks["near"] = dist < P.rho
        checks["residual"] = float(res) < P.psi
    else:
        res = math.inf
    det = Detection(RationalPoint(q, tuple(a), tuple(b), res), r, P.rho, P, checks)
    if strict and not det.ok:
        raise InvariantViolation(f"detection guarantee failed at x = {F.x}: {checks}")
    return det


@dataclass(frozen=True)
class InclusionReport:
    params: CellParams
    grid_points: int
    good: int
    uncovered: tuple
    ambient: float
    rational_points: int

    @property
    def ok(self) -> bool:
        return not self.uncovered

    def row(self) -> dict:
        return {**self.params.report(), "grid_points": self.grid_points, "good": self.good,
                "uncovered": len(self.uncovered), "ambient_coverage": self.ambient,
                "rational_points": self.rational_points}


def inclusion_check(M: Manifold, B: Box, Q_star, psi_star, kappa, c0=None, per_axis: int = 2001,
                    size_rule: str = "uniform") -> InclusionReport:
    """Grid test of (1/2 B) cap G_f inside Delta^delta0(Q, psi, B, rho).

    Good points come from the Minkowski bodies; the balls come from an
    independent enumeration of R^delta0(Q, psi, B).  ``ambient`` is the
    share of the whole grid that the balls cover, so a value of 1 means the
    inclusion held trivially.
    """
    from .rats import covered_mask, enumerate_R
    X = B.scaled(Fraction(1, 2)).sample_grid(per_axis)
    good = []
    P = None
    for x in X:
        F = frame_at(M, [float(v) for v in x], B)
        P = CellParams.for_frame(F, Q_star, psi_star, kappa, c0=c0, size_rule=size_rule)
        if good_set_member(F, P):
            good.append(x)
    P = CellParams.for_frame(frame_at(M, [float(v) for v in X[0]], B), Q_star, psi_star, kappa, c0=c0,
                             size_rule=size_rule)
    if not 0 <= P.delta0 < 1:
        raise PreconditionError(f"delta0 = {P.delta0:.3g} must lie in [0, 1); raise c0")
    pts = enumerate_R(M, int(math.floor(P.Q)), P.psi, P.delta0, B)
    centers = np.array([[ai / p.q for ai in p.a] for p in pts], dtype=float).reshape(-1, M.d)
    G = np.array(good, dtype=float).reshape(-1, M.d)
    cov = covered_mask(centers, P.rho, G)
    miss = tuple(tuple(float(v) for v in g) for g, c in zip(G, cov) if not c)
    ambient = float(np.mean(covered_mask(centers, P.rho, X)))
    return InclusionReport(P, len(X), len(G), miss, ambient, len(pts))


# -- adapted matrices ----------------------------------------------------------

def default_seed_basis(F: Frame) -> np.ndarray:
    """Rows spanning V(g), V(u), V(y) at the frame, each of length 1/2."""
    bg, bu, by = (mv.kernel_basis(w) for w in (F.g, F.u, F.y))
    return 0.5 * np.vstack([bg, bu, by])


def _apply(w: mv.MultiVector, v: np.ndarray) -> np.ndarray:
    # w.(w.v) = (-1)^(p-1) |w|^2 pi_w(v) with this interior convention
    out = mv.interior(w, mv.interior(w, mv.vector([float(c) for c in v])))
    return (-1) ** (w.p - 1) * out.to_array() / float(mv.norm_sq(w))


def adapted_matrix(M: Manifold, x0: Sequence, seed: np.ndarray | None = None,
                   box: Box | None = None) -> Callable[[Sequence], np.ndarray]:
    """x -> G(x) whose rows are the seed rows pushed through w.(w.v)/|w|^2, w in (g, u, y)."""
    F0 = frame_at(M, x0, box)
    d, m = M.d, M.m
    seed = default_seed_basis(F0) if seed is None else np.asarray(seed, dtype=float)
    if seed.shape != (M.n + 1, M.n + 1):
        raise PreconditionError(f"seed basis must be {(M.n + 1, M.n + 1)}")
    if abs(np.linalg.det(seed)) < 1e-12:
        raise PreconditionError("degenerate seed basis")
    if np.max(np.linalg.norm(seed, axis=1)) > 0.5 + 1e-12:
        raise PreconditionError("seed rows must have length at most 1/2")
    for i, row in enumerate(seed):
        w = F0.g if i < m else F0.u if i < m + d else F0.y
        if not mv.span_membership(w, list(row), tol=1e-9):
            raise PreconditionError(f"seed row {i} is not in its subspace at x0")
    dom = F0.box

    def G(x: Sequence) -> np.ndarray:
        F = frame_at(M, x, dom)
        rows = []
        for i, row in enumerate(seed):
            w = F.g if i < m else F.u if i < m + d else F.y
            rows.append(_apply(w, row))
        return np.array(rows)

    return G


def theta_profile(P: CellParams, C_star: float | None = None):
    """Weights (psi*,..., (psi*^m Q*)^(-1/d),..., kappa Q*) with geometric mean kappa^(1/(n+1))."""
    from .pbox import WeightProfile
    if C_star is not None:
        if not C_star > 1:
            raise PreconditionError("C* must exceed 1")
        lo, hi = C_star * P.Q_star ** (-1 / P.m), 1 / C_star
        if not lo <= P.psi_star <= hi:
            raise PreconditionError(f"psi* = {float(P.psi_star):.4g} outside [{float(lo):.4g}, {float(hi):.4g}]")
    tg, tu, ty = P.thresholds
    return WeightProfile((tg,) * P.m + (tu,) * P.d + (ty,))


def theta_hat_bound(P: CellParams, C_star: float) -> float:
    return (P.kappa * C_star) ** (-1 / (P.n + 1))


__all__ = ["ball_volume", "kappa0", "default_c0", "default_kappa", "CellParams", "CellBody", "body_volumes",
           "integer_points", "integer_points_scan", "find_integer_point", "good_set_member", "Detection",
           "detect", "InclusionReport", "inclusion_check", "default_seed_basis", "adapted_matrix", "theta_profile", "theta_hat_bound", "K_const"]
