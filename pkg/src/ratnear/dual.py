"""The dual curve z = (y ^ y' ^ ... ^ y^(n-1))^perp of a curve y = (1, x, f(x)).

Derivatives of z come from the product rule applied to the wedge (exact
for polynomial curves at rational points) or, for smooth curves, from
central differences with Richardson extrapolation at 30 digits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np
import sympy as sp

from . import multivector as mv
from ._lattice import det_exact
from .errors import DomainError, InvariantViolation, PreconditionError
from .manifold import WORK_DPS, Box, Manifold


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` non-negative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def _multinomial(js: Sequence[int]) -> int:
    out = math.factorial(sum(js))
    for j in js:
        out //= math.factorial(j)
    return out


def wronskian(rows: Sequence[Sequence]) -> object:
    """Determinant of the derivative matrix rows[j][i] = g_i^(j); exact for int/Fraction entries."""
    return det_exact(rows)


def wronskian_functions(funcs: Sequence[str], x, var: str = "x"):
    """Wronskian of scalar expressions at x (exact for rational x and rational-coefficient polynomials)."""
    s = sp.Symbol(var)
    g = [sp.sympify(f, locals={var: s}) for f in funcs]
    k = len(g)
    M = sp.Matrix([[sp.diff(gi, s, j) for gi in g] for j in range(k)])
    val = sp.nsimplify(M.det().subs(s, sp.nsimplify(x)))
    if val.is_Rational:
        return Fraction(int(val.p), int(val.q))
    return float(val)


class DualCurve:
    """Evaluators for z^(j), W_y and W_z on a curve (d = 1) with n = m + 1."""

    def __init__(self, M: Manifold, method: str = "auto"):
        if M.d != 1:
            raise PreconditionError("dual curves need d = 1")
        self.M = M
        self.n = M.n
        if method == "auto":
            method = "product" if M.is_polynomial else "richardson"
        if method not in ("product", "richardson"):
            raise PreconditionError(f"unknown derivative method {method!r}")
        self.method = method
        self.last_error = 0.0

    # y-jets
    def y_derivs(self, x, order: int) -> list[list]:
        """[y, y', ..., y^(order)] as coordinate lists."""
        M = self.M
        out = []
        for j in range(order + 1):
            head = [1 if j == 0 else 0, x if j == 0 else (1 if j == 1 else 0)]
            out.append(head + list(M.partial([x], (j,))))
        return out

    def _y_derivs_mp(self, x, order: int) -> list[list]:
        M = self.M
        out = []
        for j in range(order + 1):
            head = [mpmath.mpf(1 if j == 0 else 0), mpmath.mpf(x) if j == 0 else mpmath.mpf(1 if j == 1 else 0)]
            out.append(head + list(M.partial_mp([x], (j,))))
        return out

    def W_y(self, x):
        return wronskian(self.y_derivs(x, self.n))

    def _z_from(self, ys: list[list], j: int) -> mv.MultiVector:
        n, k = self.n, self.n + 1
        acc = None
        for js in _compositions(j, n):
            w = mv.wedge_all([mv.vector(ys[i + js[i]]) for i in range(n)], k)
            w = w * _multinomial(js)
            acc = w if acc is None else acc + w
        return mv.hodge(acc)

    def z(self, x, j: int = 0) -> tuple:
        """z^(j)(x) as a tuple."""
        if not 0 <= j <= self.n:
            raise PreconditionError(f"derivative order must be in [0, {self.n}]")
        self._check(x)
        if self.method == "product" or j == 0:
            ys = self.y_derivs(x, self.n - 1 + j)
            return tuple(self._z_from(ys, j).coeffs)
        return self._z_richardson(x, j)

    def _z_mp(self, x) -> list:
        with mpmath.workdps(WORK_DPS):
            ys = self._y_derivs_mp(x, self.n - 1)
            return list(self._z_from(ys, 0).coeffs)

    def _z_richardson(self, x, j: int, h0: float = 1e-2, levels: int = 5) -> tuple:
        """Central differences of order j at widths h0 / 2^l, extrapolated in h^2."""
        x = float(x)
        box = self.M.domain
        h0 = min(h0, 0.5 * min(x - box.lo[0], box.hi[0] - x) / max(j, 1))
        if h0 <= 0:
            raise DomainError("point too close to the domain edge for finite differences")
        with mpmath.workdps(WORK_DPS):
            table = []
            for lev in range(levels):
                h = mpmath.mpf(h0) / 2 ** lev
                acc = [mpmath.mpf(0)] * (self.n + 1)
                # central stencil sum_s (-1)^s C(j, s) z(x + (j/2 - s) h) / h^j
                for s in range(j + 1):
                    zs = self._z_mp(mpmath.mpf(x) + (mpmath.mpf(j) / 2 - s) * h)
                    c = (-1) ** s * math.comb(j, s)
                    acc = [a + c * v for a, v in zip(acc, zs)]
                table.append([a / h ** j for a in acc])
            for lev in range(1, levels):
                f = mpmath.mpf(4) ** lev
                table = [[(f * b - a) / (f - 1) for a, b in zip(table[i], table[i + 1])]
                         for i in range(len(table) - 1)]
            if len(table) != 1:
                raise InvariantViolation("Richardson table did not collapse")
        vals = table[0]
        return tuple(float(v) for v in vals)

    def z_derivs(self, x) -> list[tuple]:
        return [self.z(x, j) for j in range(self.n + 1)]

    def W_z(self, x):
        return wronskian(self.z_derivs(x))

    def _check(self, x):
        if not self.M.domain.contains([x]):
            raise DomainError(f"x = {x} outside the curve's domain")

    # identities
    def relations(self, x) -> dict:
        """z^(j) . y^(i) for i + j <= n, with the expected value 0 or (-1)^j W_y."""
        n = self.n
        ys = self.y_derivs(x, n)
        zs = self.z_derivs(x)
        W = wronskian(ys)
        out = {}
        for j in range(n + 1):
            for i in range(n + 1 - j):
                val = sum(a * b for a, b in zip(zs[j], ys[i]))
                want = 0 if i + j < n else (-1) ** j * W
                out[(i, j)] = (val, want)
        return out

    def relation_residual(self, x) -> float:
        """Largest |z^(j).y^(i) - expected| relative to max(1, |W_y|)."""
        rel = self.relations(x)
        W = abs(float(self.W_y(x)))
        return max(abs(float(v - w)) for v, w in rel.values()) / max(1.0, W)

    def K1(self, box: Box | None = None, per_axis: int = 33) -> float:
        """1.1 times the sampled sup of |z^(i)| over the box, i <= n."""
        box = self.M.domain if box is None else box
        sup = 0.0
        for (x,) in box.sample_grid(per_axis):
            for j in range(self.n + 1):
                sup = max(sup, float(np.linalg.norm([float(c) for c in self.z(float(x), j)])))
        return max(1.1 * sup, 1.1)


def dual_map(M: Manifold, x, method: str = "auto") -> list[tuple]:
    """z(x), z'(x), ..., z^(n)(x)."""
    D = DualCurve(M, method)
    if D.W_y(x) == 0:
        raise PreconditionError(f"W_y vanishes at x = {x}")
    return D.z_derivs(x)


@dataclass(frozen=True)
class WronskiReport:
    points: tuple
    ratios: tuple
    exact: bool

    @property
    def min_ratio(self) -> float:
        return min(float(r) for r in self.ratios)

    @property
    def ok(self) -> bool:
        if self.exact:
            return all(r >= 1 for r in self.ratios)
        return all(float(r) >= 1 - 1e-9 for r in self.ratios)


def wronskian_inequality_check(M: Manifold, xs: Sequence, method: str = "auto", hard: bool = True) -> WronskiReport:
    """|W_z| / |W_y|^n at every sample; raises InvariantViolation on a ratio below 1 when ``hard``."""
    D = DualCurve(M, method)
    ratios = []
    exact = M.is_polynomial and all(isinstance(x, (int, Fraction)) for x in xs)
    for x in xs:
        Wy = D.W_y(x)
        if Wy == 0:
            raise PreconditionError(f"W_y vanishes at x = {x}")
        Wz = D.W_z(x)
        if exact:
            ratios.append(Fraction(abs(Wz)) / Fraction(abs(Wy)) ** D.n)
        else:
            ratios.append(abs(float(Wz)) / abs(float(Wy)) ** D.n)
    rep = WronskiReport(tuple(xs), tuple(ratios), exact)
    if hard and not rep.ok:
        raise InvariantViolation(f"|W_z| < |W_y|^n somewhere: min ratio {rep.min_ratio}")
    return rep


def curve_theta_profile(P, K1: float, C0: float = 1.0):
    """(K1 psi*, ..., K1 psi*, 2 K1 (psi*^(n-1) Q*)^-1, 2 K1 kappa Q*) for a curve's cell parameters."""
    from .pbox import WeightProfile
    if P.d != 1:
        raise PreconditionError("curve profile needs d = 1")
    n = P.n
    lo, hi = C0 * P.Q ** (-3 / (2 * n - 1)), P.Q ** (-1 / n)
    if not lo < P.psi < hi:
        raise PreconditionError(f"psi = {float(P.psi):.4g} outside ({float(lo):.4g}, {float(hi):.4g})")
    ps, Qs = P.psi_star, P.Q_star
    return WeightProfile((K1 * ps,) * (n - 1) + (2 * K1 / (ps ** (n - 1) * Qs), 2 * K1 * P.kappa * Qs))


__all__ = ["wronskian", "wronskian_functions", "DualCurve", "dual_map", "WronskiReport",
           "wronskian_inequality_check", "curve_theta_profile"]
