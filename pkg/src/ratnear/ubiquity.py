"""Finite-scale stand-ins for ubiquity and Hausdorff dimension.

The resonant set J(t) holds the pairs (q, a) with q <= 2^t and
||q f(a/q)|| <= psi(q)/2; the ubiquity fraction is the share of a box
covered by balls B(a/q, rho(2^t)) around them.  Dimension estimates count
boxes of side Q^(-1-tau) hit by approximation points whose denominators
lie in the dyadic shell (Q/2, Q], and regress log count on log(1/side).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError
from .manifold import Box, Manifold
from .rats import FitResult, _a_grid, covered_mask, enumerate_R, exponent_fit


@dataclass(frozen=True)
class PsiRule:
    """psi(q) = value * q^(-exponent); ``parse`` reads 'q^-0.8', '0.5*q^-1' or a constant."""

    exponent: float = 0.0
    scale: float = 1.0

    def __call__(self, q) -> float:
        return self.scale * float(q) ** (-self.exponent)

    @classmethod
    def parse(cls, text: str) -> "PsiRule":
        s = text.replace(" ", "").replace("**", "^")
        try:
            if "q" not in s:
                return cls(0.0, float(s))
            scale = 1.0
            if "*" in s:
                head, s = s.split("*", 1)
                scale = float(head)
            if not s.startswith("q^"):
                raise ValueError
            return cls(-float(s[2:]), scale)
        except ValueError:
            raise PreconditionError(f"cannot parse psi rule {text!r}") from None

    def __str__(self) -> str:
        if self.exponent == 0:
            return repr(self.scale)
        return (f"{self.scale!r}*" if self.scale != 1 else "") + f"q^{-self.exponent!r}"


def _frac_dist(V: np.ndarray) -> np.ndarray:
    return np.abs(V - np.round(V))


@dataclass(frozen=True)
class ResonantSystem:
    """Resonant points a/q with ||q f(a/q)|| <= psi(q)/2 and ubiquity radius rho0 (psi^m q^(d+1))^(-1/d)."""

    M: Manifold
    psi: Callable[[int], float]
    B0: Box
    rho0: float = 1.0

    def rho(self, Q: float) -> float:
        d, m = self.M.d, self.M.m
        return self.rho0 * (self.psi(Q) ** m * Q ** (d + 1)) ** (-1 / d)

    def resonant_q(self, q: int, B: Box, pad: float = 0.0) -> np.ndarray:
        """Integer a (rows) with a/q in B padded by ``pad`` and ||q f(a/q)||_inf <= psi(q)/2."""
        A = _a_grid(q, B, pad)
        if len(A) == 0:
            return A.reshape(0, self.M.d)
        M = self.M
        lo, hi = np.array(M.domain.lo, dtype=float), np.array(M.domain.hi, dtype=float)
        A = A[np.all((A / q >= lo) & (A / q <= hi), axis=1)]
        if len(A) == 0:
            return A
        V = q * M.f_array(A / q)
        half = 0.5 * self.psi(q)
        dist = np.max(_frac_dist(V), axis=1)
        keep = dist <= half * (1 + 1e-9)
        if M.is_polynomial:
            # settle the borderline ones exactly
            border = keep & (dist > half * (1 - 1e-9))
            for i in np.nonzero(border)[0]:
                a = tuple(int(v) for v in A[i])
                vals = [p.scaled_value(a, q) for p in M.polys]
                keep[i] = max(abs(v - round(v)) for v in vals) <= Fraction(half)
        return A[keep]

    def J(self, t: int, B: Box | None = None, pad: float = 0.0) -> list[tuple[int, tuple]]:
        B = self.B0 if B is None else B
        out = []
        for q in range(1, 2 ** t + 1):
            out.extend((q, tuple(int(v) for v in a)) for a in self.resonant_q(q, B, pad))
        return out


def ubiquity_fraction(S: ResonantSystem, t: int, B: Box | None = None, grid_h: float | None = None) -> float:
    """Share of B covered by the balls B(a/q, rho(2^t)), (q, a) in J(t)."""
    if t < 1:
        raise PreconditionError("t must be >= 1")
    B = S.B0 if B is None else B
    rho = S.rho(2 ** t)
    grid_h = rho / 10 if grid_h is None else grid_h
    if grid_h > rho / 10 * (1 + 1e-12):
        raise PreconditionError(f"grid_h = {float(grid_h):.3g} coarser than rho/10 = {rho / 10:.3g}")
    pts = S.J(t, B, pad=rho)
    centers = np.array([[ai / q for ai in a] for q, a in pts], dtype=float).reshape(-1, S.M.d)
    return float(np.mean(covered_mask(centers, rho, B.grid(grid_h))))


def ubiquity_fraction_inclusion(S: ResonantSystem, t: int, delta0: float = 0.5, B: Box | None = None,
                                grid_h: float | None = None) -> float:
    """Share of B covered by Delta^delta0(Q, psi(Q)/2, B, rho(Q)), Q = 2^t; a lower bound for the direct fraction."""
    B = S.B0 if B is None else B
    Q = 2 ** t
    rho = S.rho(Q)
    grid_h = rho / 10 if grid_h is None else grid_h
    pts = enumerate_R(S.M, Q, 0.5 * S.psi(Q), delta0, B)
    centers = np.array([[ai / p.q for ai in p.a] for p in pts], dtype=float).reshape(-1, S.M.d)
    return float(np.mean(covered_mask(centers, rho, B.grid(grid_h))))


def lambda_in_S_check(S: ResonantSystem, t: int, samples_per_point: int = 3, B: Box | None = None,
                      seed: int = 0) -> tuple[int, int]:
    """Sample x within Psi(q) = psi(q)/(2 c1 q) of resonant a/q and test ||q x|| < psi(q), ||q f(x)|| < psi(q).

    Returns (checked, failures).
    """
    B = S.B0 if B is None else B
    M = S.M
    c1 = M.lipschitz(B)
    rng = np.random.default_rng(seed)
    checked = fails = 0
    for q, a in S.J(t, B):
        Psi = S.psi(q) / (2 * c1 * q)
        c = np.array(a, dtype=float) / q
        X = c + rng.uniform(-1, 1, (samples_per_point, M.d)) * Psi * (1 - 1e-9)
        X = X[[M.domain.contains(x) for x in X]]
        if len(X) == 0:
            continue
        F = M.f_array(X)
        lhs = np.maximum(np.max(_frac_dist(q * X), axis=1), np.max(_frac_dist(q * F), axis=1))
        checked += len(X)
        fails += int(np.sum(lhs >= S.psi(q)))
    return checked, fails


# -- dimension surrogates ------------------------------------------------------

@dataclass(frozen=True)
class DimEstimate:
    tau: float
    Qs: tuple
    scales: tuple
    counts: tuple
    fit: FitResult | None
    prefix_slopes: tuple

    @property
    def value(self) -> float:
        if self.fit is None or self.fit.r2 < 0.95:
            return math.nan
        return min(max(self.fit.slope, 0.0), 1.0 * self.dmax)

    @property
    def dmax(self) -> int:
        return 1

    @property
    def r2(self) -> float:
        return math.nan if self.fit is None else self.fit.r2

    @property
    def stable(self) -> bool:
        s = self.prefix_slopes[-3:]
        return len(s) >= 2 and max(s) - min(s) <= 0.05


def pythagorean_points(c_lo: int, c_hi: int, B: Box) -> list[tuple[int, int]]:
    """(numerator, hypotenuse) of x-coordinates of primitive points on the unit circle, c_lo < c <= c_hi, x/c in B."""
    out = []
    lo, hi = float(B.lo[0]), float(B.hi[0])
    s = 1
    while s * s < c_hi:
        for t in range(1 if s % 2 == 0 else 2, s, 2):
            c = s * s + t * t
            if c <= c_lo or c > c_hi or math.gcd(s, t) != 1:
                continue
            for num in (s * s - t * t, 2 * s * t):
                for sgn in (1, -1):
                    if lo <= sgn * num / c <= hi:
                        out.append((sgn * num, c))
        s += 1
    return sorted(set(out))


def _hit_x(M: Manifold, tau: float, Q: int, B: Box) -> np.ndarray:
    """x-centres a/q of approximation points with Q/2 < q <= Q."""
    if M.name == "circle" and Fraction(dict(M.params).get("r", 1)) == 1:
        pts = pythagorean_points(Q // 2, Q, B)
        return np.array([a / c for a, c in pts], dtype=float)
    S = ResonantSystem(M, PsiRule(tau), B)
    xs = [S.resonant_q(q, B)[:, 0] / q for q in range(Q // 2 + 1, Q + 1)]
    return np.concatenate(xs) if xs else np.zeros(0)


def dim_estimate(M: Manifold, tau: float, Qs: Sequence[int], B: Box | None = None) -> DimEstimate:
    """Box-counting slope of the points hit at scale Q^(-1-tau), over the Q sequence.

    Points on the unit circle are the Pythagorean ones; for other curves the
    resonant a/q with ||q f(a/q)|| <= q^-tau / 2 are used.
    """
    if not tau > 0:
        raise PreconditionError("tau must be positive")
    Qs = list(Qs)
    if len(Qs) < 4 or any(b <= a for a, b in zip(Qs, Qs[1:])):
        raise PreconditionError("need an increasing sequence of at least 4 Q values")
    if M.d != 1:
        raise PreconditionError("dimension surrogates are implemented for curves")
    B = M.domain if B is None else B
    counts, scales = [], []
    for Q in Qs:
        s = float(Q) ** (-1 - tau)
        x = _hit_x(M, tau, Q, B)
        counts.append(int(len(np.unique(np.floor(x / s)))) if len(x) else 0)
        scales.append(s)
    if all(c == 0 for c in counts):
        raise PreconditionError("no approximation points at any scale")
    pairs = [(1 / s, c) for s, c in zip(scales, counts) if c > 0]
    fit = exponent_fit(pairs) if len(pairs) >= 4 else None
    prefix = []
    for j in range(4, len(pairs) + 1):
        prefix.append(exponent_fit(pairs[:j]).slope)
    return DimEstimate(float(tau), tuple(Qs), tuple(scales), tuple(counts), fit, tuple(prefix))


def dim_target(name: str, tau: float, n: int = 2, m: int = 1) -> float:
    """Reference dimensions: 1/(tau+1) on the unit circle, (2-tau)/(tau+1) on planar curves, s0 in general."""
    if name == "unit-circle":
        return 1 / (tau + 1)
    if name == "planar":
        return (2 - tau) / (tau + 1)
    return (n + 1) / (tau + 1) - m


__all__ = ["PsiRule", "ResonantSystem", "ubiquity_fraction", "ubiquity_fraction_inclusion", "lambda_in_S_check",
           "DimEstimate", "pythagorean_points", "dim_estimate", "dim_target"]
