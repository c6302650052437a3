"""Lifted frames y, g, u along a Monge manifold and the nearest-parameter map.

At a parameter x the lift is y = (1, x, f(x)) in R^{n+1}.  The m-vector
g = (y ^ d1 y ^ ... ^ dd y)^perp cuts out the tangent plane and the
d-vector u = (y ^ g)^perp the transversal plane; V(g), V(u), V(y) split
R^{n+1} orthogonally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import multivector as mv
from .errors import DomainError, PreconditionError
from .manifold import Box, Manifold
from .multivector import MultiVector


@dataclass(frozen=True)
class Frame:
    """The frame (y, g, u) at x together with the derivative bound C on 2*box."""

    manifold: Manifold
    x: tuple
    y: MultiVector
    dy: tuple
    g: MultiVector
    u: MultiVector
    C: float
    box: Box

    @property
    def n(self) -> int:
        return self.manifold.n

    @property
    def d(self) -> int:
        return self.manifold.d

    @property
    def m(self) -> int:
        return self.manifold.m

    @property
    def exact(self) -> bool:
        return self.y.exact and self.g.exact

    def y_array(self) -> np.ndarray:
        return self.y.to_array()


def lift(M: Manifold, x: Sequence) -> MultiVector:
    """Homogeneous lift y(x) = (1, x, f(x))."""
    return mv.vector([1, *x, *M.f(x)])


def frame_at(M: Manifold, x: Sequence, box: Box | None = None) -> Frame:
    """Frame at x; ``box`` plays the role of B0 (default: the whole domain).

    The derivative bound C is sampled on 2*box intersected with the domain.
    """
    x = tuple(x)
    box = M.domain if box is None else box
    if not box.contains(x):
        raise DomainError(f"{x} is outside the frame box")
    jet = M.jet(x, 1)
    y = mv.vector([1, *x, *jet.f])
    dy = []
    for i in range(M.d):
        head = [0] * (M.d + 1)
        head[i + 1] = 1
        dy.append(mv.vector([*head, *jet.grad(i)]))
    t = mv.wedge_all([y, *dy])
    if t.is_zero():
        raise PreconditionError(f"degenerate jet at {x}: y and its partials are dependent")
    g = mv.hodge(t)
    u = mv.hodge(mv.wedge(y, g))
    if g.is_zero() or u.is_zero():
        raise PreconditionError(f"degenerate frame at {x}")
    C = M.derivative_bound(box.scaled(2))
    return Frame(M, x, y, tuple(dy), g, u, C, box)


def subspace_bases(F: Frame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormal bases (rows) of V(g), V(u), V(y), each found as the kernel of its wedge map."""
    return mv.kernel_basis(F.g), mv.kernel_basis(F.u), mv.kernel_basis(F.y)


def decomposition_residuals(F: Frame) -> dict:
    """Pairwise orthogonality residuals and dimensions of V(g), V(u), V(y)."""
    bg, bu, by = subspace_bases(F)
    res = 0.0
    for a, b in ((bg, bu), (bg, by), (bu, by)):
        if len(a) and len(b):
            res = max(res, float(np.max(np.abs(a @ b.T))))
    dims = (len(bg), len(bu), len(by))
    return {"residual": res, "dims": dims, "total": sum(dims)}


@dataclass(frozen=True)
class Split:
    dg: float
    du: float
    dy: float

    @property
    def holds(self) -> bool:
        return self.dy <= self.dg + self.du + 1e-12 * max(1.0, self.dy)


def _ratio(num: MultiVector, den: MultiVector) -> float:
    if num.exact and den.exact:
        return math.sqrt(Fraction(mv.norm_sq(num)) / Fraction(mv.norm_sq(den)))
    return mv.norm(num) / mv.norm(den)


def distance_split(F: Frame, r) -> Split:
    """(|g.r|/|g|, |u.r|/|u|, |y^r|/|y|); the last never exceeds the sum of the first two."""
    r = mv.as_vector(r, F.n + 1)
    if r.is_zero():
        raise PreconditionError("distance_split needs r != 0")
    return Split(_ratio(mv.interior(F.g, r), F.g),
                 _ratio(mv.interior(F.u, r), F.u),
                 _ratio(mv.wedge(F.y, r), F.y))


def eps0(F: Frame) -> float:
    """Largest admissible epsilon for the nearest-parameter construction."""
    d, n, C = F.d, F.n, F.C
    return min(1.0, float(F.box.radius)) / (2 * d * (n + 1) * (C + 1) ** 2)


def K_const(F: Frame) -> float:
    d, n, C = F.d, F.n, F.C
    return 14 * (n + 1) ** 3 * (C + 1) ** 5 * d ** 2


@dataclass(frozen=True)
class NearestParameter:
    x_prime: tuple
    lam0_star: float
    lam_star: tuple
    dp: float
    K: float
    delta: float

    @property
    def bound(self) -> float:
        return self.K * self.delta


def nearest_parameter(F: Frame, r, delta: float, eps: float, check: bool = True) -> NearestParameter:
    """Parameter x' with |y(x') ^ r| / (|y(x')| |r|) <= K delta.

    Follows the explicit construction: split r along V(g), V(u), V(y),
    write r_u = lam0 y + sum lam_i d_i y, set lam0* = eta/|y| + lam0 and
    x' = x + lam / lam0*.
    """
    k = F.n + 1
    r = np.asarray([float(c) for c in mv.as_vector(r, k).coeffs])
    nr = float(np.linalg.norm(r))
    if nr == 0:
        raise PreconditionError("r must be non-zero")
    r = r / nr
    rv = mv.vector(list(r))
    split = distance_split(F, rv)
    e0 = eps0(F)
    if check:
        if not split.dg < delta:
            raise PreconditionError(f"|g.r|/(|g||r|) = {split.dg:.3g} is not < delta = {float(delta):.3g}")
        if not split.du < eps:
            raise PreconditionError(f"|u.r|/(|u||r|) = {split.du:.3g} is not < eps = {float(eps):.3g}")
        if not (eps * eps <= delta <= eps <= e0):
            raise PreconditionError(
                f"need eps^2 <= delta <= eps <= eps0 = {e0:.3g}; got delta={float(delta):.3g}, eps={float(eps):.3g}")
    yv = F.y.to_array()
    ny = float(np.linalg.norm(yv))
    eta = 1.0 if float(yv @ r) >= 0 else -1.0
    r_u = mv.project(F.u, rv).to_array()
    basis = np.array([yv, *[d.to_array() for d in F.dy]]).T
    lam, *_ = np.linalg.lstsq(basis, r_u, rcond=None)
    lam0_star = eta / ny + lam[0]
    if check and not abs(lam0_star) ** -1 <= 2 * (F.n + 1) * F.C:
        raise PreconditionError(f"|lam0*|^-1 = {abs(lam0_star) ** -1:.3g} exceeds 2(n+1)C")
    lam_star = lam[1:] / lam0_star
    x_prime = tuple(float(xi) + float(li) for xi, li in zip(F.x, lam_star))
    if not F.manifold.domain.contains(x_prime):
        raise DomainError(f"x' = {x_prime} left the domain")
    yp = lift(F.manifold, x_prime).to_array()
    dp = float(mv.norm(mv.wedge(mv.vector(list(yp)), rv)) / np.linalg.norm(yp))
    return NearestParameter(x_prime, float(lam0_star), tuple(float(v) for v in lam_star), dp,
                            K_const(F), float(delta))
