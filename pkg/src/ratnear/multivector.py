"""Exterior algebra over R^k for small k.

A grade-p multivector stores C(k, p) coefficients, one per p-subset of
{0, ..., k-1}.  Subsets are bitmasks; slots are ordered lexicographically
by the sorted index tuple, so ``e0^e1, e0^e2, e1^e2`` in k = 3.

Scalars are either exact (``int`` / ``Fraction``) or ``float``.  Exact
inputs keep exact outputs through every operation except norms, which
involve a square root; use :func:`norm_sq` when exactness matters.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, PreconditionError

MAX_DIM = 12

_TOL = [1e-10]


def get_tolerance() -> float:
    return _TOL[0]


def set_tolerance(tol: float) -> None:
    """Set the comparison tolerance used for float-mode predicates."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    _TOL[0] = float(tol)


@lru_cache(maxsize=None)
def subsets(k: int, p: int) -> tuple[int, ...]:
    """Bitmasks of the p-subsets of range(k) in coefficient order."""
    return tuple(sum(1 << i for i in c) for c in combinations(range(k), p))


@lru_cache(maxsize=None)
def _slot(k: int, p: int) -> dict[int, int]:
    return {mask: i for i, mask in enumerate(subsets(k, p))}


def indices(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


@lru_cache(maxsize=1 << 16)
def _merge_sign(a: int, b: int) -> int:
    """Sign of e_A ^ e_B = sign * e_{A|B} for disjoint masks A, B."""
    # count pairs (i in A, j in B) with i > j
    inv = 0
    bb = b
    while bb:
        low = bb & -bb
        inv += bin(a & ~((low << 1) - 1)).count("1")
        bb ^= low
    return -1 if inv & 1 else 1


def _is_exact(x) -> bool:
    return isinstance(x, Rational)


def _clean(x):
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    if isinstance(x, np.generic):
        return x.item()
    return x


class MultiVector:
    """Element of the p-th exterior power of R^k.

    ``decomposable`` is a trust flag set by constructors that build wedge
    products of vectors (and by operations that preserve such products);
    it is never verified numerically.
    """

    __slots__ = ("k", "p", "coeffs", "decomposable")

    def __init__(self, k: int, p: int, coeffs: Iterable, decomposable: bool = False):
        if not 0 <= k <= MAX_DIM:
            raise DimensionError(f"dimension k={k} outside 0..{MAX_DIM}")
        if not 0 <= p <= k:
            raise DimensionError(f"grade p={p} outside 0..{k}")
        coeffs = tuple(_clean(c) for c in coeffs)
        if len(coeffs) != math.comb(k, p):
            raise DimensionError(f"expected {math.comb(k, p)} coefficients, got {len(coeffs)}")
        self.k = k
        self.p = p
        self.coeffs = coeffs
        self.decomposable = bool(decomposable) or p in (0, 1, k - 1, k)

    # -- construction -----------------------------------------------------
    @classmethod
    def zero(cls, k: int, p: int, exact: bool = True) -> "MultiVector":
        z = 0 if exact else 0.0
        return cls(k, p, (z,) * math.comb(k, p), decomposable=True)

    @classmethod
    def from_dict(cls, k: int, p: int, entries: dict, decomposable: bool = False) -> "MultiVector":
        """Build from ``{index tuple or bitmask: coefficient}``."""
        slot = _slot(k, p)
        exact = all(_is_exact(v) for v in entries.values())
        out = [0 if exact else 0.0] * math.comb(k, p)
        for key, val in entries.items():
            if isinstance(key, int):
                mask = key
            else:
                idx = tuple(key)
                if len(set(idx)) != len(idx):
                    continue
                mask = sum(1 << i for i in idx)
                val = val * _perm_sign(idx)
            if mask not in slot:
                raise DimensionError(f"index set {key} not a {p}-subset of range({k})")
            out[slot[mask]] += val
        return cls(k, p, out, decomposable)

    @property
    def exact(self) -> bool:
        return all(_is_exact(c) for c in self.coeffs)

    def items(self):
        """Yield (bitmask, coefficient) for non-zero coefficients."""
        for mask, c in zip(subsets(self.k, self.p), self.coeffs):
            if c != 0:
                yield mask, c

    def coeff(self, idx: Sequence[int]) -> object:
        mask = sum(1 << i for i in idx)
        return self.coeffs[_slot(self.k, self.p)[mask]] * _perm_sign(tuple(idx))

    def to_array(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs])

    def scalar(self):
        if self.p != 0:
            raise DimensionError("not a grade-0 multivector")
        return self.coeffs[0]

    def is_zero(self, tol: float | None = None) -> bool:
        if self.exact:
            return all(c == 0 for c in self.coeffs)
        tol = get_tolerance() if tol is None else tol
        return math.sqrt(float(norm_sq(self))) <= tol

    # -- arithmetic -------------------------------------------------------
    def _check(self, other: "MultiVector") -> None:
        if not isinstance(other, MultiVector):
            raise TypeError("expected MultiVector")
        if other.k != self.k:
            raise DimensionError(f"dimension mismatch {self.k} vs {other.k}")
        if other.p != self.p:
            raise DimensionError(f"grade mismatch {self.p} vs {other.p}")

    def __add__(self, other: "MultiVector") -> "MultiVector":
        self._check(other)
        return MultiVector(self.k, self.p, (a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "MultiVector") -> "MultiVector":
        self._check(other)
        return MultiVector(self.k, self.p, (a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "MultiVector":
        return MultiVector(self.k, self.p, (-a for a in self.coeffs), self.decomposable)

    def __mul__(self, s) -> "MultiVector":
        if isinstance(s, MultiVector):
            return NotImplemented
        return MultiVector(self.k, self.p, (a * s for a in self.coeffs), self.decomposable)

    __rmul__ = __mul__

    def __truediv__(self, s) -> "MultiVector":
        if _is_exact(s) and self.exact:
            s = Fraction(s)
        return MultiVector(self.k, self.p, (a / s for a in self.coeffs), self.decomposable)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiVector):
            return NotImplemented
        return (self.k, self.p) == (other.k, other.p) and all(
            a == b for a, b in zip(self.coeffs, other.coeffs))

    def __hash__(self) -> int:
        return hash((self.k, self.p, self.coeffs))

    def isclose(self, other: "MultiVector", tol: float | None = None) -> bool:
        self._check(other)
        tol = get_tolerance() if tol is None else tol
        return all(abs(float(a) - float(b)) <= tol for a, b in zip(self.coeffs, other.coeffs))

    def __repr__(self) -> str:
        terms = []
        for mask, c in self.items():
            name = "e" + "".join(str(i) for i in indices(mask)) if self.p else "1"
            terms.append(f"{c}*{name}")
        return f"MultiVector(k={self.k}, p={self.p}: {' + '.join(terms) or '0'})"


def _perm_sign(idx: tuple[int, ...]) -> int:
    """Sign of the permutation sorting idx (distinct entries)."""
    s = 1
    for i in range(len(idx)):
        for j in range(i + 1, len(idx)):
            if idx[i] > idx[j]:
                s = -s
    return s


def vector(components: Sequence) -> MultiVector:
    """Grade-1 multivector with the given coordinates."""
    comps = list(components)
    return MultiVector(len(comps), 1, comps, decomposable=True)


def basis(k: int, idx: Sequence[int] = ()) -> MultiVector:
    """The basis multivector e_I (sign follows the order of ``idx``)."""
    return MultiVector.from_dict(k, len(idx), {tuple(idx): 1}, decomposable=True)


def top(k: int) -> MultiVector:
    """The unit top-grade element i = e0 ^ ... ^ e_{k-1}."""
    return MultiVector(k, k, (1,), decomposable=True)


def scalar(k: int, s) -> MultiVector:
    return MultiVector(k, 0, (s,), decomposable=True)


def as_vector(x, k: int | None = None) -> MultiVector:
    if isinstance(x, MultiVector):
        if x.p != 1:
            raise DimensionError(f"expected a vector, got grade {x.p}")
        return x
    v = vector(x)
    if k is not None and v.k != k:
        raise DimensionError(f"dimension mismatch {v.k} vs {k}")
    return v


def _scaled_items(u: "MultiVector", exact: bool) -> tuple[list, int]:
    """Non-zero (mask, coefficient) pairs; exact ones are scaled to integers by a common denominator."""
    items = list(u.items())
    if not exact:
        return items, 1
    D = 1
    for _, c in items:
        den = c.denominator
        D = D * den // math.gcd(D, den)
    return [(m, int(c * D)) for m, c in items], D


def _unscale(out: list, D: int, exact: bool) -> list:
    if not exact or D == 1:
        return out
    return [Fraction(c, D) for c in out]


# -- core products ---------------------------------------------------------

def wedge(u: MultiVector, v: MultiVector) -> MultiVector:
    """Exterior product u ^ v."""
    if u.k != v.k:
        raise DimensionError(f"dimension mismatch {u.k} vs {v.k}")
    k, p, q = u.k, u.p, v.p
    if p + q > k:
        raise DimensionError(f"grade overflow: {p} + {q} > {k}")
    slot = _slot(k, p + q)
    exact = u.exact and v.exact
    out = [0 if exact else 0.0] * len(slot)
    ui, Du = _scaled_items(u, exact)
    vi, Dv = _scaled_items(v, exact)
    for a, ca in ui:
        for b, cb in vi:
            if a & b:
                continue
            out[slot[a | b]] += _merge_sign(a, b) * ca * cb
    return MultiVector(k, p + q, _unscale(out, Du * Dv, exact), u.decomposable and v.decomposable)


def wedge_all(vectors: Sequence, k: int | None = None) -> MultiVector:
    """Wedge of a sequence of vectors (the empty wedge is the scalar 1)."""
    vs = [as_vector(x) for x in vectors]
    if not vs:
        if k is None:
            raise DimensionError("empty wedge needs the dimension k")
        return scalar(k, 1)
    out = vs[0]
    for w in vs[1:]:
        out = wedge(out, w)
    return out


def inner(u: MultiVector, v: MultiVector):
    """Inner product of two multivectors of equal grade (e_I orthonormal)."""
    if u.k != v.k:
        raise DimensionError(f"dimension mismatch {u.k} vs {v.k}")
    if u.p != v.p:
        raise DimensionError(f"grade mismatch {u.p} vs {v.p}")
    return sum((a * b for a, b in zip(u.coeffs, v.coeffs)), 0 if u.exact and v.exact else 0.0)


def norm_sq(u: MultiVector):
    return inner(u, u)


def norm(u: MultiVector) -> float:
    return math.sqrt(float(norm_sq(u)))


def interior(u: MultiVector, v: MultiVector) -> MultiVector:
    """Interior product u . v for grade(u) >= grade(v).

    The result w of grade p - q is characterised by
    ``inner(w, x) == inner(u, wedge(v, x))`` for every (p - q)-vector x;
    expanding over basis x = e_K gives the coefficient formula used here.
    """
    if u.k != v.k:
        raise DimensionError(f"dimension mismatch {u.k} vs {v.k}")
    k, p, q = u.k, u.p, v.p
    if p < q:
        raise DimensionError(f"interior needs grade(u) >= grade(v), got {p} < {q}")
    slot = _slot(k, p - q)
    exact = u.exact and v.exact
    out = [0 if exact else 0.0] * len(slot)
    ui, Du = _scaled_items(u, exact)
    vi, Dv = _scaled_items(v, exact)
    for lmask, cu in ui:
        for jmask, cv in vi:
            if jmask & ~lmask:
                continue
            kmask = lmask ^ jmask
            # v ^ e_K contains e_L with sign _merge_sign(J, K)
            out[slot[kmask]] += _merge_sign(jmask, kmask) * cu * cv
    return MultiVector(k, p - q, _unscale(out, Du * Dv, exact), u.decomposable and v.decomposable)


def interior_rev(v: MultiVector, u: MultiVector) -> MultiVector:
    """The product v . u for grade(v) <= grade(u), defined by
    ``inner(x, v . u) == inner(wedge(x, v), u)``."""
    if u.k != v.k:
        raise DimensionError(f"dimension mismatch {u.k} vs {v.k}")
    k, p, q = u.k, u.p, v.p
    if p < q:
        raise DimensionError(f"interior_rev needs grade(v) <= grade(u), got {q} > {p}")
    slot = _slot(k, p - q)
    exact = u.exact and v.exact
    out = [0 if exact else 0.0] * len(slot)
    ui, Du = _scaled_items(u, exact)
    vi, Dv = _scaled_items(v, exact)
    for lmask, cu in ui:
        for jmask, cv in vi:
            if jmask & ~lmask:
                continue
            kmask = lmask ^ jmask
            out[slot[kmask]] += _merge_sign(kmask, jmask) * cu * cv
    return MultiVector(k, p - q, _unscale(out, Du * Dv, exact), u.decomposable and v.decomposable)


def dot(u: MultiVector, v: MultiVector) -> MultiVector:
    """The '.' product, disambiguated by grade."""
    return interior(u, v) if u.p >= v.p else interior_rev(u, v)


# The selftest mutation hook flips this to inject a Hodge sign defect.
_HODGE_DEFECT = [False]


def hodge(u: MultiVector) -> MultiVector:
    """Hodge complement u^perp = i . u."""
    out = interior(top(u.k), u)
    if _HODGE_DEFECT[0] and 2 * u.p < u.k:
        out = -out
    return out


# -- subspaces ---------------------------------------------------------------

def project(v: MultiVector, u) -> MultiVector:
    """Orthogonal projection of the vector u onto V(v).

    Uses |v|^2 pi(u) = +- v.(v.u); the sign is fixed per call by requiring
    pi(u).u >= 0.
    """
    u = as_vector(u, v.k)
    if not v.decomposable:
        raise PreconditionError("project needs a decomposable multivector")
    if not 1 <= v.p <= v.k - 1:
        raise PreconditionError(f"project needs grade 1..k-1, got {v.p}")
    nv = norm_sq(v)
    if v.is_zero():
        raise PreconditionError("project onto the zero multivector")
    w = interior(v, interior(v, u))
    if w.p != 1:
        # v.(v.u) has grade p - (p - 1) = 1
        raise DimensionError("internal grade error")
    if v.exact and u.exact:
        w = w / Fraction(nv)
    else:
        w = w * (1.0 / float(nv))
    if inner(w, u) < 0:
        w = -w
    return w


def projective_distance(x: Sequence, y: Sequence) -> float:
    """Sine of the angle between the lifts (1, x) and (1, y)."""
    xh = vector([1, *x])
    yh = vector([1, *y])
    if xh.k != yh.k:
        raise DimensionError("points of different dimension")
    num = norm_sq(wedge(xh, yh))
    den = norm_sq(xh) * norm_sq(yh)
    return math.sqrt(float(num) / float(den))


def span_membership(w: MultiVector, x, tol: float | None = None) -> bool:
    """Whether x lies in V(w) = {x : w ^ x = 0}."""
    x = as_vector(x, w.k)
    if w.p == w.k:
        return True
    wx = wedge(w, x)
    if wx.exact:
        return wx.is_zero()
    tol = get_tolerance() if tol is None else tol
    return norm(wx) <= tol * max(1.0, norm(w) * norm(x))


class Subspace:
    """A subspace of R^k given by a basis of linearly independent vectors."""

    def __init__(self, k: int, basis_vectors: Sequence[Sequence]):
        vecs = [list(b) for b in basis_vectors]
        for b in vecs:
            if len(b) != k:
                raise DimensionError(f"basis vector of length {len(b)} in R^{k}")
        self.k = k
        self.basis = tuple(tuple(b) for b in vecs)
        if vecs:
            w = self.multivector()
            if w.is_zero():
                raise PreconditionError("basis vectors are linearly dependent")

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def codim(self) -> int:
        return self.k - len(self.basis)

    def multivector(self) -> MultiVector:
        """The decomposable multivector w with V(w) equal to this subspace."""
        return wedge_all(self.basis, self.k)

    def contains(self, x, tol: float | None = None) -> bool:
        if not self.basis:
            return as_vector(x, self.k).is_zero(tol)
        return span_membership(self.multivector(), x, tol)

    @classmethod
    def of(cls, w: MultiVector) -> "Subspace":
        """Recover V(w) for a non-zero decomposable w (float basis)."""
        if not w.decomposable or w.is_zero():
            raise PreconditionError("need a non-zero decomposable multivector")
        return cls(w.k, [tuple(r) for r in kernel_basis(w)])


def wedge_matrix(w: MultiVector) -> np.ndarray:
    """Matrix of the linear map x -> w ^ x (columns indexed by e_j)."""
    cols = [wedge(w, basis(w.k, (j,))).to_array() for j in range(w.k)]
    return np.array(cols).T


def kernel_basis(w: MultiVector, tol: float | None = None) -> np.ndarray:
    """Orthonormal rows spanning V(w) = {x : w ^ x = 0}, by SVD of the wedge map."""
    if w.p == w.k:
        return np.eye(w.k)
    mat = wedge_matrix(w)
    scale = max(1.0, float(np.max(np.abs(mat))))
    tol = (get_tolerance() if tol is None else tol) * scale
    _, s, vt = np.linalg.svd(mat)
    s = np.concatenate([s, np.zeros(w.k - len(s))])
    return vt[s <= tol]


