"""Integer points in ellipsoids and exact small determinants."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np


def ellipsoid_points(M: np.ndarray, bound: float, center: Sequence[float] | None = None,
                     slack: float = 1e-9) -> Iterator[tuple[int, ...]]:
    """Yield every integer v with (v - c)^T M (v - c) <= bound, M symmetric positive definite.

    Depth-first enumeration on the Cholesky factor (Fincke and Pohst); the
    bound is widened by a relative ``slack`` so rounding never drops a point.
    Callers re-check candidates against their exact condition.
    """
    M = np.asarray(M, dtype=float)
    k = M.shape[0]
    c = np.zeros(k) if center is None else np.asarray(center, dtype=float)
    R = np.linalg.cholesky(M).T  # upper triangular, M = R^T R
    diag = np.diag(R).copy()
    mu = R / diag[:, None]
    bound = bound * (1 + slack) + slack
    v = [0] * k
    def rec(i: int, rem: float):
        s = sum(mu[i, j] * (v[j] - c[j]) for j in range(i + 1, k)) - c[i]
        if rem < 0:
            return
        w = math.sqrt(rem) / diag[i]
        lo = math.ceil(-w - s)
        hi = math.floor(w - s)
        for t in range(lo, hi + 1):
            v[i] = t
            used = (diag[i] * (t + s)) ** 2
            if i == 0:
                yield tuple(v)
            else:
                yield from rec(i - 1, rem - used)
        v[i] = 0
    yield from rec(k - 1, bound)


def det_exact(rows: Sequence[Sequence]) -> object:
    """Determinant by fraction-free Bareiss elimination (exact for int/Fraction entries)."""
    a = [list(r) for r in rows]
    n = len(a)
    if n == 0:
        return 1
    exact = all(isinstance(x, (int, Fraction)) for r in a for x in r)
    if not exact:
        return float(np.linalg.det(np.array(a, dtype=float)))
    # clear denominators so Bareiss stays in the integers
    den = 1
    for r in a:
        for x in r:
            if isinstance(x, Fraction):
                den = den * x.denominator // math.gcd(den, x.denominator)
    a = [[int(x * den) for x in r] for r in a]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    out = Fraction(sign * a[n - 1][n - 1], den ** n)
    return int(out) if out.denominator == 1 else out
