"""Monge manifolds x -> (x, f(x)) over a parameter box, with derivative jets.

Polynomial models carry an exact representation (:class:`Poly`) and
evaluate exactly at rational arguments.  Other models are sympy
expressions evaluated with mpmath at 30 significant digits and exported
as doubles.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from itertools import product
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import mpmath
import numpy as np
import sympy as sp

from .errors import DomainError, PreconditionError

WORK_DPS = 30
MAX_JET_ORDER = 12


# -- boxes -------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box; also used for sup-norm balls."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(self.lo)
        hi = tuple(self.hi)
        if len(lo) != len(hi):
            raise ValueError("box bounds of different length")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"empty box {lo} .. {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def ball(cls, center: Sequence, radius) -> "Box":
        return cls(tuple(c - radius for c in center), tuple(c + radius for c in center))

    @classmethod
    def interval(cls, lo, hi) -> "Box":
        return cls((lo,), (hi,))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> tuple:
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    @property
    def radius(self) -> float:
        """Sup-norm inradius (half the shortest side)."""
        return min((b - a) / 2 for a, b in zip(self.lo, self.hi))

    @property
    def measure(self) -> float:
        return float(np.prod([float(b - a) for a, b in zip(self.lo, self.hi)]))

    def scaled(self, factor) -> "Box":
        """The box with the same centre and sides multiplied by ``factor``."""
        c = self.center
        return Box(tuple(ci - (ci - a) * factor for ci, a in zip(c, self.lo)),
                   tuple(ci + (b - ci) * factor for ci, b in zip(c, self.hi)))

    def contains(self, x: Sequence, slack: float = 0.0) -> bool:
        return all(a - slack <= xi <= b + slack for a, xi, b in zip(self.lo, x, self.hi))

    def contains_box(self, other: "Box") -> bool:
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def intersect(self, other: "Box") -> "Box":
        return Box(tuple(max(a, c) for a, c in zip(self.lo, other.lo)),
                   tuple(min(b, d) for b, d in zip(self.hi, other.hi)))

    def grid_axes(self, h: float) -> list[np.ndarray]:
        """Cell-centred sample coordinates of spacing about h on each axis."""
        axes = []
        for a, b in zip(self.lo, self.hi):
            a, b = float(a), float(b)
            n = max(1, int(math.ceil((b - a) / h - 1e-9)))
            axes.append(a + (np.arange(n) + 0.5) * (b - a) / n)
        return axes

    def grid(self, h: float) -> np.ndarray:
        """All cell-centred grid points, shape (N, d)."""
        axes = self.grid_axes(h)
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample_grid(self, per_axis: int) -> np.ndarray:
        """Closed grid with ``per_axis`` points per axis (endpoints included)."""
        axes = [np.linspace(float(a), float(b), per_axis) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


# -- exact polynomials -------------------------------------------------------

class Poly:
    """Multivariate polynomial with rational coefficients."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[tuple, object]):
        self.nvars = nvars
        self.terms = {tuple(e): Fraction(c) for e, c in terms.items() if c != 0}

    @classmethod
    def from_sympy(cls, expr, symbols: Sequence[sp.Symbol]) -> "Poly":
        p = sp.Poly(sp.expand(expr), *symbols)
        terms = {}
        for exps, c in p.terms():
            c = sp.Rational(c)
            terms[tuple(exps)] = Fraction(int(c.p), int(c.q))
        return cls(len(symbols), terms)

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def diff(self, alpha: Sequence[int]) -> "Poly":
        out = {}
        for e, c in self.terms.items():
            if any(ei < ai for ei, ai in zip(e, alpha)):
                continue
            coef = c
            for ei, ai in zip(e, alpha):
                coef *= math.perm(ei, ai)
            ne = tuple(ei - ai for ei, ai in zip(e, alpha))
            out[ne] = out.get(ne, 0) + coef
        return Poly(self.nvars, out)

    def __call__(self, x: Sequence):
        exact = all(isinstance(v, Rational) for v in x)
        total = Fraction(0) if exact else 0.0
        for e, c in self.terms.items():
            t = c if exact else float(c)
            for xi, ei in zip(x, e):
                if ei:
                    t = t * xi ** ei
            total += t
        if exact and total.denominator == 1:
            return int(total)
        return total

    def eval_array(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[0])
        for e, c in self.terms.items():
            t = np.full(X.shape[0], float(c))
            for i, ei in enumerate(e):
                if ei:
                    t = t * X[:, i] ** ei
            out += t
        return out

    def homogeneous(self, D: int | None = None) -> tuple[dict, int]:
        """Integer form: q^D f(a/q) = (sum_e c_e a^e q^(D-|e|)) / L.

        Returns ({exponent: integer coefficient}, L)."""
        D = self.degree if D is None else D
        L = reduce(math.lcm, (c.denominator for c in self.terms.values()), 1)
        return {e: int(c * L) for e, c in self.terms.items()}, L

    def scaled_value(self, a: Sequence[int], q: int) -> Fraction:
        """Exact value of q * f(a / q) for integers a, q."""
        D = max(self.degree, 1)
        coeffs, L = self.homogeneous(D)
        num = 0
        for e, c in coeffs.items():
            t = c * q ** (D - sum(e))
            for ai, ei in zip(a, e):
                if ei:
                    t *= ai ** ei
            num += t
        return Fraction(num, L * q ** (D - 1))

    def __repr__(self) -> str:
        return f"Poly({self.terms})"


# -- jets --------------------------------------------------------------------

@dataclass(frozen=True)
class Jet:
    """f and its partials up to ``order`` at ``x``; values[alpha] is an m-tuple."""

    x: tuple
    order: int
    values: dict

    def partial(self, alpha: Sequence[int]) -> tuple:
        return self.values[tuple(alpha)]

    @property
    def f(self) -> tuple:
        return self.values[(0,) * len(self.x)]

    def grad(self, i: int) -> tuple:
        alpha = [0] * len(self.x)
        alpha[i] = 1
        return self.values[tuple(alpha)]


def multi_indices(d: int, order: int) -> list[tuple]:
    out = [a for a in product(range(order + 1), repeat=d) if sum(a) <= order]
    out.sort(key=lambda a: (sum(a), tuple(-v for v in a)))
    return out


# -- manifolds ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Manifold:
    """Monge model {(x, f(x)) : x in domain}."""

    name: str
    d: int
    m: int
    domain: Box
    exprs: tuple
    symbols: tuple
    kind: str = "smooth"
    polys: tuple | None = None
    params: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.d + self.m

    @property
    def is_polynomial(self) -> bool:
        return self.kind == "polynomial"

    @property
    def spec(self) -> dict:
        """Plain description from which :func:`from_config` rebuilds the model."""
        out = {"name": self.name}
        out.update(dict(self.params))
        out["domain"] = ";".join(f"{a},{b}" for a, b in zip(self.domain.lo, self.domain.hi))
        return out

    def __reduce__(self):
        return (_rebuild, (self.spec,))

    def _check_point(self, x: Sequence) -> None:
        if len(x) != self.d:
            raise DomainError(f"expected a point in R^{self.d}, got length {len(x)}")
        if not self.domain.contains(x):
            raise DomainError(f"{tuple(x)} outside the domain of {self.name}")

    def _mp_func(self, alpha: tuple):
        key = ("mp", alpha)
        if key not in self._cache:
            exprs = [sp.diff(e, *[s for s, a in zip(self.symbols, alpha) for _ in range(a)])
                     if any(alpha) else e for e in self.exprs]
            self._cache[key] = sp.lambdify(self.symbols, exprs, modules="mpmath")
        return self._cache[key]

    def _np_func(self, alpha: tuple):
        key = ("np", alpha)
        if key not in self._cache:
            exprs = [sp.diff(e, *[s for s, a in zip(self.symbols, alpha) for _ in range(a)])
                     if any(alpha) else e for e in self.exprs]
            self._cache[key] = sp.lambdify(self.symbols, exprs, modules="numpy")
        return self._cache[key]

    def _poly_partial(self, alpha: tuple) -> tuple:
        key = ("poly", alpha)
        if key not in self._cache:
            self._cache[key] = tuple(p.diff(alpha) for p in self.polys)
        return self._cache[key]

    def partial(self, x: Sequence, alpha: Sequence[int], check: bool = True) -> tuple:
        """The partial derivative d^alpha f at x (exact for polynomial models at rational x)."""
        x = tuple(x)
        alpha = tuple(alpha)
        if check:
            self._check_point(x)
        if self.polys is not None:
            return tuple(p(x) for p in self._poly_partial(alpha))
        with mpmath.workdps(WORK_DPS):
            vals = self._mp_func(alpha)(*[mpmath.mpf(v) if not isinstance(v, Fraction)
                                          else mpmath.mpf(v.numerator) / v.denominator for v in x])
        return tuple(float(v) for v in vals)

    def partial_mp(self, x: Sequence, alpha: Sequence[int]) -> tuple:
        """High-precision partial as mpmath numbers (30 digits)."""
        with mpmath.workdps(WORK_DPS):
            args = [mpmath.mpf(v.numerator) / v.denominator if isinstance(v, Fraction)
                    else mpmath.mpf(v) for v in x]
            return tuple(self._mp_func(tuple(alpha))(*args))

    def f(self, x: Sequence) -> tuple:
        return self.partial(x, (0,) * self.d)

    def jet(self, x: Sequence, order: int) -> Jet:
        """All partials of f of total order <= ``order`` at x."""
        if not 0 <= order <= MAX_JET_ORDER:
            raise PreconditionError(f"jet order {order} unsupported (max {MAX_JET_ORDER})")
        x = tuple(x)
        self._check_point(x)
        vals = {a: self.partial(x, a, check=False) for a in multi_indices(self.d, order)}
        return Jet(x, order, vals)

    def f_array(self, X: np.ndarray, alpha: Sequence[int] | None = None) -> np.ndarray:
        """Vectorised float evaluation, returns shape (N, m)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        alpha = (0,) * self.d if alpha is None else tuple(alpha)
        if self.polys is not None:
            return np.stack([p.eval_array(X) for p in self._poly_partial(alpha)], axis=1)
        vals = self._np_func(alpha)(*[X[:, i] for i in range(self.d)])
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), (X.shape[0],)) for v in vals],
                        axis=1)

    def derivative_bound(self, box: Box | None = None, per_axis: int = 64) -> float:
        """Sampled bound C on the box: sup of |x|, |f|, first and second partials, times 1.25, at least 1."""
        box = self.domain if box is None else box.intersect(self.domain)
        key = ("C", box, per_axis)
        if key not in self._cache:
            X = box.sample_grid(per_axis)
            sup = max(1.0, float(np.max(np.abs(X))))
            for alpha in multi_indices(self.d, 2):
                sup = max(sup, float(np.max(np.abs(self.f_array(X, alpha)))))
            self._cache[key] = 1.25 * sup
        return self._cache[key]

    def lipschitz(self, box: Box | None = None, per_axis: int = 64) -> float:
        """Sampled c1 with max_l |f_l(x) - f_l(x')| <= c1 |x - x'|_inf, at least 1."""
        box = self.domain if box is None else box.intersect(self.domain)
        key = ("c1", box, per_axis)
        if key not in self._cache:
            X = box.sample_grid(per_axis)
            tot = np.zeros((X.shape[0], self.m))
            for i in range(self.d):
                alpha = tuple(1 if j == i else 0 for j in range(self.d))
                tot += np.abs(self.f_array(X, alpha))
            self._cache[key] = max(1.0, 1.1 * float(np.max(tot)))
        return self._cache[key]


def from_expressions(name: str, exprs: Sequence, symbols: Sequence[sp.Symbol], domain: Box,
                     params: Iterable = ()) -> Manifold:
    """Build a model from sympy expressions; polynomial detection is automatic."""
    exprs = tuple(sp.sympify(e) for e in exprs)
    symbols = tuple(symbols)
    if domain.dim != len(symbols):
        raise ValueError("domain dimension differs from the number of parameters")
    polys = None
    kind = "smooth"
    if all(e.is_polynomial(*symbols) for e in exprs):
        try:
            polys = tuple(Poly.from_sympy(e, symbols) for e in exprs)
            kind = "polynomial"
        except (TypeError, sp.PolynomialError, sp.CoercionFailed):
            polys = None
    return Manifold(name, len(symbols), len(exprs), domain, exprs, symbols, kind, polys,
                    tuple(params))


def _as_box(domain, d: int) -> Box | None:
    if domain is None:
        return None
    if isinstance(domain, Box):
        return domain
    lo, hi = domain
    if np.ndim(lo) == 0:
        return Box((lo,) * d, (hi,) * d)
    return Box(tuple(lo), tuple(hi))


def _num(v):
    """Parse a config number, keeping rationals exact."""
    if isinstance(v, (int, Fraction, float)):
        return v
    s = str(v).strip()
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return Fraction(s)
    except ValueError:
        return float(s)


CATALOG = ("parabola", "veronese", "circle", "power-block", "custom")


def catalog(name: str, **params) -> Manifold:
    """Models used throughout: parabola, veronese(n), circle(r), power-block(d, m, k), custom.

    ``domain`` overrides the default parameter box (a Box or a (lo, hi) pair).
    """
    domain = params.pop("domain", None)
    if name == "parabola":
        x = sp.Symbol("x1")
        box = _as_box(domain, 1) or Box.interval(-2, 2)
        return from_expressions("parabola", [x ** 2], [x], box)
    if name == "veronese":
        n = int(params.pop("n", 2))
        avoid_zero = bool(params.pop("avoid_zero", False))
        if n < 2:
            raise ValueError("veronese needs n >= 2")
        x = sp.Symbol("x1")
        default = Box.interval(Fraction(1, 10), Fraction(9, 10)) if avoid_zero else \
            Box.interval(Fraction(-9, 10), Fraction(9, 10))
        box = _as_box(domain, 1) or default
        return from_expressions("veronese", [x ** j for j in range(2, n + 1)], [x], box,
                                (("n", n),) + ((("avoid_zero", True),) if avoid_zero else ()))
    if name == "circle":
        r = _num(params.pop("r", 1))
        if not r > 0:
            raise ValueError("circle radius parameter r must be positive")
        x = sp.Symbol("x1")
        root = math.sqrt(float(r))
        box = _as_box(domain, 1) or Box.interval(-root / 2, root / 2)
        if max(abs(float(box.lo[0])), abs(float(box.hi[0]))) ** 2 >= float(r) * (1 - 1e-12):
            raise DomainError("circle domain touches x^2 = r")
        rr = sp.Rational(str(Fraction(r))) if isinstance(r, (int, Fraction)) else sp.Float(r, 30)
        return from_expressions("circle", [sp.sqrt(rr - x ** 2)], [x], box, (("r", r),))
    if name == "power-block":
        d = int(params.pop("d", 2))
        m = int(params.pop("m", 1))
        k = int(params.pop("k", 1))
        if d < 1 or m < 1 or k < 0:
            raise ValueError("power-block needs d, m >= 1 and k >= 0")
        xs = sp.symbols(f"x1:{d + 1}")
        box = _as_box(domain, d) or Box((Fraction(-9, 10),) * d, (Fraction(9, 10),) * d)
        exprs = [xs[-1] ** (k + j) for j in range(1, m + 1)]
        return from_expressions("power-block", exprs, xs, box, (("d", d), ("m", m), ("k", k)))
    if name == "custom":
        fs = params.pop("f")
        if isinstance(fs, str):
            fs = [s for s in fs.split(",") if s.strip()]
        d = int(params.pop("d", 1))
        xs = sp.symbols(f"x1:{d + 1}") if d > 1 else (sp.Symbol("x1"),)
        loc = {str(s): s for s in xs}
        loc["x"] = xs[0]
        exprs = [sp.sympify(e, locals=loc) for e in fs]
        box = _as_box(domain, d)
        if box is None:
            raise ValueError("custom models need an explicit domain")
        return from_expressions("custom", exprs, xs, box,
                                (("f", ",".join(str(e) for e in exprs)), ("d", d)))
    raise ValueError(f"unknown manifold {name!r}; known: {', '.join(CATALOG)}")


def parse_domain(text: str) -> tuple:
    """'lo,hi' or 'lo1,hi1;lo2,hi2' -> (lo tuple, hi tuple)."""
    lo, hi = [], []
    for part in text.split(";"):
        a, b = part.split(",")
        lo.append(_num(a))
        hi.append(_num(b))
    return tuple(lo), tuple(hi)


def from_config(section: Mapping[str, str]) -> Manifold:
    """Build a model from a mapping such as a configparser section.

    Keys: ``name`` plus model parameters, optional ``domain = lo,hi[;lo,hi...]``.
    """
    sec = dict(section)
    name = sec.pop("name").strip()
    params = {}
    for key, val in sec.items():
        if key == "domain":
            params["domain"] = parse_domain(val)
        elif key == "f":
            params["f"] = val
        elif key == "avoid_zero":
            params[key] = str(val).strip().lower() in ("1", "true", "yes")
        else:
            params[key] = _num(val)
    return catalog(name, **params)


def _rebuild(spec: dict) -> Manifold:
    return from_config({k: str(v) for k, v in spec.items()})


def load_manifold(path: str, section: str = "manifold") -> Manifold:
    cfg = configparser.ConfigParser()
    with open(path) as fh:
        cfg.read_file(fh)
    return from_config(cfg[section])
