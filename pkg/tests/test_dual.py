from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from ratnear.cells import CellParams, inclusion_check
from ratnear.dual import (DualCurve, curve_theta_profile, dual_map, wronskian, wronskian_functions,
                          wronskian_inequality_check)
from ratnear.errors import InvariantViolation, PreconditionError
from ratnear.manifold import Box, catalog

V2 = catalog("veronese", n=2)
V3 = catalog("veronese", n=3)
rationals = st.fractions(Fraction(-9, 10), Fraction(9, 10), max_denominator=50)


@given(rationals)
def test_veronese2_dual_in_closed_form(x):
    D = DualCurve(V2)
    assert D.z(x) == (x * x, -2 * x, 1)
    assert D.W_y(x) == 2 and D.W_z(x) == 4
    zp = D.z(x, 1)
    assert sum(a * b for a, b in zip(zp, D.y_derivs(x, 1)[1])) == -2


@pytest.mark.parametrize("M", [V2, V3, catalog("veronese", n=4)])
def test_relation_triangle_exact(M):
    D = DualCurve(M)
    for x in (Fraction(-3, 7), Fraction(1, 9), Fraction(4, 5)):
        for (i, j), (val, want) in D.relations(x).items():
            assert val == want, (i, j)


def test_wronskians():
    assert wronskian_functions(["1", "x", "x**2"], Fraction(3, 7)) == 2
    assert wronskian_functions(["1", "x", "x**2", "x**3"], Fraction(1, 3)) == 12
    assert wronskian([[1, 2], [3, 4]]) == -2


def test_inequality_on_a_mixed_cubic():
    C = catalog("custom", f="x**2, x**3 + x", domain=(-1, 1))
    rep = wronskian_inequality_check(C, [Fraction(i, 10) for i in range(-9, 10)])
    assert rep.exact and rep.ok and rep.min_ratio >= 1
    # numeric oracle: determinant of the 4x4 matrix of (z, z', z'', z''') from sympy
    x = sp.Symbol("x")
    y = sp.Matrix([1, x, x ** 2, x ** 3 + x])
    ys = [y.diff(x, j) for j in range(3)]
    z = sp.Matrix([sp.Matrix.hstack(*ys, sp.eye(4)[:, c]).det() for c in range(4)])
    Wz = sp.Matrix.hstack(*[z.diff(x, j) for j in range(4)]).det()
    Wy = sp.Matrix.hstack(*[y.diff(x, j) for j in range(4)]).det()
    for xv in (Fraction(-1, 2), Fraction(1, 3)):
        ratio = abs(Wz.subs(x, sp.Rational(xv))) / abs(Wy.subs(x, sp.Rational(xv))) ** 3
        assert ratio >= 1
        assert DualCurve(C).W_z(xv) ** 2 == Wz.subs(x, sp.Rational(xv)) ** 2


def test_smooth_curve_uses_richardson():
    S = catalog("custom", f="exp(x), sin(x)", domain=(-1, 1))
    D = DualCurve(S)
    assert D.method == "richardson"
    for x in (-0.5, 0.1, 0.6):
        assert D.relation_residual(x) <= 1e-8
    rep = wronskian_inequality_check(S, [-0.5, 0.1, 0.6])
    assert rep.ok and not rep.exact


def test_dual_map_and_errors():
    zs = dual_map(V2, Fraction(1, 2))
    assert zs[0] == (Fraction(1, 4), -1, 1) and len(zs) == 3
    with pytest.raises(PreconditionError):
        DualCurve(catalog("power-block", d=2, m=1, k=1))
    with pytest.raises(PreconditionError):
        DualCurve(V2).z(Fraction(1, 2), 5)
    flat = catalog("custom", f="x**3", domain=(-1, 1))
    with pytest.raises(PreconditionError):
        dual_map(flat, 0)


def test_hard_failure_on_violation(monkeypatch):
    monkeypatch.setattr(DualCurve, "W_z", lambda self, x: Fraction(1, 2))
    with pytest.raises(InvariantViolation):
        wronskian_inequality_check(V2, [Fraction(1, 3)])


def test_K1_bounds_sampled_derivatives():
    D = DualCurve(V3)
    K1 = D.K1()
    for x in np.linspace(-0.9, 0.9, 13):
        for j in range(4):
            assert np.linalg.norm([float(c) for c in D.z(float(x), j)]) <= K1


def test_curve_profile_formula_sorting_and_tilde():
    D = DualCurve(V2)
    K1 = D.K1()
    P = CellParams(400, 0.01, 0.5, 1, 1, c0=1)
    W = curve_theta_profile(P, K1)
    assert W.thetas == pytest.approx((K1 * 0.01, 2 * K1 / (0.01 * 400), 2 * K1 * 0.5 * 400))
    assert W.is_sorted
    assert W.tilde <= 10 * P.Q ** (-1 / 6)
    P3 = CellParams(400, 0.02, 0.5, 1, 2, c0=1)
    W3 = curve_theta_profile(P3, DualCurve(V3).K1())
    assert W3.is_sorted and W3.k == 4
    with pytest.raises(PreconditionError):
        curve_theta_profile(CellParams(400, 0.9, 0.5, 1, 1, c0=1), K1)


def test_widened_window_detection_veronese3():
    # psi* sits between the widened lower edge Q*^(-3/5) and the standard one Q*^(-1/2)
    Qs, ps, kappa = 400, 0.045, 0.25
    P = CellParams(Qs, ps, kappa, 1, 2, c0=0.3)
    assert P.admissible() and ps < Qs ** -0.5
    rep = inclusion_check(V3, Box.interval(-0.8, 0.8), Qs, ps, kappa, c0=0.3, per_axis=401)
    assert rep.good > 0 and rep.ok and rep.ambient < 0.9
    # a smaller c0 breaks the inclusion, so the test is not vacuous
    weak = inclusion_check(V3, Box.interval(-0.8, 0.8), Qs, ps, kappa, c0=0.26, per_axis=401)
    assert not weak.ok


def test_widened_window_detection_veronese2():
    # for n = 2 the widened window coincides with the standard one
    Qs, ps, kappa = 400, 0.01, 0.5
    P = CellParams(Qs, ps, kappa, 1, 1, c0=1)
    assert P.admissible()
    rep = inclusion_check(V2, Box.interval(-0.8, 0.8), Qs, ps, kappa, c0=1, per_axis=401)
    assert rep.good > 0 and rep.ok and rep.ambient < 0.95
