import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ratnear.errors import PreconditionError
from ratnear.manifold import Box, catalog
from ratnear.ubiquity import (PsiRule, ResonantSystem, dim_estimate, dim_target, lambda_in_S_check,
                              pythagorean_points, ubiquity_fraction, ubiquity_fraction_inclusion)

P = catalog("parabola")
UNIT = Box.interval(0, 1)
PARA = ResonantSystem(P, PsiRule(0.8), UNIT)

# grid fractions for psi(q) = q^-0.8, rho0 = 1 on [0, 1]; J sizes agree with the integer oracle below
FRACTIONS = {6: 0.6954452753229096, 7: 0.7880402605091771, 8: 0.8242494523901559,
             9: 0.8298278086263952, 10: 0.819140625}


def _J_oracle(Q, expo):
    """(q, a) with 0 <= a <= q <= Q and dist(a^2/q, Z) <= q^-expo / 2, by residues."""
    out = []
    for q in range(1, Q + 1):
        for a in range(q + 1):
            r = a * a % q
            if min(r, q - r) / q <= 0.5 * q ** -expo:
                out.append((q, (a,)))
    return out


def _union_length(centers, rho):
    iv = sorted((max(c - rho, 0.0), min(c + rho, 1.0)) for c in centers)
    total, (lo, hi) = 0.0, iv[0]
    for a, b in iv[1:]:
        if a > hi:
            total += hi - lo
            lo, hi = a, b
        else:
            hi = max(hi, b)
    return total + hi - lo


def test_psi_rule_parse_and_str():
    assert PsiRule.parse("q^-0.8") == PsiRule(0.8)
    assert PsiRule.parse("0.5*q^-1")(4) == pytest.approx(0.125)
    assert PsiRule.parse("0.3")(1000) == 0.3
    assert PsiRule.parse(str(PsiRule(1.25, 0.5))) == PsiRule(1.25, 0.5)
    with pytest.raises(PreconditionError):
        PsiRule.parse("2*x^3")


@pytest.mark.parametrize("t", [6, 7, 8])
def test_J_matches_residue_oracle(t):
    assert sorted(PARA.J(t)) == sorted(_J_oracle(2 ** t, 0.8))


def test_J_nested():
    sizes = [len(PARA.J(t)) for t in range(1, 9)]
    assert sizes == sorted(sizes)
    assert set(PARA.J(5)) <= set(PARA.J(6))


@pytest.mark.parametrize("t", sorted(FRACTIONS))
def test_pinned_fractions(t):
    f = ubiquity_fraction(PARA, t)
    assert f == pytest.approx(FRACTIONS[t], abs=1e-12)
    assert f >= 0.6
    rho = PARA.rho(2 ** t)
    exact = _union_length([a[0] / q for q, a in _J_oracle(2 ** t, 0.8)], rho)
    assert f == pytest.approx(exact, abs=0.01)
    assert ubiquity_fraction_inclusion(PARA, t) <= f + 1e-12


def test_large_constant_psi_covers_everything():
    # psi = 1 makes every a/q resonant; rho0 = 4 gives rho(8) = 1/16, half the widest Farey gap of order 8
    S = ResonantSystem(P, PsiRule(0.0, 1.0), UNIT, rho0=4.0)
    assert ubiquity_fraction(S, 3) == 1.0


def test_rho_formula():
    S = ResonantSystem(catalog("veronese", n=3), PsiRule(0.5), Box.interval(-1, 1), rho0=0.7)
    Q = 64
    assert S.rho(Q) == pytest.approx(0.7 * ((Q ** -0.5) ** 2 * Q ** 2) ** -1)


@given(st.integers(3, 7), st.floats(0.3, 1.2))
def test_lambda_inside_S(t, expo):
    checked, fails = lambda_in_S_check(ResonantSystem(P, PsiRule(expo), UNIT), t)
    assert checked > 0 and fails == 0


def test_lambda_inside_S_on_circle():
    S = ResonantSystem(catalog("circle", r=1), PsiRule(0.6), Box.interval(-0.8, 0.8))
    checked, fails = lambda_in_S_check(S, 6)
    assert checked > 0 and fails == 0


def test_pythagorean_points():
    pts = pythagorean_points(0, 30, Box.interval(0, 1))
    for a, c in pts:
        b2 = c * c - a * a
        assert math.isqrt(b2) ** 2 == b2
    assert (3, 5) in pts and (4, 5) in pts and (5, 13) in pts and (20, 29) in pts
    # hypotenuses up to 30 with a primitive triple: 5, 13, 17, 25, 29, two legs each
    assert len(pts) == 10


def test_errors():
    with pytest.raises(PreconditionError):
        ubiquity_fraction(PARA, 0)
    with pytest.raises(PreconditionError):
        ubiquity_fraction(PARA, 5, grid_h=0.5)
    with pytest.raises(PreconditionError):
        dim_estimate(P, 0.75, [64, 128, 256])
    with pytest.raises(PreconditionError):
        dim_estimate(P, -1, [64, 128, 256, 512])
    with pytest.raises(PreconditionError):
        dim_estimate(catalog("circle", r=3), 1.5, [8, 16, 32, 64])


def test_dim_targets():
    assert dim_target("unit-circle", 1.5) == pytest.approx(0.4)
    assert dim_target("planar", 0.75) == pytest.approx(5 / 7)
    assert dim_target("general", 1.0, n=3, m=2) == pytest.approx(0.0)


def test_dim_estimate_small_unit_circle():
    est = dim_estimate(catalog("circle", r=1), 1.5, [2 ** k for k in range(6, 12)], Box.interval(0, 1))
    assert 0 <= est.value <= 1
    assert est.value == pytest.approx(0.4, abs=0.12)
