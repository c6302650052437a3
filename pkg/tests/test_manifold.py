import math
import pickle
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ratnear.errors import DomainError, PreconditionError
from ratnear.manifold import MAX_JET_ORDER, Box, catalog, from_config, parse_domain


def test_catalog_models():
    P = catalog("parabola")
    assert (P.d, P.m, P.n, P.is_polynomial) == (1, 1, 2, True)
    V = catalog("veronese", n=4)
    assert (V.d, V.m) == (1, 3)
    assert V.f([Fraction(1, 2)]) == (Fraction(1, 4), Fraction(1, 8), Fraction(1, 16))
    C = catalog("circle", r=3)
    assert not C.is_polynomial
    assert abs(C.f([0.5])[0] - math.sqrt(2.75)) < 1e-15
    B = catalog("power-block", d=2, m=2, k=1)
    assert B.f([Fraction(1, 2), Fraction(1, 3)]) == (Fraction(1, 9), Fraction(1, 27))


def test_exact_partials_and_jets():
    V = catalog("veronese", n=3)
    x = Fraction(2, 3)
    assert V.partial([x], (1,)) == (Fraction(4, 3), Fraction(4, 3))
    assert V.partial([x], (3,)) == (0, 6)
    jet = V.jet([x], 2)
    assert jet.f == V.f([x])
    with pytest.raises(PreconditionError):
        V.jet([x], MAX_JET_ORDER + 1)


def test_smooth_partials_match_closed_form():
    C = catalog("circle", r=1)
    x = 0.3
    assert abs(C.partial([x], (1,))[0] + x / math.sqrt(1 - x * x)) < 1e-14
    E = catalog("custom", f="exp(x), sin(x)", domain=(-1, 1))
    assert np.allclose(E.partial([0.2], (2,)), [math.exp(0.2), -math.sin(0.2)])


def test_domain_errors():
    with pytest.raises(DomainError):
        catalog("parabola").f([5])
    with pytest.raises(DomainError):
        catalog("circle", r=1, domain=(-1, 1))
    with pytest.raises(ValueError):
        catalog("custom", f="x")
    with pytest.raises(ValueError):
        catalog("nonsense")


def test_config_round_trip_and_pickle():
    M = from_config({"name": "veronese", "n": "3", "domain": "-1/2,1/2"})
    assert M.domain == Box.interval(Fraction(-1, 2), Fraction(1, 2))
    M2 = pickle.loads(pickle.dumps(M))
    assert M2.f([Fraction(1, 3)]) == M.f([Fraction(1, 3)])
    assert parse_domain("0,1;2,3") == ((0, 2), (1, 3))


@given(st.floats(-0.89, 0.89))
def test_f_array_agrees_with_pointwise(x):
    V = catalog("veronese", n=4)
    assert np.allclose(V.f_array(np.array([[x]]))[0], [float(v) for v in V.f([x])])


def test_box_helpers():
    B = Box.interval(0, 1)
    assert B.scaled(Fraction(1, 2)) == Box.interval(Fraction(1, 4), Fraction(3, 4))
    assert len(B.grid(0.1)) == 10 and len(B.sample_grid(11)) == 11
    assert B.radius == Fraction(1, 2)
    assert Box.ball((0, 0), 1).measure == 4


def test_derivative_and_lipschitz_bounds():
    P = catalog("parabola", domain=(0, 1))
    assert P.derivative_bound() == 1.25 * 2
    assert abs(P.lipschitz() - 2.2) < 1e-12
