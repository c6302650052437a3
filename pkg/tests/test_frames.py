from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ratnear import multivector as mv
from ratnear.errors import PreconditionError
from ratnear.frames import decomposition_residuals, distance_split, eps0, frame_at, lift, nearest_parameter
from ratnear.manifold import Box, catalog


def test_parabola_frame_is_exact():
    F = frame_at(catalog("parabola"), [Fraction(1, 2)])
    assert F.exact
    assert F.y.coeffs == (1, Fraction(1, 2), Fraction(1, 4))
    # g spans the normal of the tangent plane through y and y'
    assert mv.inner(F.g, F.y) == 0 and mv.inner(F.g, F.dy[0]) == 0
    res = decomposition_residuals(F)
    assert res["dims"] == (1, 1, 1) and res["residual"] < 1e-12


@pytest.mark.parametrize("M", [catalog("power-block", d=2, m=1, k=1), catalog("veronese", n=4)])
def test_split_dimensions(M):
    x = [float(v) * 0.3 for v in M.domain.hi]
    res = decomposition_residuals(frame_at(M, x))
    assert res["dims"] == (M.m, M.d, 1)
    assert res["residual"] < 1e-9


@given(st.floats(-0.85, 0.85), st.lists(st.integers(-9, 9), min_size=3, max_size=3).filter(any))
def test_distance_split_triangle(x, r):
    F = frame_at(catalog("parabola", domain=(-1, 1)), [x])
    assert distance_split(F, r).holds


@given(st.floats(-0.85, 0.85), st.lists(st.integers(-9, 9), min_size=3, max_size=3).filter(any))
def test_projections_partition_the_vector(x, r):
    F = frame_at(catalog("parabola", domain=(-1, 1)), [Fraction(x)])
    parts = [mv.project(w, r) for w in (F.g, F.u, F.y)]
    assert [sum(c) for c in zip(*(p.coeffs for p in parts))] == r


@given(st.floats(0.2, 0.8), st.floats(-1, 1), st.floats(0.1, 0.9))
def test_nearest_parameter_bound(x, s, frac):
    M = catalog("parabola", domain=(0, 1))
    F = frame_at(M, [x], Box.interval(0, 1))
    eps = eps0(F)
    delta = eps * eps
    # a nearby lift perturbed inside V(g) by less than delta
    y = lift(M, [x + s * eps * frac * 0.1]).to_array()
    g = F.g.to_array() / np.linalg.norm(F.g.to_array())
    r = y / np.linalg.norm(y) + 0.5 * delta * g
    sp = distance_split(F, list(r))
    if not (sp.dg < delta and sp.du < eps):
        return
    out = nearest_parameter(F, list(r), delta, eps)
    assert out.dp <= out.bound


def test_nearest_parameter_rejects_bad_scales():
    F = frame_at(catalog("parabola", domain=(0, 1)), [0.5])
    with pytest.raises(PreconditionError):
        nearest_parameter(F, [1, 0.5, 0.25], 0.5, 0.1)
