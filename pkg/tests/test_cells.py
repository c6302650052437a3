import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ratnear.cells import (CellBody, CellParams, adapted_matrix, ball_volume, ball_volume_exact, body_volumes,
                           default_c0, default_kappa, default_seed_basis, detect, find_integer_point,
                           good_set_member, integer_points, integer_points_scan, kappa0, theta_hat_bound,
                           theta_profile)
from ratnear.errors import PreconditionError
from ratnear.frames import frame_at
from ratnear.manifold import Box, catalog

PARABOLA = catalog("parabola", domain=(0, 1))
UNIT = Box.interval(0, 1)


def test_ball_volumes_of_diameter_one():
    assert ball_volume(1) == pytest.approx(1)
    assert abs(ball_volume(2) - math.pi / 4) < 1e-15
    assert sp.simplify(ball_volume_exact(3) - sp.pi / 6) == 0
    assert kappa0(1, 1) == pytest.approx(1)
    assert kappa0(1, 2) == pytest.approx(4 / math.pi)
    assert kappa0(2, 2) == pytest.approx(16 / math.pi ** 2)
    assert default_kappa(1, 1) == 0.5


def test_default_c0_closed_form():
    # d = m = 1, C = 1, r_B = 1: the four candidates are 144, 2, 1296 and 6 * 12096 * 2 * 9
    assert default_c0(1, 1, 1, 1, "local") == pytest.approx(1306368)
    assert default_c0(1, 1, 1, 1, "uniform") == pytest.approx(1306368 ** 3)


@pytest.mark.parametrize("d,m", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_body_volume_is_scale_free(d, m):
    _, prod, target = body_volumes(d, m, Fraction(37), Fraction(1, 3), Fraction(1, 2), exact=True)
    assert sp.simplify(prod - target) == 0
    _, prod_f, target_f = body_volumes(d, m, 1e4, 0.01, 0.7)
    assert prod_f == pytest.approx(target_f, rel=1e-12)


def test_derived_parameters_uniform_and_local():
    P = CellParams(100, 0.1, 0.5, 1, 1, c0=2)
    assert (P.Q, P.psi, P.delta0) == (200, pytest.approx(0.8), 0.25)
    assert P.rho == pytest.approx(2 / 0.25 * (0.1 * 100 ** 2) ** -1)
    L = CellParams(100, 0.1, 0.5, 1, 1, c0=2, size_rule="local")
    assert (L.psi, L.delta0) == (pytest.approx(3.2), 0.125)
    assert P.size_ok() is False and CellParams(256, 0.1, 0.5, 1, 1, c0=2).size_ok()
    assert P.psi_window() == (pytest.approx(0.5 ** (-1 / 3) * 100 ** -1), 1.0)


def test_body_volume_by_monte_carlo_and_routes_agree():
    F = frame_at(PARABOLA, [0.4], UNIT)
    P = CellParams.for_frame(F, 4, 0.5, 0.5)
    body = CellBody.at(F, P)
    Pg, Pu, Py = body.projectors()
    assert np.allclose(Pg + Pu + Py, np.eye(3))
    rng = np.random.default_rng(0)
    R = body.t_g + body.t_u + body.t_y
    X = rng.uniform(-R, R, (200000, 3))
    inside = ((np.einsum("ij,jk,ik->i", X, Pg, X) < body.t_g ** 2)
              & (np.einsum("ij,jk,ik->i", X, Pu, X) < body.t_u ** 2)
              & (np.einsum("ij,jk,ik->i", X, Py, X) <= body.t_y ** 2))
    est = inside.mean() * (2 * R) ** 3
    assert est == pytest.approx(body.volume, rel=0.03)
    assert body.volume == pytest.approx(2 ** 3 * 0.5)
    # the projector route and the interior-product route decide the same points
    for v in X[:200]:
        r = [float(c) for c in v]
        fv = body.form_values(r)
        assert np.allclose(fv, [r @ Pg @ r, r @ Pu @ r, r @ Py @ r])


@settings(max_examples=25)
@given(st.floats(0.01, 0.99), st.floats(2, 12), st.floats(0.25, 1))
def test_search_matches_cube_scan(x, Qs, ps):
    F = frame_at(PARABOLA, [Fraction(x)], UNIT)
    P = CellParams.for_frame(F, Qs, ps, 0.6)
    assert integer_points(F, P) == integer_points_scan(F, P)


def test_search_matches_scan_on_veronese3():
    M = catalog("veronese", n=3)
    for x in (Fraction(-1, 3), Fraction(1, 5), Fraction(7, 10)):
        F = frame_at(M, [x])
        P = CellParams.for_frame(F, 3, 0.6, 0.9)
        assert integer_points(F, P) == integer_points_scan(F, P)


def test_found_point_is_primitive_and_inside():
    F = frame_at(PARABOLA, [Fraction(2, 7)], UNIT)
    P = CellParams.for_frame(F, 50, 0.2, kappa0(1, 1))
    r = find_integer_point(F, P)
    assert r is not None and math.gcd(*r) == 1
    assert CellBody.at(F, P).contains(r)


def test_good_set_and_detection_on_parabola():
    B = UNIT
    found = 0
    for x in np.linspace(0.25, 0.75, 201):
        F = frame_at(PARABOLA, [float(x)], B)
        P = CellParams.for_frame(F, 400, 400 ** -0.5, 0.5, c0=2)
        if good_set_member(F, P):
            det = detect(F, P, B, strict=False)
            found += 1
            assert det.checks["q_positive"] and det.checks["near"] and det.checks["residual"]
    assert found > 0


def test_detect_preconditions():
    F = frame_at(PARABOLA, [0.5], UNIT)
    with pytest.raises(PreconditionError):
        detect(F, CellParams.for_frame(F, 100, 1e-6, 0.5))  # psi* below the window
    P = CellParams.for_frame(F, 100, 0.1, 0.5, c0=2)
    exact_point = frame_at(PARABOLA, [Fraction(1, 2)], UNIT)
    with pytest.raises(PreconditionError):
        detect(exact_point, P)  # x = 1/2 is rational, so the body holds (2, 1, 0)... and x is not good


def test_adapted_matrix_reproduces_seed():
    M = catalog("veronese", n=3)
    x0 = [0.3]
    F = frame_at(M, x0)
    seed = default_seed_basis(F)
    G = adapted_matrix(M, x0)
    assert np.allclose(G(x0), seed, atol=1e-12)
    assert abs(np.linalg.det(G([0.32]))) > 0.5 * abs(np.linalg.det(seed))
    with pytest.raises(PreconditionError):
        adapted_matrix(M, x0, seed=np.eye(4))


def test_theta_profile_geometric_mean_and_bound():
    P = CellParams(Fraction(400), Fraction(1, 20), Fraction(1, 2), 1, 1)
    W = theta_profile(P, C_star=2)
    assert W.theta_pow_k == Fraction(1, 2)
    assert W.exact and W.is_sorted
    assert W.tilde_pow_k() == W.ratio_bound_pow_k() == Fraction(1, 4000)
    assert theta_hat_bound(P, 2) == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        theta_profile(P, C_star=30)
