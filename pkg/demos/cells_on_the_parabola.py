"""
Locating rational points with Minkowski cells
=============================================

At each parameter x the tangent and transversal frames define a symmetric
convex body.  When that body holds no integer point, x is "good", and a
rational point of controlled height must sit close to it.  This demo
checks that on a grid of [1/4, 3/4].
"""
from ratnear.cells import CellParams, detect, good_set_member, inclusion_check
from ratnear.frames import frame_at
from ratnear.manifold import Box, catalog

M = catalog("parabola")
B = Box.interval(0, 1)
Q_star, kappa, c0 = 200, 0.5, 1.0
psi_star = Q_star ** -0.5

P = CellParams(Q_star, psi_star, kappa, 1, 1, c0=c0)
print("derived parameters:", {k: round(v, 4) if isinstance(v, float) else v for k, v in P.report().items()})

# one good point in detail
for x in (0.3, 0.31, 0.32, 0.33, 0.34, 0.35):
    F = frame_at(M, [x], B)
    Px = CellParams.for_frame(F, Q_star, psi_star, kappa, c0=c0)
    if good_set_member(F, Px):
        det = detect(F, Px, B, strict=False)
        print(f"x = {x}: detected {det.point.b[0]}/{det.point.q} over {det.point.a[0]}/{det.point.q}, "
              f"checks {det.checks}")
        break
    print(f"x = {x}: the body holds an integer point, not good")

rep = inclusion_check(M, B, Q_star, psi_star, kappa, c0=c0, per_axis=2001)
print(f"{rep.good} good grid points, {len(rep.uncovered)} outside the balls, "
      f"balls cover {rep.ambient:.1%} of the whole grid")
