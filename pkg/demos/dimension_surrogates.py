"""
Box-counting stand-ins for Hausdorff dimension
==============================================

Points x hit by approximations of quality q^-tau are covered by boxes of
side Q^(-1-tau); the slope of log(count) against log(1/side) estimates the
dimension.  On the unit circle the approximation points are the
Pythagorean ones.
"""
from ratnear.manifold import Box, catalog
from ratnear.ubiquity import dim_estimate, dim_target

B = Box.interval(0, 1)

est = dim_estimate(catalog("circle", r=1), 1.5, [2 ** k for k in range(8, 17)], B)
print(f"unit circle, tau = 1.5: {est.value:.3f} (reference {dim_target('unit-circle', 1.5):.3f}), "
      f"R^2 {est.r2:.4f}, stable {est.stable}")

est = dim_estimate(catalog("parabola"), 0.75, [2 ** k for k in range(6, 13)], B)
print(f"parabola, tau = 0.75: {est.value:.3f} (reference {dim_target('planar', 0.75):.3f}), "
      f"R^2 {est.r2:.4f}, stable {est.stable}")
print("counts per scale:", est.counts)
