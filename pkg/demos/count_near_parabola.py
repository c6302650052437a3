"""
Counting rational points near the parabola
==========================================

Rational points (a/q, b/q) within a fixed distance of y = x^2 over [0, 1],
counted for growing Q.  With the distance held fixed the count grows like
Q^3, the number of all rational points in a thin strip.
"""
from ratnear.manifold import Box, catalog
from ratnear.rats import count_N, exponent_fit

M = catalog("parabola")
B = Box.interval(0, 1)

series = []
for Q in (50, 100, 200, 400):
    rep = count_N(M, Q, 0.02, B)
    series.append((Q, rep.count))
    print(f"Q = {Q:4d}  N = {rep.count:8d}  (settled exactly: {rep.ambiguous})")

fit = exponent_fit(series)
print(f"log-log slope {fit.slope:.3f}, R^2 {fit.r2:.5f}")

# Shrinking the distance with Q changes the picture: at eps = Q^-1.5 the
# count grows much more slowly.
for Q in (50, 100, 200, 400):
    print(f"Q = {Q:4d}  N(Q, Q^-1.5) = {count_N(M, Q, Q ** -1.5, B).count}")
