"""
The dual curve of the cubic Veronese curve
==========================================

z(x) is the Hodge dual of y ^ y' ^ ... ^ y^(n-1) for y = (1, x, ..., x^n).
Its derivatives pair with those of y in a triangular pattern, and its
Wronskian dominates a power of the Wronskian of y.
"""
from fractions import Fraction

from ratnear.dual import DualCurve, wronskian_inequality_check
from ratnear.manifold import catalog

for n in (2, 3):
    D = DualCurve(catalog("veronese", n=n))
    x = Fraction(1, 3)
    z = ", ".join(str(c) for c in D.z(x))
    print(f"n = {n}: z(1/3) = ({z}), W_y = {D.W_y(x)}, W_z = {D.W_z(x)}")
    for (i, j), (val, want) in sorted(D.relations(x).items()):
        print(f"   z^({j}) . y^({i}) = {val}  (expected {want})")

# a curve that is not a Veronese curve
C = catalog("custom", f="x**2, x**3 + x", domain=(-1, 1))
rep = wronskian_inequality_check(C, [Fraction(i, 10) for i in range(-9, 10)])
print(f"(x, x^2, x^3 + x): min |W_z| / |W_y|^3 = {rep.min_ratio}")
