"""How far does each scheme's phase drift from the exact rotation exp(i sigma)?"""
import numpy as np

from irkwavelab.butcher import builtin_scheme, irk24, irk36, order_of_accuracy
from irkwavelab.spectral import amplification, crossover, dispersion_norm, phase

# One step of u' = i lambda u multiplies u by G(sigma), sigma = lambda dt.
# Gauss methods keep |G| = 1 exactly, so all the error sits in the phase.
for sigma in (0.5, 1.0, 2.0):
    g = amplification(irk24(), sigma)
    print(f"sigma={sigma:3.1f}  |G|={abs(g):.15f}  arg G={np.angle(g):+.6f}")

# The phase error phi = sigma - arg G, unwrapped along sigma.
sigma = np.linspace(0.1, np.pi, 6)
names = ["S2A1", "S2B1", "S2C1", "IRK24", "S3B1", "IRK36"]
print("\nsigma   " + "  ".join(f"{n:>9s}" for n in names))
for s in sigma:
    row = [s - phase(builtin_scheme(n), s)[()] for n in names]
    print(f"{s:5.3f}  " + "  ".join(f"{v:+9.2e}" for v in row))

# Formal order and the integrated phase error over [0, pi] pull in opposite
# directions: the optimised rows trade one for the other.
print("\nscheme  order   phi norm")
for n in ["S2A1", "S2B1", "S2C1", "S2D1", "S3A1", "S3B1", "S3C1", "S3D1"]:
    tab = builtin_scheme(n)
    print(f"{n:6s}  {order_of_accuracy(tab):5d}   {dispersion_norm(tab):.6e}")
print(f"IRK36   {order_of_accuracy(irk36()):5d}   {dispersion_norm(irk36()):.6e}")

# Beyond which sigma does an optimised row beat the Gauss-type reference?
for a, b in [("S2A1", "S2D1"), ("S2B1", "S2D1"), ("S3B1", "S3D1")]:
    print(f"{a} overtakes {b} above sigma = {crossover(builtin_scheme(a), builtin_scheme(b)):.4f}")
