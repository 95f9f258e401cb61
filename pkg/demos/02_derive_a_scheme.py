"""Derive a two-stage zero-dissipation scheme from scratch, then check it."""
import numpy as np

from irkwavelab.butcher import builtin_scheme, order_of_accuracy
from irkwavelab.optimizer import (WeightedObjective, alpha_sweep, minimize_param,
                                  parse_closures, solve_two_stage, verify_scheme)
from irkwavelab.spectral import dissipative_order

# Zero-dissipation two-stage schemes form a one-parameter family in
# Y = a12 a21 - a11 a22.  The weight sigma^alpha decides which sigma range
# the phase error is minimised over.
for alpha, y in alpha_sweep(2, [0, 2, 4, 8, 16, "inf"]):
    print(f"alpha={alpha!s:>4}  Y*={y:.10f}")

# Pick alpha = 4 and close the system with two extra equations.
y = minimize_param(WeightedObjective(2, 4))
closures = parse_closures("b1 = b2\na11 = a22", 2)
tab = solve_two_stage(y, closures, name="mine")
np.set_printoptions(precision=10, suppress=True)
print("\nA =\n", tab.A, "\nb =", tab.b, "\nc =", tab.c)

# Same scheme as the registry row derived from the same inputs?
ref = builtin_scheme("S2B1")
print("max |A - A_ref| =", np.abs(tab.A - ref.A).max())
print("order", order_of_accuracy(tab), " dissipative order", dissipative_order(tab))
print(verify_scheme(tab))
