"""Steepen a ramp under inviscid Burgers and watch the implicit stages cope."""
import numpy as np

from irkwavelab.butcher import irk24
from irkwavelab.problems import burgers_exact, front_position, problem5, run

setup = problem5()
res = run(setup, irk24())
x, u = setup.x, res.u

# The characteristics solution is exact up to t = 1, when the ramp folds.
print(f"t = {setup.t_end}: front at x = {front_position(x, u):.5f}, expected {res.params['front']:.5f}")
print(f"L1 error away from the front: {res.error:.3e}")
print(f"Newton iterations per step: max {max(res.report.newton_iterations)}, "
      f"mean {np.mean(res.report.newton_iterations):.2f}")

# Overshoots stay glued to the steep part of the profile.
over = np.flatnonzero((u > 1 + 1e-3) | (u < -1e-3))
if over.size:
    print(f"overshoot {max(u.max() - 1, -u.min()):.4f} between x = {x[over].min():.3f} and {x[over].max():.3f}")

for xi in (2.0, 2.3, 2.44, 2.46, 2.6):
    i = np.argmin(abs(x - xi))
    print(f"x={x[i]:.3f}  u={u[i]:+.5f}  exact={burgers_exact(x[i], setup.t_end):+.5f}")
