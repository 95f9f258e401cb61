"""Minimal-dissipation, low-dispersion implicit Runge-Kutta schemes.

Design, analysis and benchmarking of two- and three-stage implicit
Runge-Kutta methods whose amplification factor has unit modulus on the
imaginary axis and whose phase error is minimised under a Gaussian weight.
"""
from .butcher import (
    ButcherTableau,
    RootedTree,
    builtin_scheme,
    elementary_weight,
    enumerate_trees,
    order_of_accuracy,
    registry_names,
    tree_density,
)
from .spectral import (
    amplification,
    arg_three_stage,
    arg_two_stage,
    crossover,
    dispersion_norm,
    dispersive_order,
    dissipation_norm,
    dissipative_order,
    sample_curve,
)
from .optimizer import (
    ConstraintSet,
    WeightedObjective,
    minimize_param,
    parse_closures,
    solve_three_stage,
    solve_two_stage,
    verify_scheme,
)
from .spatial import build_operator, keq, qwave_threshold, velocity_map
from .timeloop import SemiDiscreteSystem, integrate, irk_step
from .problems import build_problem, run

__version__ = "0.1.0"
