import numpy as np
import pytest

from irkwavelab import optimizer as opt
from irkwavelab.butcher import builtin_scheme, irk24, irk36, order_of_accuracy, scheme_info
from irkwavelab.spectral import dissipative_order


def test_asymptotic_limits_exact():
    assert opt.minimize_param(opt.WeightedObjective(2, "inf")) == -1.0 / 12.0
    assert opt.minimize_param(opt.WeightedObjective(3, "inf")) == 0.1


def test_two_stage_optimum_alpha0():
    y = opt.minimize_param(opt.WeightedObjective(2, 0))
    assert y == pytest.approx(-0.0952154411, abs=1e-9)


def test_large_alpha_approaches_limit():
    (alpha, y), = opt.alpha_sweep(2, [1e6])
    assert alpha == 1e6
    assert abs(y + 1.0 / 12.0) < 1e-7


def test_objective_minimum_is_interior():
    obj = opt.WeightedObjective(3, 4)
    x = opt.minimize_param(obj)
    f = lambda p: opt.weighted_phase_norm(obj, p)
    assert f(x) < f(x - 1e-4) and f(x) < f(x + 1e-4)


def test_bracket_error():
    obj = opt.WeightedObjective(2, 0)
    with pytest.raises(opt.BracketError):
        opt.minimize_param(obj, bracket=(-0.05, -0.01))


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        opt.WeightedObjective(2, -1.0)


def test_parse_closures_forms():
    cs = opt.parse_closures("b1 = b3  # symmetric weights\na13 + a31 = 5/18; a12 = 0 = a23", 3)
    assert cs.count == 4
    texts = [c.text for c in cs.closures]
    assert texts[0] == "b1 = b3"
    rhs = [float(c.rhs) for c in cs.closures]
    assert rhs[1] == pytest.approx(5 / 18)


def test_parse_closures_order_bump():
    cs = opt.parse_closures("order >= 3\nb1 = b2", 2)
    assert cs.min_order == 3 and cs.count == 3
    cs.check()


@pytest.mark.parametrize("text", ["b1 = ", "b9 = 1", "a11 * a22 = 1", "order >= x", "1 = 1"])
def test_parse_closures_errors(text):
    with pytest.raises(ValueError) as exc:
        opt.parse_closures(text, 2)
    assert "line 1" in str(exc.value)


def test_underdetermined_rejected():
    cs = opt.parse_closures("b1 = b2", 2)
    with pytest.raises(ValueError):
        cs.check()
    with pytest.raises(ValueError):
        opt.solve_two_stage(-0.09, cs)


def test_solve_reproduces_s2a1():
    info = scheme_info("S2A1")
    cs = opt.parse_closures("\n".join(info["closures"]), 2)
    y = opt.minimize_param(opt.WeightedObjective(2, info["alpha"]))
    tab = opt.solve_two_stage(y, cs, reference="S2A1")
    ref = builtin_scheme("S2A1")
    assert np.max(np.abs(tab.A - ref.A)) < 1e-8
    assert opt.system_residual(tab, y, cs) < 1e-12


def test_solve_gauss_legendre_from_order_bump():
    cs = opt.parse_closures("order >= 3\nb1 = b2", 2)
    tab = opt.solve_two_stage(-1.0 / 12.0, cs)
    ref = irk24()
    # the two Gauss orderings differ by swapping stages; compare invariants
    assert order_of_accuracy(tab) == 4
    np.testing.assert_allclose(np.sort(tab.c), np.sort(ref.c), atol=1e-12)
    assert np.max(np.abs(tab.A - ref.A)) < 1e-12 or np.max(np.abs(tab.A - ref.A[::-1, ::-1])) < 1e-12


def test_three_stage_solution_is_zero_dissipation():
    cs = opt.parse_closures("b1 = b2\na12 = 0\na13 = 0", 3)
    x = opt.minimize_param(opt.WeightedObjective(3, 16))
    tab = opt.solve_three_stage(x, cs)
    assert order_of_accuracy(tab) >= 4
    assert dissipative_order(tab) == "infinite"
    assert tab.family_parameter() == pytest.approx(x, abs=1e-11)


def test_solve_is_deterministic():
    cs = opt.parse_closures("b1 = b2\na11 = a22", 2)
    t1 = opt.solve_two_stage(-0.09, cs, seed=5)
    t2 = opt.solve_two_stage(-0.09, cs, seed=5)
    assert np.array_equal(t1.A, t2.A)


def test_no_solution_reported():
    # b1 = b2 and b1 = 0 contradict the quadrature condition b1 + b2 = 1
    cs = opt.parse_closures("b1 = b2\nb1 = 0", 2)
    with pytest.raises(opt.NoSolutionError) as exc:
        opt.solve_two_stage(-0.09, cs)
    assert exc.value.residual > 0


def test_verify_scheme_report():
    rep = opt.verify_scheme(irk36())
    assert rep["order"] == 6 and rep["dispersive_order"] == 6
    assert rep["X"] == pytest.approx(0.1)
    assert rep["a_norm"] < 1e-14
