import numpy as np
import pytest

from irkwavelab import problems as pb
from irkwavelab.butcher import builtin_scheme, irk24

RNG = np.random.default_rng(11)
D = 1e-5


def _dt(f, t):
    return (f(t + D) - f(t - D)) / (2 * D)


def test_adjusted_step_rounds_count_up():
    assert pb.adjusted_step(1.0, 0.3) == pytest.approx(0.25)
    assert pb.adjusted_step(0.768, 0.128) == pytest.approx(0.128)
    assert pb.adjusted_step(0.0, 0.1) == 0.1


def test_ode_exact_solutions_satisfy_system():
    for setup in (pb.problem1(), pb.problem2()):
        sysm = setup.system
        for t in RNG.uniform(0, 1, 20):
            lhs = _dt(setup.exact, t)
            assert np.allclose(lhs, sysm.rhs(t, setup.exact(t)), atol=1e-6 * max(1, np.abs(lhs).max()))


def test_packet_exact_is_pure_translation():
    # u_t + u_x = 0: u(x, t) = u(x - t, 0)
    for setup in (pb.problem3(h=0.05), pb.problem4(h=1.0)):
        x, ex = setup.x, setup.exact
        h = x[1] - x[0]
        for t in RNG.uniform(0, 5, 20):
            i = RNG.integers(len(x) // 4, len(x) // 2)
            np.testing.assert_allclose(ex(t + h)[i + 1], ex(t)[i], atol=1e-12)


def test_burgers_exact_satisfies_pde():
    x = RNG.uniform(1.55, 2.45, 20)
    for t in RNG.uniform(0.05, 0.9, 5):
        # sample inside the ramp only, where the solution is smooth
        xs = x[(x > 1.5 + t + 0.01) & (x < 2.5 - 0.01)]
        u = pb.burgers_exact(xs, t)
        ut = (pb.burgers_exact(xs, t + D) - pb.burgers_exact(xs, t - D)) / (2 * D)
        ux = (pb.burgers_exact(xs + D, t) - pb.burgers_exact(xs - D, t)) / (2 * D)
        np.testing.assert_allclose(ut + u * ux, 0.0, atol=1e-6)
    with pytest.raises(ValueError):
        pb.burgers_exact(x, 1.0)


def test_2d_exact_is_translation():
    setup = pb.problem6(length=10.0, h=0.2, family=2)
    n = setup.params["n"]
    u0 = setup.exact(0.0).reshape(n, n)
    # after t with speed 0.5, shift equals 0.5 t in each direction; t = 0.8 gives 2 cells
    u = setup.exact(0.8).reshape(n, n)
    np.testing.assert_allclose(u, np.roll(np.roll(u0, 2, 0), 2, 1), atol=1e-12)


@pytest.mark.parametrize("build", [pb.problem1, pb.problem2,
                                   lambda: pb.problem3(h=0.05), lambda: pb.problem4(h=1.0)])
def test_exact_final_state_scores_zero(build):
    setup = build()
    assert setup.error(setup.exact(setup.t_end)) == pytest.approx(0.0, abs=1e-14)


def test_registry_lookup():
    assert set(pb.PROBLEMS) == {1, 2, 3, 4, 5, 6}
    with pytest.raises(KeyError):
        pb.build_problem(7)
    assert pb.build_problem(1, dt=0.016).steps == 48


def test_reference_tables_load():
    t9 = pb.reference_table(9)
    assert t9["problem"] == 1 and t9["param"] == "dt"
    assert "IRK24" in t9["schemes"]
    with pytest.raises(KeyError):
        pb.reference_table(99)


@pytest.mark.parametrize("table, scheme, col", [(9, "S2A1", 0), (9, "IRK36", 2), (10, "S2B1", 1)])
def test_ode_table_cells_reproduced(table, scheme, col):
    ref = pb.reference_table(table)
    value = ref["columns"][col]
    paper = ref["schemes"][scheme]["errors"][col]
    got = pb.run_cell(table, scheme, value).error
    assert paper / 3 <= got <= paper * 3


def test_packet_cell_reproduced():
    ref = pb.reference_table(12)
    col = ref["columns"].index(2.0)
    paper = ref["schemes"]["S2B1"]["errors"][col]
    got = pb.run_cell(12, "S2B1", 2.0).error
    assert got == pytest.approx(paper, rel=0.01)


def test_burgers_front_and_smooth_region():
    setup = pb.problem5()
    res = pb.run(setup, irk24())
    assert pb.front_position(setup.x, res.u) == pytest.approx(res.params["front"], abs=0.01)
    assert res.error < 1e-3
    assert np.max(res.u) < 1.1 and np.min(res.u) > -0.1
    assert max(res.report.newton_iterations) < 10


def test_2d_stepping_approaches_semidiscrete_reference():
    setup = pb.problem6(length=10.0, h=0.1, family=2, t_end=1.0, nc=0.5)
    ref = setup.params["semidiscrete"](setup.t_end)
    e1 = pb.l2_error(pb.run(setup, irk24()).u, ref)
    fine = pb.problem6(length=10.0, h=0.1, family=2, t_end=1.0, nc=0.25)
    e2 = pb.l2_error(pb.run(fine, irk24()).u, ref)
    assert np.log2(e1 / e2) > 3.5


def test_run_result_row():
    res = pb.run(pb.problem1(dt=0.128), builtin_scheme("S2A1"))
    row = res.row()
    assert row["steps"] == 6 and row["lam"] == 10.0 and row["scheme"] == "S2A1"
