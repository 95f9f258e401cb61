import io

import numpy as np
import pytest

from irkwavelab import spectral as sp
from irkwavelab.butcher import ButcherTableau, builtin_scheme, irk24, irk36


def random_tableau(rng, R):
    return ButcherTableau(rng.normal(scale=0.3, size=(R, R)), rng.normal(size=R))


def test_amplification_small_sigma():
    assert sp.amplification(irk24(), 0.0) == 1.0
    s = 1e-3
    assert abs(sp.amplification(irk24(), s) - np.exp(1j * s)) < 1e-15


def test_backward_euler_closed_form():
    be = builtin_scheme("BE")
    s = np.linspace(0.1, 3.0, 7)
    g = sp._amplification_array(be, s)
    np.testing.assert_allclose(g, 1.0 / (1.0 - 1j * s), rtol=1e-14)


def test_singular_stage_matrix():
    # I - I*sigma*A singular at sigma = -I for A = [[1]]
    tab = ButcherTableau([[1.0]], [1.0])
    with pytest.raises(sp.SingularStageError):
        sp.amplification(tab, -1j)


def test_gauss_is_nondissipative():
    s = np.linspace(0, np.pi, 257)
    for tab in (irk24(), irk36()):
        assert np.max(np.abs(1 - np.abs(sp._amplification_array(tab, s)))) < 1e-14


def test_conjugate_symmetry_random_tableaux():
    rng = np.random.default_rng(3)
    for R in (1, 2, 3, 4):
        tab = random_tableau(rng, R)
        s = rng.uniform(-2, 2, 50)
        g = sp._amplification_array(tab, s)
        gm = sp._amplification_array(tab, -s)
        np.testing.assert_allclose(gm, np.conj(g), rtol=1e-12, atol=1e-12)


def test_phase_is_odd_and_continuous():
    tab = builtin_scheme("S2A1")
    s = np.linspace(-np.pi, np.pi, 401)
    ph = sp.phase(tab, s)
    np.testing.assert_allclose(ph, -ph[::-1], atol=1e-13)
    assert np.max(np.abs(np.diff(ph))) < 0.1


def test_phase_rays_agrees_with_stepping():
    rng = np.random.default_rng(7)
    sig = rng.uniform(0, 6, 40) + 1j * rng.normal(scale=0.2, size=40)
    for name in ("S2C1", "S3B1", "IRK36"):
        tab = builtin_scheme(name)
        fast, ok = sp.phase_rays(tab, sig)
        slow = np.array([sp.phase_along(tab, z, n=4000) for z in sig])
        assert ok.all()
        np.testing.assert_allclose(fast, slow, atol=1e-11)


def test_phase_rays_flags_singular_ray():
    tab = ButcherTableau([[1.0]], [1.0])
    ph, ok = sp.phase_rays(tab, np.array([-2j, 0.5]))
    assert not ok[0] and ok[1]
    assert np.isnan(ph[0])


def test_two_stage_closed_form_matches():
    for name in ("S2A1", "S2B1", "S2C1", "IRK24"):
        tab = builtin_scheme(name)
        s = np.linspace(0.01, np.pi, 100)
        np.testing.assert_allclose(sp.arg_two_stage(tab.family_parameter(), s), sp.phase(tab, s),
                                   atol=1e-9)


def test_three_stage_closed_form_matches():
    for name in ("S3A1", "S3C2", "IRK36"):
        tab = builtin_scheme(name)
        s = np.linspace(0.01, np.pi, 100)
        np.testing.assert_allclose(sp.arg_three_stage(tab.family_parameter(), s), sp.phase(tab, s),
                                   atol=1e-8)
    assert sp.arg_three_stage(0.1, 0.0) == 0.0


def test_quadrature_exact_for_polynomials():
    s, w = sp.gauss_legendre(0.0, 2.0)
    assert np.sum(w * s ** 7) == pytest.approx(2 ** 8 / 8, rel=1e-14)
    assert sp.integrate_l2(lambda x: x, 0.0, 1.0) == pytest.approx(np.sqrt(1 / 3), rel=1e-14)


def test_quadrature_nonconvergence_reported():
    rng = np.random.default_rng(0)
    with pytest.raises(sp.QuadratureError):
        sp.integrate_l2(lambda x: rng.normal(size=x.shape), max_refinements=2)


def test_norm_refinement_stable():
    for name in ("S2B1", "S3C1", "IRK36"):
        tab = builtin_scheme(name)
        a = sp.dispersion_norm(tab, panels=16)
        b = sp.dispersion_norm(tab, panels=64)
        assert abs(a - b) <= 1e-9


def test_dissipation_norm_small_for_registry():
    # tabulated rows carry 10 significant digits; the closed forms are exact
    assert sp.dissipation_norm(irk36()) < 1e-14
    for name in ("S2A1", "S3D1"):
        assert sp.dissipation_norm(builtin_scheme(name)) < 1e-8


def test_orders_of_gauss():
    assert sp.dispersive_order(irk24()) == 4
    assert sp.dispersive_order(irk36()) == 6
    assert sp.dissipative_order(irk24()) == sp.INFINITE
    assert sp.dissipative_order(builtin_scheme("BE")) == 1


def test_orders_of_optimised_families():
    assert sp.dispersive_order(builtin_scheme("S2A1")) == 2
    assert sp.dispersive_order(builtin_scheme("S3B1")) == 4


def test_sample_curve_and_csv():
    curve = sp.sample_curve(irk24(), 32)
    assert curve.sigma[0] == 0.0 and curve.sigma[-1] == pytest.approx(np.pi)
    buf = io.StringIO()
    curve.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "sigma,re_g,im_g,amplitude,phase,a_err,phi_err"
    assert len(lines) == 33
    with pytest.raises(ValueError):
        sp.sample_curve(irk24(), 8)


def test_crossover_none_for_identical():
    assert sp.crossover(irk24(), irk24()) is None


def test_crossover_closed_form_two_stage():
    # |phi| curves of two zero-dissipation two-stage schemes cross where
    # their closed-form phases coincide in magnitude of error
    a, b = builtin_scheme("S2C1"), builtin_scheme("S2D2")
    x = sp.crossover(a, b)
    ya, yb = a.family_parameter(), b.family_parameter()
    fa = abs(x - sp.arg_two_stage(ya, x))
    fb = abs(x - sp.arg_two_stage(yb, x))
    assert fa == pytest.approx(fb, rel=1e-3)


def test_series_coefficient_matches_leading_terms():
    assert sp.series_coefficient(2, -0.09) == pytest.approx(-0.09 + 1 / 12, rel=1e-9)
    assert sp.series_coefficient(3, 0.11) == pytest.approx((1 - 1.1) / 120, rel=1e-9)
    # at the Gauss parameters the leading term vanishes and the next one shows
    assert abs(sp.series_coefficient(2, -1 / 12)) < 1e-12
    with pytest.raises(ValueError):
        sp.series_coefficient(4, 0.1)
