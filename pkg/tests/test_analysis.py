import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import ring
from sfl.analysis import (angle_swing, decay_scan, fit_power_law, fwhm, gradient_scan, intensity,
                          polarization_sweep, position_angle, ratio_experiment, subbeam_width)
from sfl.model import CompactElement, InvariantError


@given(n=st.floats(-4, 4), a=st.floats(1e-3, 1e3))
def test_power_law_recovered_exactly(n, a):
    R = np.array([25.0, 50.0, 100.0, 200.0])
    got, b, r2 = fit_power_law(np.column_stack([R, a * R**-n]))
    if abs(n) > 1e-9:
        assert got == pytest.approx(n, abs=1e-9)
        assert r2 == pytest.approx(1.0, abs=1e-12)
    assert b == pytest.approx(math.log(a), abs=1e-8)


def test_power_law_constant_series():
    assert fit_power_law([(1, 5.0), (2, 5.0), (4, 5.0)]) == (0.0, math.log(5.0), 1.0)


def test_power_law_rejects_bad_input():
    with pytest.raises(InvariantError):
        fit_power_law([(1, 1.0), (2, 0.5)])
    with pytest.raises(InvariantError):
        fit_power_law([(1, 1.0), (2, 0.0), (3, 1.0)])


def test_intensity_of_uniform_fields():
    E = np.tile([2.0, 0.0, 0.0], (64, 1))
    B = np.tile([0.0, 3.0, 0.0], (64, 1))
    assert intensity((E, B)) == 6.0


def test_intensity_sampling_rules():
    E = np.ones((63, 3))
    with pytest.raises(InvariantError):
        intensity((E, E))
    E = np.ones((64, 3))
    with pytest.raises(InvariantError):
        intensity((E, E), times=np.arange(64) * 0.01, period=1.0)


def test_fwhm_of_gaussian():
    th = np.linspace(-1, 1, 401)
    s = 0.1
    w = fwhm(th, np.exp(-th**2 / (2 * s**2)))
    assert w == pytest.approx(2 * s * math.sqrt(2 * math.log(2)), rel=1e-3)


def test_fwhm_rejects_edge_peak_and_open_window():
    th = np.linspace(0, 1, 41)
    with pytest.raises(InvariantError) as e:
        fwhm(th, th)
    assert e.value.invariant == "subbeam_peak"
    with pytest.raises(InvariantError) as e:
        fwhm(th, 2.0 - (th - 0.5)**2)
    assert e.value.invariant == "subbeam_half_max"


def test_position_angle_examples():
    np.testing.assert_allclose(position_angle([[1, 0, 0], [0, 1, 0], [-1, -1, 5], [1, -1, 0]]),
                               [0, math.pi / 2, math.pi / 4, 3 * math.pi / 4])


def test_angle_swing_of_uniform_rotation():
    phis = np.linspace(0, 2 * math.pi, 50)
    assert angle_swing(phis, np.mod(phis, math.pi)) == pytest.approx(1.0)


def test_decay_scan_input_checks():
    cfg = ring(0.875)
    with pytest.raises(InvariantError):
        decay_scan(cfg, (1.0, 0.0), [50, 25, 100])
    with pytest.raises(InvariantError):
        decay_scan(cfg, (1.0, 0.0), [5, 25, 100])


def test_decay_scan_quick_subluminal():
    res = decay_scan(ring(0.875), (1.0, 0.3), [20, 40, 80, 160])
    assert res.fit.n == pytest.approx(2.0, abs=0.1)
    assert res.fit_window == [1, 2, 3]
    assert res.columns == ("R_P", "intensity", "err_est", "peak_B2")
    assert res.extra["n_peak_B2"] == pytest.approx(2.0, abs=0.1)


def test_ratio_of_identical_sources_is_one():
    cfg = ring(0.875)
    res = ratio_experiment(cfg, cfg, [(20.0, 1.0, 0.0), (40.0, 1.0, 0.0), (60.0, 1.0, 0.0)])
    np.testing.assert_array_equal(res.column("ratio"), 1.0)
    assert res.fit.slope == 0.0 and res.fit.intercept == 1.0


def test_ratio_of_scaled_source():
    cfg = ring(0.875)
    res = ratio_experiment(cfg.scaled(3.0), cfg, [(20.0, 1.0, 0.0), (40.0, 1.0, 0.0), (60.0, 1.0, 0.0)])
    np.testing.assert_allclose(res.column("ratio"), 9.0, rtol=1e-9)


def test_subbeam_width_needs_enough_samples():
    with pytest.raises(InvariantError):
        subbeam_width(ring(1.25), 50.0, n_theta=11)


def test_gradient_scan_subluminal_quick():
    res = gradient_scan(ring(0.875), [25.0, 50.0, 100.0], theta_center=1.2, half_window=0.1,
                        n_theta=9, n_times=8)
    assert res.extra["growth_exponent"] == pytest.approx(-2.0, abs=0.3)


def test_polarization_sweep_of_rotating_element():
    el = CompactElement(radius=2.0, omega=1.0)
    phis = np.linspace(0, 2 * math.pi, 73)
    ph, ang, bmag, flags = polarization_sweep(el, phis=phis)
    assert ang.shape == phis.shape and np.all((ang >= 0) & (ang < math.pi))
    assert not flags.any() and np.all(bmag > 0)
