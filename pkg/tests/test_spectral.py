import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinjunction.bath import BathSpec
from spinjunction.born import CurrentTrace, default_baths, kubo_current, rho_down_down
from spinjunction.errors import NumericalError, ValidationError
from spinjunction.junction import JunctionSpec, lowering
from spinjunction.spectral import (
    asymptotic_current,
    kubo_rectification_closed,
    rectification,
    rectification_from_values,
    spectral_function,
    spectral_function_closed,
    stationary_pi_kernel,
)
from spinjunction.steady import steady_pipeline

WEAK = JunctionSpec(0.01, 0.01, 0.0, 0.01)
TAU = 0.05 * np.arange(4001)


def steady_rho(jz, junction=WEAK):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return steady_pipeline(junction, default_baths(jz)).rho


def test_pi_kernel_is_independent_of_gamma():
    rho = steady_rho(0.5)
    a = stationary_pi_kernel(rho, WEAK, default_baths(0.5), TAU[:200])
    b = stationary_pi_kernel(rho, JunctionSpec(0.01, 0.01, 0.0, 0.07), default_baths(0.5), TAU[:200])
    assert np.array_equal(a.values, b.values)


def test_pi_kernel_vanishes_for_equal_polarizations_and_symmetric_junction():
    up = BathSpec(1.0, 0.5, polarization="up")
    j = JunctionSpec(0.2, 0.0, 0.0, 0.01)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = steady_pipeline(j, (up, up)).rho
    k = stationary_pi_kernel(rho, j, (up, up), TAU[:400])
    assert np.max(np.abs(k.values)) < 1e-14


def test_pi_kernel_at_zero_delay_from_direct_averages():
    rho = steady_rho(0.9)
    k = stationary_pi_kernel(rho, WEAK, default_baths(0.9), TAU[:3])
    sl, sr = lowering("L").matrix, lowering("R").matrix
    # C(0) = 1 for both majority channels
    left = -2j * (-np.trace(sl @ sl.conj().T @ rho).real)
    right = -2j * np.trace(sr.conj().T @ sr @ rho).real
    assert k.values[0] == pytest.approx((left - right) / 2, abs=1e-15)


def test_quadrature_and_closed_form_spectral_functions_agree():
    rho = steady_rho(0.5)
    eta = 0.02
    tau = 0.02 * np.arange(int(30 / eta / 0.02) + 1)
    k = stationary_pi_kernel(rho, WEAK, default_baths(0.5), tau)
    omega = np.linspace(-1.0, 1.0, 11)
    quad = spectral_function(k, eta, omega)
    closed = spectral_function_closed(rho, WEAK, default_baths(0.5), omega, eta)
    assert np.max(np.abs(quad.A - closed.A)) < 1e-4 * np.max(np.abs(closed.A))


def test_nyquist_guard():
    k = stationary_pi_kernel(steady_rho(0.5), WEAK, default_baths(0.5), TAU[:100])
    with pytest.raises(ValidationError):
        spectral_function(k, 0.01, [0.0, math.pi / 0.05])


def test_gap_opens_beyond_the_heisenberg_point():
    omega = np.linspace(-3.0, 3.0, 121)
    gapped = spectral_function_closed(steady_rho(1.5), WEAK, default_baths(1.5), omega)
    assert gapped.at_zero() < 1e-2 * np.max(gapped.A)
    gapless = spectral_function_closed(steady_rho(0.5), WEAK, default_baths(0.5), [0.0])
    assert gapless.A[0] > 0


@pytest.mark.parametrize("jz", [0.0, 0.3, 0.6, 0.9])
def test_spectral_current_matches_redfield_current(jz):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = steady_pipeline(WEAK, default_baths(jz))
    assert asymptotic_current(rep.rho, WEAK, default_baths(jz)) == pytest.approx(rep.I, rel=1e-3)


def test_spectral_weight_non_negative_in_the_weak_coupling_regime():
    for jz in np.linspace(0.0, 1.5, 16):
        rho = steady_rho(jz)
        assert spectral_function_closed(rho, WEAK, default_baths(jz), [0.0]).A[0] >= -1e-8


def test_kubo_asymptote_is_the_large_time_limit_of_kubo_traces():
    j = JunctionSpec(0.05, 0.03, 0.0, 0.01)
    trace = kubo_current(j, default_baths(0.5), rho_down_down(), 400.0, 0.01, damping=0.05)
    assert trace.I[-1] == pytest.approx(asymptotic_current(rho_down_down(), j, default_baths(0.5), 0.05),
                                        rel=1e-4)


def flat(value, n=11):
    t = np.linspace(0, 1, n)
    return CurrentTrace(t, 2 * value * np.ones(n), np.zeros(n), "test")


def test_rectification_trivial_cases():
    rep = rectification(flat(1.0), flat(1.0), 1.0)
    assert rep.R == 0 and rep.D == 0
    rep = rectification(flat(1.0), flat(0.0), 1.0)
    assert rep.R == 1 and rep.D == pytest.approx(1.0)


def test_rectification_undefined_for_vanishing_denominator():
    with pytest.raises(NumericalError):
        rectification(flat(0.0), flat(0.0), 1.0)


def test_rectification_window_must_fit_trace():
    with pytest.raises(ValidationError):
        rectification(flat(1.0), flat(1.0), 2.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_rectification_antisymmetry_and_bounds(a, b):
    if a + b < 1e-10:
        return
    fwd = rectification_from_values(a, b)
    rev = rectification_from_values(b, a)
    assert fwd.R == -rev.R
    assert abs(fwd.R) <= 1
    assert fwd.D >= 0
    assert fwd.D == pytest.approx(rev.D)


def test_kubo_closed_form():
    assert kubo_rectification_closed(0.01, 0.0) == 0
    assert kubo_rectification_closed(0.01, 0.01) == pytest.approx(1 / math.sqrt(2))
    assert kubo_rectification_closed(0.01, 100.0) == pytest.approx(1.0, abs=1e-8)
    assert kubo_rectification_closed(0.01, -0.01) == pytest.approx(-1 / math.sqrt(2))


def test_spectral_series_csv(tmp_path):
    s = spectral_function_closed(steady_rho(0.5), WEAK, default_baths(0.5), np.linspace(-1, 1, 5))
    s.to_csv(tmp_path / "a.csv")
    data = np.loadtxt(tmp_path / "a.csv", delimiter=",", skiprows=1)
    assert np.allclose(data[:, 1], s.A)
