import math
import warnings

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from spinjunction.bath import (
    BathSpec,
    a_xxz_zero,
    bessel_j0,
    corr_xx_numeric,
    corr_xxz_hp,
    decay_rate,
    half_fourier,
    hp_kernel,
    hp_transform,
    kernel_from_samples,
    lead_correlators,
    read_kernel_csv,
    zero_kernel,
)
from spinjunction.errors import HorizonWarning, NearSingularWarning, NumericalError, ValidationError


def test_bessel_matches_scipy_across_all_branches():
    x = np.concatenate([np.linspace(0, 8, 400), np.linspace(8, 25, 400), np.linspace(25, 400, 800)])
    assert np.max(np.abs(bessel_j0(x) - scipy.special.j0(x))) < 1e-12


def test_bessel_is_even():
    x = np.linspace(0, 30, 50)
    assert np.allclose(bessel_j0(-x), bessel_j0(x))


def test_hp_correlator_starts_at_one_and_carries_jz_phase():
    spec = BathSpec(J=1.0, Jz=0.7)
    assert corr_xxz_hp(0.0, spec) == pytest.approx(1.0)
    t = np.linspace(0, 5, 11)
    assert np.allclose(corr_xxz_hp(t, spec) * np.exp(-4j * 0.7 * t), scipy.special.j0(4 * t))


def test_free_fermion_quadrature_reduces_to_bessel_when_polarized():
    t = np.linspace(0, 20, 81)
    num = corr_xx_numeric(t, BathSpec(J=1.0, mu=100.0))
    assert np.max(np.abs(num - scipy.special.j0(4 * t))) < 1e-8


def test_minority_channel_vanishes_for_a_full_band():
    t = np.linspace(0, 5, 11)
    assert np.max(np.abs(corr_xx_numeric(t, BathSpec(mu=100.0), "minority"))) < 1e-12


def test_half_filled_band_splits_weight_between_channels():
    spec = BathSpec(J=1.0, mu=0.0, beta=math.inf)
    major = corr_xx_numeric(0.0, spec)
    minor = corr_xx_numeric(0.0, spec, "minority")
    assert major == pytest.approx(0.5, abs=1e-8)
    assert minor == pytest.approx(0.5, abs=1e-8)


def test_lead_correlators_assign_majority_by_polarization():
    up = lead_correlators(BathSpec(polarization="up"))
    down = lead_correlators(BathSpec(polarization="down"))
    assert up["p"].is_zero and not up["h"].is_zero
    assert down["h"].is_zero and not down["p"].is_zero


def test_bath_spec_validation_lists_fields():
    with pytest.raises(ValidationError) as err:
        BathSpec(J=-1.0, beta=-2.0)
    assert set(err.value.fields) == {"J", "beta"}


def test_tabulated_kernel_csv_round_trip(tmp_path):
    k = hp_kernel(BathSpec(Jz=0.3))
    path = tmp_path / "k.csv"
    k.to_csv(path, dt=0.05, T=5.0)
    back = read_kernel_csv(path)
    t = np.linspace(0, 5, 21)
    assert np.allclose(back(t), k(t), atol=1e-3)
    assert np.allclose(back.values, k(0.05 * np.arange(101)), atol=1e-15)


def test_tabulated_kernel_refuses_extrapolation():
    k = kernel_from_samples(np.ones(11), 0.1)
    with pytest.raises(ValidationError):
        k(2.0)


def test_half_fourier_matches_closed_form_transform():
    spec = BathSpec(J=1.0, Jz=0.4)
    for w in (-1.0, 0.0, 0.5):
        num = half_fourier(hp_kernel(spec), w, damping=0.05, T=400.0, dt=0.005)
        assert num == pytest.approx(complex(hp_transform(w, spec, 0.05)), rel=1e-4)


def test_half_fourier_of_zero_kernel_is_zero():
    assert half_fourier(zero_kernel(), 0.3) == 0


def test_short_horizon_warns_and_tail_bound_raises():
    with pytest.warns(HorizonWarning):
        half_fourier(hp_kernel(BathSpec()), 0.0, damping=1e-3, T=50.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonWarning)
        with pytest.raises(NumericalError):
            half_fourier(hp_kernel(BathSpec()), 0.0, damping=1e-3, T=50.0, tail_tol=1e-3)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0), st.floats(-10.0, 10.0), st.floats(1e-4, 0.1))
def test_decay_rate_has_non_negative_real_part(J, Jz, omega, eps):
    spec = BathSpec(J=J, Jz=Jz)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearSingularWarning)
        rate = decay_rate(omega, spec, 0.01, eps)
    assert rate.real >= 0


def test_decay_rate_at_zero_frequency_xx_lead():
    assert decay_rate(0.0, BathSpec(J=1.0, Jz=0.0), 0.01, 1e-9).real == pytest.approx(1e-4 / 4, rel=1e-6)


def test_decay_rate_flags_band_edge():
    with pytest.warns(NearSingularWarning):
        decay_rate(0.0, BathSpec(J=1.0, Jz=1.0), 0.01, 1e-3)


def test_decay_rate_requires_positive_regulator():
    with pytest.raises(ValidationError):
        decay_rate(0.0, BathSpec(), 0.01, 0.0)


def test_band_outside_zero_frequency_gives_vanishing_real_rate():
    rate = decay_rate(0.0, BathSpec(J=1.0, Jz=1.5), 1.0, 1e-9)
    assert abs(rate.real) < 1e-8


def test_zero_frequency_density_diverges_at_heisenberg_point():
    assert a_xxz_zero(BathSpec(J=1.0, Jz=0.5)) > 0
    with pytest.warns(NearSingularWarning):
        assert math.isinf(a_xxz_zero(BathSpec(J=1.0, Jz=1.0)))
