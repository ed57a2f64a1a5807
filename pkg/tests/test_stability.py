import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from marsrf import ChainTopology, SpectralDensity
from marsrf.freqdomain import default_grid, residual_psd_chain
from marsrf.noise import synthesize_series
from marsrf.stability import (AdevCurve, GridCoverageError, InsufficientDataError,
                              adev_from_series, delivered_freq, psd_to_adev)
from oracles import adev_brute

NU0 = 1e9
GRID = default_grid()


def flat(s0, grid=GRID):
    return SpectralDensity(grid, np.full_like(grid, s0))


def test_zero_psd_gives_zero():
    curve = psd_to_adev(flat(0.0), NU0, [1, 10, 100])
    assert np.all(curve.sigmas == 0)


@pytest.mark.parametrize("tau", [1e-2, 1.0, 100.0, 1e4])
def test_white_pm_closed_form(tau):
    s0, fh = 1e-10, 1e5
    expected = math.sqrt(3 * fh * s0 / (4 * math.pi**2 * NU0**2)) / tau
    got = psd_to_adev(flat(s0), NU0, [tau], fh).sigmas[0]
    assert got == pytest.approx(expected, rel=0.02)


@pytest.mark.parametrize("tau", [1.0, 10.0, 1e3, 1e4])
def test_white_fm_closed_form(tau):
    h0 = 1e-24
    psd = SpectralDensity(GRID, NU0**2 * h0 / GRID**2)
    got = psd_to_adev(psd, NU0, [tau]).sigmas[0]
    assert got == pytest.approx(math.sqrt(h0 / (2 * tau)), rel=0.02)


def test_against_brute_force_trapezoid():
    ch = ChainTopology((100, 100))
    psd = residual_psd_chain(ch)
    brute = adev_brute(lambda f: np.interp(f, psd.freqs, psd.values), NU0, 1.0)
    assert psd_to_adev(psd, NU0, [1.0]).sigmas[0] == pytest.approx(brute, rel=1e-4)


@given(st.floats(1e-6, 1e6))
def test_linear_in_psd(alpha):
    psd = residual_psd_chain(ChainTopology((120, 80)), default_grid(1e-5, 1e5, 20))
    a = psd_to_adev(psd, NU0, [1.0, 1e3]).sigmas
    b = psd_to_adev(psd.scaled(alpha), NU0, [1.0, 1e3]).sigmas
    assert np.allclose(b**2, alpha * a**2, rtol=1e-12, atol=0)


def test_doubling_psd_doubles_variance_exactly():
    psd = residual_psd_chain(ChainTopology((100, 100)))
    a = psd_to_adev(psd, NU0, [1.0]).sigmas[0]
    b = psd_to_adev(psd.scaled(2.0), NU0, [1.0]).sigmas[0]
    assert b**2 == pytest.approx(2 * a**2, rel=1e-14)


def test_variances_add():
    g = default_grid(1e-5, 1e5, 20)
    p1 = residual_psd_chain(ChainTopology((100, 100)), g)
    p2 = SpectralDensity(g, 1e-20 / g**2)
    taus = [1.0, 100.0]
    s12 = psd_to_adev(p1 + p2, NU0, taus).sigmas
    s1, s2 = psd_to_adev(p1, NU0, taus).sigmas, psd_to_adev(p2, NU0, taus).sigmas
    assert np.allclose(s12**2, s1**2 + s2**2, rtol=1e-12)


@pytest.mark.parametrize("lengths", [(100, 100), (120, 80), (150, 150), (100,) * 30])
def test_quadrature_converged(lengths):
    ch = ChainTopology(lengths)
    taus = [1.0, 10.0, 1e4]
    a = psd_to_adev(residual_psd_chain(ch, default_grid(ppd=200)), NU0, taus).sigmas
    b = psd_to_adev(residual_psd_chain(ch, default_grid(ppd=400)), NU0, taus).sigmas
    assert np.max(np.abs(b / a - 1)) < 5e-3


def test_coverage_error_names_band():
    psd = flat(1e-10, default_grid(1e-2, 1e5, 10))
    with pytest.raises(GridCoverageError, match="1e-05"):
        psd_to_adev(psd, NU0, [1e4])
    with pytest.raises(GridCoverageError):
        psd_to_adev(flat(1e-10, default_grid(1e-5, 1e3, 10)), NU0, [1.0])


def test_invalid_inputs():
    with pytest.raises(ValueError):
        psd_to_adev(flat(1e-10), 0.0, [1.0])
    with pytest.raises(ValueError):
        psd_to_adev(flat(1e-10), NU0, [])
    with pytest.raises(ValueError):
        AdevCurve([2, 1], [0, 0])
    with pytest.raises(ValueError):
        AdevCurve([1, 2], [0, -1])


def test_curve_lookup():
    c = AdevCurve([1.0, 10.0], [3.0, 2.0])
    assert c.at(10.0) == 2.0
    with pytest.raises(KeyError):
        c.at(5.0)


def test_delivered_frequency_is_half():
    assert delivered_freq(2e9) == 1e9


# series estimator

def test_ramp_is_invisible():
    t = np.arange(10_000) / 10.0
    phase = 3.0 + 0.7 * t
    curve = adev_from_series(phase, 10.0, 1.0, [0.1, 1, 10])
    # only rounding of the phase values remains
    x_max = np.abs(phase).max() / (2 * np.pi)
    assert np.all(curve.sigmas * curve.taus < 100 * np.finfo(float).eps * x_max)


@given(st.floats(-10, 10), st.floats(-1e-2, 1e-2))
def test_ramp_invariance(a, b):
    rng = np.random.default_rng(0)
    fs, n = 10.0, 10_000
    x = rng.standard_normal(n) * 1e-2
    t = np.arange(n) / fs
    base = adev_from_series(x, fs, 1.0, [0.1, 1.0, 10.0]).sigmas
    shifted = adev_from_series(x + a + b * t, fs, 1.0, [0.1, 1.0, 10.0]).sigmas
    assert np.allclose(shifted, base, rtol=1e-12, atol=0)


def test_white_phase_slope():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(2**18)
    taus = [1e-2, 1e-1, 1.0, 10.0]
    curve = adev_from_series(x, 100.0, 1.0, taus)
    slope = np.polyfit(np.log10(curve.taus), np.log10(curve.sigmas), 1)[0]
    assert slope == pytest.approx(-1, abs=0.1)


def test_counts_and_rounding():
    curve = adev_from_series(np.zeros(1000), 10.0, 1.0, [0.1, 1.04, 2.0])
    assert list(curve.taus) == [0.1, 1.0, 2.0]
    assert list(curve.counts) == [1000 - 2, 1000 - 20, 1000 - 40]


def test_insufficient_data_reported_per_tau():
    with pytest.raises(InsufficientDataError) as exc:
        adev_from_series(np.zeros(100), 10.0, 1.0, [1.0, 5.0, 10.0])
    assert exc.value.taus == [5.0, 10.0]
    assert exc.value.needed == [150, 300]


def test_series_matches_spectrum_within_three_standard_errors():
    fs, n, nu0 = 100.0, 2**17, 1.0
    target = lambda f: 1e-6 + 1e-6 / f**2
    taus = [0.1, 1.0, 10.0]
    est = np.array([adev_from_series(synthesize_series(target, fs, n, s), fs, nu0, taus).sigmas
                    for s in range(24)])
    grid = default_grid(1e-3, fs / 2, 200)
    pred = psd_to_adev(SpectralDensity(grid, target(grid)), nu0, taus, f_high=fs / 2).sigmas
    se = est.std(axis=0, ddof=1) / np.sqrt(len(est))
    assert np.all(np.abs(est.mean(axis=0) - pred) < 3 * se)
