import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import signal

from marsrf.noise import (NoiseFloorSpec, PowerLawCoeffs, RfSourceSpec, fiber_psd, floor_psd,
                          ssb_dbc_to_sphi, sphi_to_ssb_dbc, synthesize_series, white_series)

WR = 2 * math.pi * 2e9
coef = st.one_of(st.just(0.0), st.floats(1e-40, 1e-30))
lengths = st.one_of(st.just(0.0), st.floats(1e-6, 5000))


def test_fiber_psd_table_values_at_1hz():
    # 1 km, 1 Hz: sum of the four coefficients times w_r^2
    expected = WR**2 * (1e-34 + 2e-34 + 6e-33 + 5e-37)
    got = fiber_psd(PowerLawCoeffs(), 1.0, WR, 1.0)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(9.95e-13, rel=2e-3)


def test_fiber_psd_zero_length():
    assert np.all(fiber_psd(PowerLawCoeffs(), 0.0, WR, [0.1, 1, 10]) == 0)


@pytest.mark.parametrize("f", [0.0, -1.0])
def test_fiber_psd_rejects_nonpositive_freq(f):
    with pytest.raises(ValueError):
        fiber_psd(PowerLawCoeffs(), 1.0, WR, f)


def test_fiber_psd_rejects_negative_length():
    with pytest.raises(ValueError):
        fiber_psd(PowerLawCoeffs(), -1.0, WR, 1.0)


def test_coeffs_must_be_nonnegative():
    with pytest.raises(ValueError):
        PowerLawCoeffs(h_m1=-1e-33)
    with pytest.raises(ValueError):
        PowerLawCoeffs(h_0=float("nan"))


@given(lengths, st.floats(0.1, 10), st.floats(1e-4, 1e5))
def test_fiber_psd_linear_in_length(length, k, f):
    a = fiber_psd(PowerLawCoeffs(), length * k, WR, f)
    b = k * fiber_psd(PowerLawCoeffs(), length, WR, f)
    assert a == pytest.approx(b, rel=1e-12, abs=0)


@given(coef, coef, coef, coef, st.floats(0.1, 10), st.floats(1e-4, 1e5))
def test_fiber_psd_linear_in_coefficients(a, b, c, d, k, f):
    base = fiber_psd(PowerLawCoeffs(a, b, c, d), 7.0, WR, f)
    scaled = fiber_psd(PowerLawCoeffs(a, b, c, d).scaled(k), 7.0, WR, f)
    assert scaled == pytest.approx(k * base, rel=1e-12, abs=0)


def test_fiber_psd_strictly_decreasing():
    f = np.logspace(-4, 5, 500)
    assert np.all(np.diff(fiber_psd(PowerLawCoeffs(), 10.0, WR, f)) < 0)


def test_floor_white_level():
    spec = NoiseFloorSpec(white_ssb_dbc_per_hz=-78.0)
    vals = floor_psd(spec, [1e-3, 1.0, 1e4])
    assert vals[0] == pytest.approx(2 * 10 ** -7.8, rel=1e-12)
    assert vals[0] == pytest.approx(3.17e-8, rel=2e-3)
    assert np.all(vals == vals[0])


def test_floor_disabled_is_zero():
    assert np.all(floor_psd(NoiseFloorSpec(), [0.1, 10]) == 0)
    assert NoiseFloorSpec.silent().ase_sphi == 0


def test_floor_extra_terms():
    spec = NoiseFloorSpec(extra=PowerLawCoeffs(0, 0, 1e-10, 0))
    assert floor_psd(spec, 2.0) == pytest.approx(5e-11)


def test_floor_rejects_nan_level():
    with pytest.raises(ValueError):
        NoiseFloorSpec(white_ssb_dbc_per_hz=float("nan"))


@given(st.floats(-200, 0))
def test_dbc_round_trip(level):
    assert sphi_to_ssb_dbc(ssb_dbc_to_sphi(level)) == pytest.approx(level, abs=1e-9)


def test_rf_source_defaults_to_zero():
    assert np.all(RfSourceSpec().evaluate([1.0, 2.0]) == 0)


# synthesis

def test_synth_zero_target():
    x = synthesize_series(lambda f: np.zeros_like(f), 1e3, 1024, 1)
    assert np.all(x == 0)


def test_synth_deterministic():
    a = synthesize_series(lambda f: 1 / f, 1e3, 4096, 7)
    b = synthesize_series(lambda f: 1 / f, 1e3, 4096, 7)
    assert np.array_equal(a, b)
    c = synthesize_series(lambda f: 1 / f, 1e3, 4096, 8)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("n", [1000, 3, 16])
def test_synth_rejects_bad_lengths(n):
    with pytest.raises(ValueError):
        synthesize_series(lambda f: 1 / f, 1e3, n, 0)


def test_synth_white_variance_parseval():
    s0, fs, n = 1e-6, 1e3, 2**20
    x = synthesize_series(lambda f: np.full_like(f, s0), fs, n, 3)
    assert np.var(x) == pytest.approx(s0 * fs / 2, rel=0.05)


def test_synth_flicker_parseval():
    fs, n = 1e3, 2**20
    x = synthesize_series(lambda f: 1e-6 / f, fs, n, 4)
    f = np.arange(1, n // 2 + 1) * fs / n
    expected = np.sum(1e-6 / f) * fs / n
    assert np.var(x) == pytest.approx(expected, rel=0.05)


def test_synth_random_walk_slope():
    fs, n = 1e3, 2**20
    x = synthesize_series(lambda f: 1e-6 / f**2, fs, n, 5)
    f, p = signal.welch(x, fs, nperseg=n // 16)
    band = (f > 10 * 16 * fs / n) & (f < fs / 20)
    slope = np.polyfit(np.log10(f[band]), np.log10(p[band]), 1)[0]
    assert slope == pytest.approx(-2, abs=0.2)


def test_synth_welch_matches_target():
    fs, n, nseg = 1e3, 2**20, 4096
    target = lambda f: 1e-8 * (1 + 10 / f)
    x = synthesize_series(target, fs, n, 6)
    f, p = signal.welch(x, fs, nperseg=nseg)
    assert n // nseg >= 16
    # central two decades of the resolvable band [fs/nseg, fs/2]
    lo, hi = np.log10(fs / nseg), np.log10(fs / 2)
    mid = (lo + hi) / 2
    band = (f >= 10 ** (mid - 1)) & (f <= 10 ** (mid + 1))
    err_db = 10 * np.log10(p[band] / target(f[band]))
    assert np.max(np.abs(err_db)) < 1.5


def test_white_series_level():
    rng = np.random.default_rng(0)
    x = white_series(2e-6, 1e4, 2**18, rng)
    assert np.var(x) == pytest.approx(2e-6 * 1e4 / 2, rel=0.02)
    assert np.all(white_series(0.0, 1e4, 10, rng) == 0)
