"""Stochastic inputs: fiber power-law noise, station noise floors, RF source.

All PSDs here are one-sided phase-noise densities in rad^2/Hz.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Fiber-induced noise coefficients per km, used verbatim as printed.
TABLE_H_M3 = 1e-34
TABLE_H_M2 = 2e-34
TABLE_H_M1 = 6e-33
TABLE_H_0 = 5e-37

# Default ASE level at each station phase detector (SSB, dBc/Hz).
DEFAULT_ASE_DBC = -108.0


@dataclass(frozen=True)
class PowerLawCoeffs:
    """Coefficients of the f^-3, f^-2, f^-1 and f^0 terms.

    For fiber noise they are per km and get multiplied by the squared carrier
    angular frequency. The same type is reused for absolute (not per-km)
    additive spectra, see :class:`NoiseFloorSpec` and :class:`RfSourceSpec`.
    """

    h_m3: float = TABLE_H_M3
    h_m2: float = TABLE_H_M2
    h_m1: float = TABLE_H_M1
    h_0: float = TABLE_H_0

    def __post_init__(self):
        for name in ("h_m3", "h_m2", "h_m1", "h_0"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @classmethod
    def zero(cls) -> "PowerLawCoeffs":
        return cls(0.0, 0.0, 0.0, 0.0)

    def scaled(self, factor: float) -> "PowerLawCoeffs":
        return PowerLawCoeffs(self.h_m3 * factor, self.h_m2 * factor,
                              self.h_m1 * factor, self.h_0 * factor)

    def is_zero(self) -> bool:
        return self.h_m3 == self.h_m2 == self.h_m1 == self.h_0 == 0.0

    def evaluate(self, f):
        """sum_a h_a f^a, without any length or carrier scaling."""
        f = np.asarray(f, dtype=float)
        return self.h_m3 / f**3 + self.h_m2 / f**2 + self.h_m1 / f + self.h_0


def ssb_dbc_to_sphi(level_dbc: float) -> float:
    """L(f) in dBc/Hz to S_phi in rad^2/Hz (S_phi = 2 L, small-angle)."""
    if level_dbc == -np.inf:
        return 0.0
    if not np.isfinite(level_dbc):
        raise ValueError(f"noise level must be finite or -inf, got {level_dbc}")
    return 2.0 * 10.0 ** (level_dbc / 10.0)


def sphi_to_ssb_dbc(sphi):
    sphi = np.asarray(sphi, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(sphi / 2.0)


@dataclass(frozen=True)
class NoiseFloorSpec:
    """Back-to-back system floor plus the ASE source.

    ``white_ssb_dbc_per_hz`` is a flat floor added to the output directly.
    ``ase_ssb_dbc_per_hz`` is white noise injected at every station phase
    detector; its effect on the output goes through the loop transfer
    function, so it is consumed by :mod:`marsrf.freqdomain`, not by
    :func:`floor_psd`. ``extra`` holds absolute power-law terms added to the
    flat floor.
    """

    white_ssb_dbc_per_hz: float = -np.inf
    ase_ssb_dbc_per_hz: float = DEFAULT_ASE_DBC
    extra: Optional[PowerLawCoeffs] = None

    def __post_init__(self):
        # validates both levels
        ssb_dbc_to_sphi(self.white_ssb_dbc_per_hz)
        ssb_dbc_to_sphi(self.ase_ssb_dbc_per_hz)

    @property
    def white_sphi(self) -> float:
        return ssb_dbc_to_sphi(self.white_ssb_dbc_per_hz)

    @property
    def ase_sphi(self) -> float:
        return ssb_dbc_to_sphi(self.ase_ssb_dbc_per_hz)

    @classmethod
    def silent(cls) -> "NoiseFloorSpec":
        return cls(white_ssb_dbc_per_hz=-np.inf, ase_ssb_dbc_per_hz=-np.inf)


@dataclass(frozen=True)
class RfSourceSpec:
    """Phase noise of the frequency standard, referred to the station probe
    frequency. Absent by default."""

    psd: Optional[PowerLawCoeffs] = None

    def evaluate(self, f):
        f = np.asarray(f, dtype=float)
        if self.psd is None:
            return np.zeros_like(f)
        return self.psd.evaluate(f)


def _check_freqs(f):
    f = np.asarray(f, dtype=float)
    if np.any(~(f > 0)):
        raise ValueError("frequencies must be > 0")
    return f


def fiber_psd(coeffs: PowerLawCoeffs, length_km: float, carrier_angular_freq: float, f):
    """Fiber phase-noise PSD ``w_r^2 L sum_a h_a f^a`` for a span of ``length_km``."""
    if length_km < 0:
        raise ValueError(f"length must be >= 0, got {length_km}")
    f = _check_freqs(f)
    return carrier_angular_freq**2 * length_km * coeffs.evaluate(f)


def floor_psd(spec: NoiseFloorSpec, f):
    """Flat back-to-back floor plus any extra absolute power-law terms."""
    f = _check_freqs(f)
    out = np.full_like(f, spec.white_sphi)
    if spec.extra is not None:
        out = out + spec.extra.evaluate(f)
    return out


def synthesize_series(target_psd: Callable, sample_rate: float, n_samples: int,
                      seed, min_bins: int = 16) -> np.ndarray:
    """Gaussian phase series whose one-sided PSD follows ``target_psd``.

    White noise is shaped in the frequency domain with a Hermitian spectrum.
    The DC bin is zeroed, so red components are band-limited above
    ``sample_rate / n_samples``.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`.
    """
    if sample_rate <= 0:
        raise ValueError("sample_rate must be > 0")
    n = int(n_samples)
    if n < 2 or n & (n - 1):
        raise ValueError(f"n_samples must be a power of two, got {n_samples}")
    if n < 2 * min_bins:
        raise ValueError(f"n_samples={n} too small to resolve the band "
                         f"(need >= {2 * min_bins})")
    rng = np.random.default_rng(seed)
    freqs = np.arange(1, n // 2 + 1) * (sample_rate / n)
    s = np.asarray(target_psd(freqs), dtype=float)
    s = np.broadcast_to(s, freqs.shape)
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("target PSD must be finite and >= 0")
    spec = np.zeros(n // 2 + 1, dtype=complex)
    amp = np.sqrt(s * n * sample_rate / 4.0)
    spec[1:] = amp * (rng.standard_normal(n // 2) + 1j * rng.standard_normal(n // 2))
    # Nyquist bin must be real; its one-sided periodogram is not doubled
    spec[-1] = np.sqrt(s[-1] * n * sample_rate) * rng.standard_normal()
    return np.fft.irfft(spec, n)


def white_series(sphi: float, sample_rate: float, n_samples: int, rng) -> np.ndarray:
    """White phase noise with one-sided PSD ``sphi`` up to Nyquist."""
    if sphi == 0:
        return np.zeros(n_samples)
    return rng.standard_normal(n_samples) * np.sqrt(sphi * sample_rate / 2.0)
