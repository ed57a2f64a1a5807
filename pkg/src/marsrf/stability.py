"""Allan deviation from phase-noise spectra and from phase time series."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .freqdomain import SpectralDensity

DEFAULT_F_HIGH = 1e5
DEFAULT_TAUS = (1.0, 10.0, 100.0, 1000.0, 10000.0)

# Gauss-Legendre nodes/weights on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)
_GL_X = (_GL_X + 1) / 2
_GL_W = _GL_W / 2


class GridCoverageError(ValueError):
    pass


class InsufficientDataError(ValueError):
    def __init__(self, taus, needed):
        self.taus = list(taus)
        self.needed = list(needed)
        detail = ", ".join(f"tau={t:g} s needs {n} samples" for t, n in zip(taus, needed))
        super().__init__(f"series too short: {detail}")


@dataclass(frozen=True)
class AdevCurve:
    taus: np.ndarray
    sigmas: np.ndarray
    counts: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.taus, dtype=float)
        s = np.asarray(self.sigmas, dtype=float)
        if t.shape != s.shape or t.ndim != 1:
            raise ValueError("taus and sigmas must be 1-D arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("taus must be strictly increasing")
        if np.any(s < 0):
            raise ValueError("sigmas must be >= 0")
        object.__setattr__(self, "taus", t)
        object.__setattr__(self, "sigmas", s)
        if self.counts is not None:
            object.__setattr__(self, "counts", np.asarray(self.counts, dtype=int))

    def at(self, tau: float) -> float:
        i = np.flatnonzero(np.isclose(self.taus, tau, rtol=1e-9, atol=0))
        if i.size == 0:
            raise KeyError(f"tau={tau} not in curve")
        return float(self.sigmas[i[0]])


def _filon_cos(ga, gb, a, b, k):
    """Integral over [a, b] of a linear function (ga at a, gb at b) times cos(k f)."""
    beta = (gb - ga) / (b - a)
    return ((gb * np.sin(k * b) - ga * np.sin(k * a)) / k
            + beta * (np.cos(k * b) - np.cos(k * a)) / k**2)


def _sin4_integral(f, g, tau):
    """Integral of g(f) sin^4(pi f tau) with g piecewise linear on grid ``f``.

    Intervals where the kernel is resolved use 3-point Gauss-Legendre;
    elsewhere the kernel is expanded as 3/8 - cos(2x)/2 + cos(4x)/8 and the
    cosine parts are integrated exactly against the linear segment.
    """
    a, b = f[:-1], f[1:]
    ga, gb = g[:-1], g[1:]
    h = b - a
    k1, k2 = 2 * np.pi * tau, 4 * np.pi * tau
    resolved = k2 * h <= 0.2

    total = 0.0
    if np.any(resolved):
        ar, hr, gar, gbr = a[resolved], h[resolved], ga[resolved], gb[resolved]
        for x, wt in zip(_GL_X, _GL_W):
            ff = ar + x * hr
            gg = gar + x * (gbr - gar)
            total += np.sum(wt * hr * gg * np.sin(np.pi * ff * tau) ** 4)
    un = ~resolved
    if np.any(un):
        au, bu, gau, gbu = a[un], b[un], ga[un], gb[un]
        mean = 0.375 * 0.5 * (gau + gbu) * (bu - au)
        total += np.sum(mean - 0.5 * _filon_cos(gau, gbu, au, bu, k1)
                        + 0.125 * _filon_cos(gau, gbu, au, bu, k2))
    return total


def psd_to_adev(psd: SpectralDensity, carrier_freq: float, taus: Sequence[float],
                f_high: float = DEFAULT_F_HIGH) -> AdevCurve:
    """Allan deviation from a one-sided phase PSD.

    sigma_y^2(tau) = 2 int_0^f_high (f/nu0)^2 S_phi(f) sin^4(pi f tau)/(pi f tau)^2 df,
    integrated over the PSD grid (no extrapolation below its first point),
    with the PSD taken piecewise linear between grid points.
    """
    if not carrier_freq > 0:
        raise ValueError("carrier_freq must be > 0")
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0 or np.any(taus <= 0):
        raise ValueError("taus must be non-empty and > 0")
    f, s = psd.freqs, psd.values
    need_lo = 1 / (10 * taus.max())
    if f[0] > need_lo * (1 + 1e-9) or f[-1] < f_high * (1 - 1e-9):
        raise GridCoverageError(
            f"PSD grid [{f[0]:.3g}, {f[-1]:.3g}] Hz does not cover the required band "
            f"[{need_lo:.3g}, {f_high:.3g}] Hz")
    keep = f < f_high
    f_c = np.append(f[keep], f_high)
    s_c = np.append(s[keep], np.interp(f_high, f, s))
    if f_c.size > 1 and f_c[-1] == f_c[-2]:
        f_c, s_c = f_c[:-1], s_c[:-1]
    sig = np.empty_like(taus)
    for i, tau in enumerate(taus):
        g = 2 * s_c / (np.pi**2 * carrier_freq**2 * tau**2)
        sig[i] = np.sqrt(max(_sin4_integral(f_c, g, tau), 0.0))
    order = np.argsort(taus)
    return AdevCurve(taus[order], sig[order])


def adev_from_series(phase, sample_rate: float, carrier_freq: float,
                     taus: Sequence[float]) -> AdevCurve:
    """Overlapping Allan deviation of x(t) = phase(t) / (2 pi nu0).

    Each tau is rounded to a whole number of samples. ``counts`` holds the
    number of second differences averaged at each tau.
    """
    x = np.asarray(phase, dtype=float) / (2 * np.pi * carrier_freq)
    n = x.size
    t0 = 1.0 / sample_rate
    ms = np.unique(np.maximum(1, np.round(np.asarray(taus, dtype=float) * sample_rate)
                              .astype(np.int64)))
    short = [(m * t0, 3 * m) for m in ms if n < 3 * m]
    if short:
        raise InsufficientDataError(*zip(*short))
    sig, counts = [], []
    for m in ms:
        d = x[2 * m:] - 2 * x[m:n - m] + x[:n - 2 * m]
        sig.append(np.sqrt(np.mean(d * d) / (2 * (m * t0) ** 2)))
        counts.append(d.size)
    return AdevCurve(ms * t0, np.array(sig), np.array(counts))


def delivered_freq(carrier_freq: float) -> float:
    """Delivered RF (standard divided by 2), used as nu0 for ADEV."""
    return carrier_freq / 2
