"""Residual phase-noise spectra of compensated relay chains.

Two routes compute the remote-site residual:

* :func:`residual_psd_single_mars` evaluates the one-station closed form.
* :func:`residual_psd_chain` builds, per frequency, the tridiagonal system
  linking every station's VCO phase to its neighbours and solves it for each
  noise source (fiber spans, RF source, per-station ASE).

Noise sources are treated as mutually uncorrelated, so every output PSD is a
sum of ``|transfer|^2 * source PSD``.

Two weightings of the round-trip fiber noise are available. ``"distributed"``
uses the averaged real weights ``sqrt(2[1 -+ sinc(2 w tau)])`` for noise
spread uniformly along a span. ``"lumped"`` uses the exact complex weights
``1 -+ exp(-j w tau)`` for noise injected once per traversal at the span
output, which is what :mod:`marsrf.oracle` simulates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .noise import fiber_psd, floor_psd
from .pll import open_loop_gain
from .topology import ChainTopology, validate

DEFAULT_FMIN = 1e-5
DEFAULT_FMAX = 1e5
DEFAULT_PPD = 200
SOLVE_TOL = 1e-10

INJECTIONS = ("distributed", "lumped")


class SingularSystemError(RuntimeError):
    def __init__(self, freq, residual):
        self.freq = freq
        self.residual = residual
        super().__init__(f"chain system singular or ill-conditioned at f={freq:.6g} Hz "
                         f"(relative residual {residual:.3g})")


@dataclass(frozen=True)
class SpectralDensity:
    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if f.shape != v.shape or f.ndim != 1:
            raise ValueError("freqs and values must be 1-D arrays of equal length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("freqs must be strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("PSD values must be finite and >= 0")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "values", v)

    def __add__(self, other: "SpectralDensity") -> "SpectralDensity":
        if not np.array_equal(self.freqs, other.freqs):
            raise ValueError("cannot add spectra on different grids")
        return SpectralDensity(self.freqs, self.values + other.values)

    def scaled(self, factor: float) -> "SpectralDensity":
        return SpectralDensity(self.freqs, self.values * factor)

    def at(self, f: float) -> float:
        """Log-log interpolated value at ``f``."""
        return float(np.exp(np.interp(np.log(f), np.log(self.freqs),
                                      np.log(np.maximum(self.values, 1e-300)))))

    def dbc(self) -> np.ndarray:
        """SSB level in dBc/Hz, 10 log10(S/2)."""
        with np.errstate(divide="ignore"):
            return 10 * np.log10(self.values / 2)


def default_grid(fmin: float = DEFAULT_FMIN, fmax: float = DEFAULT_FMAX,
                 ppd: int = DEFAULT_PPD) -> np.ndarray:
    """Log-spaced grid with ``ppd`` points per decade, both ends included."""
    if not (0 < fmin < fmax) or ppd < 1:
        raise ValueError(f"bad grid fmin={fmin}, fmax={fmax}, ppd={ppd}")
    n = int(round(np.log10(fmax / fmin) * ppd)) + 1
    return np.logspace(np.log10(fmin), np.log10(fmax), n)


def one_minus_sinc(x):
    """1 - sin(x)/x, accurate near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    xs = np.where(small, 1.0, x)
    x2 = np.where(small, x, 0.0) ** 2
    series = x2 / 6 - x2**2 / 120 + x2**3 / 5040
    return np.where(small, series, 1 - np.sin(xs) / xs)


def front_weight(omega, tau, injection="distributed"):
    """Weight of the front-span noise in the first station's error signal."""
    if injection == "distributed":
        return np.sqrt(2 * one_minus_sinc(2 * omega * tau)) + 0j
    if injection == "lumped":
        return -np.expm1(-1j * omega * tau)
    raise ValueError(f"unknown injection {injection!r}, expected one of {INJECTIONS}")


def echo_weight(omega, tau, injection="distributed"):
    """Weight of the last-span noise in the last station's echo error."""
    if injection == "distributed":
        return np.sqrt(2 * (2 - one_minus_sinc(2 * omega * tau))) + 0j
    if injection == "lumped":
        return 1 + np.exp(-1j * omega * tau)
    raise ValueError(f"unknown injection {injection!r}, expected one of {INJECTIONS}")


def _as_relay_chain(chain: ChainTopology) -> ChainTopology:
    err = validate(chain)
    if err:
        raise ValueError(err)
    if chain.n_mars == 0:
        # single span: one compensating station at the far end, zero rear span
        return chain.replace(sublink_lengths=(chain.sublink_lengths[0], 0.0))
    return chain


def _grid(grid) -> np.ndarray:
    f = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.any(~(f > 0)):
        raise ValueError("grid frequencies must be > 0")
    return f


def _floor_count(chain: ChainTopology) -> int:
    return max(chain.n_mars, 1)


# ---------------------------------------------------------------------------
# closed form, one station

def single_mars_coefficients(chain: ChainTopology, freqs, injection="distributed"):
    """Squared transfer magnitudes of the one-station closed form.

    Returns a dict with keys ``front``, ``rear``, ``rf`` and ``ase``.
    """
    chain = _as_relay_chain(chain)
    if chain.n_mars != 1:
        raise ValueError(f"closed form needs exactly 2 sub-links, got "
                         f"{len(chain.sublink_lengths)}")
    w = 2 * np.pi * np.asarray(freqs, dtype=float)
    t0, t1 = chain.delays
    g = open_loop_gain(chain.station_pll(1), w)
    den = 1 + g * np.exp(-2j * w * t0) + g * np.exp(-2j * w * t1)
    e1 = np.exp(-1j * w * t1)
    return {
        "front": np.abs(g * e1 * front_weight(w, t0, injection) / den) ** 2,
        "rear": np.abs(1 - g * e1 * echo_weight(w, t1, injection) / den) ** 2,
        "rf": np.abs(1 - 2 * g * np.exp(-1j * w * t0) * e1 / den) ** 2,
        "ase": np.abs(g * e1 / den) ** 2,
    }


def residual_psd_single_mars(chain: ChainTopology, grid=None,
                             injection="distributed") -> SpectralDensity:
    """Remote-site residual PSD of a one-station link, closed form."""
    f = _grid(grid)
    chain = _as_relay_chain(chain)
    c = single_mars_coefficients(chain, f, injection)
    wr = chain.carrier_angular_freq
    l0, l1 = chain.sublink_lengths
    s = (c["front"] * fiber_psd(chain.fiber_noise, l0, wr, f)
         + c["rear"] * fiber_psd(chain.fiber_noise, l1, wr, f)
         + c["rf"] * chain.rf.evaluate(f)
         + c["ase"] * chain.floor.ase_sphi
         + floor_psd(chain.floor, f))
    return SpectralDensity(f, s)


# ---------------------------------------------------------------------------
# general chain

@dataclass(frozen=True)
class ChainSystem:
    """Tridiagonal systems ``A x = B``, one per frequency.

    ``lower``/``upper`` have shape (nf, N-1), ``diag`` (nf, N), ``rhs``
    (nf, N, 2N+2). RHS columns: fiber spans 0..N, then the RF source, then
    the ASE of stations 1..N.
    """

    freqs: np.ndarray
    delays: np.ndarray
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    @property
    def n(self) -> int:
        return self.diag.shape[1]

    @property
    def rf_col(self) -> int:
        return self.n + 1

    def ase_col(self, k: int) -> int:
        return self.n + 1 + k

    def matvec(self, x):
        """A @ x for x of shape (nf, N, m)."""
        y = self.diag[:, :, None] * x
        if self.n > 1:
            y[:, 1:] += self.lower[:, :, None] * x[:, :-1]
            y[:, :-1] += self.upper[:, :, None] * x[:, 1:]
        return y


def build_chain_system(chain: ChainTopology, freqs, injection="distributed") -> ChainSystem:
    """Assemble the per-frequency station equations with unknowns on the left.

    Station 1 locks the round trip over span 0 against span 1, interior
    stations lock the probe from upstream against the probe from downstream,
    and station N locks against the remote-site echo over span N. A single
    station (N = 1) is both first and last, so both self-loops enter its
    diagonal.
    """
    chain = _as_relay_chain(chain)
    f = np.atleast_1d(np.asarray(freqs, dtype=float))
    w = 2 * np.pi * f
    n = chain.n_mars
    tau = chain.delays
    nf = f.size
    e = np.exp(-1j * w[:, None] * tau[None, :])  # (nf, N+1)
    g = np.stack([open_loop_gain(p, w) for p in chain.station_plls()], axis=1)  # (nf, N)
    wf = front_weight(w, tau[0], injection)
    we = echo_weight(w, tau[n], injection)

    lower = np.zeros((nf, max(n - 1, 0)), complex)
    upper = np.zeros((nf, max(n - 1, 0)), complex)
    diag = np.ones((nf, n), complex)
    rhs = np.zeros((nf, n, 2 * n + 2), complex)
    rf = n + 1

    for k in range(n):  # 0-based row for station k+1
        gk = g[:, k]
        rhs[:, k, rf + 1 + k] = gk  # ASE at this station's detector
        if k == 0:
            diag[:, 0] += gk * e[:, 0] ** 2
            rhs[:, 0, 0] = gk * wf
            rhs[:, 0, rf] = gk * e[:, 0]
        else:
            lower[:, k - 1] = -gk * e[:, k]
            rhs[:, k, k] = gk
        if k == n - 1:
            diag[:, k] += gk * e[:, n] ** 2
            rhs[:, k, n] = -gk * we
        else:
            upper[:, k] = gk * e[:, k + 1]
            rhs[:, k, k + 1] = -gk
    return ChainSystem(f, tau, lower, diag, upper, rhs)


def solve_tridiagonal(lower, diag, upper, rhs):
    """Thomas elimination, batched over the leading axis.

    ``lower``/``upper``: (nf, n-1), ``diag``: (nf, n), ``rhs``: (nf, n, m).
    No pivoting; callers check the residual.
    """
    nf, n = diag.shape
    cp = np.zeros((nf, max(n - 1, 0)), complex)
    dp = np.zeros(rhs.shape, complex)
    with np.errstate(all="ignore"):
        den = diag[:, 0]
        if n > 1:
            cp[:, 0] = upper[:, 0] / den
        dp[:, 0] = rhs[:, 0] / den[:, None]
        for i in range(1, n):
            den = diag[:, i] - lower[:, i - 1] * cp[:, i - 1]
            if i < n - 1:
                cp[:, i] = upper[:, i] / den
            dp[:, i] = (rhs[:, i] - lower[:, i - 1, None] * dp[:, i - 1]) / den[:, None]
        x = dp
        for i in range(n - 2, -1, -1):
            x[:, i] = dp[:, i] - cp[:, i, None] * x[:, i + 1]
    return x


def _relative_residual(system: ChainSystem, x):
    r = system.matvec(x) - system.rhs
    num = np.linalg.norm(r.reshape(r.shape[0], -1), axis=1)
    den = np.linalg.norm(system.rhs.reshape(r.shape[0], -1), axis=1)
    with np.errstate(all="ignore"):
        rel = np.where(den > 0, num / np.where(den > 0, den, 1), num)
    return np.where(np.isfinite(rel), rel, np.inf)


def _dense(system: ChainSystem, idx):
    nf, n = len(idx), system.n
    a = np.zeros((nf, n, n), complex)
    ii = np.arange(n)
    a[:, ii, ii] = system.diag[idx]
    if n > 1:
        a[:, ii[1:], ii[:-1]] = system.lower[idx]
        a[:, ii[:-1], ii[1:]] = system.upper[idx]
    return a


@dataclass(frozen=True)
class TransferSet:
    """Solved transfers at every grid point.

    ``stations`` (nf, N, 2N+2) is the station phase per unit source.
    ``fiber`` (nf, N+1), ``rf`` (nf,) and ``ase`` (nf, N) are the transfers
    to the remote-site residual. ``rf`` is referred to the beat note against
    the standard, so it vanishes at DC.
    """

    freqs: np.ndarray
    delays: np.ndarray
    stations: np.ndarray
    fiber: np.ndarray
    rf: np.ndarray
    ase: np.ndarray
    max_residual: float

    @property
    def n(self) -> int:
        return self.stations.shape[1]


def solve_transfer_set(system: ChainSystem, tol: float = SOLVE_TOL) -> TransferSet:
    """Solve every per-frequency system and assemble remote-site transfers.

    Points where Thomas elimination leaves a residual above ``tol`` are
    re-solved with pivoted dense elimination; a point that still fails raises
    :class:`SingularSystemError`.
    """
    x = solve_tridiagonal(system.lower, system.diag, system.upper, system.rhs)
    rel = _relative_residual(system, x)
    bad = np.flatnonzero(~(rel < tol))
    if bad.size:
        try:
            x[bad] = np.linalg.solve(_dense(system, bad), system.rhs[bad])
        except np.linalg.LinAlgError:
            raise SingularSystemError(float(system.freqs[bad[0]]), np.inf) from None
        rel = _relative_residual(system, x)
        still = np.flatnonzero(~(rel < tol))
        if still.size:
            i = still[0]
            raise SingularSystemError(float(system.freqs[i]), float(rel[i]))
    n = system.n
    w = 2 * np.pi * system.freqs
    e_last = np.exp(-1j * w * system.delays[n])
    out = x[:, n - 1, :] * e_last[:, None]
    fiber = out[:, : n + 1].copy()
    fiber[:, n] += 1
    rf = 1 - 2 * out[:, n + 1]
    ase = out[:, n + 2:]
    return TransferSet(system.freqs, system.delays, x, fiber, rf, ase, float(rel.max()))


def transfer_set(chain: ChainTopology, grid=None, injection="distributed") -> TransferSet:
    return solve_transfer_set(build_chain_system(chain, _grid(grid), injection))


def _combine(chain, f, fiber_h, rf_h, ase_h, n_floor):
    wr = chain.carrier_angular_freq
    s = np.zeros_like(f)
    for k, length in enumerate(chain.sublink_lengths):
        if length > 0:
            s += np.abs(fiber_h[:, k]) ** 2 * fiber_psd(chain.fiber_noise, length, wr, f)
    s += np.abs(rf_h) ** 2 * chain.rf.evaluate(f)
    s += (np.abs(ase_h) ** 2).sum(axis=1) * chain.floor.ase_sphi
    s += n_floor * floor_psd(chain.floor, f)
    return s


def residual_psd_chain(chain: ChainTopology, grid=None,
                       injection="distributed") -> SpectralDensity:
    """Remote-site residual PSD for any number of stations.

    The flat back-to-back floor is counted once per station.
    """
    f = _grid(grid)
    chain = _as_relay_chain(chain)
    ts = transfer_set(chain, f, injection)
    return SpectralDensity(f, _combine(chain, f, ts.fiber, ts.rf, ts.ase,
                                       _floor_count(chain)))


def mars_output_psd(chain: ChainTopology, k: int, grid=None,
                    injection="distributed") -> SpectralDensity:
    """PSD of the regenerated output at relay station ``k`` (1 <= k < N).

    The output is the station's own VCO mixed with the probe arriving from
    station k+1, which reproduces the standard's phase at DC.
    """
    f = _grid(grid)
    chain = _as_relay_chain(chain)
    n = chain.n_mars
    if not 1 <= k < n:
        raise ValueError(f"station index must satisfy 1 <= k < N={n}, got {k}; "
                         "the last station's output is only available from the oracle")
    ts = transfer_set(chain, f, injection)
    w = 2 * np.pi * f
    ek = np.exp(-1j * w * chain.delays[k])
    out = ts.stations[:, k - 1, :] + ek[:, None] * ts.stations[:, k, :]
    fiber = out[:, : n + 1].copy()
    fiber[:, k] += 1
    rf = 1 - out[:, n + 1]
    ase = out[:, n + 2:]
    return SpectralDensity(f, _combine(chain, f, fiber, rf, ase, 1))


def free_running_psd(chain: ChainTopology, grid=None) -> SpectralDensity:
    """Uncompensated link: accumulated fiber noise of all spans plus floor."""
    f = _grid(grid)
    err = validate(chain)
    if err:
        raise ValueError(err)
    wr = chain.carrier_angular_freq
    s = sum(fiber_psd(chain.fiber_noise, x, wr, f) for x in chain.sublink_lengths)
    return SpectralDensity(f, s + floor_psd(chain.floor, f))


def cascaded_psd(total_length: float, stages: int, grid=None,
                 template: Optional[ChainTopology] = None,
                 injection="distributed") -> SpectralDensity:
    """``stages`` independently compensated equal single spans in series.

    Each stage is a one-station link with zero rear span; stage residuals are
    independent and add in power. ``template`` supplies PLL, noise and carrier
    settings (its lengths are ignored).
    """
    if stages < 1:
        raise ValueError("stages must be >= 1")
    template = template if template is not None else ChainTopology((total_length,))
    stage = template.replace(sublink_lengths=(total_length / stages, 0.0),
                             pll=template.station_pll(1))
    # same route as a bare single-span chain, so one stage reproduces it exactly
    single = residual_psd_chain(stage, grid, injection)
    return single.scaled(stages)
