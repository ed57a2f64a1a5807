"""Time-domain simulation of the compensation loops.

Phase-domain baseband model sampled at a fixed rate, integrated with a
second-order (trapezoidal) step. Every span carries one
noise process that is added identically to both directions at the span
output (reciprocity, lumped injection). Each station runs a phase detector
(K_PFD), a PI filter (K_P, K_I) and a VCO integrator (K_VCO); propagation
delays are whole numbers of samples. History before t = 0 is the initial
VCO state with zero noise.

The remote-site residual is ``y(t) - r(t)/2`` where ``y`` is the received
probe phase and ``r`` the standard's phase. Relay-station outputs are on the
standard's scale, ``out_k(t) - r(t)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .noise import (NoiseFloorSpec, PowerLawCoeffs, RfSourceSpec, fiber_psd,
                    synthesize_series, white_series)
from .stability import AdevCurve, adev_from_series, delivered_freq
from .topology import ChainTopology, validate

log = logging.getLogger(__name__)

MIN_DELAY_SAMPLES = 20
MAX_ROUNDING = 0.05
DIVERGENCE_LIMIT = 1e6  # rad


class LoopDivergenceError(RuntimeError):
    def __init__(self, time_s: float, station: int):
        self.time = time_s
        self.station = station
        super().__init__(f"loop diverged at t={time_s:.6g} s (station {station}): "
                         f"VCO phase exceeded {DIVERGENCE_LIMIT:g} rad")


@dataclass(frozen=True)
class SimConfig:
    chain: ChainTopology
    sample_rate: float = 1e4
    duration: float = 100.0
    seed: int = 0
    settle_time: float = 1.0
    static_phi_r: float = 1.0
    static_phi_p: Optional[Sequence[float]] = None
    record_errors: bool = False
    record_mars: bool = False

    @property
    def effective_sample_rate(self) -> float:
        """``sample_rate`` raised so the shortest nonzero delay spans
        at least MIN_DELAY_SAMPLES samples."""
        taus = [t for t in self.chain.delays if t > 0]
        fs = self.sample_rate
        if taus:
            fs = max(fs, MIN_DELAY_SAMPLES / min(taus))
        return fs

    @property
    def n_steps(self) -> int:
        return int(round(self.duration * self.effective_sample_rate))

    def delay_samples(self) -> np.ndarray:
        return np.rint(self.chain.delays * self.effective_sample_rate).astype(np.int64)


def check_config(cfg: SimConfig) -> None:
    err = validate(cfg.chain)
    if err:
        raise ValueError(err)
    if cfg.chain.n_mars < 1:
        raise ValueError("the oracle needs at least one relay station")
    if not cfg.duration > cfg.settle_time >= 0:
        raise ValueError("need duration > settle_time >= 0")
    fs = cfg.effective_sample_rate
    for tau, d in zip(cfg.chain.delays, cfg.delay_samples()):
        if tau > 0 and abs(d / fs - tau) > MAX_ROUNDING * tau:
            raise ValueError(f"delay {tau:g} s not resolvable at {fs:g} Hz "
                             f"(rounds to {d} samples)")
    if cfg.static_phi_p is not None and len(cfg.static_phi_p) != cfg.chain.n_mars + 1:
        raise ValueError("static_phi_p needs one entry per span")


@numba.njit(cache=True)
def _hist(c, k, j):
    return c[k, j] if j >= 0 else c[k, 0]


@numba.njit(cache=True)
def _noise(p, k, j):
    return p[k, j] if j >= 0 else 0.0


@numba.njit(cache=True)
def _errors(i, d, p, ase, r, c, e):
    """Detector outputs of every station at sample ``i``."""
    n = e.size
    for k in range(n):
        if k == 0:
            up = (r[i - d[0]] if i - d[0] >= 0 else 0.0) - _hist(c, 0, i - 2 * d[0]) \
                + p[0, i] - _noise(p, 0, i - d[0])
        else:
            up = _hist(c, k - 1, i - d[k]) + p[k, i]
        if k == n - 1:
            down = _hist(c, k, i - 2 * d[n]) + _noise(p, n, i - d[n]) + p[n, i]
        else:
            down = _hist(c, k + 1, i - d[k + 1]) + p[k + 1, i]
        e[k] = up - down + ase[k, i]


@numba.njit(cache=True)
def _run(n_steps, dt, d, kp, ki, kpfd, kvco, p, ase, r, c, errs, rs, mars,
         record_errors, record_mars, limit):
    # Trapezoidal (Heun) update of the PI integrator and the VCO phase.
    # Taps with zero delay see the Euler-predicted phase at the new sample.
    n = kp.size
    integ = np.zeros(n)
    e = np.zeros(n)
    e_next = np.zeros(n)
    u = np.zeros(n)
    integ_next = np.zeros(n)
    zero_tap = False
    for k in range(d.size):
        if d[k] == 0:
            zero_tap = True
    _errors(0, d, p, ase, r, c, e)
    for i in range(n_steps):
        for k in range(n):
            u[k] = kvco[k] * kpfd[k] * (kp[k] * e[k] + ki[k] * integ[k])
            c[k, i + 1] = c[k, i] + u[k] * dt
            if record_errors:
                errs[k, i] = e[k]
        _errors(i + 1, d, p, ase, r, c, e_next)
        for k in range(n):
            integ_next[k] = integ[k] + 0.5 * dt * (e[k] + e_next[k])
            u_next = kvco[k] * kpfd[k] * (kp[k] * e_next[k] + ki[k] * integ_next[k])
            c[k, i + 1] = c[k, i] + 0.5 * dt * (u[k] + u_next)
            integ[k] = integ_next[k]
            if not abs(c[k, i + 1]) < limit:
                return i, k
        if zero_tap:
            _errors(i + 1, d, p, ase, r, c, e)
        else:
            for k in range(n):
                e[k] = e_next[k]
        rs[i] = _hist(c, n - 1, i - d[n]) + p[n, i] - 0.5 * r[i]
        if record_mars:
            for k in range(n - 1):
                mars[k, i] = c[k, i] + _hist(c, k + 1, i - d[k + 1]) + p[k + 1, i] - r[i]
            mars[n - 1, i] = c[n - 1, i] + _hist(c, n - 1, i - 2 * d[n]) \
                + _noise(p, n, i - d[n]) + p[n, i] - r[i]
    return -1, -1


@dataclass
class SimResult:
    config: SimConfig
    sample_rate: float
    rs_residual: np.ndarray  # after settle
    mars_residual: Optional[np.ndarray]  # (N, n) after settle, standard's scale
    errors: Optional[np.ndarray]  # (N, n) full run, detector errors
    final_phases: np.ndarray  # VCO phases at the end of the run

    @property
    def times(self) -> np.ndarray:
        n0 = int(round(self.config.settle_time * self.sample_rate))
        return (n0 + np.arange(self.rs_residual.size)) / self.sample_rate

    def adev(self, taus: Sequence[float]) -> AdevCurve:
        return adev_from_series(self.rs_residual, self.sample_rate,
                                delivered_freq(self.config.chain.carrier_freq), taus)


def _noise_inputs(cfg: SimConfig, n_steps: int, fs: float):
    chain = cfg.chain
    n = chain.n_mars
    streams = np.random.SeedSequence(cfg.seed).spawn(2 * n + 2)
    n_fft = 1 << max(5, int(np.ceil(np.log2(n_steps + 1))))
    wr = chain.carrier_angular_freq
    p = np.zeros((n + 1, n_steps + 1))
    if not chain.fiber_noise.is_zero():
        for k, length in enumerate(chain.sublink_lengths):
            if length > 0:
                series = synthesize_series(
                    lambda f, L=length: fiber_psd(chain.fiber_noise, L, wr, f),
                    fs, n_fft, streams[k])
                p[k] = series[: n_steps + 1]
                del series
    if cfg.static_phi_p is not None:
        p += np.asarray(cfg.static_phi_p, dtype=float)[:, None]
    ase = np.zeros((n, n_steps + 1))
    s_ase = chain.floor.ase_sphi
    for k in range(n):
        ase[k] = white_series(s_ase, fs, n_steps + 1, np.random.default_rng(streams[n + 1 + k]))
    r = np.full(n_steps + 1, float(cfg.static_phi_r))
    if chain.rf.psd is not None:
        # standard's own phase; 4x the PSD referred to the probe frequency
        r += synthesize_series(lambda f: 4 * chain.rf.evaluate(f), fs, n_fft,
                               streams[n + 1])[: n_steps + 1]
    return p, ase, r


def simulate(cfg: SimConfig) -> SimResult:
    """Run one realisation. Deterministic for a given config and seed."""
    check_config(cfg)
    chain = cfg.chain
    n = chain.n_mars
    fs = cfg.effective_sample_rate
    n_steps = cfg.n_steps
    p, ase, r = _noise_inputs(cfg, n_steps, fs)
    plls = chain.station_plls()
    arr = lambda name: np.array([getattr(q, name) for q in plls], dtype=float)
    c = np.zeros((n, n_steps + 1))
    errs = np.zeros((n, n_steps if cfg.record_errors else 1))
    rs = np.zeros(n_steps)
    mars = np.zeros((n, n_steps if cfg.record_mars else 1))
    step, station = _run(n_steps, 1.0 / fs, cfg.delay_samples(), arr("k_p"), arr("k_i"),
                         arr("k_pfd"), arr("k_vco"), p, ase, r, c, errs, rs, mars,
                         cfg.record_errors, cfg.record_mars, DIVERGENCE_LIMIT)
    if step >= 0:
        raise LoopDivergenceError(step / fs, station + 1)
    n0 = int(round(cfg.settle_time * fs))
    return SimResult(cfg, fs, rs[n0:].copy(),
                     mars[:, n0:].copy() if cfg.record_mars else None,
                     errs if cfg.record_errors else None,
                     c[:, -1].copy())


@dataclass(frozen=True)
class LockReport:
    lock_times: tuple  # per station, None if never locked
    locked: tuple
    rs_rms: float
    rs_final: float
    diverged: bool = False

    @property
    def all_locked(self) -> bool:
        return all(self.locked)


def lock_report(cfg: SimConfig, threshold: float = 1e-6) -> LockReport:
    """Per-station lock time: first instant after which the detector error
    stays below ``threshold`` for the rest of the run."""
    from dataclasses import replace

    run = replace(cfg, record_errors=True, settle_time=0.0)
    try:
        res = simulate(run)
    except LoopDivergenceError:
        n = cfg.chain.n_mars
        return LockReport((None,) * n, (False,) * n, float("inf"), float("inf"), True)
    times, locked = [], []
    for e in res.errors:
        above = np.flatnonzero(np.abs(e) >= threshold)
        if above.size == 0:
            times.append(0.0)
            locked.append(True)
        elif above[-1] == e.size - 1:
            times.append(None)
            locked.append(False)
        else:
            times.append((above[-1] + 1) / res.sample_rate)
            locked.append(True)
    tail = res.rs_residual[int(round(cfg.settle_time * res.sample_rate)):]
    return LockReport(tuple(times), tuple(locked),
                      float(np.sqrt(np.mean(tail**2))) if tail.size else float("nan"),
                      float(abs(res.rs_residual[-1])))


PREFLIGHT_TIME = 0.5  # s


def preflight(cfg: SimConfig, duration: float = PREFLIGHT_TIME) -> None:
    """Short noiseless run that raises LoopDivergenceError for an unstable
    loop before any long noise records are allocated."""
    from dataclasses import replace

    chain = cfg.chain.replace(fiber_noise=PowerLawCoeffs.zero(), floor=NoiseFloorSpec.silent(),
                              rf=RfSourceSpec())
    d = min(duration, cfg.duration)
    simulate(replace(cfg, chain=chain, duration=d, settle_time=min(cfg.settle_time, d / 2),
                     record_errors=False, record_mars=False))


def monte_carlo_adev(cfg: SimConfig, seeds: Sequence[int], taus: Sequence[float]):
    """ADEV of the RS residual for several seeds; returns (taus, sigmas[seed, tau])."""
    from dataclasses import replace

    preflight(cfg)
    rows = []
    curve = None
    for s in seeds:
        curve = simulate(replace(cfg, seed=int(s))).adev(taus)
        rows.append(curve.sigmas)
    return curve.taus, np.array(rows)
