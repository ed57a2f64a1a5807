"""Batch drivers: MARS position/length grids, per-configuration families,
and relay chain vs cascaded comparison."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .freqdomain import SpectralDensity, cascaded_psd, default_grid, residual_psd_chain
from .stability import DEFAULT_F_HIGH, AdevCurve, delivered_freq, psd_to_adev
from .topology import ChainTopology

log = logging.getLogger(__name__)

METRIC_TAUS = (1.0, 1e4)


def adev_of(psd: SpectralDensity, chain: ChainTopology, taus, f_high=DEFAULT_F_HIGH,
            nu0: Optional[float] = None) -> AdevCurve:
    nu0 = delivered_freq(chain.carrier_freq) if nu0 is None else nu0
    return psd_to_adev(psd, nu0, taus, f_high)


@dataclass(frozen=True)
class SweepSpec:
    template: ChainTopology = ChainTopology((100.0, 100.0))
    total_lengths: Sequence[float] = (200.0, 300.0)
    ratios: Sequence[float] = (0.5, 0.7, 0.9)
    taus: Sequence[float] = METRIC_TAUS
    grid: Optional[np.ndarray] = None
    f_high: float = DEFAULT_F_HIGH
    nu0: Optional[float] = None
    injection: str = "distributed"

    def __post_init__(self):
        if not len(self.total_lengths) or not len(self.ratios) or not len(self.taus):
            raise ValueError("sweep axes must be non-empty")
        for r in self.ratios:
            if not 0 < r < 1:
                raise ValueError(f"ratio {r} must lie in (0, 1) (front-span fraction)")
        if self.template.n_mars != 1:
            raise ValueError("ratio/length sweeps need a one-station template")


def _cell(spec: SweepSpec, total: float, ratio: float) -> dict:
    row = {"total_km": float(total), "ratio": float(ratio)}
    try:
        chain = ChainTopology.two_span(total, ratio, pll=spec.template.pll,
                                       carrier_freq=spec.template.carrier_freq,
                                       fiber_noise=spec.template.fiber_noise,
                                       floor=spec.template.floor, rf=spec.template.rf)
        psd = residual_psd_chain(chain, spec.grid, spec.injection)
        curve = adev_of(psd, chain, spec.taus, spec.f_high, spec.nu0)
        for tau, s in zip(curve.taus, curve.sigmas):
            row[metric_name(tau)] = float(s)
        row["error"] = ""
    except Exception as exc:  # record and keep sweeping
        log.warning("cell total=%g ratio=%g failed: %s", total, ratio, exc)
        for tau in sorted(spec.taus):
            row[metric_name(tau)] = float("nan")
        row["error"] = str(exc)
    return row


def metric_name(tau: float) -> str:
    return f"adev_{tau:g}s"


def ratio_length_grid(spec: SweepSpec) -> List[dict]:
    """One row per (total length, front ratio) cell, sorted by both axes."""
    cells = [(t, r) for t in spec.total_lengths for r in spec.ratios]
    rows = [_cell(spec, t, r) for t, r in cells]
    return sorted(rows, key=lambda row: (row["total_km"], row["ratio"]))


def configuration_family(configs: Sequence[Sequence[float]], template: ChainTopology,
                         taus, grid=None, f_high=DEFAULT_F_HIGH) -> Dict[tuple, tuple]:
    """PSD and ADEV for each span layout in ``configs``."""
    out = {}
    for lengths in configs:
        chain = template.replace(sublink_lengths=tuple(lengths))
        psd = residual_psd_chain(chain, grid)
        out[tuple(lengths)] = (psd, adev_of(psd, chain, taus, f_high))
    return out


@dataclass(frozen=True)
class Comparison:
    chain: AdevCurve
    cascade: AdevCurve
    reference_tau: float

    @property
    def chain_better(self) -> bool:
        return self.chain.at(self.reference_tau) <= self.cascade.at(self.reference_tau)


def chain_vs_cascade(total_km: float, n_mars: int, n_stages: int, taus,
                     template: Optional[ChainTopology] = None, grid=None,
                     f_high=DEFAULT_F_HIGH, reference_tau: float = 1.0) -> Comparison:
    """Equally spaced relay chain against an equal-stage cascade."""
    template = template if template is not None else ChainTopology((total_km,))
    chain = ChainTopology.equal_spacing(total_km, n_mars, pll=template.station_pll(1),
                                        carrier_freq=template.carrier_freq,
                                        fiber_noise=template.fiber_noise,
                                        floor=template.floor, rf=template.rf)
    taus = sorted(set(float(t) for t in taus) | {float(reference_tau)})
    a = adev_of(residual_psd_chain(chain, grid), chain, taus, f_high)
    b = adev_of(cascaded_psd(total_km, n_stages, grid, template=chain), chain, taus, f_high)
    return Comparison(a, b, reference_tau)


def n_mars_family(total_km: float, n_list: Sequence[int], taus,
                  template: Optional[ChainTopology] = None, grid=None,
                  f_high=DEFAULT_F_HIGH) -> List[dict]:
    template = template if template is not None else ChainTopology((total_km,))
    rows = []
    for n in sorted(n_list):
        chain = ChainTopology.equal_spacing(total_km, n, pll=template.station_pll(1),
                                            carrier_freq=template.carrier_freq,
                                            fiber_noise=template.fiber_noise,
                                            floor=template.floor, rf=template.rf)
        curve = adev_of(residual_psd_chain(chain, grid), chain, taus, f_high)
        row = {"total_km": float(total_km), "n_mars": int(n)}
        row.update({metric_name(t): float(s) for t, s in zip(curve.taus, curve.sigmas)})
        rows.append(row)
    return rows
