"""Link chain LS -> MARS_1 -> ... -> MARS_N -> RS."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .noise import NoiseFloorSpec, PowerLawCoeffs, RfSourceSpec
from .pll import PllParams

FIBER_SPEED = 2e8  # m/s
DEFAULT_CARRIER_HZ = 2e9


def delay(length_km: float) -> float:
    """One-way propagation delay in seconds."""
    if length_km < 0:
        raise ValueError(f"length must be >= 0, got {length_km}")
    return 1000.0 * length_km / FIBER_SPEED


@dataclass(frozen=True)
class ChainTopology:
    """``sublink_lengths`` has N+1 entries for N relay stations.

    ``pll`` is either one :class:`PllParams` shared by all stations or a
    tuple with one entry per station.
    """

    sublink_lengths: Tuple[float, ...]
    pll: Union[PllParams, Tuple[PllParams, ...]] = PllParams()
    carrier_freq: float = DEFAULT_CARRIER_HZ
    fiber_noise: PowerLawCoeffs = PowerLawCoeffs()
    floor: NoiseFloorSpec = NoiseFloorSpec()
    rf: RfSourceSpec = RfSourceSpec()

    def __post_init__(self):
        object.__setattr__(self, "sublink_lengths",
                           tuple(float(x) for x in self.sublink_lengths))
        if not isinstance(self.pll, PllParams):
            object.__setattr__(self, "pll", tuple(self.pll))

    @classmethod
    def equal_spacing(cls, total_km: float, n_mars: int, **kw) -> "ChainTopology":
        return cls(tuple([total_km / (n_mars + 1)] * (n_mars + 1)), **kw)

    @classmethod
    def two_span(cls, total_km: float, front_fraction: float, **kw) -> "ChainTopology":
        front = total_km * front_fraction
        return cls((front, total_km - front), **kw)

    @property
    def n_mars(self) -> int:
        return len(self.sublink_lengths) - 1

    @property
    def carrier_angular_freq(self) -> float:
        return 2 * np.pi * self.carrier_freq

    @property
    def total_length(self) -> float:
        return sum(self.sublink_lengths)

    @property
    def delays(self) -> np.ndarray:
        return np.array([delay(x) for x in self.sublink_lengths])

    def station_pll(self, k: int) -> PllParams:
        """PLL of station ``k`` (1-based)."""
        if isinstance(self.pll, PllParams):
            return self.pll
        return self.pll[k - 1]

    def station_plls(self) -> list:
        return [self.station_pll(k) for k in range(1, self.n_mars + 1)]

    def replace(self, **kw) -> "ChainTopology":
        from dataclasses import replace
        return replace(self, **kw)


def validate(chain: ChainTopology) -> Optional[str]:
    """Return None if the chain is consistent, else a description of the first
    failing field. Never raises."""
    try:
        lengths = chain.sublink_lengths
        if len(lengths) == 0:
            return "no sub-links"
        for i, x in enumerate(lengths):
            if not np.isfinite(x) or x < 0:
                return f"sublink_lengths[{i}] = {x} must be finite and >= 0"
        if not (chain.carrier_freq > 0):
            return f"carrier_freq = {chain.carrier_freq} must be > 0"
        if isinstance(chain.pll, PllParams):
            plls = [chain.pll]
        else:
            plls = list(chain.pll)
            if len(plls) != max(chain.n_mars, 1):
                return (f"pll has {len(plls)} entries but the chain has "
                        f"{chain.n_mars} stations")
        for i, p in enumerate(plls):
            if not isinstance(p, PllParams):
                return f"pll[{i}] is not a PllParams"
        return None
    except Exception as exc:  # report, never abort
        return f"invalid chain: {exc}"
