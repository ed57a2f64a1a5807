"""Station phase-locked loop: PI loop filter, phase detector, VCO."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PllParams:
    k_p: float = 800.0
    k_i: float = 25e4  # rad/s
    k_pfd: float = 6e-2  # V/rad
    k_vco: float = 32.0  # rad/(s V)

    def __post_init__(self):
        if not self.k_pfd > 0 or not self.k_vco > 0:
            raise ValueError("k_pfd and k_vco must be > 0")
        if self.k_p < 0 or self.k_i < 0:
            raise ValueError("k_p and k_i must be >= 0")
        # k_p == k_i == 0 is allowed: it is the open-loop (never locking) case

    @property
    def is_open(self) -> bool:
        return self.k_p == 0 and self.k_i == 0

    @property
    def loop_gain(self) -> float:
        """Proportional loop constant K_P K_PFD K_VCO, in 1/s."""
        return self.k_p * self.k_pfd * self.k_vco

    def scaled(self, factor: float) -> "PllParams":
        """Same loop shape with both filter gains multiplied by ``factor``."""
        return PllParams(self.k_p * factor, self.k_i * factor, self.k_pfd, self.k_vco)


def open_loop_gain(params: PllParams, omega):
    """G(w) = (K_P + K_I / jw) K_PFD K_VCO / jw."""
    omega = np.asarray(omega, dtype=float)
    if np.any(~(omega > 0)):
        raise ValueError("omega must be > 0 (G has a pole at 0)")
    jw = 1j * omega
    return (params.k_p + params.k_i / jw) * params.k_pfd * params.k_vco / jw
