"""Static (DC) lock bookkeeping for a relay chain.

With every loop locked, station k satisfies ``c_k = r - c_{k+1} - p_k`` for
k < N, and the last station ``c_N = r/2 - p_N``. Delays are constant at DC
and are absorbed into the span phases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

RS = "RS"


@dataclass(frozen=True)
class StaticPhaseState:
    phi_r: float
    phi_p: tuple  # span phases, length N+1
    phi_c: tuple  # station VCO phases, length N

    @property
    def n_mars(self) -> int:
        return len(self.phi_c)


def solve_static_locks(phi_r: float, phi_p: Sequence[float]) -> StaticPhaseState:
    phi_p = tuple(float(x) for x in phi_p)
    n = len(phi_p) - 1
    if n < 1:
        raise ValueError("need at least one relay station (two spans)")
    c = [0.0] * n
    c[n - 1] = phi_r / 2 - phi_p[n]
    for k in range(n - 2, -1, -1):
        c[k] = phi_r - c[k + 1] - phi_p[k + 1]
    return StaticPhaseState(float(phi_r), phi_p, tuple(c))


def lock_errors(state: StaticPhaseState) -> np.ndarray:
    """Residual of every station's lock condition (zero when solved).

    Station 1 locks the passively compensated LS return against the probe
    from station 2, interior stations lock upstream against downstream probe,
    and the last station locks against the remote-site echo.
    """
    r, p, c = state.phi_r, state.phi_p, state.phi_c
    n = state.n_mars
    err = np.empty(n)
    for k in range(n):
        # what arrives from upstream (span k): LS return for the first station
        up = (r - c[k]) if k == 0 else (c[k - 1] + p[k])
        down = (c[k] + 2 * p[k + 1]) if k == n - 1 else (c[k + 1] + p[k + 1])
        err[k] = up - down
    return err


def recovered_output_phase(state: StaticPhaseState, where: Union[str, int] = RS) -> float:
    """Phase of the regenerated standard, on the standard's scale.

    ``where`` is ``"RS"`` or a 1-based station index. At the RS the received
    probe is at half the standard's frequency and is doubled; at station k
    the VCO is mixed with the probe arriving from downstream (the RS echo for
    the last station).
    """
    c, p = state.phi_c, state.phi_p
    n = state.n_mars
    if where == RS:
        return 2 * (c[n - 1] + p[n])
    k = int(where)
    if not 1 <= k <= n:
        raise ValueError(f"station index must be in 1..{n}, got {where}")
    if k == n:
        return c[n - 1] + c[n - 1] + 2 * p[n]
    return c[k - 1] + c[k] + p[k]
