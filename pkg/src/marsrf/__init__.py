"""Phase-noise model of a fiber RF transfer chain with relay stations.

Frequency-domain residual spectra, Allan deviation conversion, a
time-domain loop simulator used as a cross-check, and sweep drivers.
"""

from .freqdomain import (SpectralDensity, cascaded_psd, default_grid, free_running_psd,
                         mars_output_psd, residual_psd_chain, residual_psd_single_mars)
from .noise import NoiseFloorSpec, PowerLawCoeffs, RfSourceSpec
from .pll import PllParams
from .stability import AdevCurve, adev_from_series, psd_to_adev
from .topology import ChainTopology

__version__ = "0.1.0"

__all__ = [
    "AdevCurve", "ChainTopology", "NoiseFloorSpec", "PllParams", "PowerLawCoeffs",
    "RfSourceSpec", "SpectralDensity", "adev_from_series", "cascaded_psd", "default_grid",
    "free_running_psd", "mars_output_psd", "psd_to_adev", "residual_psd_chain",
    "residual_psd_single_mars",
]
