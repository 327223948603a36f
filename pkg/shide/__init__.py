"""
shide: density estimation by simulation and histogram interpolation.
"""

from .estimator import DensityEstimate, ShideConfig, SupportSpec, evaluate_density, shide_estimate
from .bandwidth import AmiseBandwidth, FixedBandwidth, PercentileBandwidth, select_bandwidth
from .baseline import additive_kde, multiplicative_kde, silverman_bw, sj_bw

__version__ = "0.1.0"

__all__ = [
    "AmiseBandwidth",
    "DensityEstimate",
    "FixedBandwidth",
    "PercentileBandwidth",
    "ShideConfig",
    "SupportSpec",
    "additive_kde",
    "evaluate_density",
    "multiplicative_kde",
    "select_bandwidth",
    "shide_estimate",
    "silverman_bw",
    "sj_bw",
]
