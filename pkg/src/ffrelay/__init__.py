"""Filter-and-forward relay design and link-level validation for OFDM."""

from .model import (
    ChannelRealization,
    QuadraticForms,
    RdStats,
    SystemConfig,
    all_subcarrier_snr,
    build_quadratic_forms,
    build_selectors,
    draw_channel,
    lp_coefficients,
    min_cyclic_prefix,
    relay_power,
    signal_coefficients,
    source_covariance,
    subcarrier_snr,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelRealization",
    "QuadraticForms",
    "RdStats",
    "SystemConfig",
    "all_subcarrier_snr",
    "build_quadratic_forms",
    "build_selectors",
    "draw_channel",
    "lp_coefficients",
    "min_cyclic_prefix",
    "relay_power",
    "signal_coefficients",
    "source_covariance",
    "subcarrier_snr",
    "__version__",
]
