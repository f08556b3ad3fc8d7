"""Simulation of double-slab photonic-crystal cavities.

Lengths are in units of the design wavelength lambda0 (1550 nm) and
frequencies in f0 = c / lambda0, except where names carry SI units.
"""

from ._core import (
    Cavity,
    ConfigError,
    Eigenmode,
    FanoParams,
    Factorization,
    Medium,
    NumericalError,
    Parity,
    PhcSlab,
    Polarization,
    RcwaConfig,
    Scattering,
    __version__,
    designs,
    double_slab_response,
    effective_index,
    effective_scatter,
    fano_rt,
    figure_of_merit,
    find_pole,
    rcwa_scatter,
    run,
    supermode_eigenvalues,
    tmm_scatter,
    validate_config,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
