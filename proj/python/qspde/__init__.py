"""Python access to the qspde core: spectral noise, solver and Hoelder norms."""

from ._qspde import (
    CovarianceSpec,
    c1alpha_seminorm,
    chaining_constant,
    config_hash,
    covariance_check,
    covariance_closed_form,
    normalize_config,
    recommended_kmax,
    sample_noise,
    seminorm_dyadic,
    seminorm_naive,
    solve,
    tail_fit,
    verify_ellipticity,
)

__all__ = [
    "CovarianceSpec",
    "c1alpha_seminorm",
    "chaining_constant",
    "config_hash",
    "covariance_check",
    "covariance_closed_form",
    "normalize_config",
    "recommended_kmax",
    "sample_noise",
    "seminorm_dyadic",
    "seminorm_naive",
    "solve",
    "tail_fit",
    "verify_ellipticity",
]
