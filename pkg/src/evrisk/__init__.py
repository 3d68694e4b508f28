"""Likelihood inference for extreme-value risk measures.

Profile likelihoods for return levels, tail quantiles and expected maxima
under GEV, GP, point-process, r-largest and truncated/censored models, with
higher-order corrections (tangent exponential model, adjusted profiles) and
a Monte Carlo harness for coverage studies.
"""

from .families import (
    GevParams,
    GpParams,
    LoglikBundle,
    gev_cdf,
    gev_logpdf,
    gev_loglik,
    gev_mean,
    gev_quantile,
    gev_rvs,
    gp_cdf,
    gp_logpdf,
    gp_loglik,
    gp_quantile,
    gp_rvs,
    gp_threshold_shift,
    rescale_gev,
)

__version__ = "0.1.0"
