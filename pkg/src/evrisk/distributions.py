"""Parent distributions used by the penultimate module and the simulator.

Each entry is a SmoothDist (cdf, pdf, analytic pdf-derivative, endpoints,
limiting shape) plus a sampler.  The six smooth families are the study's
F1-F6; extreme-value parents (GEV, Gumbel, GP, exponential) are built from
the families module.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.stats as st
from scipy import special

from .families import GevParams, GpParams, gev_cdf, gev_quantile, gp_cdf, gp_quantile
from .penultimate import SmoothDist

__all__ = [
    "burr_dist",
    "weibull_dist",
    "gengamma_dist",
    "normal_dist",
    "lognormal_dist",
    "student_dist",
    "gp_smooth",
    "gev_smooth",
    "study_parent",
    "study_sampler",
]


def burr_dist(a: float = 5.0, b: float = 2.0) -> SmoothDist:
    """Burr XII with S(x) = (1 + x^a)^(-b); limiting shape 1/(a b)."""

    def cdf(x):
        return 0.0 if x <= 0.0 else -math.expm1(-b * math.log1p(x**a))

    def pdf(x):
        return 0.0 if x <= 0.0 else a * b * x ** (a - 1.0) * (1.0 + x**a) ** (-b - 1.0)

    def dpdf(x):
        if x <= 0.0:
            return 0.0
        w = 1.0 + x**a
        return a * b * x ** (a - 2.0) * w ** (-b - 2.0) * ((a - 1.0) * w - (b + 1.0) * a * x**a)

    return SmoothDist(cdf, pdf, dpdf, lower_endpoint=0.0, xi_star=1.0 / (a * b), name="burr")


def weibull_dist(k: float = 2.0 / 3.0) -> SmoothDist:
    def cdf(x):
        return 0.0 if x <= 0.0 else -math.expm1(-(x**k))

    def pdf(x):
        return 0.0 if x <= 0.0 else k * x ** (k - 1.0) * math.exp(-(x**k))

    def dpdf(x):
        if x <= 0.0:
            return 0.0
        return k * math.exp(-(x**k)) * x ** (k - 2.0) * ((k - 1.0) - k * x**k)

    return SmoothDist(cdf, pdf, dpdf, lower_endpoint=0.0, xi_star=0.0, name="weibull")


def gengamma_dist(beta: float = 1.83, g1: float = 1.16, g2: float = 0.54) -> SmoothDist:
    """Stacy generalized gamma: f ∝ (x/beta)^(g1-1) exp(-(x/beta)^g2)."""
    a_shape = g1 / g2
    lognorm = math.lgamma(a_shape)

    def cdf(x):
        return 0.0 if x <= 0.0 else float(special.gammainc(a_shape, (x / beta) ** g2))

    def pdf(x):
        if x <= 0.0:
            return 0.0
        t = x / beta
        return (g2 / beta) * math.exp((g1 - 1.0) * math.log(t) - t**g2 - lognorm)

    def dpdf(x):
        if x <= 0.0:
            return 0.0
        t = x / beta
        return pdf(x) * ((g1 - 1.0) / x - (g2 / beta) * t ** (g2 - 1.0))

    return SmoothDist(cdf, pdf, dpdf, lower_endpoint=0.0, xi_star=0.0, name="gengamma")


def normal_dist() -> SmoothDist:
    def dpdf(x):
        return -x * st.norm.pdf(x)

    return SmoothDist(lambda x: float(st.norm.cdf(x)), lambda x: float(st.norm.pdf(x)), dpdf, xi_star=0.0, name="normal")


def lognormal_dist() -> SmoothDist:
    def cdf(x):
        return 0.0 if x <= 0.0 else float(st.norm.cdf(math.log(x)))

    def pdf(x):
        return 0.0 if x <= 0.0 else float(st.norm.pdf(math.log(x))) / x

    def dpdf(x):
        if x <= 0.0:
            return 0.0
        return -pdf(x) * (1.0 + math.log(x)) / x

    return SmoothDist(cdf, pdf, dpdf, lower_endpoint=0.0, xi_star=0.0, name="lognormal")


def student_dist(df: float = 10.0) -> SmoothDist:
    fr = st.t(df)

    def dpdf(x):
        return float(fr.pdf(x)) * (-(df + 1.0) * x / (df + x * x))

    return SmoothDist(lambda x: float(fr.cdf(x)), lambda x: float(fr.pdf(x)), dpdf, xi_star=1.0 / df, name="student")


def gp_smooth(params: GpParams) -> SmoothDist:
    tau, xi = params.tau, params.xi
    hi = math.inf if xi >= 0.0 else -tau / xi

    def pdf(y):
        if y < 0.0 or y >= hi:
            return 0.0
        return (1.0 / tau) * (1.0 + xi * y / tau) ** (-1.0 / xi - 1.0) if xi != 0.0 else math.exp(-y / tau) / tau

    def dpdf(y):
        if y < 0.0 or y >= hi:
            return 0.0
        if xi == 0.0:
            return -math.exp(-y / tau) / tau**2
        return -(1.0 + xi) / tau**2 * (1.0 + xi * y / tau) ** (-1.0 / xi - 2.0)

    return SmoothDist(
        lambda y: float(gp_cdf(np.array([y]), params)[0]),
        pdf,
        dpdf,
        upper_endpoint=hi,
        lower_endpoint=0.0,
        xi_star=xi,
        name="gp",
    )


def gev_smooth(params: GevParams) -> SmoothDist:
    mu, sigma, xi = params.mu, params.sigma, params.xi
    lo = -math.inf if xi <= 0.0 else mu - sigma / xi
    hi = math.inf if xi >= 0.0 else mu - sigma / xi

    def pdf(y):
        z = (y - mu) / sigma
        w = 1.0 + xi * z
        if xi != 0.0 and w <= 0.0:
            return 0.0
        if xi == 0.0:
            return math.exp(-z - math.exp(-z)) / sigma
        E = w ** (-1.0 / xi)
        return E / w * math.exp(-E) / sigma

    def dpdf(y):
        # d/dy [E/w * exp(-E)] / sigma, with E' = -E/(w sigma) * xi ... chain below
        z = (y - mu) / sigma
        w = 1.0 + xi * z
        if xi != 0.0 and w <= 0.0:
            return 0.0
        if xi == 0.0:
            return pdf(y) * (-1.0 + math.exp(-z)) / sigma
        E = w ** (-1.0 / xi)
        # log f = log E - log w - E - log sigma; dlogf/dy = (-E'/E ... )
        dlogf = (-(1.0 + xi) / w + E / w) / sigma
        return pdf(y) * dlogf

    return SmoothDist(
        lambda y: float(gev_cdf(np.array([y]), params)[0]),
        pdf,
        dpdf,
        upper_endpoint=hi,
        lower_endpoint=lo,
        xi_star=xi,
        name="gev",
    )


# names used by the simulation study; F7-F9 depend on the pipeline
_SMOOTH = {
    "burr": burr_dist,
    "weibull": weibull_dist,
    "gengamma": gengamma_dist,
    "normal": normal_dist,
    "lognormal": lognormal_dist,
    "student": student_dist,
}


def study_parent(name: str, pipeline: str = "bm") -> SmoothDist:
    """Parent SmoothDist by study name; evd parents resolve per pipeline."""
    if name in _SMOOTH:
        return _SMOOTH[name]()
    if name == "evd_pos":
        return gev_smooth(GevParams(0.0, 1.0, 0.1)) if pipeline == "bm" else gp_smooth(GpParams(1.0, 0.1))
    if name == "evd_zero":
        return gev_smooth(GevParams(0.0, 1.0, 0.0)) if pipeline == "bm" else gp_smooth(GpParams(1.0, 0.0))
    if name == "evd_neg":
        return gev_smooth(GevParams(0.0, 1.0, -0.1)) if pipeline == "bm" else gp_smooth(GpParams(1.0, -0.1))
    raise ValueError(f"unknown parent {name!r}")


def study_sampler(name: str, pipeline: str = "bm"):
    """Sampling callable (n, rng) -> draws for a study parent."""
    if name == "burr":
        return lambda n, rng: (np.power(rng.uniform(size=n), -1.0 / 2.0) - 1.0) ** (1.0 / 5.0)
    if name == "weibull":
        return lambda n, rng: rng.weibull(2.0 / 3.0, size=n)
    if name == "gengamma":
        return lambda n, rng: 1.83 * rng.gamma(1.16 / 0.54, size=n) ** (1.0 / 0.54)
    if name == "normal":
        return lambda n, rng: rng.standard_normal(n)
    if name == "lognormal":
        return lambda n, rng: np.exp(rng.standard_normal(n))
    if name == "student":
        return lambda n, rng: rng.standard_t(10.0, size=n)
    if name in ("evd_pos", "evd_zero", "evd_neg"):
        xi = {"evd_pos": 0.1, "evd_zero": 0.0, "evd_neg": -0.1}[name]
        if pipeline == "bm":
            par = GevParams(0.0, 1.0, xi)
            return lambda n, rng: gev_quantile(rng.uniform(size=n), par)
        par = GpParams(1.0, xi)
        return lambda n, rng: gp_quantile(rng.uniform(size=n), par)
    raise ValueError(f"unknown parent {name!r}")
