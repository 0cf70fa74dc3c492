"""Expected-residual costs for Gaussian-uncertain complementarity pairs.

For a scalar pair (z, F) with F ~ N(mean, sigma^2), the expected squared
min-residual has the closed form

    E[min(z, F)^2] = z^2 - sigma^2 (z + mean) p(z)
                   + (sigma^2 + mean^2 - z^2) P(z)

where p and P are the Gaussian pdf and cdf evaluated at z.  Its partial
derivatives reduce to

    d/dz     = 2 z (1 - P(z))
    d/dmean  = 2 (mean P(z) - sigma^2 p(z))
    d/dsigma = 2 sigma (P(z) - z p(z))

As sigma -> 0 the expectation approaches the deterministic residual
min(z, mean)^2; far in the tails (|z - mean| > 10 sigma) the closed form is
replaced by its exact asymptotes, z^2 below and mean^2 + sigma^2 above,
which avoids evaluating vanishing pdf/cdf factors.

Two parameter maps connect contact uncertainty to pair parameters: friction
uncertainty enters the cone pair through the normal force (z = gamma,
mean = mu lam_N - sum lam_T, sigma = sigma_mu lam_N), and terrain-height
uncertainty enters the distance pair directly (z = lam_N, mean = phi,
sigma = sigma_h).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

_SQRT2 = np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)
TAIL_WIDTH = 10.0


@dataclass(frozen=True)
class GaussianParam:
    """Mean and standard deviation of a scalar Gaussian quantity."""

    mean: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.sigma)):
            raise ValueError("Gaussian parameters must be finite")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


@dataclass(frozen=True)
class UncertaintyModel:
    """Gaussian terrain uncertainty: friction coefficient, contact distance,
    and the weight applied to expected-residual costs."""

    friction: GaussianParam = GaussianParam(0.5, 0.0)
    height: GaussianParam = GaussianParam(0.0, 0.0)
    beta: float = 1.0e5

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")


def _validate(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("arguments must be finite")


def gauss_pdf_cdf(z, p: GaussianParam):
    """Gaussian pdf and cdf at z.  Requires sigma > 0."""
    if p.sigma <= 0:
        raise ValueError("pdf/cdf need sigma > 0")
    z = np.asarray(z, dtype=float)
    _validate(z)
    d = (z - p.mean) / p.sigma
    pdf = _INV_SQRT2PI / p.sigma * np.exp(-0.5 * d * d)
    cdf = 0.5 * (1.0 + special.erf(d / _SQRT2))
    if z.ndim == 0:
        return float(pdf), float(cdf)
    return pdf, cdf


#: Sigmas below the smallest normal double are treated as exactly zero:
#: the interior formula would overflow 1/sigma while sigma^2 underflows,
#: producing 0 * inf, and the dropped correction terms are O(sigma).
_TINY_SIGMA = np.finfo(float).tiny


def _erm_pieces(z, mean, sigma):
    """Region masks and shared pdf/cdf factors for the vectorized forms."""
    d = z - mean
    deterministic = sigma < _TINY_SIGMA
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = np.where(deterministic, 0.0, d / np.where(deterministic, 1.0, sigma))
    low = ~deterministic & (scaled < -TAIL_WIDTH)
    high = ~deterministic & (scaled > TAIL_WIDTH)
    interior = ~(deterministic | low | high)
    pdf = np.zeros_like(scaled)
    cdf = np.zeros_like(scaled)
    if np.any(interior):
        si = np.where(interior, sigma, 1.0)
        pdf = np.where(
            interior, _INV_SQRT2PI / si * np.exp(-0.5 * scaled**2), 0.0
        )
        cdf = np.where(interior, 0.5 * (1.0 + special.erf(scaled / _SQRT2)), 0.0)
    return deterministic, low, high, interior, pdf, cdf


def erm_min_sq_raw(z, mean, sigma):
    """Vectorized E[min(z, F)^2] on broadcastable arrays."""
    z, mean, sigma = np.broadcast_arrays(
        np.asarray(z, float), np.asarray(mean, float), np.asarray(sigma, float)
    )
    _validate(z, mean, sigma)
    if np.any(sigma < 0):
        raise ValueError("sigma must be nonnegative")
    det, low, high, interior, pdf, cdf = _erm_pieces(z, mean, sigma)
    val = np.empty_like(z)
    val[det] = np.minimum(z[det], mean[det]) ** 2
    val[low] = z[low] ** 2
    val[high] = mean[high] ** 2 + sigma[high] ** 2
    i = interior
    val[i] = (
        z[i] ** 2
        - sigma[i] ** 2 * (z[i] + mean[i]) * pdf[i]
        + (sigma[i] ** 2 + mean[i] ** 2 - z[i] ** 2) * cdf[i]
    )
    return val


def erm_min_sq_grad_raw(z, mean, sigma):
    """Vectorized partials (d/dz, d/dmean, d/dsigma) of E[min(z, F)^2].

    At sigma = 0 the deterministic subgradient is returned, with 0 at the
    tie z == mean.
    """
    z, mean, sigma = np.broadcast_arrays(
        np.asarray(z, float), np.asarray(mean, float), np.asarray(sigma, float)
    )
    _validate(z, mean, sigma)
    if np.any(sigma < 0):
        raise ValueError("sigma must be nonnegative")
    det, low, high, interior, pdf, cdf = _erm_pieces(z, mean, sigma)
    dz = np.zeros_like(z)
    dmean = np.zeros_like(z)
    dsigma = np.zeros_like(z)
    below = det & (z < mean)
    above = det & (z > mean)
    dz[below] = 2.0 * z[below]
    dmean[above] = 2.0 * mean[above]
    dz[low] = 2.0 * z[low]
    dmean[high] = 2.0 * mean[high]
    dsigma[high] = 2.0 * sigma[high]
    i = interior
    dz[i] = 2.0 * z[i] * (1.0 - cdf[i])
    dmean[i] = 2.0 * (mean[i] * cdf[i] - sigma[i] ** 2 * pdf[i])
    dsigma[i] = 2.0 * sigma[i] * (cdf[i] - z[i] * pdf[i])
    return dz, dmean, dsigma


def erm_min_sq_curv_raw(z, mean, sigma):
    """Vectorized second partials (dzz, dmm, dss, dms) of E[min(z, F)^2].

    dms is the mixed mean/sigma partial; the z row of the Hessian couples
    only weakly and is dominated by dzz, so the z cross terms are not
    exposed.  At sigma = 0 the one-sided limits are returned: curvature 2
    on whichever of z, mean is active (plus dss = 2 above the mean, from
    the E -> mean^2 + sigma^2 asymptote).
    """
    z, mean, sigma = np.broadcast_arrays(
        np.asarray(z, float), np.asarray(mean, float), np.asarray(sigma, float)
    )
    _validate(z, mean, sigma)
    if np.any(sigma < 0):
        raise ValueError("sigma must be nonnegative")
    det, low, high, interior, pdf, cdf = _erm_pieces(z, mean, sigma)
    dzz = np.zeros_like(z)
    dmm = np.zeros_like(z)
    dss = np.zeros_like(z)
    dms = np.zeros_like(z)
    below = det & (z < mean)
    above = det & (z > mean)
    dzz[below] = 2.0
    dmm[above] = 2.0
    dss[above] = 2.0
    dzz[low] = 2.0
    dmm[high] = 2.0
    dss[high] = 2.0
    i = interior
    with np.errstate(invalid="ignore", divide="ignore"):
        zeta = np.where(i, (z - mean) / np.where(i, sigma, 1.0), 0.0)
    zp = z[i] * pdf[i]
    dzz[i] = 2.0 * (1.0 - cdf[i]) - 2.0 * zp
    dmm[i] = 2.0 * (cdf[i] - zp)
    dss[i] = (
        2.0 * (cdf[i] - zp)
        - 2.0 * sigma[i] * pdf[i] * zeta[i]
        - 2.0 * zp * (zeta[i] ** 2 - 1.0)
    )
    dms[i] = -2.0 * mean[i] * pdf[i] * zeta[i] - 2.0 * sigma[i] * pdf[i] * (
        zeta[i] ** 2 + 1.0
    )
    return dzz, dmm, dss, dms


def erm_min_sq(z, p: GaussianParam):
    """E[min(z, F)^2] for F ~ N(p.mean, p.sigma^2); z may be an array."""
    z = np.asarray(z, dtype=float)
    val = erm_min_sq_raw(z, p.mean, p.sigma)
    return float(val) if z.ndim == 0 else val


def erm_min_sq_grad(z, p: GaussianParam):
    """Partials of E[min(z, F)^2] with respect to z and the mean."""
    z = np.asarray(z, dtype=float)
    dz, dmean, _ = erm_min_sq_grad_raw(z, p.mean, p.sigma)
    if z.ndim == 0:
        return float(dz), float(dmean)
    return dz, dmean


def friction_erm_params(lam_N, lam_T, gamma, unc: UncertaintyModel):
    """Pair parameters for the friction-cone condition under friction-
    coefficient uncertainty.

    Returns (z, GaussianParam): z = gamma, mean = mu lam_N - sum(lam_T),
    sigma = sigma_mu lam_N.  The normal force scales both the mean and the
    spread of the cone residual.
    """
    lam_T = np.atleast_1d(np.asarray(lam_T, float))
    mean = unc.friction.mean * float(lam_N) - float(lam_T.sum())
    sigma = unc.friction.sigma * float(lam_N)
    return float(gamma), GaussianParam(mean, sigma)


def distance_erm_params(lam_N, phi_mean, unc: UncertaintyModel):
    """Pair parameters for the distance condition under terrain-height
    uncertainty: z = lam_N, mean = phi at the mean terrain, sigma = sigma_h."""
    return float(lam_N), GaussianParam(float(phi_mean), unc.height.sigma)


def erm_cost_map(z_range, mean_range, sigma):
    """Expected-residual values on a (z, mean) grid at fixed sigma.

    Returns an array of shape (len(z_range), len(mean_range)) with
    ``out[i, j] = E[min(z_range[i], N(mean_range[j], sigma^2))^2]``.
    """
    z = np.asarray(z_range, dtype=float)[:, None]
    m = np.asarray(mean_range, dtype=float)[None, :]
    return erm_min_sq_raw(z, m, float(sigma))
