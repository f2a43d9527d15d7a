"""Synthetic hindcast generator with known ground truth.

Storm arrivals are Poisson in time (placed with a minimum separation so
threshold declustering recovers them cleanly; the count itself stays
Poisson).  Storm-peak wave heights follow a shifted GPD, so the marginal
tail model is exact by construction.  Steepness at the peak is tied to
wave height through the Laplace-scale tail regression with chosen
(alpha, beta) above the conditioning threshold and a Gaussian copula in
the body.  Every generator constant is recorded in a ground-truth sidecar
for recovery tests.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .data import HindcastSeries, period_from_steepness
from .errors import DataError
from .marginal import gpd_cdf, laplace_cdf, laplace_quantile


@dataclass(frozen=True)
class SynthConfig:
    """Ground-truth parameters of the generator."""

    years: float = 35.0
    storms_per_year: float = 73.0
    cadence: float = 10800.0
    seed: int = 0
    # storm-peak hs = hs_base + GPD(gpd_sigma, gpd_xi)
    hs_base: float = 2.5
    gpd_sigma: float = 1.2
    gpd_xi: float = -0.05
    # steepness marginal: lognormal
    s2_logmu: float = float(np.log(0.035))
    s2_logsigma: float = 0.25
    # Laplace-scale tail regression above the dependence threshold
    alpha: float = 0.378
    beta: float = 0.533
    resid_mu: float = 0.0
    resid_sigma: float = 0.5
    dep_quantile: float = 0.95
    # Gaussian copula correlation for the sub-threshold body
    body_rho: float = 0.35
    # storm footprint: 2*storm_halfwidth + 1 sea states
    storm_halfwidth: int = 7
    # calm background hs range; storm_floor > calm_hi keeps every storm state
    # above the whole background, so quantile thresholding isolates exactly
    # the planted storms
    calm_lo: float = 0.3
    calm_hi: float = 1.8
    storm_floor: float = 2.0


def _place_storm_centres(rng, n_states, n_storms, separation):
    """Random distinct storm centres at least ``separation`` states apart."""
    margin = separation
    candidates = rng.permutation(np.arange(margin, n_states - margin))
    chosen: list[int] = []
    occupied = np.zeros(n_states, dtype=bool)
    for c in candidates:
        lo, hi = c - separation, c + separation + 1
        if not occupied[lo:hi].any():
            chosen.append(int(c))
            occupied[c] = True
            if len(chosen) == n_storms:
                break
    if len(chosen) < n_storms:
        raise DataError("could not place all storms; series too short for the rate")
    return np.sort(np.array(chosen))


def generate_hindcast(cfg: SynthConfig | None = None):
    """Build a synthetic sea-state series; returns (series, truth dict).

    The truth dict holds every generator constant plus the realised storm
    count and peak values, enabling exact recovery tests downstream.
    """
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    n_states = int(round(cfg.years * 365.25 * 86400.0 / cfg.cadence))
    if cfg.storm_floor <= cfg.calm_hi:
        raise DataError("storm_floor must exceed calm_hi for clean storm isolation")
    n_storms = int(rng.poisson(cfg.storms_per_year * cfg.years))
    width = 2 * cfg.storm_halfwidth + 1
    separation = width + 6  # >= min_gap calm states between consecutive storms
    centres = _place_storm_centres(rng, n_states, n_storms, separation)

    # calm background
    hs = rng.uniform(cfg.calm_lo, cfg.calm_hi, n_states)
    s2 = rng.uniform(0.02, 0.05, n_states)

    # storm peak hs: shifted GPD (exact tail model)
    exc = rng.standard_exponential(n_storms)
    if abs(cfg.gpd_xi) > 1e-12:
        exc = np.expm1(cfg.gpd_xi * exc) / cfg.gpd_xi
    peak_hs = cfg.hs_base + cfg.gpd_sigma * exc

    # Laplace image of the peak hs under its exact marginal
    u1 = gpd_cdf(peak_hs - cfg.hs_base, cfg.gpd_sigma, cfg.gpd_xi)
    y1 = laplace_quantile(np.clip(u1, 1e-15, 1.0 - 1e-15))
    v = laplace_quantile(cfg.dep_quantile)
    y2 = np.empty(n_storms)
    tail = y1 > v
    z = rng.normal(cfg.resid_mu, cfg.resid_sigma, int(tail.sum()))
    y2[tail] = cfg.alpha * y1[tail] + y1[tail] ** cfg.beta * z
    # body: Gaussian copula conditional draw
    n_body = int((~tail).sum())
    z1 = ndtri(np.clip(laplace_cdf(y1[~tail]), 1e-15, 1.0 - 1e-15))
    z2 = cfg.body_rho * z1 + np.sqrt(1.0 - cfg.body_rho ** 2) * rng.normal(size=n_body)
    y2[~tail] = laplace_quantile(np.clip(ndtr(z2), 1e-15, 1.0 - 1e-15))
    peak_s2 = np.exp(cfg.s2_logmu + cfg.s2_logsigma
                     * ndtri(np.clip(laplace_cdf(y2), 1e-15, 1.0 - 1e-15)))

    # stamp storm footprints onto the background: peaked profile with a
    # gently sloped floor strictly above the calm background
    offsets = np.abs(np.arange(-cfg.storm_halfwidth, cfg.storm_halfwidth + 1))
    decay = 1.0 - 0.07 * offsets
    floor = cfg.storm_floor + 0.02 * (cfg.storm_halfwidth - offsets)
    for c, ph, ps in zip(centres, peak_hs, peak_s2):
        sl = slice(c - cfg.storm_halfwidth, c + cfg.storm_halfwidth + 1)
        hs[sl] = np.maximum(decay * ph, floor)
        s2[sl] = ps

    t2 = period_from_steepness(hs, s2)
    time = np.arange(n_states) * cfg.cadence
    series = HindcastSeries(time=time, hs=hs, t2=t2, cadence=cfg.cadence)
    truth = dict(asdict(cfg))
    truth.update({
        "n_states": n_states,
        "n_storms": n_storms,
        "laplace_threshold": float(v),
        "expected_storms": cfg.storms_per_year * cfg.years,
    })
    return series, truth


def generate_conditional_sample(n: int, family: str = "lognormal",
                                mu_coef=(0.1, 0.02), sigma_coef=(0.3, 0.0),
                                hs_range=(0.5, 12.0), seed: int = 0):
    """Family-identified (hs, s2-like) pairs for model-selection oracles.

    s2 | hs follows the named family with linearly hs-dependent parameters;
    the generator parameters are the test oracle.  Only the lognormal and
    gamma variants are needed by the tests, but the hook is generic.
    """
    rng = np.random.default_rng(seed)
    hs = rng.uniform(hs_range[0], hs_range[1], n)
    if family == "lognormal":
        mu = mu_coef[0] + mu_coef[1] * hs
        sd = sigma_coef[0] + sigma_coef[1] * hs
        s2 = np.exp(rng.normal(mu, sd))
    elif family == "gamma":
        shape = mu_coef[0] + mu_coef[1] * hs
        rate = sigma_coef[0] + sigma_coef[1] * hs
        s2 = rng.gamma(shape, 1.0 / rate)
    else:
        raise DataError(f"unsupported generator family {family!r}")
    return hs, s2


def write_hindcast_csv(series: HindcastSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "hs", "t2"])
        for t, h, p in zip(series.time, series.hs, series.t2):
            writer.writerow([int(t), repr(float(h)), repr(float(p))])
