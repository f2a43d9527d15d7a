"""Conditional extremes dependence model on Laplace margins.

For Laplace-scale pairs (y1, y2) the tail regression

    y2 | y1 = y  ~  alpha*y + y^beta * Z,   y > v,

is fitted by maximum likelihood under a Gaussian working assumption for Z
(used for fitting only); the residual distribution itself is kept as a
kernel density estimate of the observed residuals.  Joint simulation draws
the conditioning exceedance exactly (v + Exp(1) on Laplace scale), the
residual from the KDE, and resamples the sub-threshold region empirically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DataError, NumericalError
from .marginal import MarginalModel, _hessian, from_laplace, laplace_cdf

_S_FLOOR = 1e-12
_BETA_MIN = -10.0  # numerical box; the model itself only requires beta <= 1


def _silverman_bandwidth(z: np.ndarray) -> float:
    n = z.size
    sd = float(np.std(z, ddof=1)) if n > 1 else 0.0
    iqr = float(np.subtract(*np.percentile(z, [75, 25])))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if spread <= 0:
        spread = max(sd, 1e-12)
    return 0.9 * spread * n ** (-0.2)


@dataclass(frozen=True)
class HtFit:
    """Fitted tail regression with its residual sample.

    ``y_sample`` keeps the full training pairs; the sub-threshold region is
    simulated by resampling them, so the fit object is self-contained.
    """

    alpha: float
    beta: float
    v: float
    residuals: np.ndarray
    kde_bandwidth: float
    mu_hat: float
    s_hat: float
    se_alpha: float
    se_beta: float
    threshold_quantile: float
    y_sample: np.ndarray  # shape (n, 2): (conditioning, other)


def _profile_nll(ab, y1, y2, log_y1):
    """Working-likelihood NLL profiled over the Gaussian nuisance (mu, s)."""
    alpha, beta = ab
    if not (-1.0 <= alpha <= 1.0) or not (_BETA_MIN <= beta <= 1.0):
        return np.inf
    scale = y1 ** beta
    z = (y2 - alpha * y1) / scale
    s2 = float(np.var(z))
    s = max(np.sqrt(s2), _S_FLOOR)
    return y1.size * np.log(s) + beta * float(np.sum(log_y1))


def _full_nll(params, y1, y2):
    alpha, beta, mu, s = params
    if s <= 0:
        return np.inf
    scale = y1 ** beta
    resid = y2 - alpha * y1 - mu * scale
    return float(np.sum(np.log(s * scale) + resid ** 2 / (2.0 * s * s * scale ** 2)))


def fit_ht(y_cond, y_other, threshold_quantile: float = 0.95,
           bw_mult: float = 1.0) -> HtFit:
    """Fit the conditional tail model of ``y_other`` given large ``y_cond``.

    Both inputs are Laplace-scale vectors of equal length.  The
    conditioning threshold is the ``threshold_quantile`` of ``y_cond``.
    """
    y_cond = np.asarray(y_cond, dtype=float)
    y_other = np.asarray(y_other, dtype=float)
    if y_cond.shape != y_other.shape:
        raise DataError("conditioning and dependent vectors must have equal length")
    v = float(np.quantile(y_cond, threshold_quantile))
    keep = y_cond > v
    y1, y2 = y_cond[keep], y_other[keep]
    if y1.size == 0:
        raise DataError("empty conditioning set")
    if y1.size < 30:
        raise DataError(f"too few conditioning exceedances: {y1.size} < 30")
    if np.any(y1 <= 0):
        raise DataError("conditioning threshold must be positive on Laplace scale")
    log_y1 = np.log(y1)

    corr = float(np.clip(np.corrcoef(y1, y2)[0, 1], -0.99, 0.99)) if y1.size > 2 else 0.0
    starts = [(corr, 0.2), (0.5, 0.5), (0.9, 0.1), (-0.5, 0.2), (0.0, 0.8)]
    best = None
    for s0 in starts:
        res = minimize(_profile_nll, s0, args=(y1, y2, log_y1), method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000})
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise NumericalError("conditional extremes fit did not converge")
    alpha, beta = float(np.clip(best.x[0], -1.0, 1.0)), float(min(best.x[1], 1.0))
    z = (y2 - alpha * y1) / y1 ** beta
    mu_hat = float(np.mean(z))
    s_hat = float(max(np.std(z), _S_FLOOR))

    se_alpha = se_beta = np.nan
    try:
        info = _hessian(lambda p: _full_nll(p, y1, y2), np.array([alpha, beta, mu_hat, s_hat]))
        cov = np.linalg.inv(info)
        if cov[0, 0] > 0 and cov[1, 1] > 0:
            se_alpha = float(np.sqrt(cov[0, 0]))
            se_beta = float(np.sqrt(cov[1, 1]))
    except np.linalg.LinAlgError:
        pass

    return HtFit(alpha=alpha, beta=beta, v=v, residuals=z,
                 kde_bandwidth=bw_mult * _silverman_bandwidth(z),
                 mu_hat=mu_hat, s_hat=s_hat, se_alpha=se_alpha, se_beta=se_beta,
                 threshold_quantile=threshold_quantile,
                 y_sample=np.column_stack([y_cond, y_other]))


def sample_residuals(fit: HtFit, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from the Gaussian-kernel density estimate of the residuals."""
    base = fit.residuals[rng.integers(0, fit.residuals.size, n)]
    if fit.kde_bandwidth > 0:
        base = base + fit.kde_bandwidth * rng.normal(size=n)
    return base


def simulate_joint(fit: HtFit, marginals, n_sim: int, seed=0):
    """Simulate (hs, s2) pairs from the fitted joint model.

    Above the conditioning threshold the tail regression is used with the
    exact Laplace exceedance law; below it the training pairs are resampled
    empirically (raw resampling, so the body keeps the sample's graininess).
    Deterministic for a fixed seed.
    """
    if n_sim <= 0:
        raise DataError("n_sim must be positive")
    marg_cond, marg_other = marginals
    rng = np.random.default_rng(seed)
    p_exc = 1.0 - laplace_cdf(fit.v)
    tail = rng.random(n_sim) < p_exc
    n_tail = int(tail.sum())
    y1 = np.empty(n_sim)
    y2 = np.empty(n_sim)

    y1_t = fit.v + rng.exponential(1.0, n_tail)
    z = sample_residuals(fit, n_tail, rng)
    y1[tail] = y1_t
    y2[tail] = fit.alpha * y1_t + y1_t ** fit.beta * z

    body = fit.y_sample[fit.y_sample[:, 0] <= fit.v]
    if body.size == 0 and n_sim - n_tail > 0:
        raise DataError("no sub-threshold pairs available for empirical resampling")
    idx = rng.integers(0, body.shape[0], n_sim - n_tail)
    y1[~tail] = body[idx, 0]
    y2[~tail] = body[idx, 1]

    hs = from_laplace(marg_cond, y1)
    s2 = from_laplace(marg_other, y2)
    return hs, s2


@dataclass(frozen=True)
class JointDensityGrid:
    """Cell probability masses and densities estimated from a simulated sample."""

    hs_edges: np.ndarray
    s2_edges: np.ndarray
    mass: np.ndarray      # shape (n_hs_cells, n_s2_cells)
    density: np.ndarray   # mass / cell area
    n_sim: int

    @property
    def hs_mid(self) -> np.ndarray:
        return 0.5 * (self.hs_edges[:-1] + self.hs_edges[1:])

    @property
    def s2_mid(self) -> np.ndarray:
        return 0.5 * (self.s2_edges[:-1] + self.s2_edges[1:])

    @property
    def cell_area(self) -> np.ndarray:
        return np.outer(np.diff(self.hs_edges), np.diff(self.s2_edges))

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())


def estimate_density_grid(hs, s2, hs_edges, s2_edges) -> JointDensityGrid:
    """Bin a simulated sample into cells: mass = count/n, density = mass/area."""
    hs = np.asarray(hs, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    hs_edges = np.asarray(hs_edges, dtype=float)
    s2_edges = np.asarray(s2_edges, dtype=float)
    if np.any(np.diff(hs_edges) <= 0) or np.any(np.diff(s2_edges) <= 0):
        raise DataError("cell edges must be strictly increasing (no zero-area cells)")
    counts, _, _ = np.histogram2d(hs, s2, bins=[hs_edges, s2_edges])
    mass = counts / hs.size
    area = np.outer(np.diff(hs_edges), np.diff(s2_edges))
    return JointDensityGrid(hs_edges=hs_edges, s2_edges=s2_edges, mass=mass,
                            density=mass / area, n_sim=hs.size)


def write_density_csv(grid: JointDensityGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hs_lo", "hs_hi", "s2_lo", "s2_hi", "mass", "density"])
        for i in range(grid.hs_mid.size):
            for j in range(grid.s2_mid.size):
                writer.writerow([
                    repr(float(grid.hs_edges[i])), repr(float(grid.hs_edges[i + 1])),
                    repr(float(grid.s2_edges[j])), repr(float(grid.s2_edges[j + 1])),
                    repr(float(grid.mass[i, j])), repr(float(grid.density[i, j])),
                ])


def ht_to_dict(fit: HtFit) -> dict:
    return {
        "alpha": fit.alpha, "beta": fit.beta, "v": fit.v,
        "residuals": fit.residuals.tolist(),
        "kde_bandwidth": fit.kde_bandwidth,
        "mu_hat": fit.mu_hat, "s_hat": fit.s_hat,
        "se_alpha": fit.se_alpha, "se_beta": fit.se_beta,
        "threshold_quantile": fit.threshold_quantile,
        "y_sample": fit.y_sample.tolist(),
    }


def ht_from_dict(payload: dict) -> HtFit:
    return HtFit(
        alpha=payload["alpha"], beta=payload["beta"], v=payload["v"],
        residuals=np.asarray(payload["residuals"], dtype=float),
        kde_bandwidth=payload["kde_bandwidth"],
        mu_hat=payload["mu_hat"], s_hat=payload["s_hat"],
        se_alpha=payload["se_alpha"], se_beta=payload["se_beta"],
        threshold_quantile=payload["threshold_quantile"],
        y_sample=np.asarray(payload["y_sample"], dtype=float),
    )
