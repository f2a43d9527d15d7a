"""Semiparametric marginal models: empirical body below a high threshold,
generalised Pareto (GPD) tail above it, and the Laplace-scale probability
integral transform used by the dependence model.

The empirical body uses Hazen plotting positions (i - 0.5)/n so the sample
maximum never maps to probability one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DataError, NumericalError

_XI_BOUNDS = (-0.9, 1.0)  # likelihood regularity window for the GPD shape
_XI_TINY = 1e-9
_CLAMP = 1e-12


# ---------------------------------------------------------------------------
# GPD primitives (xi -> 0 handled as the exponential limit)

def gpd_cdf(x, sigma, xi):
    x = np.asarray(x, dtype=float)
    z = np.maximum(x, 0.0) / sigma
    if abs(xi) < _XI_TINY:
        out = -np.expm1(-z)
    else:
        arg = np.maximum(1.0 + xi * z, 0.0)
        out = 1.0 - arg ** (-1.0 / xi)
    return float(out) if out.ndim == 0 else out


def gpd_quantile(p, sigma, xi):
    p = np.asarray(p, dtype=float)
    if abs(xi) < _XI_TINY:
        out = -sigma * np.log1p(-p)
    else:
        out = sigma / xi * ((1.0 - p) ** (-xi) - 1.0)
    return float(out) if out.ndim == 0 else out


def gpd_neg_loglik(params, exc):
    """Negative log-likelihood of exceedances; +inf outside the support."""
    sigma, xi = params
    if sigma <= 0 or not (_XI_BOUNDS[0] < xi < _XI_BOUNDS[1]):
        return np.inf
    z = exc / sigma
    if abs(xi) < _XI_TINY:
        return exc.size * np.log(sigma) + np.sum(z)
    arg = 1.0 + xi * z
    if np.any(arg <= 0):
        return np.inf
    return exc.size * np.log(sigma) + (1.0 + 1.0 / xi) * np.sum(np.log(arg))


def _hessian(fun, x0, rel_step=1e-4):
    """Central-difference Hessian, adequate for 2x2/4x4 information matrices.

    Entries touching out-of-domain evaluations (optimum at a box edge)
    come out as NaN rather than raising arithmetic warnings.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    h = rel_step * np.maximum(np.abs(x0), 1.0)
    hess = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n); ei[i] = h[i]
            ej = np.zeros(n); ej[j] = h[j]
            vals = np.array([fun(x0 + ei + ej), fun(x0 + ei - ej),
                             fun(x0 - ei + ej), fun(x0 - ei - ej)])
            if np.all(np.isfinite(vals)):
                entry = (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * h[i] * h[j])
            else:
                entry = np.nan
            hess[i, j] = hess[j, i] = entry
    return hess


@dataclass(frozen=True)
class GpdFit:
    """Maximum-likelihood GPD tail fit above threshold ``u``."""

    u: float
    sigma: float
    xi: float
    p_u: float
    n_exc: int
    se_sigma: float
    se_xi: float
    converged: bool
    loglik: float


def _fit_gpd_exceedances(exc: np.ndarray, u: float, p_u: float, seed: int = 0,
                         n_restarts: int = 3, compute_se: bool = True) -> GpdFit:
    if exc.size < 30:
        raise DataError(f"too few exceedances: {exc.size} < 30")
    sigma0 = float(np.mean(exc))  # exponential-fit start (sigma_moment, 0)
    rng = np.random.default_rng(seed)
    starts = [(sigma0, 0.0)]
    for _ in range(n_restarts):
        starts.append((
            sigma0 * float(np.exp(rng.normal(0.0, 0.3))),
            float(np.clip(rng.normal(0.0, 0.15), -0.8, 0.8)),
        ))
    best = None
    for s0 in starts:
        res = minimize(gpd_neg_loglik, s0, args=(exc,), method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 2000})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise NumericalError("GPD fit did not converge after restarts")
    sigma, xi = best.x
    # start-point dominance is a fit sanity requirement, not luck
    if best.fun > gpd_neg_loglik((sigma0, 0.0), exc) + 1e-6:
        raise NumericalError("GPD fit worse than exponential start")
    se_sigma = se_xi = np.nan
    if compute_se:
        try:
            info = _hessian(lambda p: gpd_neg_loglik(p, exc), best.x)
            cov = np.linalg.inv(info)
            if cov[0, 0] > 0 and cov[1, 1] > 0:
                se_sigma = float(np.sqrt(cov[0, 0]))
                se_xi = float(np.sqrt(cov[1, 1]))
        except np.linalg.LinAlgError:
            pass
    return GpdFit(u=float(u), sigma=float(sigma), xi=float(xi), p_u=float(p_u),
                  n_exc=int(exc.size), se_sigma=se_sigma, se_xi=se_xi,
                  converged=bool(best.success), loglik=float(-best.fun))


def fit_gpd(sample, threshold_quantile: float = 0.8, seed: int = 0) -> GpdFit:
    """Fit a GPD to exceedances of the empirical ``threshold_quantile``."""
    x = np.sort(np.asarray(sample, dtype=float))
    if not 0.0 < threshold_quantile < 1.0:
        raise DataError("threshold_quantile must lie in (0, 1)")
    u = float(np.quantile(x, threshold_quantile, method="hazen"))
    exc = x[x > u] - u
    p_u = _body_cdf(x, np.array([u]), "interp")[0]
    return _fit_gpd_exceedances(exc, u, p_u, seed=seed)


# ---------------------------------------------------------------------------
# Semiparametric marginal model

def _body_cdf(sorted_sample, x, variant):
    n = sorted_sample.size
    pos = (np.arange(1, n + 1) - 0.5) / n
    x = np.asarray(x, dtype=float)
    if variant == "step":
        counts = np.searchsorted(sorted_sample, x, side="right")
        return np.where(counts > 0, (counts - 0.5) / n, 0.0)
    return np.interp(x, sorted_sample, pos)


def _body_quantile(sorted_sample, p, variant):
    n = sorted_sample.size
    pos = (np.arange(1, n + 1) - 0.5) / n
    p = np.asarray(p, dtype=float)
    if variant == "step":
        idx = np.clip(np.searchsorted(pos, p, side="left"), 0, n - 1)
        return sorted_sample[idx]
    return np.interp(p, pos, sorted_sample)


@dataclass(frozen=True)
class MarginalModel:
    """Empirical body spliced with a GPD tail at the fitted threshold."""

    sorted_sample: np.ndarray
    gpd: GpdFit
    body: str = "interp"  # "interp" or "step"

    def __post_init__(self):
        if self.body not in ("interp", "step"):
            raise DataError(f"unknown body variant {self.body!r}")
        object.__setattr__(
            self, "sorted_sample", np.sort(np.asarray(self.sorted_sample, dtype=float))
        )


def fit_marginal(sample, threshold_quantile: float = 0.8, body: str = "interp",
                 seed: int = 0) -> MarginalModel:
    x = np.sort(np.asarray(sample, dtype=float))
    if not 0.0 < threshold_quantile < 1.0:
        raise DataError("threshold_quantile must lie in (0, 1)")
    u = float(np.quantile(x, threshold_quantile, method="hazen"))
    exc = x[x > u] - u
    # evaluate p_u through the selected body so the splice is continuous at u
    p_u = float(_body_cdf(x, np.array([u]), body)[0])
    gpd = _fit_gpd_exceedances(exc, u, p_u, seed=seed)
    return MarginalModel(sorted_sample=x, gpd=gpd, body=body)


def marginal_cdf(model: MarginalModel, x):
    """F(x): empirical body for x <= u, p_u + (1-p_u)*F_GPD above."""
    x = np.asarray(x, dtype=float)
    g = model.gpd
    body = _body_cdf(model.sorted_sample, x, model.body)
    tail = g.p_u + (1.0 - g.p_u) * gpd_cdf(x - g.u, g.sigma, g.xi)
    out = np.where(x > g.u, tail, body)
    return float(out) if out.ndim == 0 else out


def marginal_quantile(model: MarginalModel, p):
    """Generalised inverse of :func:`marginal_cdf`."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise DataError("quantile probability must lie in (0, 1)")
    g = model.gpd
    body = _body_quantile(model.sorted_sample, p, model.body)
    with np.errstate(invalid="ignore"):
        tail = g.u + gpd_quantile(np.clip((p - g.p_u) / (1.0 - g.p_u), 0.0, 1.0 - _CLAMP),
                                  g.sigma, g.xi)
    out = np.where(p > g.p_u, tail, body)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Laplace scale

def laplace_cdf(y):
    y = np.asarray(y, dtype=float)
    out = np.where(y <= 0, 0.5 * np.exp(np.minimum(y, 0.0)),
                   1.0 - 0.5 * np.exp(-np.maximum(y, 0.0)))
    return float(out) if out.ndim == 0 else out


def laplace_quantile(p):
    p = np.asarray(p, dtype=float)
    out = np.where(p < 0.5, np.log(2.0 * np.maximum(p, _CLAMP)),
                   -np.log(2.0 * np.maximum(1.0 - p, _CLAMP)))
    return float(out) if out.ndim == 0 else out


def _clamped_probs(f):
    f = np.asarray(f, dtype=float)
    if np.any((f <= _CLAMP) | (f >= 1.0 - _CLAMP)):
        warnings.warn("CDF value numerically 0 or 1; clamped", RuntimeWarning, stacklevel=3)
    return np.clip(f, _CLAMP, 1.0 - _CLAMP)


def to_laplace(model: MarginalModel, x):
    """Map data to standard Laplace scale through the fitted CDF."""
    f = _clamped_probs(marginal_cdf(model, x))
    out = np.where(f < 0.5, np.log(2.0 * f), -np.log(2.0 * (1.0 - f)))
    return float(out) if out.ndim == 0 else out


def from_laplace(model: MarginalModel, y):
    """Inverse of :func:`to_laplace` via the marginal quantile."""
    f = _clamped_probs(laplace_cdf(y))
    return marginal_quantile(model, f)


# ---------------------------------------------------------------------------
# Threshold diagnostics

@dataclass(frozen=True)
class ThresholdDiagnostics:
    """Stability and mean-residual-life curves over candidate thresholds.

    ``sigma_star`` is the modified scale sigma_u - xi*u, which is constant
    in u when the GPD holds; confidence bands come from an iid bootstrap
    (block length one: storm peaks are already declustered).
    """

    quantiles: np.ndarray
    sigma_star: np.ndarray
    sigma_lo: np.ndarray
    sigma_hi: np.ndarray
    xi: np.ndarray
    xi_lo: np.ndarray
    xi_hi: np.ndarray
    mean_excess: np.ndarray
    ok: np.ndarray


def threshold_diagnostics(sample, grid=None, n_boot: int = 500, seed: int = 0,
                          min_exceedances: int = 30) -> ThresholdDiagnostics:
    x = np.sort(np.asarray(sample, dtype=float))
    if grid is None:
        grid = np.linspace(0.55, 0.95, 9)
    grid = np.asarray(grid, dtype=float)
    if np.any((grid <= 0.5) | (grid >= 0.99)):
        raise DataError("diagnostic grid must lie within (0.5, 0.99)")
    if np.any(np.diff(grid) <= 0):
        raise DataError("diagnostic grid must be strictly increasing")
    m = grid.size
    out = {k: np.full(m, np.nan) for k in
           ("sigma_star", "sigma_lo", "sigma_hi", "xi", "xi_lo", "xi_hi", "mean_excess")}
    ok = np.zeros(m, dtype=bool)
    rng = np.random.default_rng(seed)
    for i, q in enumerate(grid):
        u = float(np.quantile(x, q, method="hazen"))
        exc = x[x > u] - u
        if exc.size < min_exceedances:
            continue
        try:
            fit = _fit_gpd_exceedances(exc, u, q)
        except (DataError, NumericalError):
            continue
        ok[i] = True
        out["sigma_star"][i] = fit.sigma - fit.xi * u
        out["xi"][i] = fit.xi
        out["mean_excess"][i] = float(np.mean(exc))
        if n_boot > 0:
            stars, xis = [], []
            for _ in range(n_boot):
                bs = rng.choice(x, size=x.size, replace=True)
                ub = float(np.quantile(bs, q, method="hazen"))
                eb = np.sort(bs[bs > ub]) - ub
                if eb.size < min_exceedances:
                    continue
                try:
                    fb = _fit_gpd_exceedances(eb, ub, q, n_restarts=0, compute_se=False)
                except (DataError, NumericalError):
                    continue
                stars.append(fb.sigma - fb.xi * ub)
                xis.append(fb.xi)
            if stars:
                out["sigma_lo"][i], out["sigma_hi"][i] = np.percentile(stars, [2.5, 97.5])
                out["xi_lo"][i], out["xi_hi"][i] = np.percentile(xis, [2.5, 97.5])
    return ThresholdDiagnostics(quantiles=grid, ok=ok, **out)


def write_diagnostics_csv(diag: ThresholdDiagnostics, path) -> None:
    cols = ("quantile", "sigma_star", "sigma_lo", "sigma_hi",
            "xi", "xi_lo", "xi_hi", "mean_excess")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(diag.quantiles.size):
            row = (diag.quantiles[i], diag.sigma_star[i], diag.sigma_lo[i],
                   diag.sigma_hi[i], diag.xi[i], diag.xi_lo[i], diag.xi_hi[i],
                   diag.mean_excess[i])
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Persistence (JSON-friendly dicts; no pickle so artifacts stay hashable)

def marginal_to_dict(model: MarginalModel) -> dict:
    g = model.gpd
    return {
        "sorted_sample": model.sorted_sample.tolist(),
        "body": model.body,
        "gpd": {
            "u": g.u, "sigma": g.sigma, "xi": g.xi, "p_u": g.p_u,
            "n_exc": g.n_exc, "se_sigma": g.se_sigma, "se_xi": g.se_xi,
            "converged": g.converged, "loglik": g.loglik,
        },
    }


def marginal_from_dict(payload: dict) -> MarginalModel:
    g = payload["gpd"]
    gpd = GpdFit(u=g["u"], sigma=g["sigma"], xi=g["xi"], p_u=g["p_u"],
                 n_exc=int(g["n_exc"]), se_sigma=g["se_sigma"], se_xi=g["se_xi"],
                 converged=bool(g["converged"]), loglik=g["loglik"])
    return MarginalModel(sorted_sample=np.asarray(payload["sorted_sample"], dtype=float),
                         gpd=gpd, body=payload["body"])
