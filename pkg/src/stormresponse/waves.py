"""JONSWAP spectra and linear wave fields conditioned on a crest.

The field model conditions a Gaussian sea surface on attaining a turning
point with a given crest elevation at t = 0: independent per-band Normal
amplitudes (A_n, B_n) are shifted by closed-form corrections so that
eta(0) equals the crest exactly and d(eta)/dt vanishes there.  Evaluation
uses the FFT through complex link coefficients; kinematics above the mean
water level use linear stretching (evaluated at z' = 0) and vanish above
the instantaneous surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import G, period_from_steepness
from .errors import DataError, NumericalError


def frequency_grid(window: float, n: int) -> np.ndarray:
    """Angular frequencies n*d_omega, n = 1..N, with d_omega = 2*pi/window.

    The DC component is excluded; this layout is what aligns the
    trigonometric sums with the FFT on an N-point time grid.
    """
    d_omega = 2.0 * np.pi / window
    return d_omega * np.arange(1, n + 1)


def time_grid(window: float = 120.0, n: int = 480) -> np.ndarray:
    """Centered time grid [-window/2, window/2), containing t = 0."""
    dt = window / n
    return (np.arange(n) - n // 2) * dt


def depth_grid(lo: float = -100.0, hi: float = 150.0, n: int = 50) -> np.ndarray:
    return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class Spectrum:
    """Discretised wave spectrum with per-band variances sigma2 = S*d_omega."""

    omega: np.ndarray
    s: np.ndarray
    sigma2: np.ndarray
    hs: float
    s2: float
    omega_p: float
    gamma: float
    r: float

    @property
    def delta_omega(self) -> float:
        return float(self.omega[1] - self.omega[0])

    @property
    def t2(self) -> float:
        return period_from_steepness(self.hs, self.s2)


def _jonswap_shape(omega, omega_p, gamma, r):
    w = np.abs(omega)
    sigma = 0.07 + 0.02 * (omega_p > w)
    delta = np.exp(-((w / omega_p - 1.0) ** 2) / (2.0 * sigma ** 2))
    return w ** (-r) * np.exp(-(r / 4.0) * (w / omega_p) ** (-4)) * gamma ** delta


def jonswap_spectrum(hs: float, s2: float, omega, gamma: float = 3.3,
                     r: float = 5.0) -> Spectrum:
    """JONSWAP density on a regular positive grid, renormalised so that the
    discrete variance satisfies 4*sqrt(sum sigma2) = hs exactly."""
    if hs <= 0 or s2 <= 0:
        raise DataError("hs and s2 must be positive")
    omega = np.asarray(omega, dtype=float)
    if omega.size < 2 or np.any(omega <= 0):
        raise DataError("omega grid must be positive with at least two points")
    d = np.diff(omega)
    if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
        raise DataError("omega grid must be regular")
    d_omega = float(d[0])
    omega_p = 2.0 * np.pi / period_from_steepness(hs, s2)
    if omega_p < 3.0 * d_omega:
        raise DataError(
            f"grid too coarse to resolve the spectral peak: omega_p={omega_p:.4g} "
            f"< 3*d_omega={3 * d_omega:.4g}")
    shape = _jonswap_shape(omega, omega_p, gamma, r)
    total = float(np.sum(shape) * d_omega)
    if total <= 0:
        raise NumericalError("degenerate spectral shape")
    alpha = (hs / 4.0) ** 2 / total
    s = alpha * shape
    return Spectrum(omega=omega, s=s, sigma2=s * d_omega, hs=float(hs), s2=float(s2),
                    omega_p=float(omega_p), gamma=float(gamma), r=float(r))


def dispersion_wavenumber(omega, depth: float):
    """Positive root k of omega^2 = g*k*tanh(k*depth).

    Bracketed bisection seeded with the deep-water guess; the residual is
    driven below 1e-10*omega^2.
    """
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(om <= 0) or depth <= 0:
        raise DataError("omega and depth must be positive")

    def f(k):
        return G * k * np.tanh(k * depth) - om ** 2

    lo = np.zeros_like(om)
    hi = 2.0 * np.maximum(om ** 2 / G, om / np.sqrt(G * depth))
    grow = f(hi) <= 0
    guard = 0
    while grow.any():
        hi[grow] *= 2.0
        grow = f(hi) <= 0
        guard += 1
        if guard > 200:
            raise NumericalError("dispersion bracket failed to expand")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        high = f(mid) > 0
        hi[high] = mid[high]
        lo[~high] = mid[~high]
    k = 0.5 * (lo + hi)
    resid = np.abs(G * k * np.tanh(k * depth) - om ** 2)
    if np.any(resid > 1e-10 * om ** 2):
        raise NumericalError("dispersion bisection residual too large")
    return float(k[0]) if np.isscalar(omega) or np.asarray(omega).ndim == 0 else k


def kinematic_ratio(k, depth: float, z) -> np.ndarray:
    """cosh(k*(depth+z'))/sinh(k*depth) with linear stretching z' = min(z, 0).

    Evaluated in exponential form so large k*depth cannot overflow.
    """
    k = np.asarray(k, dtype=float)[:, None]
    zp = np.minimum(np.asarray(z, dtype=float), 0.0)[None, :]
    a = k * (depth + zp)     # >= 0 within the water column
    b = k * depth
    return np.exp(a - b) * (1.0 + np.exp(-2.0 * a)) / (1.0 - np.exp(-2.0 * b))


def evaluate_series(coef: np.ndarray) -> np.ndarray:
    """Real part of sum_n coef_n exp(-2*pi*i*j*n/N) on the centered time grid.

    ``coef[..., n-1]`` holds the complex link coefficient of frequency n.
    Handles any leading batch shape; the transform runs over the last axis.
    """
    a = np.empty_like(coef)
    a[..., 1:] = coef[..., :-1]
    a[..., 0] = coef[..., -1]  # n = N aliases to the zero bin
    series = np.fft.fft(a, axis=-1).real
    return np.roll(series, -(coef.shape[-1] // 2), axis=-1)


def conditioned_coefficients(spectrum: Spectrum, crest: float,
                             rng: np.random.Generator):
    """Draw (A_n, B_n) ~ N(0, sigma2_n) and apply the crest/turning-point
    corrections, returning the adjusted coefficients (A'_n, B'_n)."""
    sig = np.sqrt(spectrum.sigma2)
    a = rng.normal(0.0, 1.0, sig.size) * sig
    b = rng.normal(0.0, 1.0, sig.size) * sig
    q = (crest - a.sum()) / spectrum.sigma2.sum()
    r = -(spectrum.omega * b).sum() / (spectrum.omega ** 2 * spectrum.sigma2).sum()
    return a + q * spectrum.sigma2, b + r * spectrum.sigma2 * spectrum.omega


@dataclass(frozen=True)
class WaveField:
    """Conditioned elevation and kinematics on a (t, z) grid.

    ``u`` and ``udot`` have shape (n_t, n_z) and are zero at points above
    the instantaneous surface.  ``a_coef``/``b_coef`` are the adjusted
    spectral coefficients, kept so exact spectral identities (e.g. the
    elevation derivative at t = 0) remain available.
    """

    t: np.ndarray
    z: np.ndarray
    eta: np.ndarray
    u: np.ndarray
    udot: np.ndarray
    crest: float
    seed: object
    a_coef: np.ndarray
    b_coef: np.ndarray
    omega: np.ndarray


def _check_grids(spectrum: Spectrum, t: np.ndarray):
    n = spectrum.omega.size
    if t.size != n:
        raise DataError(f"need N = n_t; spectrum has {n} bands, time grid {t.size}")
    dt = t[1] - t[0]
    if abs(spectrum.delta_omega * dt * n - 2.0 * np.pi) > 1e-9:
        raise DataError("time grid and frequency grid are not FFT-aligned")
    if abs(t[n // 2]) > 1e-12:
        raise DataError("time grid must contain t = 0 at its centre")


def simulate_conditioned_wave(spectrum: Spectrum, crest: float, depth: float,
                              t, z, seed=0) -> WaveField:
    """Simulate one wave field conditioned on crest elevation at t = 0."""
    if crest < 0:
        raise DataError("crest must be non-negative")
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_grids(spectrum, t)
    rng = np.random.default_rng(seed)
    ap, bp = conditioned_coefficients(spectrum, crest, rng)
    k = dispersion_wavenumber(spectrum.omega, depth)
    ratio = kinematic_ratio(k, depth, z)                   # (N, n_z)
    eta = evaluate_series(ap + 1j * bp)
    coef = (ap + 1j * bp)[:, None] * (spectrum.omega[:, None] * ratio)
    u = evaluate_series(np.moveaxis(coef, 0, -1))          # (n_z, n_t)
    coef_dot = (bp - 1j * ap)[:, None] * (spectrum.omega[:, None] ** 2 * ratio)
    udot = evaluate_series(np.moveaxis(coef_dot, 0, -1))
    u = u.T.copy()
    udot = udot.T.copy()
    wet = z[None, :] < eta[:, None]
    u[~wet] = 0.0
    udot[~wet] = 0.0
    return WaveField(t=t, z=z, eta=eta, u=u, udot=udot, crest=float(crest),
                     seed=seed, a_coef=ap, b_coef=bp, omega=spectrum.omega)


def simulate_wave(spectrum: Spectrum, t, seed=0) -> np.ndarray:
    """Unconditioned surface elevation (raw A_n, B_n, no crest correction)."""
    t = np.asarray(t, dtype=float)
    _check_grids(spectrum, t)
    rng = np.random.default_rng(seed)
    sig = np.sqrt(spectrum.sigma2)
    a = rng.normal(0.0, 1.0, sig.size) * sig
    b = rng.normal(0.0, 1.0, sig.size) * sig
    return evaluate_series(a + 1j * b)


def elevation_slope_at_zero(field: WaveField) -> float:
    """Exact d(eta)/dt at t = 0 from the spectral coefficients."""
    return float(np.sum(field.omega * field.b_coef))
