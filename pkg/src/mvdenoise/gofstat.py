"""Reference law of the squared Mahalanobis distance and the tail-weighted EDF statistic.

For zero-mean Gaussian vectors v ~ N_M(0, S), the quadratic map y = v^T S^{-1} v
sends R^M to the nonnegative reals, and y follows the law of a weighted sum of
independent squared standard normals, sum_m lam_m z_m^2.  When the quadratic
form uses the true covariance the weights are all one and the law is exactly
chi-square with M degrees of freedom; the closed gamma form evaluates that case.
A power-series evaluation for general weights is kept alongside it: the series
and the closed form are maintained as independent routes and cross-checked in
the test suite.

The deviation between a window's empirical distribution of squared distances
and the reference CDF is scored with the Anderson-Darling statistic, whose
weight (F(1-F))^{-1} emphasises the distribution tails.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .robustcov import CovarianceMatrix

_SERIES_MAX_TERMS = 200
_SERIES_REL_TOL = 1e-12
# Beyond this largest-term magnitude the alternating series has lost enough
# digits to cancellation to be trusted; switch to the closed form when one
# exists.  At the limit the absolute error is ~1e-8, well inside the range
# needed for t up to M + 6 sqrt(2M).
_SERIES_PEAK_LIMIT = 1e8

# CDF values are clamped away from {0, 1} before taking logarithms so extreme
# windows produce large finite statistics instead of infinities.
LOG_CLAMP = 1e-15


class SeriesDivergenceError(RuntimeError):
    """Series evaluation lost numeric control and no closed form is available."""


class GofDecision(enum.Enum):
    H0_NOISE = "H0_noise"
    H1_SIGNAL = "H1_signal"


@dataclass(frozen=True)
class ReferenceDistribution:
    """Distribution of the quadratic form sum_m lam_m z_m^2, z_m iid standard normal.

    ``eval_mode`` selects the evaluation route: "gamma" is the closed
    regularized-incomplete-gamma form (requires equal weights, the case the
    denoising pipeline uses), "series" is the alternating power series driven
    by the weight recursion.
    """

    dims: int
    eigenvalues: np.ndarray
    eval_mode: str
    log_coeffs: np.ndarray  # log c_n for the series route (c_n > 0)

    @property
    def is_isotropic(self) -> bool:
        lam = self.eigenvalues
        return bool(np.allclose(lam, lam[0], rtol=1e-12, atol=0.0))


def _series_log_coeffs(eigenvalues: np.ndarray, n_terms: int) -> np.ndarray:
    # c_0 = prod (2 lam_m)^{-1/2};  c_n = (1/n) sum_{r<n} h_{n-r} c_r with
    # h_j = (1/2) sum_m (2 lam_m)^{-j}.  All quantities positive; carried in a
    # scaled form to avoid overflow for large n.
    lam = np.asarray(eigenvalues, dtype=np.float64)
    inv2 = 1.0 / (2.0 * lam)
    log_c0 = 0.5 * np.sum(np.log(inv2))
    h = np.array([0.5 * np.sum(inv2**j) for j in range(1, n_terms + 1)])
    # recursion on r_n = c_n / c_0 / rho^n with rho = max inv2, keeping values O(1)
    rho = float(inv2.max())
    r = np.empty(n_terms + 1)
    r[0] = 1.0
    for n in range(1, n_terms + 1):
        js = np.arange(1, n + 1)
        r[n] = np.dot(h[js - 1] / rho**js, r[n - js]) / n
    with np.errstate(divide="ignore"):
        return log_c0 + np.arange(n_terms + 1) * math.log(rho) + np.log(r)


def make_reference(dims: int, eigenvalues=None, eval_mode: str = "gamma") -> ReferenceDistribution:
    """Build the reference distribution for an M-dimensional quadratic form.

    ``eigenvalues`` defaults to all ones (the matched-covariance case).  The
    gamma mode demands equal eigenvalues; pass ``eval_mode="series"`` to
    evaluate the general weighted form.
    """
    if dims < 1:
        raise ValueError("dims must be >= 1")
    if eigenvalues is None:
        lam = np.ones(dims)
    else:
        lam = np.asarray(eigenvalues, dtype=np.float64).ravel()
        if lam.size != dims:
            raise ValueError("need one eigenvalue per dimension")
        if (lam <= 0).any():
            raise ValueError("eigenvalues must be positive")
    if eval_mode not in ("gamma", "series"):
        raise ValueError(f"unknown eval_mode {eval_mode!r}")
    if eval_mode == "gamma" and not np.allclose(lam, lam[0], rtol=1e-12, atol=0.0):
        raise ValueError("gamma closed form requires equal eigenvalues; use series mode")
    log_coeffs = _series_log_coeffs(lam, _SERIES_MAX_TERMS)
    return ReferenceDistribution(dims=dims, eigenvalues=lam, eval_mode=eval_mode, log_coeffs=log_coeffs)


def _series_eval(dist: ReferenceDistribution, t: np.ndarray, *, density: bool) -> np.ndarray:
    # Alternating sum over n of c_n t^{M/2+n}/Gamma(M/2+n+1) (CDF) or
    # c_n t^{M/2+n-1}/Gamma(M/2+n) (pdf), truncated on relative term size.
    m_half = dist.dims / 2.0
    shift = 0.0 if density else 1.0
    out = np.zeros_like(t)
    pos = t > 0
    if not pos.any():
        return out
    tv = t[pos]
    logt = np.log(tv)
    total = np.zeros_like(tv)
    peak = np.zeros_like(tv)
    grow_streak = 0
    rho = float((1.0 / (2.0 * dist.eigenvalues)).max())
    prev_mag = None
    n_used = _SERIES_MAX_TERMS
    for n in range(_SERIES_MAX_TERMS + 1):
        expo = m_half + n - 1.0 + shift
        logterm = dist.log_coeffs[n] + expo * logt - special.gammaln(expo + 1.0)
        mag = np.exp(logterm)
        total += mag if n % 2 == 0 else -mag
        peak = np.maximum(peak, mag)
        cur = float(mag.max())
        if prev_mag is not None and cur > prev_mag:
            grow_streak += 1
            # growth is normal before the alternating series turns over; only
            # treat it as divergence past the expected turnover index
            if grow_streak >= 5 and n > rho * float(tv.max()) + 5:
                if dist.is_isotropic:
                    return _gamma_eval(dist, t, density=density)
                raise SeriesDivergenceError("series terms grow past the expected turnover")
        else:
            grow_streak = 0
        prev_mag = cur
        if cur <= _SERIES_REL_TOL * max(float(np.abs(total).min()), 1e-300):
            break
    if float(peak.max()) > _SERIES_PEAK_LIMIT:
        if dist.is_isotropic:
            return _gamma_eval(dist, t, density=density)
        raise SeriesDivergenceError("cancellation exhausted the series' reliable range")
    out[pos] = total
    return out


def _gamma_eval(dist: ReferenceDistribution, t: np.ndarray, *, density: bool) -> np.ndarray:
    # Equal weights lam: y = lam * chi2_M, evaluated through the regularized
    # incomplete gamma function.
    lam = float(dist.eigenvalues[0])
    m_half = dist.dims / 2.0
    u = t / lam
    if not density:
        return special.gammainc(m_half, u / 2.0)
    out = np.zeros_like(t)
    pos = u > 0
    with np.errstate(divide="ignore"):
        logpdf = (m_half - 1.0) * np.log(u[pos]) - u[pos] / 2.0 - m_half * math.log(2.0) - special.gammaln(m_half)
    out[pos] = np.exp(logpdf) / lam
    if dist.dims == 2:
        out[~pos & (t >= 0)] = 0.5 / lam
    elif dist.dims == 1:
        out[~pos & (t >= 0)] = np.inf
    return out


def reference_cdf(dist: ReferenceDistribution, t):
    """CDF of the reference quadratic-form law, F_0(t) in [0, 1] for t >= 0."""
    t_arr = np.asarray(t, dtype=np.float64)
    if (t_arr < 0).any():
        raise ValueError("t must be nonnegative")
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if dist.eval_mode == "gamma":
        out = _gamma_eval(dist, t_arr, density=False)
    else:
        out = np.clip(_series_eval(dist, t_arr, density=False), 0.0, 1.0)
    return float(out[0]) if scalar else out


def reference_pdf(dist: ReferenceDistribution, y):
    """Density of the reference quadratic-form law for y >= 0."""
    y_arr = np.asarray(y, dtype=np.float64)
    if (y_arr < 0).any():
        raise ValueError("y must be nonnegative")
    scalar = y_arr.ndim == 0
    y_arr = np.atleast_1d(y_arr)
    if dist.eval_mode == "gamma":
        out = _gamma_eval(dist, y_arr, density=True)
    else:
        out = np.maximum(_series_eval(dist, y_arr, density=True), 0.0)
        if dist.dims == 2:
            out[y_arr == 0] = float(np.exp(dist.log_coeffs[0]))
        elif dist.dims == 1:
            out[y_arr == 0] = np.inf
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class MahalanobisEdf:
    """Ascending squared Mahalanobis distances of a window; the empirical CDF support."""

    sorted_sq_mds: np.ndarray
    n: int

    def value(self, t) -> np.ndarray:
        """Empirical CDF: fraction of squared distances <= t."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.searchsorted(self.sorted_sq_mds, t_arr, side="right") / self.n
        return float(out[0]) if np.asarray(t).ndim == 0 else out


def mahalanobis_edf(window, sigma: CovarianceMatrix) -> MahalanobisEdf:
    """Squared Mahalanobis distances y_i = x_i^T sigma^{-1} x_i of window rows, sorted.

    Rows are treated as zero-mean measurements.  Raises on singular covariance
    (via :class:`CovarianceMatrix`) or windows of fewer than two rows.
    """
    rows = np.atleast_2d(np.asarray(window, dtype=np.float64))
    if rows.shape[0] < 2:
        raise ValueError("window must contain at least two rows")
    if rows.shape[1] != sigma.dim:
        raise ValueError("window and covariance dimensions differ")
    y = np.sort(sigma.quadratic_form(rows))
    return MahalanobisEdf(sorted_sq_mds=y, n=y.size)


def clamped_log_cdf(f: np.ndarray):
    """log F and log(1-F) with F clamped to [LOG_CLAMP, 1-LOG_CLAMP]."""
    f = np.clip(f, LOG_CLAMP, 1.0 - LOG_CLAMP)
    return np.log(f), np.log1p(-f)


def ad_statistic(edf: MahalanobisEdf, dist: ReferenceDistribution, formula: str = "standard") -> float:
    """Anderson-Darling distance between the window EDF and the reference CDF.

    The "standard" formula is the usual order-statistic form

        tau = -n - (1/n) sum_l (2l - 1) [ln F0(y_(l)) + ln(1 - F0(y_(n+1-l)))].

    ``formula="literal"`` evaluates the difference-of-logs variant

        tau = L - sum_{l=1}^{L+1} ((2l - 1)/L) (ln F0(y_(l)) - ln F0(y_(L+1-l)))

    with L = n - 1 and the out-of-range index y_(0) clamped to y_(1); it exists
    for comparison only.  Either way the result is finite: CDF values are
    clamped before the logarithms.
    """
    n = edf.n
    if n < 2:
        raise ValueError("need at least two observations")
    f = reference_cdf(dist, edf.sorted_sq_mds)
    logf, log1mf = clamped_log_cdf(f)
    weights = 2.0 * np.arange(1, n + 1) - 1.0
    if formula == "standard":
        s = np.sum(weights * (logf + log1mf[::-1]))
        return float(-n - s / n)
    if formula == "literal":
        big_l = n - 1
        mirror = np.maximum(n - np.arange(1, n + 1), 1) - 1
        s = np.sum(weights / big_l * (logf - logf[mirror]))
        return float(big_l - s)
    raise ValueError(f"unknown formula {formula!r}")


def gof_test(tau: float, threshold: float) -> GofDecision:
    """Hypothesis decision: noise (H0) when tau < threshold, signal (H1) otherwise.

    Ties are classified as signal, so threshold equality retains coefficients.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return GofDecision.H1_SIGNAL if tau >= threshold else GofDecision.H0_NOISE
