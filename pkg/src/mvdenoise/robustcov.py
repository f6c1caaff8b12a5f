"""Noise covariance estimation from wavelet coefficients.

The robust estimator is the minimum covariance determinant, computed with the
concentration-step search (random elemental subsets, a short burst of C-steps,
then full refinement of the best candidates).  Because detail coefficients are
zero-mean under the additive Gaussian noise model, all scatter matrices here
are taken about zero: no location is estimated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy import stats

# FAST-MCD search budget: random (M+1)-point seeds, two concentration steps
# each, then the best candidates are iterated to a fixed point.
_N_TRIALS = 500
_N_SHORT_CSTEPS = 2
_N_KEEP = 10
_MAX_REFINE = 100
_REWEIGHT_MASS = 0.975


class SingularCovarianceError(ValueError):
    """Raised when data cannot support a positive-definite covariance estimate."""


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric positive-definite covariance with cached spectral/Cholesky factors.

    ``eigenvalues`` are sorted descending; ``eigenvectors`` columns match them.
    ``chol`` is the lower-triangular factor used for quadratic-form evaluation.
    """

    sigma: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    chol: np.ndarray = field(repr=False)

    @classmethod
    def from_matrix(cls, sigma) -> "CovarianceMatrix":
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.ndim == 0:
            sigma = sigma.reshape(1, 1)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError("covariance must be a square matrix")
        scale = np.abs(sigma).max()
        if scale == 0.0 or np.abs(sigma - sigma.T).max() > 1e-12 * max(scale, 1.0):
            raise ValueError("covariance must be symmetric")
        sigma = 0.5 * (sigma + sigma.T)
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise SingularCovarianceError("covariance is not positive definite") from None
        w, v = np.linalg.eigh(sigma)
        order = np.argsort(w)[::-1]
        return cls(sigma=sigma, eigenvalues=w[order], eigenvectors=v[:, order], chol=chol)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    def quadratic_form(self, rows) -> np.ndarray:
        """Evaluate v -> v^T sigma^{-1} v for each row of an (n, M) block."""
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        z = sla.solve_triangular(self.chol, rows.T, lower=True)
        return np.einsum("ij,ij->j", z, z)

    def inverse(self) -> np.ndarray:
        ident = np.eye(self.dim)
        return sla.cho_solve((self.chol, True), ident)


def sample_covariance(coeffs) -> CovarianceMatrix:
    """Unbiased zero-mean sample covariance X^T X / (n - 1).

    Non-robust fallback and test oracle.  Raises
    :class:`SingularCovarianceError` on rank-deficient input.
    """
    x = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    if x.ndim != 2:
        raise ValueError("coefficients must form an (n, M) block")
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two rows")
    sigma = x.T @ x / (n - 1)
    try:
        return CovarianceMatrix.from_matrix(sigma)
    except SingularCovarianceError:
        raise SingularCovarianceError("rank-deficient coefficient block") from None


def _scatter_about_zero(x, subset_rows):
    # x: (n, M); subset_rows: (T, h) row indices -> (T, M, M) scatter matrices
    sub = x[subset_rows]
    return np.einsum("thi,thj->tij", sub, sub) / subset_rows.shape[1]


def _consistency_factor(alpha: float, m: int) -> float:
    # Makes the h-subset scatter unbiased for the full covariance under pure
    # Gaussian data: alpha / P(chi2_{M+2} <= q_alpha).
    q = stats.chi2.ppf(alpha, df=m)
    return alpha / stats.chi2.cdf(q, df=m + 2)


def _batched_dists(x, scatters, ridge_scale):
    # Squared Mahalanobis-style distances of every row under every candidate
    # scatter; singular candidates are ridged rather than dropped.
    t, m, _ = scatters.shape
    eye = np.eye(m)
    dists = np.empty((t, x.shape[0]))
    for i in range(t):
        s = scatters[i]
        try:
            c = np.linalg.cholesky(s)
        except np.linalg.LinAlgError:
            c = np.linalg.cholesky(s + ridge_scale * eye)
        z = sla.solve_triangular(c, x.T, lower=True)
        dists[i] = np.einsum("ij,ij->j", z, z)
    return dists


def mcd_estimate(coeffs, rng, h: int | None = None) -> CovarianceMatrix:
    """Minimum-covariance-determinant estimate of the noise covariance.

    Runs the concentration search on zero-mean coefficient rows and applies the
    chi-square consistency correction so the estimate is unbiased under pure
    Gaussian data.  Deterministic for a given ``rng`` state.

    Parameters
    ----------
    coeffs : (n, M) array
        Coefficient rows, treated as zero-mean draws.
    rng : numpy.random.Generator
        Source for the random elemental subsets.
    h : int, optional
        Subset size; defaults to floor((n + M + 1) / 2).
    """
    x = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    n, m = x.shape
    if n < 2 * (m + 1):
        raise ValueError(f"need at least {2 * (m + 1)} rows for M={m}, got {n}")
    if not np.isfinite(x).all():
        raise ValueError("non-finite coefficient encountered")

    full_scatter = x.T @ x / n
    w_full = np.linalg.eigvalsh(full_scatter)
    if w_full[0] <= 1e-12 * max(w_full[-1], 1e-300):
        raise SingularCovarianceError("coefficient block is rank deficient")
    ridge_scale = 1e-10 * np.trace(full_scatter) / m

    if h is None:
        h = (n + m + 1) // 2
    h = int(min(max(h, m + 1), n))

    seeds = np.empty((_N_TRIALS, m + 1), dtype=np.intp)
    for i in range(_N_TRIALS):
        seeds[i] = rng.choice(n, size=m + 1, replace=False)
    scatters = _scatter_about_zero(x, seeds)

    subsets = None
    for _ in range(_N_SHORT_CSTEPS):
        dists = _batched_dists(x, scatters, ridge_scale)
        subsets = np.argpartition(dists, h - 1, axis=1)[:, :h]
        scatters = _scatter_about_zero(x, subsets)

    _, logdets = np.linalg.slogdet(scatters)
    keep = np.argsort(logdets)[: min(_N_KEEP, _N_TRIALS)]

    best_logdet = np.inf
    best_subset = None
    for i in keep:
        subset = np.sort(subsets[i])
        scatter = scatters[i][None]
        for _ in range(_MAX_REFINE):
            dists = _batched_dists(x, scatter, ridge_scale)[0]
            new_subset = np.sort(np.argpartition(dists, h - 1)[:h])
            if np.array_equal(new_subset, subset):
                break
            subset = new_subset
            scatter = _scatter_about_zero(x, subset[None])
        sign, logdet = np.linalg.slogdet(scatter[0])
        if sign <= 0:
            logdet = np.inf
        if logdet < best_logdet:
            best_logdet = logdet
            best_subset = subset

    raw = _scatter_about_zero(x, best_subset[None])[0]
    sigma = _consistency_factor(h / n, m) * raw

    # One-step reweighting: keep rows whose squared distance under the raw
    # estimate is plausible for Gaussian data, then rescale.  This recovers
    # most of the efficiency the h-subset scatter gives up.
    try:
        d2 = CovarianceMatrix.from_matrix(sigma).quadratic_form(x)
    except SingularCovarianceError:
        d2 = None
    if d2 is not None:
        kept = d2 <= stats.chi2.ppf(_REWEIGHT_MASS, df=m)
        if kept.sum() > m:
            xk = x[kept]
            sigma = _consistency_factor(_REWEIGHT_MASS, m) * (xk.T @ xk) / kept.sum()

    try:
        return CovarianceMatrix.from_matrix(sigma)
    except SingularCovarianceError:
        warnings.warn("minimal-determinant subset is rank deficient; adding ridge", RuntimeWarning)
        sigma = sigma + (1e-10 * np.trace(sigma) / m) * np.eye(m)
        return CovarianceMatrix.from_matrix(sigma)


def eigen(sigma):
    """Descending eigenvalues and orthonormal eigenvectors of a symmetric PD matrix.

    Accepts a :class:`CovarianceMatrix` or a raw symmetric array.  The
    eigenvalues of the inverse are the reciprocals of the returned ones.
    """
    if isinstance(sigma, CovarianceMatrix):
        return sigma.eigenvalues.copy(), sigma.eigenvectors.copy()
    cov = CovarianceMatrix.from_matrix(sigma)
    return cov.eigenvalues, cov.eigenvectors
