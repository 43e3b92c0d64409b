"""Closed-form scalar functionals of Gaussian pairs.

Entropy, Kullback-Leibler divergence, Chernoff alpha-divergence and
Bhattacharyya distance for multivariate normals, all in nats. These are the
atoms from which every mixture entropy/MI bound in :mod:`privshare.mixtures`
is assembled.

Conventions
-----------
* Chernoff divergence uses the interpolated covariance
  ``Sigma_alpha = (1 - alpha) * Sigma_p + alpha * Sigma_q`` and the quadratic
  coefficient ``alpha * (1 - alpha) / 2``, so that ``C_0.5`` reproduces the
  standard Bhattacharyya distance.
* Determinants and quadratic forms go through Cholesky factors; a failed
  factorization raises :class:`InvalidGaussianError` (no silent
  regularization at this layer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, InvalidGaussianError

LOG_2PI = float(np.log(2.0 * np.pi))


def _as_spd_cholesky(cov: np.ndarray) -> np.ndarray:
    """Cholesky factor of a symmetric positive definite matrix.

    Symmetry tolerance is 1e-12 relative to the largest entry magnitude.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise InvalidGaussianError(f"covariance must be square, got shape {cov.shape}")
    scale = np.max(np.abs(cov)) if cov.size else 0.0
    asym = np.max(np.abs(cov - cov.T)) if cov.size else 0.0
    if scale == 0.0 or asym > 1e-12 * max(scale, 1e-300):
        raise InvalidGaussianError(f"covariance is not symmetric (max asymmetry {asym:g})")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidGaussianError("covariance is not positive definite") from exc


@dataclass(frozen=True)
class GaussianComponent:
    """A single Gaussian: mean vector and SPD covariance matrix."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 1 or mean.size < 1:
            raise InvalidGaussianError(f"mean must be a 1-D vector, got shape {mean.shape}")
        if cov.shape != (mean.size, mean.size):
            raise InvalidGaussianError(
                f"covariance shape {cov.shape} does not match mean dimension {mean.size}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidGaussianError("mean/covariance contain non-finite entries")
        chol = _as_spd_cholesky(cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def chol(self) -> np.ndarray:
        return self._chol

    @property
    def log_det(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self._chol))))

    def logpdf(self, y: np.ndarray) -> np.ndarray:
        """Log density at one point (shape (d,)) or a batch (shape (m, d))."""
        y = np.asarray(y, dtype=float)
        squeeze = y.ndim == 1
        pts = np.atleast_2d(y)
        sol = np.linalg.solve(self._chol, (pts - self.mean).T)
        maha = np.sum(sol**2, axis=0)
        out = -0.5 * (self.dim * LOG_2PI + self.log_det + maha)
        return float(out[0]) if squeeze else out


def _check_pair(p: GaussianComponent, q: GaussianComponent):
    if p.dim != q.dim:
        raise DimensionMismatchError(f"dimension mismatch: {p.dim} vs {q.dim}")


def gaussian_entropy(g: GaussianComponent) -> float:
    """Differential entropy 0.5 * ln((2*pi*e)^d * det(cov)), in nats."""
    return float(0.5 * (g.dim * (LOG_2PI + 1.0) + g.log_det))


def kl_divergence(p: GaussianComponent, q: GaussianComponent) -> float:
    """KL(p || q) = 0.5 [tr(Sq^-1 Sp) + (mq-mp)' Sq^-1 (mq-mp) - d + ln det Sq/det Sp]."""
    _check_pair(p, q)
    lq = q.chol
    a = np.linalg.solve(lq, p.chol)  # Lq^-1 Lp; trace term is ||A||_F^2
    trace = float(np.sum(a**2))
    b = np.linalg.solve(lq, q.mean - p.mean)
    maha = float(np.sum(b**2))
    return float(0.5 * (trace + maha - p.dim + q.log_det - p.log_det))


def chernoff_alpha(p: GaussianComponent, q: GaussianComponent, alpha: float) -> float:
    """Chernoff alpha-divergence C_alpha(p || q) = -ln Int p^alpha q^(1-alpha).

    Closed form for Gaussians with Sigma_alpha = (1-alpha) Sigma_p + alpha Sigma_q:

        C_alpha = alpha(1-alpha)/2 * (mp-mq)' Sigma_alpha^-1 (mp-mq)
                  + 0.5 * ln( det Sigma_alpha / (det Sigma_p^(1-alpha) det Sigma_q^alpha) )

    ``C_0.5`` is the Bhattacharyya distance.
    """
    _check_pair(p, q)
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    sa = (1.0 - alpha) * p.cov + alpha * q.cov
    la = _as_spd_cholesky(sa)
    log_det_a = float(2.0 * np.sum(np.log(np.diag(la))))
    b = np.linalg.solve(la, p.mean - q.mean)
    quad = 0.5 * alpha * (1.0 - alpha) * float(np.sum(b**2))
    logdet_term = 0.5 * (log_det_a - (1.0 - alpha) * p.log_det - alpha * q.log_det)
    return float(quad + logdet_term)


def bhattacharyya(p: GaussianComponent, q: GaussianComponent) -> float:
    """Bhattacharyya distance; delegates to ``chernoff_alpha(p, q, 0.5)``."""
    return chernoff_alpha(p, q, 0.5)


# ---------------------------------------------------------------------------
# Vectorized pairwise forms over stacked component arrays. Used by the mixture
# bounds, where the O(n^2) divergence matrix is the hot path.
# ---------------------------------------------------------------------------


def batch_cholesky(covs: np.ndarray) -> np.ndarray:
    """Cholesky factors of a stack of SPD matrices, shape (n, d, d)."""
    covs = np.asarray(covs, dtype=float)
    try:
        return np.linalg.cholesky(covs)
    except np.linalg.LinAlgError as exc:
        raise InvalidGaussianError("a component covariance is not positive definite") from exc


def batch_log_det(chols: np.ndarray) -> np.ndarray:
    d = np.diagonal(chols, axis1=-2, axis2=-1)
    return 2.0 * np.sum(np.log(d), axis=-1)


def batch_entropy(chols: np.ndarray) -> np.ndarray:
    d = chols.shape[-1]
    return 0.5 * (d * (LOG_2PI + 1.0) + batch_log_det(chols))


def _diagonals(covs: np.ndarray) -> np.ndarray | None:
    """Diagonal variances if every covariance in the stack is diagonal, else None."""
    n, d, _ = covs.shape
    if d == 1:
        return covs[:, :, 0]
    off = covs - covs * np.eye(d)
    if np.all(off == 0.0):
        return np.diagonal(covs, axis1=1, axis2=2).copy()
    return None


def pairwise_kl(means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """Matrix D with D[i, j] = KL(N_i || N_j) for stacked Gaussians."""
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    n, d = means.shape
    diag = _diagonals(covs)
    if diag is not None:
        v_i = diag[:, None, :]  # (n, 1, d)
        v_j = diag[None, :, :]
        mu_i = means[:, None, :]
        mu_j = means[None, :, :]
        terms = v_i / v_j + (mu_i - mu_j) ** 2 / v_j - 1.0 + np.log(v_j) - np.log(v_i)
        return 0.5 * np.sum(terms, axis=2)
    chols = batch_cholesky(covs)
    log_dets = batch_log_det(chols)
    out = np.empty((n, n))
    for j in range(n):
        lj = chols[j]
        a = np.linalg.solve(lj[None, :, :], chols)  # (n, d, d): Lj^-1 Li
        trace = np.sum(a**2, axis=(1, 2))
        b = np.linalg.solve(lj, (means[j] - means).T)  # (d, n)
        maha = np.sum(b**2, axis=0)
        out[:, j] = 0.5 * (trace + maha - d + log_dets[j] - log_dets)
    return out


def pairwise_chernoff(means: np.ndarray, covs: np.ndarray, alpha: float) -> np.ndarray:
    """Matrix C with C[i, j] = C_alpha(N_i || N_j) for stacked Gaussians."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    n, d = means.shape
    diag = _diagonals(covs)
    if diag is not None:
        v_i = diag[:, None, :]
        v_j = diag[None, :, :]
        v_a = (1.0 - alpha) * v_i + alpha * v_j
        mu_i = means[:, None, :]
        mu_j = means[None, :, :]
        quad = 0.5 * alpha * (1.0 - alpha) * np.sum((mu_i - mu_j) ** 2 / v_a, axis=2)
        logdet = 0.5 * np.sum(
            np.log(v_a) - (1.0 - alpha) * np.log(v_i) - alpha * np.log(v_j), axis=2
        )
        return quad + logdet
    log_dets = batch_log_det(batch_cholesky(covs))
    out = np.empty((n, n))
    for j in range(n):
        sa = (1.0 - alpha) * covs + alpha * covs[j]  # (n, d, d)
        la = batch_cholesky(sa)
        log_det_a = batch_log_det(la)
        diff = means - means[j]  # (n, d)
        b = np.linalg.solve(la, diff[:, :, None])[:, :, 0]
        quad = 0.5 * alpha * (1.0 - alpha) * np.sum(b**2, axis=1)
        out[:, j] = quad + 0.5 * (log_det_a - (1.0 - alpha) * log_dets - alpha * log_dets[j])
    return out
