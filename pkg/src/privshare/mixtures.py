"""Gaussian mixtures induced by a sharing policy at a particle belief, and the
closed-form entropy / mutual-information bounds computed on them.

A policy evaluated at a weighted particle set induces

* a marginal mixture  p(y) = sum_i w_i * k(y | theta_i, x_i), and
* per-parameter conditionals  p(y | theta) over the particles carrying theta,

where each per-particle kernel k is a Gaussian or a finite Gaussian mixture.
On those mixtures we compute:

* ``entropy_upper_kl`` - pairwise-KL upper bound on mixture entropy,
* ``entropy_lower_chernoff`` - pairwise Chernoff-alpha lower bound,
* ``entropy_upper_maxent`` - moment-matched Gaussian (max-entropy) upper bound,
* ``mi_upper_bound`` - the per-step MI upper bound combining the marginal
  upper bound with the conditional lower bounds; the regime-adaptive variant
  takes the tighter of the KL and max-entropy branches for the marginal term,
* ``tightness_certificate`` - the cluster-based bound on the gap between the
  KL/Chernoff MI bound and the particle MI,
* ``mc_entropy`` / ``mc_mutual_information`` - seeded Monte-Carlo reference
  estimators, shipped so bounds can be certified on user instances.

All log quantities are in nats. Sums of the form sum_j w_j exp(-D_ij) are
evaluated with log-sum-exp so huge divergences underflow gracefully.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .belief import ParticleBelief
from .exceptions import DimensionMismatchError, EmptySupportError, InvalidGaussianError
from .gaussians import (
    LOG_2PI,
    batch_cholesky,
    batch_entropy,
    batch_log_det,
    pairwise_chernoff,
    pairwise_kl,
)


@dataclass(frozen=True)
class Emission:
    """Per-particle emission density: one Gaussian or a finite Gaussian mixture.

    For a stack of n particles: ``sub_weights`` (n, c), ``means`` (n, c, d),
    ``covs`` (n, c, d, d). Pure Gaussian policies have c = 1. Sub-weights must
    be nonnegative and sum to 1 per particle.
    """

    sub_weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        sw = np.asarray(self.sub_weights, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        cv = np.asarray(self.covs, dtype=float)
        if sw.ndim != 2 or mu.ndim != 3 or cv.ndim != 4:
            raise InvalidGaussianError(
                "emission arrays must have shapes (n,c), (n,c,d), (n,c,d,d); got "
                f"{sw.shape}, {mu.shape}, {cv.shape}"
            )
        n, c = sw.shape
        d = mu.shape[2]
        if mu.shape != (n, c, d) or cv.shape != (n, c, d, d):
            raise InvalidGaussianError("emission array shapes are inconsistent")
        if np.any(sw < 0) or np.any(np.abs(sw.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidGaussianError("per-particle sub-weights must be >= 0 and sum to 1")
        object.__setattr__(self, "sub_weights", sw)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", cv)

    @property
    def n_particles(self) -> int:
        return self.sub_weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[2]

    @classmethod
    def gaussian(cls, means: np.ndarray, covs: np.ndarray) -> "Emission":
        """Single-Gaussian emission per particle from (n, d) means, (n, d, d) covs."""
        means = np.asarray(means, dtype=float)
        covs = np.asarray(covs, dtype=float)
        n = means.shape[0]
        return cls(np.ones((n, 1)), means[:, None, :], covs[:, None, :, :])

    @classmethod
    def diagonal(cls, means: np.ndarray, variances: np.ndarray) -> "Emission":
        """Single diagonal Gaussian per particle from (n, d) means and variances."""
        means = np.asarray(means, dtype=float)
        variances = np.asarray(variances, dtype=float)
        n, d = means.shape
        covs = np.zeros((n, d, d))
        idx = np.arange(d)
        covs[:, idx, idx] = variances
        return cls.gaussian(means, covs)

    def log_density(self, y: np.ndarray) -> np.ndarray:
        """Per-particle log density of the same point y, shape (n,)."""
        y = np.asarray(y, dtype=float)
        n, c, d = self.means.shape
        chols = batch_cholesky(self.covs.reshape(n * c, d, d))
        diff = (y[None, None, :] - self.means).reshape(n * c, d)
        sol = np.linalg.solve(chols, diff[:, :, None])[:, :, 0]
        maha = np.sum(sol**2, axis=1)
        logdet = batch_log_det(chols)
        comp = -0.5 * (d * LOG_2PI + logdet + maha)
        comp = comp.reshape(n, c)
        with np.errstate(divide="ignore"):
            return logsumexp(comp + np.log(self.sub_weights), axis=1)


class MiBranch(str, Enum):
    KL = "KL"
    MAX_ENTROPY_GAUSSIAN = "MaxEntropyGaussian"


@dataclass(frozen=True)
class PolicyMixture:
    """A flat Gaussian mixture tagged by each component's parameter index.

    Built from a belief plus per-particle emissions: every emission
    sub-component becomes one row with weight = particle weight * sub-weight.
    Zero-weight components are retained so component counts match the particle
    structure.
    """

    weights: np.ndarray  # (n,)
    means: np.ndarray  # (n, d)
    covs: np.ndarray  # (n, d, d)
    theta_index: np.ndarray  # (n,) int
    theta_support_size: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        cv = np.asarray(self.covs, dtype=float)
        ti = np.asarray(self.theta_index, dtype=int)
        n = w.size
        if mu.shape[0] != n or cv.shape[0] != n or ti.size != n:
            raise DimensionMismatchError("mixture arrays disagree on component count")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidGaussianError("mixture weights must be >= 0 and sum to 1")
        if np.any(ti < 0) or np.any(ti >= int(self.theta_support_size)):
            raise InvalidGaussianError("theta_index out of range")
        batch_cholesky(cv)  # SPD validation
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", cv)
        object.__setattr__(self, "theta_index", ti)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def logpdf(self, y: np.ndarray) -> np.ndarray:
        """Mixture log density at points y of shape (m, d) (or a single (d,))."""
        y = np.asarray(y, dtype=float)
        squeeze = y.ndim == 1
        pts = np.atleast_2d(y)
        live = self.weights > 0
        chols = batch_cholesky(self.covs[live])
        logdet = batch_log_det(chols)
        logw = np.log(self.weights[live])
        d = self.dim
        comp = np.empty((pts.shape[0], live.sum()))
        for k in range(live.sum()):
            sol = np.linalg.solve(chols[k], (pts - self.means[live][k]).T)
            comp[:, k] = -0.5 * (d * LOG_2PI + logdet[k] + np.sum(sol**2, axis=0))
        out = logsumexp(comp + logw[None, :], axis=1)
        return float(out[0]) if squeeze else out

    def sample(self, n_samples: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(self.n_components, size=n_samples, p=self.weights)
        chols = batch_cholesky(self.covs)
        z = rng.standard_normal((n_samples, self.dim))
        return self.means[idx] + np.einsum("nij,nj->ni", chols[idx], z)

    def theta_masses(self) -> np.ndarray:
        """Posterior mass per parameter value, summed over components."""
        return np.bincount(self.theta_index, weights=self.weights, minlength=self.theta_support_size)


@dataclass(frozen=True)
class MiBoundReport:
    """Entropy terms and MI upper bounds for one (belief, policy) evaluation."""

    h_kl_marginal: float
    h_gauss_marginal: float
    h_chernoff_conditional: float
    mi_upper_kl: float
    mi_upper_regime_adaptive: float
    mi_upper_regime_adaptive_raw: float
    active_branch: MiBranch


@dataclass(frozen=True)
class MixtureClustering:
    """Cluster labels for the marginal mixture and each conditional mixture."""

    marginal_labels: np.ndarray
    conditional_labels: Sequence[np.ndarray]


def marginal_mixture(belief: ParticleBelief, emissions: Emission) -> PolicyMixture:
    """Mixture of per-particle emissions weighted by particle weights."""
    if emissions.n_particles != belief.n_particles:
        raise DimensionMismatchError(
            f"{emissions.n_particles} emissions for {belief.n_particles} particles"
        )
    n, c, d = emissions.means.shape
    w = (belief.weights[:, None] * emissions.sub_weights).reshape(n * c)
    ti = np.repeat(belief.thetas, c)
    return PolicyMixture(
        weights=w,
        means=emissions.means.reshape(n * c, d),
        covs=emissions.covs.reshape(n * c, d, d),
        theta_index=ti,
        theta_support_size=belief.theta_support_size,
    )


def conditional_mixture(
    belief: ParticleBelief, emissions: Emission, theta_index: int
) -> PolicyMixture:
    """Emission mixture over particles with the given parameter, renormalized."""
    if emissions.n_particles != belief.n_particles:
        raise DimensionMismatchError(
            f"{emissions.n_particles} emissions for {belief.n_particles} particles"
        )
    mask = belief.thetas == theta_index
    q = float(belief.weights[mask].sum())
    if q <= 0.0:
        raise EmptySupportError(f"no posterior mass on theta index {theta_index}")
    n_sel = int(mask.sum())
    c = emissions.sub_weights.shape[1]
    d = emissions.dim
    w = (belief.weights[mask, None] * emissions.sub_weights[mask]).reshape(n_sel * c) / q
    return PolicyMixture(
        weights=w,
        means=emissions.means[mask].reshape(n_sel * c, d),
        covs=emissions.covs[mask].reshape(n_sel * c, d, d),
        theta_index=np.full(n_sel * c, theta_index, dtype=int),
        theta_support_size=belief.theta_support_size,
    )


def _component_entropies(m: PolicyMixture) -> np.ndarray:
    return batch_entropy(batch_cholesky(m.covs))


def _bound_from_divergence(m: PolicyMixture, div: np.ndarray) -> float:
    """sum_i w_i H(N_i) - sum_i w_i ln(sum_j w_j exp(-div_ij))."""
    w = m.weights
    live = w > 0
    with np.errstate(divide="ignore"):
        logw = np.where(live, np.log(np.where(live, w, 1.0)), -np.inf)
    inner = logsumexp(logw[None, :] - div, axis=1)  # (n,)
    ent = _component_entropies(m)
    return float(np.sum(w[live] * (ent[live] - inner[live])))


def entropy_upper_kl(m: PolicyMixture) -> float:
    """Pairwise-KL upper bound on the differential entropy of the mixture."""
    return _bound_from_divergence(m, pairwise_kl(m.means, m.covs))


def entropy_lower_chernoff(m: PolicyMixture, alpha: float = 0.5) -> float:
    """Pairwise Chernoff-alpha lower bound on the differential entropy."""
    return _bound_from_divergence(m, pairwise_chernoff(m.means, m.covs, alpha))


def mixture_moments(m: PolicyMixture) -> tuple[np.ndarray, np.ndarray]:
    """Mixture mean and total covariance (law of total covariance)."""
    mu_bar = m.weights @ m.means
    centered = m.means - mu_bar
    sigma = np.einsum("n,nij->ij", m.weights, m.covs) + np.einsum(
        "n,ni,nj->ij", m.weights, centered, centered
    )
    return mu_bar, sigma


def entropy_upper_maxent(m: PolicyMixture) -> float:
    """Entropy of the moment-matched Gaussian; an upper bound on mixture entropy."""
    _, sigma = mixture_moments(m)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise InvalidGaussianError("total covariance is numerically singular") from exc
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(0.5 * (m.dim * (LOG_2PI + 1.0) + log_det))


def mi_upper_bound(
    belief: ParticleBelief, emissions: Emission, alpha: float = 0.5
) -> MiBoundReport:
    """Per-step MI upper bounds between the secret parameter and shared data.

    ``mi_upper_kl`` pairs the KL marginal upper bound with Chernoff conditional
    lower bounds; the regime-adaptive value substitutes min(KL, max-entropy
    Gaussian) for the marginal term and is clipped below at zero for reporting
    (the raw value is retained for dominance checks). When only one parameter
    value carries mass the MI is identically zero and both bounds report 0.
    """
    marg = marginal_mixture(belief, emissions)
    masses = marg.theta_masses()
    supported = np.flatnonzero(masses > 0.0)
    if supported.size == 0:
        raise EmptySupportError("belief carries no posterior mass on any theta")
    h_kl = entropy_upper_kl(marg)
    h_gauss = entropy_upper_maxent(marg)
    branch = MiBranch.KL if h_kl <= h_gauss else MiBranch.MAX_ENTROPY_GAUSSIAN
    if supported.size == 1:
        return MiBoundReport(
            h_kl_marginal=h_kl,
            h_gauss_marginal=h_gauss,
            h_chernoff_conditional=h_kl,
            mi_upper_kl=0.0,
            mi_upper_regime_adaptive=0.0,
            mi_upper_regime_adaptive_raw=0.0,
            active_branch=branch,
        )
    h_cond = 0.0
    for j in supported:
        cond = conditional_mixture(belief, emissions, int(j))
        h_cond += masses[j] * entropy_lower_chernoff(cond, alpha)
    mi_kl = h_kl - h_cond
    raw = min(h_kl, h_gauss) - h_cond
    return MiBoundReport(
        h_kl_marginal=h_kl,
        h_gauss_marginal=h_gauss,
        h_chernoff_conditional=h_cond,
        mi_upper_kl=float(mi_kl),
        mi_upper_regime_adaptive=float(max(raw, 0.0)),
        mi_upper_regime_adaptive_raw=float(raw),
        active_branch=branch,
    )


def greedy_kl_clustering(m: PolicyMixture, threshold: float = 0.1) -> np.ndarray:
    """Greedy agglomeration on pairwise KL: a component joins the first cluster
    whose members all lie within ``threshold`` nats (both directions)."""
    kl = pairwise_kl(m.means, m.covs)
    n = m.n_components
    labels = -np.ones(n, dtype=int)
    clusters: list[list[int]] = []
    for i in range(n):
        for ci, members in enumerate(clusters):
            ok = all(kl[i, j] <= threshold and kl[j, i] <= threshold for j in members)
            if ok:
                labels[i] = ci
                clusters[ci].append(i)
                break
        else:
            labels[i] = len(clusters)
            clusters.append([i])
    return labels


def _cluster_parameters(m: PolicyMixture, labels: np.ndarray):
    """Tightest (kappa, gamma, n_clusters) satisfied by a cluster assignment."""
    labels = np.asarray(labels, dtype=int)
    if labels.size != m.n_components:
        raise DimensionMismatchError("one cluster label per mixture component required")
    groups = np.unique(labels)
    for g in groups:
        if not np.any(labels == g):
            raise EmptySupportError(f"cluster {g} is empty")
    kl = pairwise_kl(m.means, m.covs)
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(m.n_components, dtype=bool)
    kappa = float(np.max(kl[same & off_diag])) if np.any(same & off_diag) else 0.0
    if groups.size > 1:
        bd = pairwise_chernoff(m.means, m.covs, 0.5)
        gamma = float(np.min(bd[~same]))
    else:
        gamma = np.inf
    return kappa, gamma, groups.size


def tightness_certificate(
    m_marginal: PolicyMixture,
    m_conditionals: Sequence[PolicyMixture],
    clusters: MixtureClustering,
    alpha: float = 0.5,
) -> float:
    """Cluster-based upper bound on the gap between the KL/Chernoff MI bound
    and the particle MI:

        kappa + (|G|-1) exp(-(1-|1-2a|) gamma)
        + sum_theta q(theta) [kappa_t + (|G_t|-1) exp(-(1-|1-2a|) gamma_t)]

    kappa / gamma are the tightest within-cluster KL / between-cluster
    Bhattacharyya values realized by the given assignment.
    """
    kappa, gamma, n_clusters = _cluster_parameters(m_marginal, clusters.marginal_labels)
    decay = 1.0 - abs(1.0 - 2.0 * alpha)
    sep = (n_clusters - 1) * np.exp(-decay * gamma) if n_clusters > 1 else 0.0
    total = kappa + sep
    masses = m_marginal.theta_masses()
    if len(m_conditionals) != len(clusters.conditional_labels):
        raise DimensionMismatchError("one label array per conditional mixture required")
    for cond, labels in zip(m_conditionals, clusters.conditional_labels):
        q = float(masses[int(cond.theta_index[0])])
        kappa_t, gamma_t, n_t = _cluster_parameters(cond, labels)
        sep_t = (n_t - 1) * np.exp(-decay * gamma_t) if n_t > 1 else 0.0
        total += q * (kappa_t + sep_t)
    return float(total)


def mc_entropy(
    m: PolicyMixture, n_samples: int, seed: int | np.random.Generator
) -> tuple[float, float]:
    """Monte-Carlo entropy estimate -(1/n) sum ln p(y_k) with its standard error."""
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000 for a usable standard error")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ys = m.sample(n_samples, rng)
    logp = m.logpdf(ys)
    est = float(-np.mean(logp))
    stderr = float(np.std(logp, ddof=1) / np.sqrt(n_samples))
    return est, stderr


def mc_mutual_information(
    belief: ParticleBelief,
    emissions: Emission,
    n_samples: int,
    seed: int,
) -> tuple[float, float]:
    """Monte-Carlo estimate of I(Theta; Y) = H(Y) - sum_theta q(theta) H(Y|theta)."""
    marg = marginal_mixture(belief, emissions)
    masses = marg.theta_masses()
    rng = np.random.default_rng(seed)
    h_m, se_m = mc_entropy(marg, n_samples, rng)
    est = h_m
    var = se_m**2
    for j in np.flatnonzero(masses > 0.0):
        cond = conditional_mixture(belief, emissions, int(j))
        h_c, se_c = mc_entropy(cond, n_samples, rng)
        est -= masses[j] * h_c
        var += (masses[j] * se_c) ** 2
    return float(est), float(np.sqrt(var))
