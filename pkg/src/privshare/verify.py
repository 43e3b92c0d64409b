"""Independent numerical oracles and the certification suites built on them.

Each suite re-derives a quantity the library computes in closed form through
an independent route (adaptive quadrature, Monte-Carlo estimation, or an exact
reference filter) and checks the library against it:

* ``divergences``       - closed-form entropy/KL/Chernoff/Bhattacharyya vs
                          numerical integration of the defining integrals.
* ``entropy-sandwich``  - Chernoff lower / KL and max-entropy upper bounds vs
                          Monte-Carlo mixture entropy.
* ``mi-bound``          - MI upper bounds vs nested Monte-Carlo MI, for
                          Gaussian and mixture-valued per-particle policies.
* ``tightness``         - cluster certificate vs the observed bound gap.
* ``filter-consistency``- particle posterior vs an exact bank of per-parameter
                          Kalman filters on a linear-Gaussian toy system.

The suites are part of the shipped surface (exposed by the ``verify`` CLI
subcommand) so bounds can be certified on user-controlled budgets.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import belief as pb
from .gaussians import GaussianComponent, bhattacharyya, chernoff_alpha, gaussian_entropy, kl_divergence
from .mixtures import (
    Emission,
    MixtureClustering,
    PolicyMixture,
    conditional_mixture,
    entropy_lower_chernoff,
    entropy_upper_kl,
    entropy_upper_maxent,
    greedy_kl_clustering,
    marginal_mixture,
    mc_entropy,
    mc_mutual_information,
    mi_upper_bound,
    tightness_certificate,
)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    n_checks: int
    n_violations: int
    worst_margin: float
    runtime_s: float
    details: list[str] = field(default_factory=list)

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: {self.n_checks} checks, "
            f"{self.n_violations} violations, worst margin {self.worst_margin:.3e}, "
            f"{self.runtime_s:.1f}s"
        )


# ---------------------------------------------------------------------------
# Quadrature oracles
# ---------------------------------------------------------------------------


def _gh_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss-Hermite nodes/weights normalized for N(0, 1)."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / np.sqrt(2.0 * np.pi)


def gauss_expectation_2d(fn, mean: np.ndarray, cov: np.ndarray, n_nodes: int) -> float:
    """E_{N(mean, cov)}[fn(x)] by tensor-product Gauss-Hermite quadrature."""
    x, w = _gh_nodes(n_nodes)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    z = np.column_stack([xx.ravel(), yy.ravel()])
    chol = np.linalg.cholesky(cov)
    pts = mean + z @ chol.T
    vals = fn(pts)
    ww = np.outer(w, w).ravel()
    return float(np.sum(ww * vals))


def entropy_quadrature(g: GaussianComponent, n_nodes: int = 96) -> float:
    """-Int p ln p by adaptive quadrature (1-D) or Gauss-Hermite (2-D)."""
    if g.dim == 1:
        mu, var = float(g.mean[0]), float(g.cov[0, 0])
        sd = var**0.5
        log_norm = 0.5 * np.log(2.0 * np.pi * var)

        def integrand(x):
            lp = -log_norm - 0.5 * (x - mu) ** 2 / var
            return -np.exp(lp) * lp

        val, _ = quad(integrand, mu - 30 * sd, mu + 30 * sd, limit=200, epsabs=1e-11, epsrel=1e-11)
        return float(val)
    return gauss_expectation_2d(lambda pts: -g.logpdf(pts), g.mean, g.cov, n_nodes)


def kl_quadrature(p: GaussianComponent, q: GaussianComponent, n_nodes: int = 96) -> float:
    """Int p ln(p/q) by adaptive quadrature (1-D) or Gauss-Hermite (2-D)."""
    if p.dim == 1:
        mu_p, var_p = float(p.mean[0]), float(p.cov[0, 0])
        mu_q, var_q = float(q.mean[0]), float(q.cov[0, 0])
        sd = var_p**0.5
        ln_p = 0.5 * np.log(2.0 * np.pi * var_p)
        ln_q = 0.5 * np.log(2.0 * np.pi * var_q)

        def integrand(x):
            lp = -ln_p - 0.5 * (x - mu_p) ** 2 / var_p
            lq = -ln_q - 0.5 * (x - mu_q) ** 2 / var_q
            return np.exp(lp) * (lp - lq)

        val, _ = quad(integrand, mu_p - 30 * sd, mu_p + 30 * sd, limit=200, epsabs=1e-11, epsrel=1e-11)
        return float(val)
    return gauss_expectation_2d(lambda pts: p.logpdf(pts) - q.logpdf(pts), p.mean, p.cov, n_nodes)


def chernoff_quadrature(
    p: GaussianComponent, q: GaussianComponent, alpha: float, n_nodes: int = 128
) -> float:
    """-ln Int p^a q^(1-a), the defining integral of the adopted Chernoff
    convention. In 2-D the integral is taken against a wide Gaussian reference
    centered between the two means (importance form), which keeps the integrand
    light-tailed without using the closed-form product structure."""
    if p.dim == 1:
        mu_p, var_p = float(p.mean[0]), float(p.cov[0, 0])
        mu_q, var_q = float(q.mean[0]), float(q.cov[0, 0])
        ln_p = 0.5 * np.log(2.0 * np.pi * var_p)
        ln_q = 0.5 * np.log(2.0 * np.pi * var_q)
        mu = 0.5 * (mu_p + mu_q)
        span = abs(mu_p - mu_q) + 30 * max(var_p, var_q) ** 0.5

        def integrand(x):
            lp = -ln_p - 0.5 * (x - mu_p) ** 2 / var_p
            lq = -ln_q - 0.5 * (x - mu_q) ** 2 / var_q
            return np.exp(alpha * lp + (1.0 - alpha) * lq)

        val, _ = quad(integrand, mu - span, mu + span, limit=200, epsabs=1e-12, epsrel=1e-12)
        return float(-np.log(val))
    mean_r = 0.5 * (p.mean + q.mean)
    cov_r = p.cov + q.cov
    ref = GaussianComponent(mean_r, cov_r)

    def ratio(pts):
        return np.exp(alpha * p.logpdf(pts) + (1.0 - alpha) * q.logpdf(pts) - ref.logpdf(pts))

    val = gauss_expectation_2d(ratio, mean_r, cov_r, n_nodes)
    return float(-np.log(val))


# ---------------------------------------------------------------------------
# Random instance generators (seeded)
# ---------------------------------------------------------------------------


def random_spd(rng: np.random.Generator, d: int, eig_low: float = 0.3, eig_high: float = 2.5) -> np.ndarray:
    a = rng.standard_normal((d, d))
    qmat, _ = np.linalg.qr(a)
    eigs = rng.uniform(eig_low, eig_high, size=d)
    return qmat @ np.diag(eigs) @ qmat.T


def random_gaussian_pair(rng: np.random.Generator, d: int) -> tuple[GaussianComponent, GaussianComponent]:
    mu_p = rng.uniform(-2.0, 2.0, size=d)
    offset = rng.choice([-1.0, 1.0], size=d) * rng.uniform(0.5, 2.5, size=d)
    return (
        GaussianComponent(mu_p, random_spd(rng, d)),
        GaussianComponent(mu_p + offset, random_spd(rng, d)),
    )


def random_mixture(
    rng: np.random.Generator,
    max_components: int = 6,
    dims: tuple[int, ...] = (1, 2),
    spread: float = 3.0,
) -> PolicyMixture:
    d = int(rng.choice(dims))
    k = int(rng.integers(1, max_components + 1))
    w = rng.dirichlet(np.ones(k))
    means = rng.uniform(-spread, spread, size=(k, d))
    covs = np.stack([random_spd(rng, d, 0.2, 2.0) for _ in range(k)])
    return PolicyMixture(w, means, covs, np.zeros(k, dtype=int), 1)


def random_belief_emissions(
    rng: np.random.Generator,
    gmm_policy: bool = False,
) -> tuple[pb.ParticleBelief, Emission]:
    """A small random belief and per-particle emissions for MI-bound checks."""
    k = int(rng.integers(2, 5))
    d = int(rng.choice([1, 2]))
    n = int(rng.integers(k, 13))
    thetas = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
    rng.shuffle(thetas)
    weights = rng.dirichlet(np.ones(n))
    support = rng.standard_normal((k, 1))
    states = rng.standard_normal((n, 1))
    bel = pb.ParticleBelief(thetas, states, weights, support, seed=0)
    c = int(rng.integers(2, 4)) if gmm_policy else 1
    sub_w = rng.dirichlet(np.ones(c), size=n)
    means = rng.uniform(-3.0, 3.0, size=(n, c, d))
    covs = np.stack([[random_spd(rng, d, 0.2, 2.0) for _ in range(c)] for _ in range(n)])
    return bel, Emission(sub_w, means, covs)


# ---------------------------------------------------------------------------
# Linear-Gaussian toy system with an exact discrete-parameter reference filter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearGaussianToy:
    """x' = a_theta x + q eps,  y = x + r nu, with a finite set of a values."""

    a_values: tuple[float, ...] = (0.5, 0.68, 0.84, 0.97)
    q: float = 0.5
    r: float = 0.7
    x0_mean: float = 0.0
    x0_var: float = 1.0

    @property
    def support(self) -> np.ndarray:
        return np.asarray(self.a_values, dtype=float)[:, None]

    def simulate(self, theta_idx: int, horizon: int, rng: np.random.Generator) -> np.ndarray:
        a = self.a_values[theta_idx]
        x = self.x0_mean + np.sqrt(self.x0_var) * rng.standard_normal()
        ys = np.empty(horizon)
        for t in range(horizon):
            x = a * x + self.q * rng.standard_normal()
            ys[t] = x + self.r * rng.standard_normal()
        return ys

    def exact_posterior(self, ys: np.ndarray, prior: np.ndarray) -> np.ndarray:
        """Bank of Kalman filters, one per parameter; returns p(theta | y_1:T)."""
        log_post = np.log(prior.astype(float))
        for j, a in enumerate(self.a_values):
            mean, var = self.x0_mean, self.x0_var
            ll = 0.0
            for y in ys:
                mean_pred = a * mean
                var_pred = a * a * var + self.q**2
                s = var_pred + self.r**2
                ll += -0.5 * (np.log(2 * np.pi * s) + (y - mean_pred) ** 2 / s)
                gain = var_pred / s
                mean = mean_pred + gain * (y - mean_pred)
                var = (1.0 - gain) * var_pred
            log_post[j] += ll
        log_post -= log_post.max()
        post = np.exp(log_post)
        return post / post.sum()

    def particle_posterior(
        self, ys: np.ndarray, prior: np.ndarray, n_particles: int, seed: int
    ) -> np.ndarray:
        bel = pb.init_belief(
            self.support, prior, (np.array([self.x0_mean]), np.array([[self.x0_var]])), n_particles, seed
        )

        def dynamics(theta_values, states, w_t, rng):
            a = theta_values[:, 0]
            return (a * states[:, 0] + self.q * rng.standard_normal(states.shape[0]))[:, None]

        for y in ys:
            bel = pb.propagate(bel, dynamics, None)
            ll = -0.5 * (np.log(2 * np.pi * self.r**2) + (y - bel.states[:, 0]) ** 2 / self.r**2)
            bel = pb.update_weights_log(bel, ll)
            if pb.effective_sample_size(bel) < 0.5 * n_particles:
                bel = pb.resample(bel)
        return pb.theta_marginal(bel)


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def run_divergence_suite(n_pairs: int = 1000, seed: int = 2024, rel_tol: float = 1e-6) -> SuiteResult:
    """Closed forms vs quadrature on random 1-D/2-D pairs."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst = 0.0
    violations = 0
    details = []
    checks = 0

    def rel_err(a, b):
        return abs(a - b) / max(abs(b), 1e-9)

    for i in range(n_pairs):
        d = 1 if i % 2 == 0 else 2
        p, q = random_gaussian_pair(rng, d)
        alpha = float(rng.uniform(0.1, 0.9))
        pairs = [
            ("entropy", gaussian_entropy(p), entropy_quadrature(p)),
            ("kl", kl_divergence(p, q), kl_quadrature(p, q)),
            ("chernoff", chernoff_alpha(p, q, alpha), chernoff_quadrature(p, q, alpha)),
            ("bhattacharyya", bhattacharyya(p, q), chernoff_quadrature(p, q, 0.5)),
        ]
        for name, closed, numeric in pairs:
            err = rel_err(closed, numeric)
            worst = max(worst, err)
            checks += 1
            if err >= rel_tol:
                violations += 1
                if len(details) < 20:
                    details.append(f"pair {i} ({name}, d={d}): rel err {err:.3e}")
    return SuiteResult(
        "divergences", violations == 0, checks, violations, worst, time.time() - t0, details
    )


def run_entropy_sandwich_suite(
    n_mixtures: int = 500, n_samples: int = 1_000_000, seed: int = 7, alpha: float = 0.5
) -> SuiteResult:
    """Chernoff lower <= MC entropy <= min(KL, max-entropy) upper, within 3 sigma."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    violations = 0
    worst = -np.inf
    details = []
    for i in range(n_mixtures):
        m = random_mixture(rng)
        est, se = mc_entropy(m, n_samples, int(rng.integers(2**31)))
        lower = entropy_lower_chernoff(m, alpha)
        upper = min(entropy_upper_kl(m), entropy_upper_maxent(m))
        lo_margin = est - (lower - 3 * se)
        hi_margin = (upper + 3 * se) - est
        worst = max(worst, -min(lo_margin, hi_margin))
        if lo_margin < 0 or hi_margin < 0:
            violations += 1
            if len(details) < 20:
                details.append(
                    f"mixture {i}: lower={lower:.5f} mc={est:.5f}+-{se:.5f} upper={upper:.5f}"
                )
    return SuiteResult(
        "entropy-sandwich",
        violations == 0,
        n_mixtures,
        violations,
        worst,
        time.time() - t0,
        details,
    )


def run_mi_bound_suite(
    n_gaussian: int = 200,
    n_gmm: int = 100,
    n_samples: int = 200_000,
    seed: int = 11,
    alpha: float = 0.5,
) -> SuiteResult:
    """MC MI <= regime-adaptive bound (3 sigma), and regime-adaptive <= KL bound."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    violations = 0
    worst = -np.inf
    details = []
    checks = 0
    for i in range(n_gaussian + n_gmm):
        bel, em = random_belief_emissions(rng, gmm_policy=i >= n_gaussian)
        report = mi_upper_bound(bel, em, alpha)
        est, se = mc_mutual_information(bel, em, n_samples, int(rng.integers(2**31)))
        margin = (report.mi_upper_regime_adaptive + 3 * se) - est
        dominance = report.mi_upper_kl - report.mi_upper_regime_adaptive_raw
        worst = max(worst, -margin, -dominance - 1e-12)
        checks += 2
        if margin < 0 or dominance < -1e-12:
            violations += 1
            if len(details) < 20:
                details.append(
                    f"instance {i}: bound={report.mi_upper_regime_adaptive:.5f} "
                    f"kl={report.mi_upper_kl:.5f} mc={est:.5f}+-{se:.5f}"
                )
    return SuiteResult(
        "mi-bound", violations == 0, checks, violations, worst, time.time() - t0, details
    )


def clustered_instance(
    rng: np.random.Generator, separation: float
) -> tuple[pb.ParticleBelief, Emission]:
    """Belief whose per-theta emissions form well-separated 1-D clusters."""
    k = 2
    per = int(rng.integers(2, 5))
    n = k * per
    thetas = np.repeat(np.arange(k), per)
    weights = rng.dirichlet(np.ones(n))
    centers = np.array([-separation / 2.0, separation / 2.0])
    means = (centers[thetas] + rng.uniform(-0.2, 0.2, size=n))[:, None, None]
    variances = rng.uniform(0.8, 1.2, size=(n, 1, 1, 1))
    bel = pb.ParticleBelief(thetas, np.zeros((n, 1)), weights, np.zeros((k, 1)), seed=0)
    return bel, Emission(np.ones((n, 1)), means, variances)


def run_tightness_suite(
    n_instances: int = 50, n_samples: int = 400_000, seed: int = 13, alpha: float = 0.5
) -> SuiteResult:
    """Observed (KL/Chernoff bound - MC MI) gap vs the cluster certificate."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    violations = 0
    worst = -np.inf
    details = []
    for i in range(n_instances):
        sep = float(rng.uniform(6.0, 12.0))
        bel, em = clustered_instance(rng, sep)
        marg = marginal_mixture(bel, em)
        masses = marg.theta_masses()
        conds = [conditional_mixture(bel, em, j) for j in np.flatnonzero(masses > 0)]
        clustering = MixtureClustering(
            marginal_labels=greedy_kl_clustering(marg, threshold=1.0),
            conditional_labels=[greedy_kl_clustering(c, threshold=1.0) for c in conds],
        )
        cert = tightness_certificate(marg, conds, clustering, alpha)
        report = mi_upper_bound(bel, em, alpha)
        est, se = mc_mutual_information(bel, em, n_samples, int(rng.integers(2**31)))
        gap = report.mi_upper_kl - est
        margin = (cert + 3 * se) - gap
        worst = max(worst, -margin)
        if margin < 0:
            violations += 1
            if len(details) < 20:
                details.append(f"instance {i}: gap={gap:.5f} certificate={cert:.5f} se={se:.5f}")
    return SuiteResult(
        "tightness", violations == 0, n_instances, violations, worst, time.time() - t0, details
    )


def run_filter_consistency_suite(
    particle_counts: tuple[int, ...] = (256, 1024, 4096),
    n_seeds: int = 20,
    horizon: int = 50,
    seed: int = 5,
    final_tv_tol: float = 0.05,
) -> SuiteResult:
    """Mean total-variation error to the exact posterior must decrease in N and
    end below tolerance at the largest N."""
    t0 = time.time()
    toy = LinearGaussianToy()
    k = len(toy.a_values)
    prior = np.full(k, 1.0 / k)
    rng = np.random.default_rng(seed)
    mean_tv = []
    for n_particles in particle_counts:
        tvs = []
        for s in range(n_seeds):
            sim_rng = np.random.default_rng([seed, s])
            theta_idx = s % k
            ys = toy.simulate(theta_idx, horizon, sim_rng)
            exact = toy.exact_posterior(ys, prior)
            approx = toy.particle_posterior(ys, prior, n_particles, seed=int(rng.integers(2**31)))
            tvs.append(0.5 * np.abs(exact - approx).sum())
        mean_tv.append(float(np.mean(tvs)))
    monotone = all(mean_tv[i + 1] < mean_tv[i] for i in range(len(mean_tv) - 1))
    final_ok = mean_tv[-1] < final_tv_tol
    details = [
        f"N={n}: mean TV={tv:.4f}" for n, tv in zip(particle_counts, mean_tv)
    ]
    violations = int(not monotone) + int(not final_ok)
    return SuiteResult(
        "filter-consistency",
        monotone and final_ok,
        len(particle_counts),
        violations,
        mean_tv[-1] - final_tv_tol,
        time.time() - t0,
        details,
    )


SUITES = {
    "divergences": run_divergence_suite,
    "entropy-sandwich": run_entropy_sandwich_suite,
    "mi-bound": run_mi_bound_suite,
    "tightness": run_tightness_suite,
    "filter-consistency": run_filter_consistency_suite,
}
