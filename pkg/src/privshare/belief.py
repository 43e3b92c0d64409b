"""Weighted-particle approximation of the joint posterior over (parameter, state).

A :class:`ParticleBelief` is an immutable value: every operation returns a new
belief. Randomness is derived from the pair (seed, draws) carried by the
belief, where ``draws`` counts random operations consumed so far; any pipeline
of operations started from the same seed is therefore bit-reproducible.

The parameter support is a finite set of K vectors. Weight updates follow the
recursive rule  w_i <- w_i * k(y | theta_i, x_i)  (normalized), implemented in
log space. Resampling is systematic (single uniform draw, stratified
positions), which is conditionally unbiased with lower variance than
multinomial resampling; the conventional trigger is ESS < N/2. Propagation
draws each particle's next state from the transition kernel (bootstrap
proposal, so the dynamics factor cancels from the weight update).

Serialization: :func:`belief_to_json` / :func:`belief_from_json` implement a
versioned JSON schema with keys ``version`` (currently 1), ``theta_support``
(K x d_theta), ``thetas`` (N ints), ``states`` (N x d_x), ``weights`` (N),
``seed`` and ``draws``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .exceptions import (
    DegenerateUpdateError,
    DimensionMismatchError,
    FeatureError,
    PropagationError,
)

MGF_EXPONENT_CAP = 30.0


@dataclass(frozen=True)
class ParticleBelief:
    thetas: np.ndarray  # (N,) int indices into theta_support
    states: np.ndarray  # (N, d_x)
    weights: np.ndarray  # (N,) nonnegative, summing to 1
    theta_support: np.ndarray  # (K, d_theta)
    seed: int
    draws: int = 0

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=int)
        states = np.asarray(self.states, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        support = np.atleast_2d(np.asarray(self.theta_support, dtype=float))
        n = thetas.size
        if states.ndim != 2 or states.shape[0] != n or weights.size != n:
            raise DimensionMismatchError(
                f"inconsistent particle arrays: {thetas.shape}, {states.shape}, {weights.shape}"
            )
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("particle weights must be >= 0 and sum to 1 (tol 1e-9)")
        if n and (thetas.min() < 0 or thetas.max() >= support.shape[0]):
            raise ValueError("theta index out of support range")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "theta_support", support)

    @property
    def n_particles(self) -> int:
        return self.thetas.size

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def theta_support_size(self) -> int:
        return self.theta_support.shape[0]

    @property
    def theta_dim(self) -> int:
        return self.theta_support.shape[1]

    @property
    def theta_values(self) -> np.ndarray:
        """Parameter vector of each particle, shape (N, d_theta)."""
        return self.theta_support[self.thetas]

    def _rng(self) -> np.random.Generator:
        return np.random.default_rng([int(self.seed) & 0xFFFFFFFFFFFFFFFF, int(self.draws)])


@dataclass(frozen=True)
class MgfFeatures:
    """First moment of the particle cloud plus MGF evaluations at fixed points."""

    first_moment: np.ndarray  # (d_theta + d_x,)
    mgf_values: np.ndarray  # (m,) all > 0 and finite


def init_belief(
    theta_support: np.ndarray,
    prior_theta: np.ndarray,
    state_prior: tuple[np.ndarray, np.ndarray],
    n_particles: int,
    seed: int,
) -> ParticleBelief:
    """Uniform-weight belief with particles allocated to parameter values by
    largest-remainder rounding of the prior and states drawn from a Gaussian."""
    support = np.atleast_2d(np.asarray(theta_support, dtype=float))
    prior = np.asarray(prior_theta, dtype=float)
    k = support.shape[0]
    if prior.size != k or np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-9:
        raise ValueError("prior_theta must be a probability vector over the support")
    n_positive = int(np.count_nonzero(prior > 0))
    if n_particles < n_positive:
        raise ValueError(
            f"n_particles={n_particles} cannot cover {n_positive} parameter values with prior mass"
        )
    raw = prior * n_particles
    counts = np.floor(raw).astype(int)
    remainder = n_particles - counts.sum()
    if remainder:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:remainder]] += 1
    thetas = np.repeat(np.arange(k), counts)
    mean, cov = state_prior
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0])
    chol = np.linalg.cholesky(cov)
    states = mean + rng.standard_normal((n_particles, mean.size)) @ chol.T
    weights = np.full(n_particles, 1.0 / n_particles)
    return ParticleBelief(thetas, states, weights, support, seed=int(seed), draws=1)


def update_weights_log(b: ParticleBelief, log_likelihoods: np.ndarray) -> ParticleBelief:
    """Multiply weights by per-particle likelihoods given in log space."""
    ll = np.asarray(log_likelihoods, dtype=float)
    if ll.shape != (b.n_particles,):
        raise DimensionMismatchError(
            f"expected {b.n_particles} log-likelihoods, got shape {ll.shape}"
        )
    if np.any(np.isnan(ll)) or np.any(ll == np.inf):
        raise ValueError("log-likelihoods must be finite or -inf")
    with np.errstate(divide="ignore"):
        logw = np.where(b.weights > 0, np.log(np.where(b.weights > 0, b.weights, 1.0)), -np.inf)
    combined = logw + ll
    top = np.max(combined)
    if not np.isfinite(top):
        raise DegenerateUpdateError(float(np.max(ll)))
    w = np.exp(combined - top)
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateUpdateError(float(np.max(ll)))
    return replace(b, weights=w / total)


def update_weights(b: ParticleBelief, likelihoods: np.ndarray) -> ParticleBelief:
    """Multiply weights by per-particle likelihoods (linear scale) and renormalize."""
    lik = np.asarray(likelihoods, dtype=float)
    if np.any(lik < 0) or np.any(~np.isfinite(lik)):
        raise ValueError("likelihoods must be finite and nonnegative")
    with np.errstate(divide="ignore"):
        return update_weights_log(b, np.log(lik))


def effective_sample_size(b: ParticleBelief) -> float:
    """1 / sum(w_i^2); ranges from 1 (degenerate) to N (uniform)."""
    return float(1.0 / np.sum(b.weights**2))


def resample(b: ParticleBelief) -> ParticleBelief:
    """Systematic resampling; returns uniform weights over the drawn multiset."""
    rng = b._rng()
    n = b.n_particles
    positions = (rng.uniform(0.0, 1.0) + np.arange(n)) / n
    cumulative = np.cumsum(b.weights)
    cumulative[-1] = 1.0  # guard the final bin against rounding
    idx = np.searchsorted(cumulative, positions, side="left")
    return ParticleBelief(
        thetas=b.thetas[idx],
        states=b.states[idx],
        weights=np.full(n, 1.0 / n),
        theta_support=b.theta_support,
        seed=b.seed,
        draws=b.draws + 1,
    )


def propagate(
    b: ParticleBelief,
    dynamics: Callable[[np.ndarray, np.ndarray, object, np.random.Generator], np.ndarray],
    w_t: object,
) -> ParticleBelief:
    """Draw each particle's next state from the transition kernel.

    ``dynamics(theta_values, states, w_t, rng) -> new states`` is evaluated on
    the whole particle stack; weights and parameters are untouched (bootstrap
    proposal).
    """
    rng = b._rng()
    new_states = np.asarray(dynamics(b.theta_values, b.states, w_t, rng), dtype=float)
    if new_states.shape != b.states.shape:
        raise DimensionMismatchError(
            f"dynamics returned shape {new_states.shape}, expected {b.states.shape}"
        )
    bad = ~np.all(np.isfinite(new_states), axis=1)
    if np.any(bad):
        raise PropagationError(np.flatnonzero(bad))
    return replace(b, states=new_states, draws=b.draws + 1)


def theta_marginal(b: ParticleBelief) -> np.ndarray:
    """Posterior mass per parameter value: q(theta_j) = sum of weights with theta_i = j."""
    return np.bincount(b.thetas, weights=b.weights, minlength=b.theta_support_size)


def mgf_features(
    b: ParticleBelief,
    eval_points: np.ndarray,
    scale: float = 1.0,
    standardizer: tuple[np.ndarray, np.ndarray] | None = None,
) -> MgfFeatures:
    """First moment of (theta, x) plus MGF values at the given evaluation points.

    ``mgf_values[k] = sum_i w_i exp(scale * v_k . z_i)`` where z is the
    (optionally standardized) concatenation of parameter and state. Exponents
    are capped at +-30 to rule out overflow; callers wanting the paper-faithful
    conditioning pass a running ``(mean, std)`` standardizer.
    """
    z_raw = np.concatenate([b.theta_values, b.states], axis=1)
    first_moment = b.weights @ z_raw
    v = np.atleast_2d(np.asarray(eval_points, dtype=float))
    if v.shape[1] != z_raw.shape[1]:
        raise DimensionMismatchError(
            f"evaluation points have dimension {v.shape[1]}, cloud has {z_raw.shape[1]}"
        )
    z = z_raw
    if standardizer is not None:
        mean, std = standardizer
        z = (z_raw - np.asarray(mean, dtype=float)) / np.asarray(std, dtype=float)
    exponents = np.clip(scale * (z @ v.T), -MGF_EXPONENT_CAP, MGF_EXPONENT_CAP)
    values = b.weights @ np.exp(exponents)
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise FeatureError("MGF feature evaluation produced non-finite or non-positive values")
    return MgfFeatures(first_moment=first_moment, mgf_values=values)


def belief_to_json(b: ParticleBelief) -> str:
    payload = {
        "version": 1,
        "theta_support": b.theta_support.tolist(),
        "thetas": b.thetas.tolist(),
        "states": b.states.tolist(),
        "weights": b.weights.tolist(),
        "seed": int(b.seed),
        "draws": int(b.draws),
    }
    return json.dumps(payload)


def belief_from_json(text: str) -> ParticleBelief:
    payload = json.loads(text)
    if payload.get("version") != 1:
        raise ValueError(f"unsupported belief schema version {payload.get('version')}")
    return ParticleBelief(
        thetas=np.asarray(payload["thetas"], dtype=int),
        states=np.asarray(payload["states"], dtype=float),
        weights=np.asarray(payload["weights"], dtype=float),
        theta_support=np.asarray(payload["theta_support"], dtype=float),
        seed=int(payload["seed"]),
        draws=int(payload["draws"]),
    )
