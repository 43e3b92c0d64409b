"""Particle belief: initialization, weight updates, resampling, propagation,
marginals, MGF features, serialization, and Bayes consistency on a toy system."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privshare.belief import (
    MgfFeatures,
    ParticleBelief,
    belief_from_json,
    belief_to_json,
    effective_sample_size,
    init_belief,
    mgf_features,
    propagate,
    resample,
    theta_marginal,
    update_weights,
    update_weights_log,
)
from privshare.exceptions import DegenerateUpdateError, PropagationError
from privshare.verify import LinearGaussianToy

SUPPORT4 = np.array([[0.4, 0.5], [0.7, 0.8], [1.0, 1.1], [1.3, 1.4]])
PRIOR4 = np.full(4, 0.25)
STATE_PRIOR = (np.array([15.0, 20.0]), np.diag([0.25, 1.0]))


def small_belief(weights, thetas=(0, 1), k=2):
    thetas = np.asarray(thetas, dtype=int)
    return ParticleBelief(
        thetas,
        np.zeros((thetas.size, 1)),
        np.asarray(weights, dtype=float),
        np.arange(k, dtype=float)[:, None],
        seed=0,
    )


def test_init_uniform_allocation_5184():
    b = init_belief(SUPPORT4, PRIOR4, STATE_PRIOR, 5184, seed=0)
    counts = np.bincount(b.thetas, minlength=4)
    np.testing.assert_array_equal(counts, [1296, 1296, 1296, 1296])
    np.testing.assert_allclose(b.weights, 1.0 / 5184)


def test_init_largest_remainder_rounding():
    b = init_belief(SUPPORT4, [0.4, 0.3, 0.2, 0.1], STATE_PRIOR, 10, seed=0)
    np.testing.assert_array_equal(np.bincount(b.thetas, minlength=4), [4, 3, 2, 1])
    b = init_belief(SUPPORT4, [0.26, 0.26, 0.26, 0.22], STATE_PRIOR, 10, seed=0)
    assert np.bincount(b.thetas, minlength=4).sum() == 10


def test_init_single_theta():
    b = init_belief(np.array([[1.0, 1.0]]), [1.0], STATE_PRIOR, 64, seed=0)
    np.testing.assert_allclose(theta_marginal(b), [1.0])


def test_init_deterministic():
    b1 = init_belief(SUPPORT4, PRIOR4, STATE_PRIOR, 100, seed=5)
    b2 = init_belief(SUPPORT4, PRIOR4, STATE_PRIOR, 100, seed=5)
    np.testing.assert_array_equal(b1.states, b2.states)
    np.testing.assert_array_equal(b1.thetas, b2.thetas)


def test_init_too_few_particles():
    with pytest.raises(ValueError):
        init_belief(SUPPORT4, PRIOR4, STATE_PRIOR, 3, seed=0)


def test_update_uniform_likelihood_no_change():
    b = small_belief([0.3, 0.7])
    b2 = update_weights(b, np.array([2.5, 2.5]))
    np.testing.assert_allclose(b2.weights, b.weights, atol=1e-15)


def test_update_forced_normalization():
    b = small_belief([0.5, 0.5])
    b2 = update_weights(b, np.array([2.0, 1.0]))
    np.testing.assert_allclose(b2.weights, [2.0 / 3.0, 1.0 / 3.0], atol=1e-15)


def test_update_log_space_extreme_values():
    b = small_belief([0.5, 0.5])
    b2 = update_weights_log(b, np.array([-2000.0, -2001.0]))
    np.testing.assert_allclose(b2.weights, [np.e / (1 + np.e), 1 / (1 + np.e)], rtol=1e-12)


def test_update_degenerate_error_carries_diagnostic():
    b = small_belief([0.5, 0.5])
    with pytest.raises(DegenerateUpdateError) as err:
        update_weights_log(b, np.array([-np.inf, -np.inf]))
    assert err.value.max_log_likelihood == -np.inf
    with pytest.raises(DegenerateUpdateError):
        update_weights(b, np.array([0.0, 0.0]))


def test_update_rejects_negative_likelihood():
    b = small_belief([0.5, 0.5])
    with pytest.raises(ValueError):
        update_weights(b, np.array([-1.0, 1.0]))


def test_ess_uniform_and_degenerate():
    assert effective_sample_size(small_belief([0.25] * 4, thetas=[0, 1, 0, 1])) == pytest.approx(4.0)
    assert effective_sample_size(small_belief([1.0, 0.0])) == pytest.approx(1.0)
    assert effective_sample_size(
        small_belief([0.5, 0.25, 0.25], thetas=[0, 1, 0])
    ) == pytest.approx(1.0 / 0.375)


@given(st.integers(min_value=2, max_value=64), st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_ess_bounds_random_weights(n, seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(n))
    b = ParticleBelief(np.zeros(n, dtype=int), np.zeros((n, 1)), w, np.zeros((1, 1)), seed=0)
    ess = effective_sample_size(b)
    assert 1.0 - 1e-9 <= ess <= n + 1e-9


def test_resample_all_mass_on_one_particle():
    b = ParticleBelief(
        np.array([0, 1, 1]),
        np.array([[1.0], [2.0], [3.0]]),
        np.array([1.0, 0.0, 0.0]),
        np.arange(2, dtype=float)[:, None],
        seed=0,
    )
    r = resample(b)
    np.testing.assert_array_equal(r.thetas, [0, 0, 0])
    np.testing.assert_allclose(r.states, [[1.0], [1.0], [1.0]])
    np.testing.assert_allclose(r.weights, 1.0 / 3.0)


def test_resample_deterministic_given_state():
    b = init_belief(SUPPORT4, PRIOR4, STATE_PRIOR, 200, seed=9)
    b = update_weights(b, np.linspace(0.1, 2.0, 200))
    r1, r2 = resample(b), resample(b)
    np.testing.assert_array_equal(r1.states, r2.states)
    np.testing.assert_array_equal(r1.thetas, r2.thetas)


def test_resample_conditionally_unbiased_copy_counts():
    n = 64
    rng = np.random.default_rng(0)
    w = rng.dirichlet(np.ones(n))
    counts = np.zeros(n)
    trials = 10_000
    for trial in range(trials):
        b = ParticleBelief(
            np.zeros(n, dtype=int), np.arange(n, dtype=float)[:, None], w,
            np.zeros((1, 1)), seed=trial,
        )
        idx = resample(b).states[:, 0].astype(int)
        counts += np.bincount(idx, minlength=n)
    mean_copies = counts / trials
    np.testing.assert_allclose(mean_copies, n * w, atol=0.03)


def test_resample_preserves_theta_marginal_in_expectation():
    n = 40
    rng = np.random.default_rng(1)
    w = rng.dirichlet(np.ones(n))
    thetas = rng.integers(0, 4, size=n)
    pre = np.bincount(thetas, weights=w, minlength=4)
    acc = np.zeros(4)
    trials = 10_000
    for trial in range(trials):
        b = ParticleBelief(thetas, np.zeros((n, 1)), w, np.zeros((4, 1)), seed=trial)
        acc += theta_marginal(resample(b))
    np.testing.assert_allclose(acc / trials, pre, atol=0.01)


def test_propagate_identity_and_linear():
    b = small_belief([0.5, 0.5])
    out = propagate(b, lambda th, x, w, rng: x, None)
    np.testing.assert_array_equal(out.states, b.states)
    b2 = ParticleBelief(
        np.array([0, 1]), np.array([[1.0], [2.0]]), np.array([0.5, 0.5]),
        np.arange(2, dtype=float)[:, None], seed=0,
    )
    out2 = propagate(b2, lambda th, x, w, rng: 2.0 * x, None)
    np.testing.assert_allclose(out2.states, [[2.0], [4.0]])
    np.testing.assert_allclose(out2.weights, b2.weights)


def test_propagate_nonfinite_raises_with_index():
    b = small_belief([0.5, 0.5])

    def bad(th, x, w, rng):
        out = x.copy()
        out[1, 0] = np.nan
        return out

    with pytest.raises(PropagationError) as err:
        propagate(b, bad, None)
    assert err.value.particle_indices == [1]


def test_theta_marginal_examples():
    b = init_belief(SUPPORT4, PRIOR4, STATE_PRIOR, 400, seed=0)
    np.testing.assert_allclose(theta_marginal(b), PRIOR4, atol=1e-12)
    grouped = ParticleBelief(
        np.array([0, 0, 1, 1]), np.zeros((4, 1)), np.array([0.1, 0.3, 0.2, 0.4]),
        np.arange(2, dtype=float)[:, None], seed=0,
    )
    np.testing.assert_allclose(theta_marginal(grouped), [0.4, 0.6], atol=1e-12)
    all_on_first = small_belief([1.0, 0.0])
    np.testing.assert_allclose(theta_marginal(all_on_first), [1.0, 0.0])


def test_mgf_point_mass_at_origin():
    b = ParticleBelief(
        np.array([0]), np.zeros((1, 1)), np.array([1.0]), np.zeros((1, 1)), seed=0
    )
    feats = mgf_features(b, np.array([[1.0, 1.0], [-2.0, 0.5], [0.0, 0.0]]), scale=1.0)
    np.testing.assert_allclose(feats.mgf_values, 1.0)
    np.testing.assert_allclose(feats.first_moment, [0.0, 0.0])


def test_mgf_point_mass_general():
    b = ParticleBelief(
        np.array([0]), np.array([[2.0]]), np.array([1.0]), np.array([[1.0]]), seed=0
    )
    v = np.array([[0.3, -0.7]])
    feats = mgf_features(b, v, scale=0.5)
    z = np.array([1.0, 2.0])  # (theta, x)
    assert feats.mgf_values[0] == pytest.approx(np.exp(0.5 * v[0] @ z), rel=1e-12)
    np.testing.assert_allclose(feats.first_moment, z)


def test_mgf_gaussian_cloud_matches_analytic():
    rng = np.random.default_rng(0)
    n = 10_000
    states = rng.standard_normal((n, 1))
    b = ParticleBelief(
        np.zeros(n, dtype=int), states, np.full(n, 1.0 / n), np.zeros((1, 1)), seed=0
    )
    feats = mgf_features(b, np.array([[0.0, 1.0]]), scale=1.0)
    assert feats.mgf_values[0] == pytest.approx(np.exp(0.5), rel=0.05)


def test_mgf_cap_prevents_overflow():
    b = ParticleBelief(
        np.array([0]), np.array([[1e6]]), np.array([1.0]), np.array([[0.0]]), seed=0
    )
    feats = mgf_features(b, np.array([[0.0, 1.0]]), scale=1.0)
    assert np.isfinite(feats.mgf_values[0])
    assert feats.mgf_values[0] == pytest.approx(np.exp(30.0))


def test_mgf_standardizer_applied():
    b = ParticleBelief(
        np.array([0]), np.array([[4.0]]), np.array([1.0]), np.array([[2.0]]), seed=0
    )
    feats = mgf_features(
        b, np.array([[1.0, 1.0]]), scale=1.0,
        standardizer=(np.array([2.0, 4.0]), np.array([1.0, 1.0])),
    )
    np.testing.assert_allclose(feats.mgf_values, 1.0)  # standardized cloud sits at 0
    np.testing.assert_allclose(feats.first_moment, [2.0, 4.0])  # raw first moment


def test_json_round_trip():
    b = init_belief(SUPPORT4, PRIOR4, STATE_PRIOR, 50, seed=3)
    b = update_weights(b, np.linspace(0.5, 1.5, 50))
    restored = belief_from_json(belief_to_json(b))
    np.testing.assert_array_equal(restored.thetas, b.thetas)
    np.testing.assert_array_equal(restored.states, b.states)
    np.testing.assert_array_equal(restored.weights, b.weights)
    assert restored.seed == b.seed and restored.draws == b.draws
    r1, r2 = resample(b), resample(restored)
    np.testing.assert_array_equal(r1.states, r2.states)


def test_pipeline_determinism():
    def pipeline():
        b = init_belief(SUPPORT4, PRIOR4, STATE_PRIOR, 128, seed=7)
        for t in range(5):
            b = propagate(b, lambda th, x, w, rng: x + 0.1 * rng.standard_normal(x.shape), None)
            b = update_weights_log(b, -0.5 * np.sum((b.states - 15.0) ** 2, axis=1))
            if effective_sample_size(b) < 64:
                b = resample(b)
        return b

    b1, b2 = pipeline(), pipeline()
    np.testing.assert_array_equal(b1.states, b2.states)
    np.testing.assert_array_equal(b1.weights, b2.weights)


def test_weight_normalization_after_operations():
    b = init_belief(SUPPORT4, PRIOR4, STATE_PRIOR, 256, seed=1)
    rng = np.random.default_rng(0)
    for _ in range(10):
        b = update_weights_log(b, rng.normal(size=256))
        assert abs(b.weights.sum() - 1.0) < 1e-9
        b = resample(b)
        assert abs(b.weights.sum() - 1.0) < 1e-9


def test_bayes_consistency_linear_gaussian():
    # exact-filter oracle; reduced budget here, full budget in the acceptance suite
    toy = LinearGaussianToy()
    prior = np.full(4, 0.25)
    rng = np.random.default_rng(99)
    tvs = []
    for n in (256, 2048):
        errs = []
        for s in range(8):
            sim = np.random.default_rng([17, s])
            ys = toy.simulate(s % 4, 50, sim)
            exact = toy.exact_posterior(ys, prior)
            approx = toy.particle_posterior(ys, prior, n, int(rng.integers(2**31)))
            errs.append(0.5 * np.abs(exact - approx).sum())
        tvs.append(np.mean(errs))
    assert tvs[1] < tvs[0]
    assert tvs[1] < 0.12
