"""Closed-form Gaussian divergences vs analytic values and quadrature oracles."""

import numpy as np
import pytest

from privshare.exceptions import DimensionMismatchError, InvalidGaussianError
from privshare.gaussians import (
    GaussianComponent,
    bhattacharyya,
    chernoff_alpha,
    gaussian_entropy,
    kl_divergence,
    pairwise_chernoff,
    pairwise_kl,
)
from privshare.verify import (
    chernoff_quadrature,
    entropy_quadrature,
    kl_quadrature,
    random_gaussian_pair,
    random_spd,
)

N01 = GaussianComponent([0.0], [[1.0]])


def test_entropy_unit_variance():
    assert gaussian_entropy(N01) == pytest.approx(0.5 * np.log(2 * np.pi * np.e), abs=1e-12)


def test_entropy_additivity_identity_2d():
    g = GaussianComponent([0.0, 0.0], np.eye(2))
    assert gaussian_entropy(g) == pytest.approx(2 * gaussian_entropy(N01), abs=1e-12)


def test_entropy_scaled_variance():
    g = GaussianComponent([0.0], [[4.0]])
    # verified against numerical integration of -int p ln p
    assert gaussian_entropy(g) == pytest.approx(1.4189385332 + 0.5 * np.log(4.0), abs=1e-9)
    assert gaussian_entropy(g) == pytest.approx(entropy_quadrature(g), rel=1e-9)


def test_kl_identity_is_zero():
    g = GaussianComponent([1.3, -0.4], [[2.0, 0.3], [0.3, 1.0]])
    assert kl_divergence(g, g) < 1e-12


def test_kl_unit_shift():
    q = GaussianComponent([1.0], [[1.0]])
    assert kl_divergence(N01, q) == pytest.approx(0.5, abs=1e-12)
    assert kl_divergence(N01, q) == pytest.approx(kl_quadrature(N01, q), rel=1e-9)


def test_kl_variance_mismatch():
    q = GaussianComponent([0.0], [[4.0]])
    expected = 0.5 * (0.25 - 1.0 + np.log(4.0))
    assert kl_divergence(N01, q) == pytest.approx(expected, abs=1e-12)
    assert kl_divergence(N01, q) == pytest.approx(kl_quadrature(N01, q), rel=1e-9)


def test_chernoff_identity_any_alpha():
    g = GaussianComponent([0.5], [[2.0]])
    for alpha in (0.0, 0.3, 0.5, 0.9, 1.0):
        assert abs(chernoff_alpha(g, g, alpha)) < 1e-12


def test_chernoff_half_mean_shift():
    q = GaussianComponent([2.0], [[1.0]])
    assert chernoff_alpha(N01, q, 0.5) == pytest.approx(0.5, abs=1e-12)


def test_chernoff_endpoints_vanish():
    p = GaussianComponent([0.7], [[1.5]])
    q = GaussianComponent([-1.0], [[0.5]])
    assert abs(chernoff_alpha(p, q, 0.0)) < 1e-12
    assert abs(chernoff_alpha(p, q, 1.0)) < 1e-12


def test_chernoff_alpha_out_of_range():
    with pytest.raises(ValueError):
        chernoff_alpha(N01, N01, 1.2)
    with pytest.raises(ValueError):
        chernoff_alpha(N01, N01, -0.1)


def test_bhattacharyya_examples():
    assert bhattacharyya(N01, N01) < 1e-12
    q = GaussianComponent([2.0], [[1.0]])
    assert bhattacharyya(N01, q) == pytest.approx(0.5, abs=1e-12)
    q9 = GaussianComponent([0.0], [[9.0]])
    assert bhattacharyya(N01, q9) == pytest.approx(0.5 * np.log(5.0 / 3.0), abs=1e-12)
    assert bhattacharyya(N01, q9) == pytest.approx(chernoff_quadrature(N01, q9, 0.5), rel=1e-9)


def test_bhattacharyya_is_chernoff_half_bitwise():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = int(rng.choice([1, 2, 3]))
        p, q = random_gaussian_pair(rng, d)
        assert bhattacharyya(p, q) == chernoff_alpha(p, q, 0.5)


def test_nonnegativity_random_pairs():
    rng = np.random.default_rng(11)
    for i in range(1000):
        d = int(rng.choice([1, 2, 3]))
        p, q = random_gaussian_pair(rng, d)
        alpha = float(rng.uniform(0.0, 1.0))
        assert kl_divergence(p, q) >= 0.0
        assert chernoff_alpha(p, q, alpha) >= 0.0
        assert bhattacharyya(p, q) >= 0.0


def test_kl_asymmetry_witness():
    p = GaussianComponent([0.0], [[1.0]])
    q = GaussianComponent([0.0], [[9.0]])
    assert abs(kl_divergence(p, q) - kl_divergence(q, p)) > 0.1


def test_oracle_equivalence_random_pairs():
    rng = np.random.default_rng(21)
    for i in range(40):
        d = 1 if i % 2 == 0 else 2
        p, q = random_gaussian_pair(rng, d)
        alpha = float(rng.uniform(0.1, 0.9))
        assert gaussian_entropy(p) == pytest.approx(entropy_quadrature(p), rel=1e-6)
        assert kl_divergence(p, q) == pytest.approx(kl_quadrature(p, q), rel=1e-6)
        assert chernoff_alpha(p, q, alpha) == pytest.approx(
            chernoff_quadrature(p, q, alpha), rel=1e-6
        )


def test_invalid_covariance_rejected():
    with pytest.raises(InvalidGaussianError):
        GaussianComponent([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])  # not PD
    with pytest.raises(InvalidGaussianError):
        GaussianComponent([0.0, 0.0], [[1.0, 0.5], [0.2, 1.0]])  # not symmetric
    with pytest.raises(InvalidGaussianError):
        GaussianComponent([0.0], [[0.0]])  # singular


def test_dimension_mismatch_rejected():
    q = GaussianComponent([0.0, 0.0], np.eye(2))
    with pytest.raises(DimensionMismatchError):
        kl_divergence(N01, q)
    with pytest.raises(DimensionMismatchError):
        chernoff_alpha(N01, q, 0.5)


def test_pairwise_matrices_match_scalar_forms():
    rng = np.random.default_rng(8)
    n, d = 6, 2
    means = rng.normal(size=(n, d))
    covs = np.stack([random_spd(rng, d) for _ in range(n)])
    kl_mat = pairwise_kl(means, covs)
    ch_mat = pairwise_chernoff(means, covs, 0.3)
    comps = [GaussianComponent(means[i], covs[i]) for i in range(n)]
    for i in range(n):
        for j in range(n):
            assert kl_mat[i, j] == pytest.approx(kl_divergence(comps[i], comps[j]), abs=1e-10)
            assert ch_mat[i, j] == pytest.approx(
                chernoff_alpha(comps[i], comps[j], 0.3), abs=1e-10
            )


def test_pairwise_diagonal_fast_path_matches_general():
    rng = np.random.default_rng(9)
    n, d = 5, 2
    means = rng.normal(size=(n, d))
    variances = rng.uniform(0.3, 2.0, size=(n, d))
    covs_diag = np.zeros((n, d, d))
    covs_diag[:, np.arange(d), np.arange(d)] = variances
    # perturb one matrix off-diagonal to force the general path
    covs_full = covs_diag.copy()
    covs_full[0, 0, 1] = covs_full[0, 1, 0] = 1e-14
    np.testing.assert_allclose(
        pairwise_kl(means, covs_diag), pairwise_kl(means, covs_full), rtol=1e-8, atol=1e-10
    )
    np.testing.assert_allclose(
        pairwise_chernoff(means, covs_diag, 0.4),
        pairwise_chernoff(means, covs_full, 0.4),
        rtol=1e-8,
        atol=1e-10,
    )
