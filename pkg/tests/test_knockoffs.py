import numpy as np
import pytest
from scipy.stats import kendalltau

from dvine_knockoffs.dvine import inverse_rosenblatt
from dvine_knockoffs.errors import DegenerateData
from dvine_knockoffs.knockoffs import (KnockoffMatrix, MarginalTransform,
                                       SecondOrderGaussianSampler, TDCKConfig,
                                       TDCKSampler, pseudo_observations,
                                       quantile_type8,
                                       second_order_gaussian_sample,
                                       tdck_sample)


def ar1_gaussian(n, p, rho, seed):
    rng = np.random.default_rng(seed)
    X = np.empty((n, p))
    X[:, 0] = rng.standard_normal(n)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + np.sqrt(1 - rho * rho) * rng.standard_normal(n)
    return X


# ---------------------------------------------------------- pseudo-observations

def test_pseudo_observations_rank_formula():
    U = pseudo_observations(np.array([[3.2], [1.1], [5.0]]))
    assert np.allclose(U[:, 0], [0.5, 0.25, 0.75])


def test_pseudo_observations_sorted_column():
    U = pseudo_observations(np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.allclose(U[:, 0], [0.2, 0.4, 0.6, 0.8])


def test_pseudo_observations_ties_average_rank():
    U = pseudo_observations(np.array([1.0, 1.0, 2.0]))
    assert np.allclose(U[:, 0], [0.375, 0.375, 0.75])


def test_pseudo_observations_preserves_order_and_range():
    rng = np.random.default_rng(0)
    x = rng.standard_cauchy(500)
    U = pseudo_observations(x)
    assert np.all((U > 0) & (U < 1))
    assert np.array_equal(np.argsort(U[:, 0]), np.argsort(x))


def test_pseudo_observations_errors():
    with pytest.raises(DegenerateData):
        pseudo_observations(np.array([1.0]))
    with pytest.raises(DegenerateData):
        pseudo_observations(np.full((10, 2), 3.0))


# -------------------------------------------------------------- type-8 quantile

def test_quantile_type8_definitional_values():
    tr = MarginalTransform(np.array([1.0, 2.0, 3.0, 4.0]))
    assert quantile_type8(tr, 0.5) == pytest.approx(2.5)
    assert quantile_type8(tr, 0.0) == 1.0
    assert quantile_type8(tr, 1.0) == 4.0
    tr2 = MarginalTransform(np.array([1.0, 3.0]))
    assert quantile_type8(tr2, 0.5) == pytest.approx(2.0)
    with pytest.raises(DegenerateData):
        MarginalTransform(np.array([5.0]))


def test_quantile_type8_matches_definitional_oracle():
    rng = np.random.default_rng(1)
    xs = np.sort(rng.standard_normal(37))
    tr = MarginalTransform(xs)
    n = len(xs)
    for s in rng.uniform(size=200):
        h = np.clip((n + 1.0 / 3.0) * s + 1.0 / 3.0, 1.0, n)
        lo = int(np.floor(h))
        expected = xs[lo - 1] + (h - lo) * (xs[min(lo, n - 1) + 1 - 1] - xs[lo - 1]) \
            if lo < n else xs[-1]
        assert quantile_type8(tr, s) == expected


def test_quantile_type8_matches_numpy_median_unbiased():
    rng = np.random.default_rng(2)
    xs = rng.standard_normal(101)
    tr = MarginalTransform(xs)
    s = rng.uniform(0.01, 0.99, 50)
    got = quantile_type8(tr, s)
    expected = np.quantile(xs, s, method="median_unbiased")
    assert np.allclose(got, expected, atol=1e-12)


# ------------------------------------------------------------------ TDCK sampler

def test_tdck_p1_resamples_marginal():
    rng = np.random.default_rng(3)
    X = rng.gamma(2.0, size=(2000, 1))
    km = tdck_sample(X, TDCKConfig(family_set=("gaussian",)), rng=11)
    assert km.source == "tdck"
    tau = kendalltau(X[:, 0], km.X_tilde[:, 0]).statistic
    assert abs(tau) < 0.05


def test_tdck_prefix_consistency_inside_sampler():
    X = ar1_gaussian(300, 5, rho=0.6, seed=4)
    sampler = TDCKSampler(X, TDCKConfig(family_set=("gaussian",)))
    rng = np.random.default_rng(9)
    v_new = rng.uniform(0.02, 0.98, size=(300, 5))
    full = inverse_rosenblatt(sampler.model, np.hstack([sampler._V_fwd, v_new]))
    assert np.max(np.abs(full[:, :5] - sampler._U_ord)) < 1e-6


def test_tdck_moments_and_lag_tau():
    X = ar1_gaussian(500, 10, rho=0.7, seed=5)
    km = tdck_sample(X, TDCKConfig(family_set=("gaussian",), indep_test=True),
                     rng=21)
    Xt = km.X_tilde
    se_mean = X.std(axis=0, ddof=1) / np.sqrt(X.shape[0])
    assert np.all(np.abs(Xt.mean(axis=0) - X.mean(axis=0)) < 3 * 3 * se_mean)
    # variance ratio sanity (quantile resampling keeps the spread)
    assert np.all(np.abs(Xt.var(axis=0) / X.var(axis=0) - 1.0) < 0.35)
    lag_x = np.mean([kendalltau(X[:, j], X[:, j + 1]).statistic for j in range(9)])
    lag_xt = np.mean([kendalltau(Xt[:, j], Xt[:, j + 1]).statistic for j in range(9)])
    assert abs(lag_x - lag_xt) < 0.1


def test_tdck_support_within_original_range():
    rng = np.random.default_rng(6)
    X = rng.standard_t(df=3, size=(400, 4))
    km = tdck_sample(X, TDCKConfig(family_set=("gaussian", "clayton")), rng=2)
    for j in range(4):
        assert km.X_tilde[:, j].min() >= X[:, j].min()
        assert km.X_tilde[:, j].max() <= X[:, j].max()


def test_tdck_deterministic():
    X = ar1_gaussian(200, 6, rho=0.5, seed=7)
    cfg = TDCKConfig(family_set=("gaussian",))
    a = tdck_sample(X, cfg, rng=77)
    b = tdck_sample(X, cfg, rng=77)
    assert np.array_equal(a.X_tilde, b.X_tilde)
    sampler = TDCKSampler(X, cfg)
    c = sampler.sample(np.random.default_rng(77))
    assert np.array_equal(a.X_tilde, c.X_tilde)


def test_truncation_decorrelates_knockoffs():
    # mean |corr(X_j, X~_j)| under the standard truncation must be strictly
    # below a non-truncated fit of the same duplicated data
    X = ar1_gaussian(1000, 20, rho=0.8, seed=8)
    cfg_trunc = TDCKConfig(family_set=("gaussian",), indep_test=True)
    cfg_full = TDCKConfig(family_set=("gaussian",), indep_test=True,
                          trunc_level=2 * 20 - 1)
    kt = tdck_sample(X, cfg_trunc, rng=31)
    kf = tdck_sample(X, cfg_full, rng=31)

    def mean_abs_corr(A, B):
        return np.mean([abs(np.corrcoef(A[:, j], B[:, j])[0, 1])
                        for j in range(A.shape[1])])

    assert mean_abs_corr(X, kt.X_tilde) < mean_abs_corr(X, kf.X_tilde)


def test_tdck_config_round_trip():
    cfg = TDCKConfig(family_set=("gaussian",), psi0=0.85, seed=3)
    assert TDCKConfig.from_dict(cfg.to_dict()) == cfg


# -------------------------------------------------- second-order Gaussian baseline

def test_second_order_identity_covariance_decouples():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((2000, 5))
    km = second_order_gaussian_sample(X, rng=1)
    assert km.source == "second_order_gaussian"
    for j in range(5):
        assert abs(np.corrcoef(X[:, j], km.X_tilde[:, j])[0, 1]) < 0.08


def test_second_order_moment_match():
    X = ar1_gaussian(4000, 4, rho=0.6, seed=12)
    sampler = SecondOrderGaussianSampler(X)
    km = sampler.sample(np.random.default_rng(5))
    Xt = km.X_tilde
    sigma = np.cov(X, rowvar=False)
    assert np.allclose(Xt.mean(axis=0), X.mean(axis=0), atol=0.15)
    assert np.allclose(np.cov(Xt, rowvar=False), sigma, atol=0.15)
    # cross covariance: cov(X_j, X~_k) = Sigma_jk - delta_jk s_j
    cross = np.array([[np.cov(X[:, j], Xt[:, k])[0, 1] for k in range(4)]
                      for j in range(4)])
    off = ~np.eye(4, dtype=bool)
    assert np.allclose(cross[off], sigma[off], atol=0.15)


def test_second_order_p1():
    rng = np.random.default_rng(13)
    X = 2.0 + 1.5 * rng.standard_normal((3000, 1))
    km = second_order_gaussian_sample(X, rng=3)
    assert km.X_tilde.mean() == pytest.approx(2.0, abs=0.15)
    assert km.X_tilde.var() == pytest.approx(1.5 ** 2, abs=0.3)


def test_second_order_deterministic():
    X = ar1_gaussian(300, 5, rho=0.4, seed=14)
    a = second_order_gaussian_sample(X, rng=9)
    b = second_order_gaussian_sample(X, rng=9)
    assert np.array_equal(a.X_tilde, b.X_tilde)
