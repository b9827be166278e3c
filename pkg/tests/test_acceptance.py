"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
summary lines.  The replication studies are sized for a workstation; worker
count adapts to the machine.
"""

import itertools
import json
import os
import time

import numpy as np
import pytest

from dvine_knockoffs.dgp import DGPSpec, ResponseSpec
from dvine_knockoffs.dvine import (extract_prefix_subvine, fit_dvine,
                                   inverse_rosenblatt, rosenblatt)
from dvine_knockoffs.experiment import ExperimentConfig, run_experiment
from dvine_knockoffs.knockoffs import (MarginalTransform, TDCKConfig,
                                       TDCKSampler, quantile_type8)
from dvine_knockoffs.lasso import lasso_fit
from dvine_knockoffs.pair_copula import (COND_ON_FIRST, COND_ON_SECOND,
                                         PairCopulaSpec, copula_cdf,
                                         copula_pdf, hfunc, hinv,
                                         param_to_tau, tau_to_param)
from dvine_knockoffs.selection import (DTDCKeConfig, derandomized_select,
                                       ebh_select, knockoff_evalues,
                                       knockoff_select, knockoff_threshold)

N_JOBS = min(8, os.cpu_count() or 1)


def report(num, name, detail):
    print(f"\nACCEPTANCE {num} ({name}): PASS [{detail}]")


# -------------------------------------------------------------- criterion 1

def test_criterion_1_knockoff_ebh_equivalence():
    rng = np.random.default_rng(20240901)
    t0 = time.perf_counter()
    for _ in range(10_000):
        p = int(rng.integers(3, 50))
        W = rng.standard_normal(p) * rng.uniform(0.5, 3.0)
        W[rng.uniform(size=p) < 0.1] = 0.0
        alpha = rng.uniform(0.02, 0.98)
        T = knockoff_threshold(W, alpha)
        direct = knockoff_select(W, T)
        via_ebh = ebh_select(knockoff_evalues(W, T), alpha)
        assert np.array_equal(direct, via_ebh)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report(1, "knockoff/e-BH equivalence",
           f"10^4 random W vectors, exact set equality, {elapsed:.1f}s")


# -------------------------------------------------------------- criterion 2

def test_criterion_2_fdr_control_mvn():
    cfg = ExperimentConfig(
        dgp=DGPSpec("mvn_ar1", n=200, p=20, rho=0.5),
        response=ResponseSpec(family="gaussian", amplitude=10.0,
                              nonnull_fraction=0.2),
        filter=DTDCKeConfig(alpha_kn=0.1, alpha_ebh=0.2, M=10, sampler="tdck",
                            tdck=TDCKConfig(family_set=("gaussian",),
                                            indep_test=True)),
        n_sim=50, seed=2024)
    res = run_experiment(cfg, n_jobs=N_JOBS)
    assert len(res.reps) == 50
    bound = 0.20 + 2.0 * res.fdr_se
    assert res.fdr <= bound
    assert bound <= 0.30
    report(2, "FDR control, desk-scale AR(1) normal",
           f"FDR {res.fdr:.3f} <= {bound:.3f}, power {res.power:.3f}, "
           f"{res.wallclock_s:.0f}s")


# -------------------------------------------------------------- criterion 3

def test_criterion_3_power_ordering_t_markov():
    # alpha levels and signal count are free at desk scale; the filter can
    # only fire with >= 1/alpha_kn discoveries, so 10 signals is the
    # feasibility bound at alpha_kn = 0.1
    def cfg(sampler):
        return ExperimentConfig(
            dgp=DGPSpec("t_markov", n=300, p=30, rho=0.8, nu=5.0),
            response=ResponseSpec(family="gaussian", amplitude=8.0,
                                  nonnull_fraction=1.0 / 3.0),
            filter=DTDCKeConfig(alpha_kn=0.1, alpha_ebh=0.2, M=10,
                                sampler=sampler,
                                tdck=TDCKConfig(
                                    family_set=("gaussian", "studentt"),
                                    indep_test=True)),
            n_sim=30, seed=31)

    t0 = time.perf_counter()
    tdck = run_experiment(cfg("tdck"), n_jobs=N_JOBS)
    base = run_experiment(cfg("second_order_gaussian"), n_jobs=N_JOBS)
    elapsed = time.perf_counter() - t0
    gap = tdck.power - base.power
    assert gap >= 0.10
    report(3, "power ordering, t-tailed Markov chain",
           f"TDCK power {tdck.power:.3f} (FDR {tdck.fdr:.3f}) vs baseline "
           f"{base.power:.3f} (FDR {base.fdr:.3f}), gap {gap:.3f}, "
           f"{elapsed:.0f}s")


# -------------------------------------------------------------- criterion 4

def test_criterion_4_pure_null_fdr():
    cfg = ExperimentConfig(
        dgp=DGPSpec("mvn_ar1", n=200, p=20, rho=0.5),
        response=ResponseSpec(family="gaussian", amplitude=0.0,
                              nonnull_fraction=0.0),
        filter=DTDCKeConfig(alpha_kn=0.1, alpha_ebh=0.2, M=5, sampler="tdck",
                            tdck=TDCKConfig(family_set=("gaussian",),
                                            indep_test=True)),
        n_sim=200, seed=99)
    res = run_experiment(cfg, n_jobs=N_JOBS)
    assert len(res.reps) == 200
    # under the pure null every discovery is false, so FDP is 0/1 and the
    # empirical FDR is the fraction of replications with any selection
    fdps = np.array([r[1] for r in res.reps])
    assert set(np.unique(fdps)) <= {0.0, 1.0}
    binom_se = np.sqrt(0.2 * 0.8 / 200)
    assert res.fdr <= 0.20 + 2 * binom_se
    report(4, "pure-null FDR",
           f"empirical FDR {res.fdr:.3f} <= {0.20 + 2 * binom_se:.3f}, "
           f"{res.wallclock_s:.0f}s")


def test_criterion_4b_pure_null_evalue_means():
    # e-values stay nonnegative with mean <= 1 + tolerance per coordinate
    cfg = DTDCKeConfig(alpha_kn=0.1, alpha_ebh=0.2, M=5, sampler="tdck",
                       m_lasso=2, cv_folds=5,
                       tdck=TDCKConfig(family_set=("gaussian",),
                                       indep_test=True))
    rng_master = np.random.default_rng(7)
    e_sum = np.zeros(10)
    n_rep = 40
    for rep in range(n_rep):
        rng = np.random.default_rng(rng_master.integers(2 ** 63))
        X = rng.standard_normal((120, 10))
        y = rng.standard_normal(120)
        res = derandomized_select(X, y, cfg, rng=rng)
        assert np.all(res.e_avg >= 0.0)
        e_sum += res.e_avg
    means = e_sum / n_rep
    assert np.all(means <= 1.0 + 0.5)
    report("4b", "pure-null e-value means",
           f"max per-coordinate mean {means.max():.3f} <= 1.5")


# -------------------------------------------------------------- criterion 5

def test_criterion_5_numerical_suites():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)

    specs = [PairCopulaSpec("gaussian", 0, (0.5,)),
             PairCopulaSpec("studentt", 0, (0.6, 4.0)),
             PairCopulaSpec("clayton", 90, (2.0,)),
             PairCopulaSpec("gumbel", 180, (2.5,)),
             PairCopulaSpec("frank", 0, (-5.0,)),
             PairCopulaSpec("joe", 270, (2.0,)),
             PairCopulaSpec("bb1", 0, (0.8, 1.5)),
             PairCopulaSpec("bb7", 90, (1.7, 1.2))]

    # density normalization at 1e-3 (64x64 Gauss-Legendre)
    nodes, weights = np.polynomial.legendre.leggauss(64)
    x = 0.5 * (nodes + 1.0)
    ww = np.outer(0.5 * weights, 0.5 * weights)
    uu, vv = np.meshgrid(x, x)
    for spec in specs:
        assert abs(np.sum(ww * copula_pdf(spec, uu, vv)) - 1.0) < 1e-3

    # h / hinv round trips at 1e-8
    for spec in specs:
        u = rng.uniform(0.02, 0.98, 200)
        v = rng.uniform(0.02, 0.98, 200)
        w2 = hfunc(spec, COND_ON_SECOND, u, v)
        assert np.max(np.abs(hinv(spec, COND_ON_SECOND, w2, v) - u)) < 1e-8
        w1 = hfunc(spec, COND_ON_FIRST, u, v)
        assert np.max(np.abs(hinv(spec, COND_ON_FIRST, w1, u) - v)) < 1e-8

    # tau round trips at 1e-6
    for family, taus in [("gaussian", (-0.7, 0.3)), ("studentt", (0.5,)),
                         ("clayton", (0.3, 0.7)), ("gumbel", (0.4,)),
                         ("frank", (-0.6, 0.5)), ("joe", (0.45,)),
                         ("bb1", (0.5,)), ("bb7", (0.4,))]:
        for tau in taus:
            assert abs(param_to_tau(tau_to_param(family, 0, tau)) - tau) < 1e-6

    # Rosenblatt inverse identity at 1e-6 on a mixed fitted vine
    U = rng.uniform(0.02, 0.98, (300, 5))
    U[:, 1] = np.clip(0.6 * U[:, 0] + 0.4 * U[:, 1], 0.02, 0.98)
    model = fit_dvine(U, np.arange(5), trunc_level=4,
                      candidates=("gaussian", "clayton", "frank"))
    V = rng.uniform(0.02, 0.98, (150, 5))
    back = rosenblatt(model, inverse_rosenblatt(model, V))
    assert np.max(np.abs(back - V)) < 1e-6

    # prefix consistency of the knockoff construction at 1e-6
    Xar = np.empty((250, 6))
    Xar[:, 0] = rng.standard_normal(250)
    for j in range(1, 6):
        Xar[:, j] = 0.6 * Xar[:, j - 1] + 0.8 * rng.standard_normal(250)
    sampler = TDCKSampler(Xar, TDCKConfig(family_set=("gaussian",)))
    v_new = rng.uniform(0.02, 0.98, (250, 6))
    full = inverse_rosenblatt(sampler.model,
                              np.hstack([sampler._V_fwd, v_new]))
    assert np.max(np.abs(full[:, :6] - sampler._U_ord)) < 1e-6

    # Lasso KKT certificates at 1e-6
    X = rng.standard_normal((300, 25))
    beta_true = np.zeros(25)
    beta_true[[2, 11, 19]] = 0.6
    y = X @ beta_true + rng.standard_normal(300)
    lam = 0.08
    fit = lasso_fit(X, y, lam)
    Xs = (X - X.mean(axis=0)) / X.std(axis=0)
    grad = Xs.T @ ((y - y.mean()) - Xs @ fit.beta) / len(y)
    for j in range(25):
        if fit.beta[j] == 0.0:
            assert abs(grad[j]) <= lam + 1e-6
        else:
            assert abs(grad[j] - lam * np.sign(fit.beta[j])) <= 1e-6

    # type-8 quantile against the definitional formula, exact
    xs = np.sort(rng.standard_normal(57))
    tr = MarginalTransform(xs)
    for s in rng.uniform(size=300):
        h = np.clip((57 + 1.0 / 3.0) * s + 1.0 / 3.0, 1.0, 57.0)
        lo = int(np.floor(h))
        hi = min(lo + 1, 57)
        expected = xs[lo - 1] + (h - lo) * (xs[hi - 1] - xs[lo - 1])
        assert quantile_type8(tr, s) == expected

    # threshold against the brute-force oracle, exact on 10^3 random W
    for _ in range(1000):
        p = int(rng.integers(3, 40))
        W = rng.standard_normal(p)
        W[rng.uniform(size=p) < 0.15] = 0.0
        alpha = rng.uniform(0.05, 0.95)
        candidates = sorted({abs(w) for w in W if w != 0.0})
        expected = float("inf")
        for c in candidates:
            n_pos = sum(1 for w in W if w >= c)
            if n_pos and (1 + sum(1 for w in W if w <= -c)) / n_pos <= alpha:
                expected = c
                break
        assert knockoff_threshold(W, alpha) == expected

    elapsed = time.perf_counter() - t0
    assert elapsed < 300
    report(5, "numerical suites",
           f"normalization, h/hinv, tau, Rosenblatt, prefix, KKT, type-8, "
           f"threshold oracles, {elapsed:.0f}s")


# -------------------------------------------------------------- criterion 6

def test_criterion_6_worker_determinism():
    cfg = ExperimentConfig(
        dgp=DGPSpec("mvn_ar1", n=120, p=10, rho=0.5),
        response=ResponseSpec(family="gaussian", amplitude=12.0),
        filter=DTDCKeConfig(alpha_kn=0.15, alpha_ebh=0.3, M=3, sampler="tdck",
                            m_lasso=2, cv_folds=3,
                            tdck=TDCKConfig(family_set=("gaussian",),
                                            indep_test=True)),
        n_sim=8, seed=606)
    payloads = [run_experiment(cfg, n_jobs=k).to_json().encode()
                for k in (1, 4, 8)]
    assert payloads[0] == payloads[1] == payloads[2]
    report(6, "determinism across worker counts",
           f"byte-identical JSON for 1/4/8 workers ({len(payloads[0])} bytes)")
