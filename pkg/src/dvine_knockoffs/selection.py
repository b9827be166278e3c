"""Knockoff filter, knockoff e-values, e-BH selection, and derandomization.

The single-run filter thresholds the signed statistics W at

    T = min{ c in {|W_j| : W_j != 0} :
             (1 + #{j : W_j <= -c}) / max(#{j : W_j >= c}, 1) <= alpha_kn }

and the per-run e-values e_j = p 1{W_j >= T} / (1 + #{k : W_k <= -T}) turn
the filter into an e-BH procedure, which is what makes averaging over
repeated knockoff draws valid.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .knockoffs import SecondOrderGaussianSampler, TDCKConfig, TDCKSampler
from .lasso import lcd_statistic, percentile_lasso_lambda

KNOCKOFF_SAMPLERS = ("tdck", "second_order_gaussian")


def knockoff_threshold(W, alpha_kn):
    """Data-dependent threshold of the knockoff+ filter; +inf when nothing
    qualifies (empty selection)."""
    W = np.asarray(W, dtype=float)
    if not 0.0 < alpha_kn < 1.0:
        raise ValueError("alpha_kn must lie in (0, 1)")
    candidates = np.unique(np.abs(W[W != 0.0]))
    for c in candidates:
        n_pos = int(np.sum(W >= c))
        if n_pos == 0:
            continue  # ratio is effectively infinite
        ratio = (1.0 + np.sum(W <= -c)) / n_pos
        if ratio <= alpha_kn:
            return float(c)
    return float("inf")


def knockoff_select(W, T):
    """Indices with W_j >= T (0-based); empty for an infinite threshold."""
    W = np.asarray(W, dtype=float)
    if np.isinf(T):
        return np.array([], dtype=int)
    return np.flatnonzero(W >= T)


def knockoff_evalues(W, T, alpha_kn=None):
    """Per-run knockoff e-values; the all-zero vector when T = +inf."""
    W = np.asarray(W, dtype=float)
    p = W.size
    if np.isinf(T):
        return np.zeros(p)
    denom = 1.0 + np.sum(W <= -T)
    return p * (W >= T).astype(float) / denom


def ebh_select(e, alpha_ebh):
    """e-BH step-up selection on nonnegative e-values (0-based indices)."""
    e = np.asarray(e, dtype=float)
    if np.any(e < 0):
        raise ValueError("e-values must be nonnegative")
    if not 0.0 < alpha_ebh < 1.0:
        raise ValueError("alpha_ebh must lie in (0, 1)")
    p = e.size
    order = np.sort(e)[::-1]
    ks = np.arange(1, p + 1)
    qualifying = order >= p / (alpha_ebh * ks)
    if not np.any(qualifying):
        return np.array([], dtype=int)
    k_hat = int(ks[qualifying][-1])
    return np.flatnonzero(e >= p / (alpha_ebh * k_hat))


def fdp_power(selected, true_nonnull, p):
    """Realized false discovery proportion and power of one selection."""
    selected = set(int(j) for j in selected)
    true_nonnull = set(int(j) for j in true_nonnull)
    n_sel = len(selected)
    fdp = len(selected - true_nonnull) / max(n_sel, 1)
    power = len(selected & true_nonnull) / max(len(true_nonnull), 1)
    return fdp, power


@dataclass(frozen=True)
class KnockoffRun:
    """One pass of the knockoff filter."""

    W: np.ndarray
    T: float
    e_values: np.ndarray
    selected: np.ndarray

    @classmethod
    def from_statistics(cls, W, alpha_kn):
        T = knockoff_threshold(W, alpha_kn)
        return cls(W=np.asarray(W, dtype=float), T=T,
                   e_values=knockoff_evalues(W, T),
                   selected=knockoff_select(W, T))


@dataclass(frozen=True)
class DerandomizedResult:
    """Aggregated e-values over M knockoff draws plus the e-BH selection."""

    e_avg: np.ndarray
    selected: np.ndarray
    M: int
    alpha_kn: float
    alpha_ebh: float
    per_run: tuple = ()
    lambda_used: Optional[float] = None
    n_failed_runs: int = 0

    def to_dict(self):
        return {
            "selected": [int(j) for j in self.selected],
            "e_avg": [float(v) for v in self.e_avg],
            "M": int(self.M),
            "alpha_kn": self.alpha_kn,
            "alpha_ebh": self.alpha_ebh,
            "lambda": self.lambda_used,
            "runs": [{"T": (None if np.isinf(r.T) else float(r.T)),
                      "n_selected": int(r.selected.size)} for r in self.per_run],
        }


@dataclass(frozen=True)
class DTDCKeConfig:
    """Configuration of the derandomized knockoff filter."""

    alpha_kn: float = 0.1
    alpha_ebh: float = 0.2
    M: int = 50
    sampler: str = "tdck"             # or "second_order_gaussian"
    response_family: str = "gaussian"  # or "logistic"
    lambda_policy: str = "first_run"   # or "per_run"
    m_lasso: int = 10
    theta: float = 50.0
    cv_folds: int = 5
    tdck: TDCKConfig = field(default_factory=TDCKConfig)

    def __post_init__(self):
        if self.sampler not in KNOCKOFF_SAMPLERS:
            raise ValueError(f"sampler must be one of {KNOCKOFF_SAMPLERS}")
        if self.lambda_policy not in ("first_run", "per_run"):
            raise ValueError("lambda_policy must be 'first_run' or 'per_run'")


def _build_sampler(X, cfg):
    if cfg.sampler == "tdck":
        return TDCKSampler(X, cfg.tdck)
    return SecondOrderGaussianSampler(X)


def derandomized_select(X, y, cfg, rng):
    """Run the knockoff filter M times, average the e-values, apply e-BH.

    The regularization weight comes from percentile-Lasso on the first run's
    augmented design and is reused across runs under the default
    ``first_run`` policy.  A failed run is retried once, then dropped with a
    warning (the e-value average then divides by the completed-run count).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    p = X.shape[1]
    rng = np.random.default_rng(rng)
    sampler = _build_sampler(X, cfg)
    runs = []
    lam = None
    n_failed = 0
    for m in range(cfg.M):
        run = None
        for _attempt in range(2):
            try:
                km = sampler.sample(rng)
                if lam is None or cfg.lambda_policy == "per_run":
                    choice = percentile_lasso_lambda(
                        np.hstack([X, km.X_tilde]), y, K=cfg.cv_folds,
                        M_lasso=cfg.m_lasso, theta=cfg.theta, rng=rng,
                        family=cfg.response_family)
                    lam = choice.lambda_hat
                W = lcd_statistic(X, km.X_tilde, y, lam, cfg.response_family)
                run = KnockoffRun.from_statistics(W, cfg.alpha_kn)
                break
            except Exception as err:  # noqa: BLE001 - isolate per-run failures
                last_err = err
        if run is None:
            n_failed += 1
            warnings.warn(f"knockoff run {m} failed twice and was dropped: "
                          f"{last_err}")
            continue
        runs.append(run)
    if not runs:
        raise RuntimeError("all knockoff runs failed")
    e_avg = np.mean([r.e_values for r in runs], axis=0)
    selected = ebh_select(e_avg, cfg.alpha_ebh)
    return DerandomizedResult(e_avg=e_avg, selected=selected, M=len(runs),
                              alpha_kn=cfg.alpha_kn, alpha_ebh=cfg.alpha_ebh,
                              per_run=tuple(runs), lambda_used=lam,
                              n_failed_runs=n_failed)
