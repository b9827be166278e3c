"""Knockoff samplers: the truncated D-vine construction and a Gaussian baseline.

The vine sampler follows the three-stage recipe: rank-transform to the
copula scale, fit a (p-1)-truncated 2p-dimensional D-vine to the duplicated
data, then per row push the observed prefix through the forward Rosenblatt
map, append fresh uniforms, invert through the full vine, and map the
knockoff block back through type-8 marginal quantiles.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .dvine import (DVineModel, extract_prefix_subvine, fit_dvine,
                    inverse_rosenblatt, rosenblatt, select_order)
from .errors import (DegenerateData, DimensionError, RowFailure,
                     SingularCovariance)


def pseudo_observations(X):
    """Rank-based map to the copula scale: u = rank / (n + 1), average ranks."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        raise DegenerateData("need at least 2 rows")
    U = np.empty_like(X)
    for j in range(X.shape[1]):
        col = X[:, j]
        if np.ptp(col) <= 0.0:
            raise DegenerateData(f"column {j} is constant")
        U[:, j] = rankdata(col, method="average") / (n + 1.0)
    return U


@dataclass(frozen=True)
class MarginalTransform:
    """Sorted sample of one variable, backing the type-8 quantile map."""

    sorted_sample: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        xs = np.sort(np.asarray(self.sorted_sample, dtype=float))
        if xs.size < 2:
            raise DegenerateData("marginal transform needs at least 2 points")
        object.__setattr__(self, "sorted_sample", xs)
        object.__setattr__(self, "n", int(xs.size))


def quantile_type8(transform, s):
    """Hyndman-Fan type-8 sample quantile, clamped at the extremes.

    h = (n + 1/3) s + 1/3 with linear interpolation between the order
    statistics at floor(h) and ceil(h).
    """
    xs = transform.sorted_sample
    n = transform.n
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    h = (n + 1.0 / 3.0) * s + 1.0 / 3.0
    h = np.clip(h, 1.0, float(n))
    lo = np.floor(h).astype(int)
    hi = np.minimum(lo + 1, n)
    frac = h - lo
    return xs[lo - 1] + frac * (xs[hi - 1] - xs[lo - 1])


@dataclass(frozen=True)
class TDCKConfig:
    """Knobs of the truncated D-vine knockoff sampler."""

    family_set: tuple = ("gaussian", "studentt", "clayton", "gumbel", "frank", "joe")
    rotation_set: str = "tau_sign"     # or "all"
    psi0: float = 0.9
    order_policy: str = "auto"         # "auto" -> Hamiltonian-path heuristic
    seed: Optional[int] = None
    trunc_level: Optional[int] = None  # None -> p-1 (the standard construction)
    indep_test: bool = False           # Kendall-tau prescreen per edge

    def to_dict(self):
        return {"family_set": list(self.family_set),
                "rotation_set": self.rotation_set, "psi0": self.psi0,
                "order_policy": self.order_policy, "seed": self.seed,
                "trunc_level": self.trunc_level, "indep_test": self.indep_test}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "family_set" in d:
            d["family_set"] = tuple(d["family_set"])
        return cls(**d)


@dataclass(frozen=True)
class KnockoffMatrix:
    """One sampled knockoff matrix plus provenance."""

    X_tilde: np.ndarray
    source: str                 # "tdck" or "second_order_gaussian"
    seed_path: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.X_tilde, dtype=float)
        if not np.all(np.isfinite(X)):
            raise DimensionError("knockoff matrix contains non-finite entries")
        object.__setattr__(self, "X_tilde", X)


class TDCKSampler:
    """Fits the truncated 2p-dimensional vine once; draws knockoffs many times.

    The fit is deterministic in the data, so repeated sampling (e.g. the M
    runs of the derandomized filter) reuses it.
    """

    def __init__(self, X, cfg=None):
        cfg = cfg or TDCKConfig()
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise DimensionError("X must be an (n, p) matrix")
        n, p = X.shape
        if n <= p:
            warnings.warn(f"n={n} <= p={p}: the vine fit may be unstable")
        self.cfg = cfg
        self.n, self.p = n, p
        self.marginals = [MarginalTransform(X[:, j]) for j in range(p)]
        U = pseudo_observations(X)
        if cfg.order_policy == "auto" and p >= 2:
            self.order = select_order(U)
        else:
            self.order = np.arange(p)
        U_ord = U[:, self.order]
        # duplicated copula-scale data: knockoff block mirrors the original
        U2 = np.hstack([U_ord, U_ord])
        trunc = cfg.trunc_level if cfg.trunc_level is not None else p - 1
        self.model = fit_dvine(U2, order=np.arange(2 * p), trunc_level=trunc,
                               candidates=cfg.family_set, psi0=cfg.psi0,
                               rotation_policy=cfg.rotation_set,
                               indep_test=cfg.indep_test)
        self.sub_model = extract_prefix_subvine(self.model, p)
        self._U_ord = np.clip(U_ord, 1e-10, 1.0 - 1e-10)
        self._V_fwd = rosenblatt(self.sub_model, self._U_ord)

    def sample(self, rng):
        """One knockoff matrix on the original scale; retries failed rows once."""
        rng = np.random.default_rng(rng)
        n, p = self.n, self.p
        v_new = np.clip(rng.uniform(size=(n, p)), 1e-12, 1.0 - 1e-12)
        full = inverse_rosenblatt(self.model, np.hstack([self._V_fwd, v_new]))
        U_tilde = full[:, p:]
        bad = ~np.all(np.isfinite(U_tilde), axis=1)
        if np.any(bad):
            v_retry = np.clip(rng.uniform(size=(int(bad.sum()), p)),
                              1e-12, 1.0 - 1e-12)
            retry = inverse_rosenblatt(
                self.model, np.hstack([self._V_fwd[bad], v_retry]))
            U_tilde[bad] = retry[:, p:]
            still = np.where(~np.all(np.isfinite(U_tilde), axis=1))[0]
            if still.size:
                raise RowFailure(still.tolist())
        # undo the variable order, then pull back to the original margins
        inv = np.argsort(self.order)
        U_tilde = U_tilde[:, inv]
        X_tilde = np.empty_like(U_tilde)
        for j in range(p):
            X_tilde[:, j] = quantile_type8(self.marginals[j], U_tilde[:, j])
        return KnockoffMatrix(X_tilde, source="tdck")


def tdck_sample(X, cfg=None, rng=None):
    """Fit the truncated D-vine knockoff model to X and draw one sample."""
    cfg = cfg or TDCKConfig()
    sampler = TDCKSampler(X, cfg)
    if rng is None:
        rng = cfg.seed
    return sampler.sample(np.random.default_rng(rng))


def _ridge_inverse(sigma):
    p = sigma.shape[0]
    scale = float(np.mean(np.diag(sigma)))
    for ridge in (0.0, 1e-8, 1e-6, 1e-4, 1e-2):
        try:
            chol = np.linalg.cholesky(sigma + ridge * scale * np.eye(p))
            inv = np.linalg.inv(chol)
            return inv.T @ inv, sigma + ridge * scale * np.eye(p)
        except np.linalg.LinAlgError:
            continue
    raise SingularCovariance("covariance not invertible after ridge repair")


class SecondOrderGaussianSampler:
    """Gaussian conditional knockoffs matching the first two sample moments.

    The diagonal uses the equicorrelated rule on the correlation matrix,
    s_j = min(2 lambda_min, 1) scaled back to the covariance diagonal.
    """

    def __init__(self, X):
        X = np.asarray(X, dtype=float)
        self.n, self.p = X.shape
        self.X = X
        self.mu = X.mean(axis=0)
        sigma = np.cov(X, rowvar=False, ddof=1)
        sigma = np.atleast_2d(sigma)
        sigma_inv, sigma = _ridge_inverse(sigma)
        sd = np.sqrt(np.diag(sigma))
        corr = sigma / np.outer(sd, sd)
        lam_min = float(np.linalg.eigvalsh(corr)[0])
        s_corr = min(2.0 * lam_min, 1.0)
        s = s_corr * np.diag(sigma)
        D = np.diag(s)
        self.cond_shift = sigma_inv @ D              # (X - mu) @ shift subtracted
        V = 2.0 * D - D @ sigma_inv @ D
        # PSD repair: clip tiny negative eigenvalues
        evals, evecs = np.linalg.eigh((V + V.T) / 2.0)
        evals = np.clip(evals, 0.0, None)
        self.chol_like = evecs @ np.diag(np.sqrt(evals))

    def sample(self, rng):
        rng = np.random.default_rng(rng)
        centered = self.X - self.mu
        mean = self.X - centered @ self.cond_shift
        z = rng.standard_normal(size=(self.n, self.p))
        return KnockoffMatrix(mean + z @ self.chol_like.T,
                              source="second_order_gaussian")


def second_order_gaussian_sample(X, rng=None):
    """Estimate moments of X and draw one second-order Gaussian knockoff."""
    return SecondOrderGaussianSampler(X).sample(np.random.default_rng(rng))
