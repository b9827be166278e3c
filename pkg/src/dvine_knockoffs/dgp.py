"""Data-generating processes for the simulation harness.

Four covariate designs: an AR(1) multivariate normal, a t-tailed Markov
chain, a truncated D-vine with skew-t margins (pair-copula Kendall tau
decaying as 0.7^tree, truncated once below 0.1), and a previously fitted
D-vine replayed through empirical quantiles.  Response models are Gaussian
and logistic with signal amplitude delta = amplitude / sqrt(n).
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.special import gammaln, stdtr, stdtrit

from .dvine import DVineModel, simulate
from .errors import DimensionError, DomainError
from .knockoffs import MarginalTransform, quantile_type8
from .pair_copula import PairCopulaSpec, tau_to_param

DEFAULT_SKEW_T = (0.0, 1.0, 4.0, 5.0)  # location, scale^2, shape, dof


# ----------------------------------------------------------------- skew-t law

class SkewT:
    """Four-parameter skew-t distribution (location, scale^2, shape, dof).

    Density 2/omega * t_nu(z) * T_(nu+1)(shape * z * sqrt((nu+1)/(nu+z^2))).
    The CDF integrates the density on a quantile-spaced grid; the quantile
    function inverts it with Newton polish (tolerance well below 1e-8).
    """

    GRID_SIZE = 8192

    def __init__(self, mu=0.0, omega2=1.0, shape=0.0, nu=5.0):
        if omega2 <= 0 or nu <= 0:
            raise DomainError("skew-t needs omega2 > 0 and nu > 0")
        self.mu = float(mu)
        self.omega = float(np.sqrt(omega2))
        self.shape = float(shape)
        self.nu = float(nu)
        self._grid = None

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.omega
        nu = self.nu
        log_t = (gammaln((nu + 1) / 2) - gammaln(nu / 2)
                 - 0.5 * np.log(nu * np.pi) - (nu + 1) / 2 * np.log1p(z * z / nu))
        skew_arg = self.shape * z * np.sqrt((nu + 1.0) / (nu + z * z))
        return 2.0 / self.omega * np.exp(log_t) * stdtr(nu + 1.0, skew_arg)

    def _build_grid(self):
        p_lo = 1e-12
        qs = np.linspace(p_lo, 1.0 - p_lo, self.GRID_SIZE)
        xs = self.mu + self.omega * stdtrit(self.nu, qs)
        pdf = self.pdf(xs)
        cum = integrate.cumulative_simpson(pdf, x=xs, initial=0.0)
        tail, _ = integrate.quad(self.pdf, -np.inf, xs[0])
        cum = np.clip(cum + tail, 0.0, 1.0)
        cum = np.maximum.accumulate(cum)
        interp = PchipInterpolator(xs, cum)
        self._grid = (xs, cum, interp, interp.derivative())

    def cdf(self, x):
        if self._grid is None:
            self._build_grid()
        xs, cum, interp, _ = self._grid
        x = np.asarray(x, dtype=float)
        out = np.clip(interp(np.clip(x, xs[0], xs[-1])), 0.0, 1.0)
        out = np.where(x < xs[0], 0.0, out)
        out = np.where(x > xs[-1], 1.0, out)
        return out

    def ppf(self, s):
        if self._grid is None:
            self._build_grid()
        xs, cum, interp, deriv = self._grid
        s = np.clip(np.asarray(s, dtype=float), cum[0], cum[-1])
        x = np.interp(s, cum, xs)
        for _ in range(6):  # Newton polish with the interpolant's own slope
            f = interp(x) - s
            d = np.maximum(deriv(x), 1e-300)
            x = np.clip(x - f / d, xs[0], xs[-1])
        return x


def sample_skew_t(mu, omega2, alpha_shape, nu, n, rng):
    """Draws via the skew-normal-over-chi construction."""
    rng = np.random.default_rng(rng)
    delta = alpha_shape / np.sqrt(1.0 + alpha_shape * alpha_shape)
    w0 = np.abs(rng.standard_normal(n))
    w1 = rng.standard_normal(n)
    z = delta * w0 + np.sqrt(1.0 - delta * delta) * w1
    v = rng.chisquare(nu, size=n)
    return mu + np.sqrt(omega2) * z / np.sqrt(v / nu)


# ------------------------------------------------------------------ DGP specs

@dataclass(frozen=True)
class DGPSpec:
    kind: str                    # mvn_ar1 | t_markov | trunc_dvine | fitted_dvine
    n: int
    p: int
    rho: float = 0.5             # mvn_ar1, t_markov
    nu: float = 5.0              # t_markov innovation dof
    family: str = "gumbel"       # trunc_dvine pair-copula family
    marginal: tuple = DEFAULT_SKEW_T
    model_path: Optional[str] = None  # fitted_dvine

    def __post_init__(self):
        if self.kind not in ("mvn_ar1", "t_markov", "trunc_dvine", "fitted_dvine"):
            raise DomainError(f"unknown DGP kind {self.kind!r}")
        if self.kind in ("mvn_ar1", "t_markov") and not -1.0 < self.rho < 1.0:
            raise DomainError("rho must lie in (-1, 1)")
        if self.kind == "t_markov" and self.nu <= 2.0:
            raise DomainError("t_markov needs nu > 2 for unit-variance scaling")

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "p": self.p, "rho": self.rho,
                "nu": self.nu, "family": self.family,
                "marginal": list(self.marginal), "model_path": self.model_path}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "marginal" in d and d["marginal"] is not None:
            d["marginal"] = tuple(d["marginal"])
        return cls(**d)


@dataclass(frozen=True)
class ResponseSpec:
    family: str = "gaussian"      # or logistic
    amplitude: float = 10.0
    nonnull_fraction: float = 0.2
    scheme: str = "two_sided_uniform"  # or balanced_sign
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.family not in ("gaussian", "logistic"):
            raise DomainError(f"unknown response family {self.family!r}")
        if self.scheme not in ("two_sided_uniform", "balanced_sign"):
            raise DomainError(f"unknown coefficient scheme {self.scheme!r}")
        if self.amplitude < 0 or not 0.0 <= self.nonnull_fraction <= 1.0:
            raise DomainError("amplitude >= 0 and nonnull_fraction in [0, 1]")

    def to_dict(self):
        return {"family": self.family, "amplitude": self.amplitude,
                "nonnull_fraction": self.nonnull_fraction,
                "scheme": self.scheme, "noise_sd": self.noise_sd}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# ------------------------------------------------------------------ generators

def gen_mvn_ar1(spec, rng):
    """Rows i.i.d. N(0, Sigma) with Sigma_ij = rho^|i-j| via the AR recursion."""
    rng = np.random.default_rng(rng)
    n, p, rho = spec.n, spec.p, spec.rho
    X = np.empty((n, p))
    X[:, 0] = rng.standard_normal(n)
    scale = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + scale * rng.standard_normal(n)
    return X


def gen_t_markov(spec, rng):
    """t-tailed Markov chain with unit-variance scaled t innovations."""
    rng = np.random.default_rng(rng)
    n, p, rho, nu = spec.n, spec.p, spec.rho, spec.nu
    tscale = np.sqrt((nu - 2.0) / nu)
    X = np.empty((n, p))
    X[:, 0] = tscale * rng.standard_t(nu, size=n)
    scale = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + scale * tscale * rng.standard_t(nu, size=n)
    return X


def trunc_dvine_model(p, family="gumbel", tau_base=0.7, tau_floor=0.1):
    """D-vine whose tree-i copulas share tau = tau_base^i, truncated below
    tau_floor (all trees from there on are independence)."""
    trees = []
    for t in range(1, p):
        tau = tau_base ** t
        if tau < tau_floor:
            break
        spec = tau_to_param(family, 0, tau)
        trees.append(tuple(spec for _ in range(p - t)))
    return DVineModel(order=tuple(range(p)), trunc_level=len(trees),
                      trees=tuple(trees))


def gen_trunc_dvine_dgp(spec, rng):
    """Simulate the decaying-tau vine and push margins through skew-t quantiles."""
    rng = np.random.default_rng(rng)
    model = trunc_dvine_model(spec.p, spec.family)
    U = simulate(model, spec.n, rng)
    marginal = SkewT(spec.marginal[0], spec.marginal[1], spec.marginal[2],
                     spec.marginal[3])
    X = np.empty_like(U)
    for j in range(spec.p):
        X[:, j] = marginal.ppf(U[:, j])
    return X


def load_fitted_dvine(model_path):
    """A vine plus optional empirical marginals stored in one JSON file."""
    with open(model_path) as fh:
        payload = json.load(fh)
    model = DVineModel.from_dict(payload["vine"] if "vine" in payload else payload)
    marginals = None
    if "marginals" in payload:
        marginals = [MarginalTransform(np.asarray(col, dtype=float))
                     for col in payload["marginals"]]
    return model, marginals


def save_fitted_dvine(model, marginals, path):
    payload = {"vine": model.to_dict()}
    if marginals is not None:
        payload["marginals"] = [list(map(float, m.sorted_sample))
                                for m in marginals]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def gen_fitted_dvine_dgp(spec, rng):
    rng = np.random.default_rng(rng)
    model, marginals = load_fitted_dvine(spec.model_path)
    if model.dim != spec.p:
        raise DimensionError(
            f"stored vine has dimension {model.dim}, spec wants p={spec.p}")
    U = simulate(model, spec.n, rng)
    if marginals is None:
        return U
    X = np.empty_like(U)
    for j in range(spec.p):
        X[:, j] = quantile_type8(marginals[j], U[:, j])
    return X


_GENERATORS = {"mvn_ar1": gen_mvn_ar1, "t_markov": gen_t_markov,
               "trunc_dvine": gen_trunc_dvine_dgp,
               "fitted_dvine": gen_fitted_dvine_dgp}


def generate_X(spec, rng):
    return _GENERATORS[spec.kind](spec, rng)


# ----------------------------------------------------------- response assembly

def gen_coefficients(p, amplitude, n, scheme, rng, nonnull_fraction=0.2):
    """Sparse coefficient vector: a random 20% (by default) of the indices
    carry signals of magnitude delta/2..delta with delta = amplitude/sqrt(n)."""
    rng = np.random.default_rng(rng)
    beta = np.zeros(p)
    k = int(round(nonnull_fraction * p))
    if k == 0 or amplitude == 0.0:
        return beta, np.array([], dtype=int)
    nonnull = np.sort(rng.choice(p, size=k, replace=False))
    delta = amplitude / np.sqrt(n)
    if scheme == "two_sided_uniform":
        mags = rng.uniform(delta / 2.0, delta, size=k)
        signs = rng.choice([-1.0, 1.0], size=k)
        beta[nonnull] = mags * signs
    else:  # balanced_sign: paired positive/negative magnitudes
        half = k // 2
        mags = rng.uniform(delta / 2.0, delta, size=k - half)
        values = np.concatenate([mags, -mags[:half]])
        beta[nonnull] = values
    return beta, nonnull


def gen_response(X, beta, family, rng, noise_sd=1.0):
    rng = np.random.default_rng(rng)
    eta = X @ beta
    if family == "gaussian":
        return eta + noise_sd * rng.standard_normal(X.shape[0])
    if family == "logistic":
        prob = 1.0 / (1.0 + np.exp(-eta))
        return rng.binomial(1, prob).astype(float)
    raise DomainError(f"unknown response family {family!r}")


IMBALANCE_BRACKET = (0.3, 0.7)


def generate_dataset(dgp, response, seed_seq, max_tries=200):
    """One (X, beta, nonnull, y) draw; skew-margin logistic scenarios are
    resampled until the positive-class share falls inside [0.3, 0.7]."""
    if isinstance(seed_seq, (int, np.integer)) or seed_seq is None:
        seed_seq = np.random.SeedSequence(seed_seq)
    reject = (response.family == "logistic"
              and dgp.kind in ("trunc_dvine", "fitted_dvine"))
    for _ in range(max_tries):
        s_x, s_b, s_y = seed_seq.spawn(3)
        X = generate_X(dgp, np.random.default_rng(s_x))
        beta, nonnull = gen_coefficients(
            dgp.p, response.amplitude, dgp.n, response.scheme,
            np.random.default_rng(s_b),
            nonnull_fraction=response.nonnull_fraction)
        y = gen_response(X, beta, response.family, np.random.default_rng(s_y),
                         noise_sd=response.noise_sd)
        if not reject:
            return X, beta, nonnull, y
        share = float(np.mean(y))
        if IMBALANCE_BRACKET[0] <= share <= IMBALANCE_BRACKET[1]:
            return X, beta, nonnull, y
    raise RuntimeError(f"no balanced dataset within {max_tries} draws")
