"""Bivariate pair copulas: rotations, evaluation, tau maps, fitting, selection.

The unrotated family math lives in :mod:`dvine_knockoffs.families`; this
module adds the counterclockwise density rotations

    c90(u, v) = c(1 - v, u),  c180(u, v) = c(1 - u, 1 - v),
    c270(u, v) = c(v, 1 - u),

maximum-likelihood fitting, and penalized family selection.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar
from scipy.stats import kendalltau

from .errors import (ConvergenceError, DegenerateData, DomainError,
                     InvalidParameter, UnattainableTau)
from .families import EPS, FAMILIES, Family

ROTATIONS = (0, 90, 180, 270)
COND_ON_SECOND = "cond_on_second"
COND_ON_FIRST = "cond_on_first"


@dataclass(frozen=True)
class PairCopulaSpec:
    """An immutable bivariate copula: family tag, rotation, parameters."""

    family: str
    rotation: int = 0
    params: tuple = ()
    loglik: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameter(f"unknown family {self.family!r}")
        if self.rotation not in ROTATIONS:
            raise InvalidParameter(f"rotation must be one of {ROTATIONS}")
        fam = FAMILIES[self.family]
        if self.rotation != 0 and not fam.rotatable:
            raise InvalidParameter(
                f"{self.family} is radially symmetric; use rotation 0 "
                "(reflection is covered by the parameter sign)")
        par = fam.check_params(np.asarray(self.params, dtype=float))
        object.__setattr__(self, "params", tuple(float(p) for p in par))

    @property
    def n_params(self):
        return len(self.params)

    def to_dict(self):
        return {"family": self.family, "rotation": self.rotation,
                "params": list(self.params)}

    @classmethod
    def from_dict(cls, d):
        return cls(family=d["family"], rotation=int(d.get("rotation", 0)),
                   params=tuple(d.get("params", ())))


INDEPENDENCE = PairCopulaSpec("independence")


def _clamp(x):
    return np.clip(np.asarray(x, dtype=float), EPS, 1.0 - EPS)


def _check_open_interval(*arrays):
    for a in arrays:
        a = np.asarray(a, dtype=float)
        if np.any(~np.isfinite(a)) or np.any(a <= 0.0) or np.any(a >= 1.0):
            raise DomainError("copula-scale inputs must lie strictly inside (0, 1)")


def _fam_par(spec):
    return FAMILIES[spec.family], np.asarray(spec.params, dtype=float)


def copula_pdf(spec, u, v):
    """Density of the rotated copula at (u, v)."""
    _check_open_interval(u, v)
    return np.exp(copula_logpdf(spec, u, v))


def copula_logpdf(spec, u, v):
    fam, par = _fam_par(spec)
    u, v = _clamp(u), _clamp(v)
    if spec.rotation == 0:
        return fam.logpdf(par, u, v)
    if spec.rotation == 90:
        return fam.logpdf(par, 1.0 - v, u)
    if spec.rotation == 180:
        return fam.logpdf(par, 1.0 - u, 1.0 - v)
    return fam.logpdf(par, v, 1.0 - u)


def copula_cdf(spec, u, v):
    """CDF of the rotated copula; accepts the closed square [0, 1]^2."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u < 0.0) or np.any(u > 1.0) or np.any(v < 0.0) or np.any(v > 1.0):
        raise DomainError("copula_cdf inputs must lie in [0, 1]")
    fam, par = _fam_par(spec)
    uc, vc = _clamp(u), _clamp(v)
    if spec.rotation == 0:
        out = fam.cdf(par, uc, vc)
    elif spec.rotation == 90:
        out = uc - fam.cdf(par, 1.0 - vc, uc)
    elif spec.rotation == 180:
        out = uc + vc - 1.0 + fam.cdf(par, 1.0 - uc, 1.0 - vc)
    else:
        out = vc - fam.cdf(par, vc, 1.0 - uc)
    out = np.clip(out, 0.0, 1.0)
    # exact uniform margins on the boundary
    out = np.where((u >= 1.0), v, out)
    out = np.where((v >= 1.0), u, out)
    out = np.where((u <= 0.0) | (v <= 0.0), 0.0, out)
    return out


def hfunc(spec, which, u, v):
    """Conditional CDF: d C/d v (cond_on_second) or d C/d u (cond_on_first)."""
    _check_open_interval(u, v)
    fam, par = _fam_par(spec)
    u, v = _clamp(u), _clamp(v)
    rot = spec.rotation
    if which == COND_ON_SECOND:
        if rot == 0:
            out = fam.hfunc(par, u, v)
        elif rot == 90:
            out = fam.hfunc(par, u, 1.0 - v)
        elif rot == 180:
            out = 1.0 - fam.hfunc(par, 1.0 - u, 1.0 - v)
        else:
            out = 1.0 - fam.hfunc(par, 1.0 - u, v)
    elif which == COND_ON_FIRST:
        # exchangeable base families: dC/du (a, b) = h(b, a)
        if rot == 0:
            out = fam.hfunc(par, v, u)
        elif rot == 90:
            out = 1.0 - fam.hfunc(par, 1.0 - v, u)
        elif rot == 180:
            out = 1.0 - fam.hfunc(par, 1.0 - v, 1.0 - u)
        else:
            out = fam.hfunc(par, v, 1.0 - u)
    else:
        raise ValueError(f"unknown conditioning direction {which!r}")
    return np.clip(out, EPS, 1.0 - EPS)


def hinv(spec, which, w, cond):
    """Inverse of ``hfunc`` in its free argument at conditioning value ``cond``."""
    _check_open_interval(w, cond)
    fam, par = _fam_par(spec)
    w, cond = _clamp(w), _clamp(cond)
    rot = spec.rotation
    if which == COND_ON_SECOND:
        if rot == 0:
            out = fam.hinv(par, w, cond)
        elif rot == 90:
            out = fam.hinv(par, w, 1.0 - cond)
        elif rot == 180:
            out = 1.0 - fam.hinv(par, 1.0 - w, 1.0 - cond)
        else:
            out = 1.0 - fam.hinv(par, 1.0 - w, cond)
    elif which == COND_ON_FIRST:
        if rot == 0:
            out = fam.hinv(par, w, cond)
        elif rot == 90:
            out = 1.0 - fam.hinv(par, 1.0 - w, cond)
        elif rot == 180:
            out = 1.0 - fam.hinv(par, 1.0 - w, 1.0 - cond)
        else:
            out = fam.hinv(par, w, 1.0 - cond)
    else:
        raise ValueError(f"unknown conditioning direction {which!r}")
    return np.clip(out, EPS, 1.0 - EPS)


def param_to_tau(spec):
    """Kendall tau of the rotated copula."""
    fam, par = _fam_par(spec)
    tau = fam.tau(par)
    if spec.rotation in (90, 270):
        tau = -tau
    return float(tau)


def _tau_bracket(fam, pin_index, pin_value):
    """Tau values at the ends of the free-parameter box with one pin."""
    lo, hi = fam.bounds[1 - pin_index] if fam.n_params == 2 else fam.bounds[0]

    def tau_at(x):
        if fam.n_params == 1:
            return fam.tau(np.array([x]))
        par = np.empty(2)
        par[pin_index] = pin_value
        par[1 - pin_index] = x
        return fam.tau(par)

    return lo, hi, tau_at


def _solve_tau_pinned(fam, target, pin_index, pin_value):
    lo, hi, tau_at = _tau_bracket(fam, pin_index, pin_value)
    t_lo, t_hi = tau_at(lo), tau_at(hi)
    t_min, t_max = min(t_lo, t_hi), max(t_lo, t_hi)
    if not (t_min - 1e-9 <= target <= t_max + 1e-9):
        return None
    if abs(t_lo - target) < 1e-9:
        x = lo
    elif abs(t_hi - target) < 1e-9:
        x = hi
    else:
        x = brentq(lambda p: tau_at(p) - target, lo, hi, xtol=1e-12)
    if fam.n_params == 1:
        return np.array([x])
    par = np.empty(2)
    par[pin_index] = pin_value
    par[1 - pin_index] = x
    return par


def tau_to_param(family, rotation, tau):
    """Spec of the given family/rotation whose Kendall tau equals ``tau``.

    Two-parameter families first pin their secondary parameter (nu = 4 for
    studentt, delta = 1.5 for bb1, delta = 1 for bb7) and solve the primary
    one; if the pinned slice cannot reach ``tau``, the primary parameter is
    pinned at its boundary and the secondary solved instead.
    """
    fam = FAMILIES[family]
    if family == "independence":
        if abs(tau) > 1e-9:
            raise UnattainableTau("independence copula has tau = 0")
        return PairCopulaSpec("independence")
    if rotation in (90, 270):
        if not fam.rotatable:
            raise InvalidParameter(f"{family} does not support rotation {rotation}")
        base_target = -tau
    else:
        base_target = tau

    # closed forms
    try:
        if family in ("gaussian", "studentt"):
            if not (-1.0 < base_target < 1.0):
                raise UnattainableTau(f"tau={tau} outside (-1, 1)")
            return PairCopulaSpec(family, rotation, tuple(fam.tau_inverse(base_target)))
        if family in ("clayton", "gumbel", "frank", "bb1"):
            par = fam.tau_inverse(base_target)
            fam.check_params(par)
            return PairCopulaSpec(family, rotation, tuple(par))
    except (InvalidParameter, UnattainableTau, ValueError):
        pass  # fall through to the pinned root search / boundary fallback

    if fam.n_params == 1:
        lo, hi = fam.bounds[0]
        t_lo, t_hi = fam.tau(np.array([lo])), fam.tau(np.array([hi]))
        if not (min(t_lo, t_hi) - 1e-9 <= base_target <= max(t_lo, t_hi) + 1e-9):
            raise UnattainableTau(
                f"{family}/{rotation}: tau={tau} outside attainable range "
                f"[{min(t_lo, t_hi):.4f}, {max(t_lo, t_hi):.4f}]")
        theta = brentq(lambda p: fam.tau(np.array([p])) - base_target, lo, hi,
                       xtol=1e-12)
        return PairCopulaSpec(family, rotation, (theta,))

    # two-parameter: pinned-secondary convention, then boundary fallback
    par = _solve_tau_pinned(fam, base_target, pin_index=1,
                            pin_value=fam.pinned_second)
    if par is None:
        par = _solve_tau_pinned(fam, base_target, pin_index=0,
                                pin_value=fam.bounds[0][0])
    if par is None:
        raise UnattainableTau(f"{family}/{rotation}: tau={tau} unattainable")
    return PairCopulaSpec(family, rotation, tuple(par))


def sample_loglik(spec, u_pairs):
    u_pairs = np.asarray(u_pairs, dtype=float)
    return float(np.sum(copula_logpdf(spec, u_pairs[:, 0], u_pairs[:, 1])))


def _tau_init_params(fam, rotation, tau_hat):
    """Starting parameters from the sample tau, clipped inside the box."""
    base = -tau_hat if rotation in (90, 270) else tau_hat
    try:
        spec = tau_to_param(fam.name, rotation, tau_hat)
        par = np.asarray(spec.params, dtype=float)
    except (UnattainableTau, InvalidParameter):
        par = np.array([0.5 * (lo + hi) for lo, hi in fam.bounds])
        if fam.name in ("gaussian", "studentt"):
            par[0] = np.clip(base, -0.9, 0.9)
        if fam.name == "studentt":
            par[1] = fam.pinned_second
    margin = 1e-6
    for i, (lo, hi) in enumerate(fam.bounds):
        span = hi - lo
        par[i] = np.clip(par[i], lo + margin * span, hi - margin * span)
    return par


def fit_pair_mle(u_pairs, family, rotation=0, max_evals=500):
    """Maximum-likelihood fit of one family/rotation on copula-scale pairs.

    One-parameter families use bounded Brent, two-parameter families
    Nelder-Mead through a logistic box transform.  Initialization comes from
    inverting the sample Kendall tau.
    """
    u_pairs = np.asarray(u_pairs, dtype=float)
    if u_pairs.ndim != 2 or u_pairs.shape[1] != 2:
        raise DomainError("u_pairs must be an (n, 2) array")
    if u_pairs.shape[0] < 10:
        raise DegenerateData("need at least 10 observations to fit")
    if np.any(u_pairs <= 0.0) or np.any(u_pairs >= 1.0):
        raise DomainError("u_pairs entries must lie strictly inside (0, 1)")
    for col in range(2):
        if np.ptp(u_pairs[:, col]) <= 0.0:
            raise DegenerateData(f"column {col} is constant")

    fam = FAMILIES[family]
    if family == "independence":
        return PairCopulaSpec("independence", loglik=0.0)

    u, v = _clamp(u_pairs[:, 0]), _clamp(u_pairs[:, 1])
    tau_hat = kendalltau(u, v).statistic
    x0 = _tau_init_params(fam, rotation, tau_hat)

    def neg_ll(par):
        spec = PairCopulaSpec(family, rotation, tuple(par))
        ll = np.sum(copula_logpdf(spec, u, v))
        return -ll if np.isfinite(ll) else 1e300

    start_ll = -neg_ll(x0)

    if fam.n_params == 1:
        lo, hi = fam.bounds[0]
        res = minimize_scalar(lambda p: neg_ll([p]), bounds=(lo, hi),
                              method="bounded",
                              options={"xatol": 1e-8, "maxiter": max_evals})
        par_hat = np.array([res.x])
        ok = res.success
    else:
        los = np.array([b[0] for b in fam.bounds])
        his = np.array([b[1] for b in fam.bounds])

        def to_box(z):
            return los + (his - los) / (1.0 + np.exp(-z))

        frac = np.clip((x0 - los) / (his - los), 1e-6, 1.0 - 1e-6)
        z0 = np.log(frac / (1.0 - frac))
        res = minimize(lambda z: neg_ll(to_box(z)), z0, method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-10,
                                "maxfev": max_evals})
        par_hat = to_box(res.x)
        ok = np.all(np.isfinite(par_hat))
    if not ok and not np.isfinite(neg_ll(par_hat)):
        raise ConvergenceError(f"MLE failed for {family}/{rotation}")

    final_ll = -neg_ll(par_hat)
    if final_ll < start_ll:  # never degrade the tau-inversion start
        par_hat, final_ll = x0, start_ll
    return PairCopulaSpec(family, rotation, tuple(par_hat), loglik=float(final_ll))


@dataclass(frozen=True)
class EdgePenalty:
    """Additive per-edge model-selection penalty at a given tree level.

    ``mbicv`` uses the sparse-vine criterion contribution

        non-independence: k log(n) - 2 log(psi0^tree)
        independence:     -2 log(1 - psi0^tree)

    ``bic`` and ``aic`` fall back to the classical penalties.
    """

    n: int
    tree: int = 1
    psi0: float = 0.9
    kind: str = "mbicv"

    def nonindep(self, n_params):
        if self.kind == "mbicv":
            return n_params * math.log(self.n) - 2.0 * self.tree * math.log(self.psi0)
        if self.kind == "bic":
            return n_params * math.log(self.n)
        if self.kind == "aic":
            return 2.0 * n_params
        raise ValueError(f"unknown criterion {self.kind!r}")

    def indep(self):
        if self.kind == "mbicv":
            return -2.0 * math.log1p(-self.psi0 ** self.tree)
        return 0.0

    def score(self, spec):
        if spec.family == "independence":
            return self.indep()
        return -2.0 * spec.loglik + self.nonindep(spec.n_params)


def select_pair_family(u_pairs, candidates, penalty):
    """MLE-fit every candidate (family, rotation) and keep the penalized best.

    The independence copula always competes implicitly.  Candidate fit
    failures are skipped; if every candidate fails the last error propagates.
    """
    candidates = list(candidates)
    best = PairCopulaSpec("independence", loglik=0.0)
    best_score = penalty.indep()
    last_err = None
    n_failed = 0
    for cand in candidates:
        family, rotation = cand if isinstance(cand, tuple) else (cand, 0)
        if family == "independence":
            continue
        try:
            spec = fit_pair_mle(u_pairs, family, rotation)
        except (ConvergenceError, InvalidParameter, DegenerateData) as err:
            last_err = err
            n_failed += 1
            continue
        score = penalty.score(spec)
        if score < best_score - 1e-12:
            best, best_score = spec, score
    if n_failed and n_failed == len(candidates) and last_err is not None:
        raise last_err
    return best
