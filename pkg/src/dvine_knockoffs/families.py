"""Bivariate copula family primitives (unrotated).

Each family exposes vectorized density, CDF, h-function (conditional CDF
given the second argument), its inverse, and Kendall-tau maps on the base
(unrotated) parameterization.  Rotations are applied one level up, in
:mod:`dvine_knockoffs.pair_copula`.

All families here are exchangeable, so the conditional CDF given the first
argument is ``h(v, u)``.  Inputs are assumed pre-clamped to the open unit
square; the clamping policy lives in the caller.
"""

import numpy as np
from scipy import integrate
from scipy.special import betaincinv, gammaln, ndtr, ndtri, owens_t, stdtr

from .errors import InvalidParameter

EPS = 1e-10

# free-argument tolerance for the monotone h-inverse bracketing search
HINV_TOL = 1e-10
HINV_MAX_ITER = 200


def _t_ppf(nu, p):
    """Student-t quantile via the inverse incomplete beta (fast, vectorized)."""
    p = np.asarray(p, dtype=float)
    tail = 2.0 * np.minimum(p, 1.0 - p)
    b = betaincinv(0.5 * nu, 0.5, tail)
    b = np.maximum(b, 1e-300)
    return np.sign(p - 0.5) * np.sqrt(nu * (1.0 / b - 1.0))


def _t_logpdf(nu, x):
    return (gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu)
            - 0.5 * np.log(nu * np.pi)
            - 0.5 * (nu + 1.0) * np.log1p(x * x / nu))


def _bvn_cdf(x, y, rho):
    """Standard bivariate normal CDF via Owen's T function."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    # nudge exact zeros off the axis; the induced error is O(1e-15)
    x = np.where(x == 0.0, 1e-15, x)
    y = np.where(y == 0.0, 1e-15, y)
    r = np.sqrt(1.0 - rho * rho)
    ax = (y - rho * x) / (x * r)
    ay = (x - rho * y) / (y * r)
    beta = np.where(x * y < 0.0, 0.5, 0.0)
    return 0.5 * (ndtr(x) + ndtr(y)) - owens_t(x, ax) - owens_t(y, ay) - beta


def _bisect_hinv(hfun, w, v, max_iter=HINV_MAX_ITER, tol=HINV_TOL):
    """Solve h(x, v) = w for x by vectorized bisection on [EPS, 1-EPS]."""
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    lo = np.full_like(w, EPS)
    hi = np.full_like(w, 1.0 - EPS)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        too_low = hfun(mid, v) < w
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
        if np.max(hi - lo) < tol:
            break
    return 0.5 * (lo + hi)


class Family:
    """Base family: parameter validation plus shared numeric fallbacks."""

    name = ""
    n_params = 0
    bounds = ()          # ((lo, hi), ...) box for each parameter
    rotatable = False    # asymmetric families benefit from 90/180/270 rotations
    # tau attainable on the UNROTATED family (closed interval used for checks)
    tau_range = (-1.0, 1.0)

    def check_params(self, par):
        par = np.atleast_1d(np.asarray(par, dtype=float))
        if par.size != self.n_params:
            raise InvalidParameter(
                f"{self.name}: expected {self.n_params} parameters, got {par.size}")
        for i, (lo, hi) in enumerate(self.bounds):
            if not (lo <= par[i] <= hi) or not np.isfinite(par[i]):
                raise InvalidParameter(
                    f"{self.name}: parameter {i} = {par[i]} outside [{lo}, {hi}]")
        return par

    def pdf(self, par, u, v):
        raise NotImplementedError

    def cdf(self, par, u, v):
        raise NotImplementedError

    def hfunc(self, par, u, v):
        """Conditional CDF of the first argument given the second."""
        raise NotImplementedError

    def hinv(self, par, w, v):
        return _bisect_hinv(lambda x, y: self.hfunc(par, x, y), w, v)

    def logpdf(self, par, u, v):
        return np.log(np.maximum(self.pdf(par, u, v), 1e-300))

    def tau(self, par):
        raise NotImplementedError

    def tau_inverse(self, tau):
        """Parameter vector matching tau, or raise UnattainableTau."""
        raise NotImplementedError


class Independence(Family):
    name = "independence"
    n_params = 0
    tau_range = (0.0, 0.0)

    def pdf(self, par, u, v):
        return np.ones(np.broadcast(u, v).shape)

    def logpdf(self, par, u, v):
        return np.zeros(np.broadcast(u, v).shape)

    def cdf(self, par, u, v):
        return np.asarray(u) * np.asarray(v)

    def hfunc(self, par, u, v):
        return np.broadcast_arrays(np.asarray(u, dtype=float), v)[0].copy()

    def hinv(self, par, w, v):
        return np.broadcast_arrays(np.asarray(w, dtype=float), v)[0].copy()

    def tau(self, par):
        return 0.0

    def tau_inverse(self, tau):
        return np.array([])


class Gaussian(Family):
    name = "gaussian"
    n_params = 1
    bounds = ((-0.9999, 0.9999),)
    tau_range = (-0.9999, 0.9999)

    def logpdf(self, par, u, v):
        r = par[0]
        x, y = ndtri(u), ndtri(v)
        r2 = r * r
        return (-0.5 * np.log1p(-r2)
                - (r2 * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * (1.0 - r2)))

    def pdf(self, par, u, v):
        return np.exp(self.logpdf(par, u, v))

    def cdf(self, par, u, v):
        return _bvn_cdf(ndtri(u), ndtri(v), par[0])

    def hfunc(self, par, u, v):
        r = par[0]
        return ndtr((ndtri(u) - r * ndtri(v)) / np.sqrt(1.0 - r * r))

    def hinv(self, par, w, v):
        r = par[0]
        return ndtr(ndtri(w) * np.sqrt(1.0 - r * r) + r * ndtri(v))

    def tau(self, par):
        return 2.0 / np.pi * np.arcsin(par[0])

    def tau_inverse(self, tau):
        return np.array([np.sin(0.5 * np.pi * tau)])


class StudentT(Family):
    name = "studentt"
    n_params = 2
    bounds = ((-0.9999, 0.9999), (2.05, 50.0))
    tau_range = (-0.9999, 0.9999)
    pinned_second = 4.0  # nu used by the deterministic tau inversion

    def logpdf(self, par, u, v):
        r, nu = par
        x, y = _t_ppf(nu, u), _t_ppf(nu, v)
        r2 = r * r
        q = (x * x - 2.0 * r * x * y + y * y) / (nu * (1.0 - r2))
        const = (gammaln(0.5 * (nu + 2.0)) + gammaln(0.5 * nu)
                 - 2.0 * gammaln(0.5 * (nu + 1.0)) - 0.5 * np.log1p(-r2))
        return (const - 0.5 * (nu + 2.0) * np.log1p(q)
                + 0.5 * (nu + 1.0) * (np.log1p(x * x / nu) + np.log1p(y * y / nu)))

    def pdf(self, par, u, v):
        return np.exp(self.logpdf(par, u, v))

    def cdf(self, par, u, v):
        # C(u, v) = int_0^v h(u | t) dt, Gauss-Legendre on each row
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        u, v = np.broadcast_arrays(u, v)
        nodes, weights = np.polynomial.legendre.leggauss(128)
        out = np.empty(u.shape)
        for idx in np.ndindex(u.shape):
            t = 0.5 * v[idx] * (nodes + 1.0)
            t = np.clip(t, EPS, 1.0 - EPS)
            out[idx] = 0.5 * v[idx] * np.sum(weights * self.hfunc(par, u[idx], t))
        return out

    def hfunc(self, par, u, v):
        r, nu = par
        x, y = _t_ppf(nu, u), _t_ppf(nu, v)
        scale = np.sqrt((nu + y * y) * (1.0 - r * r) / (nu + 1.0))
        return stdtr(nu + 1.0, (x - r * y) / scale)

    def hinv(self, par, w, v):
        r, nu = par
        y = _t_ppf(nu, v)
        scale = np.sqrt((nu + y * y) * (1.0 - r * r) / (nu + 1.0))
        x = _t_ppf(nu + 1.0, w) * scale + r * y
        return stdtr(nu, x)

    def tau(self, par):
        return 2.0 / np.pi * np.arcsin(par[0])

    def tau_inverse(self, tau):
        return np.array([np.sin(0.5 * np.pi * tau), self.pinned_second])


class Archimedean(Family):
    """Archimedean copula via its generator.

    Subclasses provide the generator ``gen``, its inverse ``gen_inv`` and the
    log-derivatives ``d1_log(t) = log(-gen'(t))`` and ``d2_log(t) =
    log(gen''(t))``.  CDF, density, and h-function then follow from

        C(u, v)  = gen_inv(gen(u) + gen(v))
        h(u | v) = gen'(v) / gen'(C)
        c(u, v)  = -gen''(C) gen'(u) gen'(v) / gen'(C)^3
    """

    def gen(self, par, t):
        raise NotImplementedError

    def gen_inv(self, par, s):
        raise NotImplementedError

    def d1_log(self, par, t):
        raise NotImplementedError

    def d2_log(self, par, t):
        raise NotImplementedError

    def cdf(self, par, u, v):
        c = self.gen_inv(par, self.gen(par, u) + self.gen(par, v))
        return np.clip(c, 0.0, 1.0)

    def hfunc(self, par, u, v):
        c = np.clip(self.cdf(par, u, v), EPS, 1.0 - EPS)
        h = np.exp(self.d1_log(par, v) - self.d1_log(par, c))
        return np.clip(h, 0.0, 1.0)

    def logpdf(self, par, u, v):
        c = np.clip(self.cdf(par, u, v), EPS, 1.0 - EPS)
        return (self.d2_log(par, c) + self.d1_log(par, u) + self.d1_log(par, v)
                - 3.0 * self.d1_log(par, c))

    def pdf(self, par, u, v):
        return np.exp(self.logpdf(par, u, v))

    def tau(self, par):
        # Kendall tau for Archimedean copulas: 1 + 4 int_0^1 gen(t)/gen'(t) dt
        def integrand(t):
            return -self.gen(par, t) * np.exp(-self.d1_log(par, t))

        val, _ = integrate.quad(integrand, EPS, 1.0 - EPS, limit=200)
        return 1.0 + 4.0 * val


class Clayton(Archimedean):
    name = "clayton"
    n_params = 1
    bounds = ((1e-4, 28.0),)
    rotatable = True
    tau_range = (1e-4 / (2 + 1e-4), 28.0 / 30.0)

    def gen(self, par, t):
        th = par[0]
        return np.expm1(-th * np.log(t)) / th

    def gen_inv(self, par, s):
        th = par[0]
        return np.exp(-np.log1p(th * s) / th)

    def d1_log(self, par, t):
        return -(par[0] + 1.0) * np.log(t)

    def d2_log(self, par, t):
        th = par[0]
        return np.log(th + 1.0) - (th + 2.0) * np.log(t)

    def cdf(self, par, u, v):
        th = par[0]
        a, b = -th * np.log(u), -th * np.log(v)
        m = np.maximum(a, b)
        log_s = m + np.log(np.exp(a - m) + np.exp(b - m) - np.exp(-m))
        return np.exp(-log_s / th)

    def hfunc(self, par, u, v):
        th = par[0]
        c = np.clip(self.cdf(par, u, v), EPS, 1.0 - EPS)
        return np.clip(np.exp((th + 1.0) * (np.log(c) - np.log(v))), 0.0, 1.0)

    def hinv(self, par, w, v):
        th = par[0]
        log_c = np.log(v) + np.log(w) / (th + 1.0)
        a, b = -th * log_c, -th * np.log(v)
        m = np.maximum(a, b)
        # u^-th = C^-th - v^-th + 1
        log_u_pow = m + np.log(np.maximum(np.exp(a - m) - np.exp(b - m)
                                          + np.exp(-m), 1e-300))
        return np.clip(np.exp(-log_u_pow / th), EPS, 1.0 - EPS)

    def tau(self, par):
        return par[0] / (par[0] + 2.0)

    def tau_inverse(self, tau):
        return np.array([2.0 * tau / (1.0 - tau)])


class Gumbel(Archimedean):
    name = "gumbel"
    n_params = 1
    bounds = ((1.0, 20.0),)
    rotatable = True
    tau_range = (0.0, 1.0 - 1.0 / 20.0)

    def gen(self, par, t):
        return (-np.log(t)) ** par[0]

    def gen_inv(self, par, s):
        return np.exp(-s ** (1.0 / par[0]))

    def d1_log(self, par, t):
        th = par[0]
        a = -np.log(t)
        return np.log(th) + (th - 1.0) * np.log(a) - np.log(t)

    def d2_log(self, par, t):
        th = par[0]
        a = -np.log(t)
        return np.log(th) + (th - 2.0) * np.log(a) + np.log(a + th - 1.0) - 2.0 * np.log(t)

    def tau(self, par):
        return 1.0 - 1.0 / par[0]

    def tau_inverse(self, tau):
        return np.array([1.0 / (1.0 - tau)])


class Frank(Archimedean):
    name = "frank"
    n_params = 1
    bounds = ((-35.0, 35.0),)
    # effectively the full range; theta ~ 0 degenerates to independence
    tau_range = (-0.9937, 0.9937)
    _theta_floor = 1e-7

    def _safe(self, par):
        th = par[0]
        return self._theta_floor if abs(th) < self._theta_floor else th

    def gen(self, par, t):
        th = self._safe(par)
        return -np.log(np.expm1(-th * t) / np.expm1(-th))

    def gen_inv(self, par, s):
        th = self._safe(par)
        return -np.log1p(np.exp(-s) * np.expm1(-th)) / th

    def d1_log(self, par, t):
        th = self._safe(par)
        return np.log(abs(th)) - th * t - np.log(np.abs(np.expm1(-th * t)))

    def d2_log(self, par, t):
        th = self._safe(par)
        return 2.0 * np.log(abs(th)) + th * t - 2.0 * np.log(np.abs(np.expm1(th * t)))

    def hfunc(self, par, u, v):
        th = self._safe(par)
        num = np.exp(-th * v) * np.expm1(-th * u)
        den = np.expm1(-th) + np.expm1(-th * u) * np.expm1(-th * v)
        return np.clip(num / den, 0.0, 1.0)

    def hinv(self, par, w, v):
        th = self._safe(par)
        a = w * np.expm1(-th) / (np.exp(-th * v) - w * np.expm1(-th * v))
        return np.clip(-np.log1p(a) / th, EPS, 1.0 - EPS)

    def tau(self, par):
        th = par[0]
        if abs(th) < self._theta_floor:
            return 0.0
        debye, _ = integrate.quad(lambda x: x / np.expm1(x), 0.0, abs(th),
                                  epsabs=1e-10, epsrel=1e-10, limit=200)
        t = 1.0 - 4.0 / abs(th) * (1.0 - debye / abs(th))
        return np.sign(th) * t

    def tau_inverse(self, tau):
        from scipy.optimize import brentq
        if abs(tau) < 1e-9:
            return np.array([self._theta_floor])
        theta = brentq(lambda th: self.tau([th]) - tau,
                       np.sign(tau) * 1e-6, np.sign(tau) * 35.0, xtol=1e-10)
        return np.array([theta])


class Joe(Archimedean):
    name = "joe"
    n_params = 1
    bounds = ((1.0, 30.0),)
    rotatable = True
    tau_range = (0.0, 0.9486)

    def gen(self, par, t):
        g = np.exp(par[0] * np.log1p(-t))
        return -np.log1p(-g)

    def gen_inv(self, par, s):
        # 1 - exp(-s) via expm1 keeps precision for tiny generator sums
        return -np.expm1(np.log(-np.expm1(-s)) / par[0])

    def d1_log(self, par, t):
        th = par[0]
        g = np.exp(th * np.log1p(-t))
        return np.log(th) + (th - 1.0) * np.log1p(-t) - np.log1p(-g)

    def d2_log(self, par, t):
        th = par[0]
        g = np.exp(th * np.log1p(-t))
        return (np.log(th) + (th - 2.0) * np.log1p(-t)
                + np.log(th - 1.0 + g) - 2.0 * np.log1p(-g))


class BB1(Archimedean):
    name = "bb1"
    n_params = 2
    bounds = ((1e-3, 7.0), (1.0, 7.0))
    rotatable = True
    pinned_second = 1.5  # delta used by the deterministic tau inversion
    tau_range = (0.0, 1.0 - 2.0 / (7.0 * 9.0))

    def gen(self, par, t):
        th, dl = par
        return np.exp(dl * np.log(np.expm1(-th * np.log(t))))

    def gen_inv(self, par, s):
        th, dl = par
        return np.exp(-np.log1p(np.exp(np.log(s) / dl)) / th)

    def d1_log(self, par, t):
        th, dl = par
        x = np.expm1(-th * np.log(t))
        return (np.log(dl) + np.log(th) + (dl - 1.0) * np.log(x)
                - (th + 1.0) * np.log(t))

    def d2_log(self, par, t):
        th, dl = par
        x = np.expm1(-th * np.log(t))
        tpow = np.exp(-th * np.log(t))
        inner = (dl - 1.0) * th * tpow + (th + 1.0) * x
        return (np.log(dl) + np.log(th) - (th + 2.0) * np.log(t)
                + (dl - 2.0) * np.log(x) + np.log(inner))

    def tau(self, par):
        th, dl = par
        return 1.0 - 2.0 / (dl * (th + 2.0))

    def tau_inverse(self, tau):
        dl = self.pinned_second
        return np.array([2.0 / (dl * (1.0 - tau)) - 2.0, dl])


class BB7(Archimedean):
    name = "bb7"
    n_params = 2
    bounds = ((1.0, 6.0), (1e-3, 25.0))
    rotatable = True
    pinned_second = 1.0  # delta used by the deterministic tau inversion
    tau_range = (0.0, 0.93)

    def gen(self, par, t):
        th, dl = par
        y = -np.expm1(th * np.log1p(-t))
        return np.expm1(-dl * np.log(y))

    def gen_inv(self, par, s):
        th, dl = par
        one_minus_z = -np.expm1(-np.log1p(s) / dl)  # 1 - (1+s)^(-1/dl)
        return -np.expm1(np.log(one_minus_z) / th)

    def d1_log(self, par, t):
        th, dl = par
        y = -np.expm1(th * np.log1p(-t))
        return (np.log(dl) + np.log(th) + (th - 1.0) * np.log1p(-t)
                - (dl + 1.0) * np.log(y))

    def d2_log(self, par, t):
        th, dl = par
        g = np.exp(th * np.log1p(-t))
        y = 1.0 - g
        inner = (dl + 1.0) * th * g + (th - 1.0) * y
        return (np.log(dl) + np.log(th) + (th - 2.0) * np.log1p(-t)
                - (dl + 2.0) * np.log(y) + np.log(inner))


FAMILIES = {
    f.name: f for f in (
        Independence(), Gaussian(), StudentT(), Clayton(), Gumbel(),
        Frank(), Joe(), BB1(), BB7(),
    )
}

ONE_PARAM = ("gaussian", "clayton", "gumbel", "frank", "joe")
TWO_PARAM = ("studentt", "bb1", "bb7")
