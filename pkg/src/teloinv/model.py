"""Model parameters, probability laws and the constants derived from them.

Shortening laws live on ``[0, delta]`` and expose the Laplace family
``L(g * v**j)(s)`` and ``L((1 - G) * v**j)(s)`` that the explicit cemetery
transform needs.  Initial distributions expose a float density for plotting
and error metrics, and a multiprecision Laplace transform.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import mpmath as mp
import numpy as np
from scipy import optimize, special, stats

from .errors import AbscissaViolation, DegenerateLambda, NonNormalizedDensity, UnboundedEnvelope

MODEL_DIGITS = 50


# ---------------------------------------------------------------------------
# shortening laws
# ---------------------------------------------------------------------------

def _uniform_power_transform(j: int, s, delta):
    """(1/delta) * int_0^delta v**j exp(-s v) dv, without cancellation."""
    s = mp.mpf(s)
    delta = mp.mpf(delta)
    y = s * delta
    if y == 0:
        return delta ** j / (j + 1)
    if y > 2 * (j + 1):
        # head form: 1 - e^{-y} sum_{i<=j} y^i/i! is well conditioned here
        head = mp.fsum(y ** i / mp.factorial(i) for i in range(j + 1))
        return mp.factorial(j) / (delta * s ** (j + 1)) * (1 - mp.exp(-y) * head)
    # tail form: e^{-y} sum_{i>j} y^i/i!, all terms positive
    term = mp.mpf(1)
    total = mp.mpf(1)
    k = 0
    eps = mp.eps
    while True:
        k += 1
        term *= y / (j + 1 + k)
        total += term
        if term < eps * total:
            break
    return delta ** j / (j + 1) * mp.exp(-y) * total


class ShorteningLaw:
    """Law of the telomere shortening value, supported on ``[0, delta]``."""

    delta: float
    kind: str = "abstract"

    def density(self, v):
        raise NotImplementedError

    def cdf(self, v):
        raise NotImplementedError

    def moment(self, i: int):
        raise NotImplementedError

    def lap_g(self, j: int, s):
        """L(g * v**j)(s)."""
        raise NotImplementedError

    def lap_surv(self, j: int, s):
        """L((1 - G) * v**j)(s)."""
        raise NotImplementedError

    def cdf_integral(self, w):
        """int_0^w G(v) dv, vectorised over float ``w``."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(ShorteningLaw):
    delta: float = 1.0
    kind: str = field(default="uniform", init=False)

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    def density(self, v):
        v = np.asarray(v, dtype=float)
        return np.where((v >= 0) & (v <= self.delta), 1.0 / self.delta, 0.0)

    def cdf(self, v):
        return np.clip(np.asarray(v, dtype=float) / self.delta, 0.0, 1.0)

    def moment(self, i):
        return mp.mpf(self.delta) ** i / (i + 1)

    def lap_g(self, j, s):
        return _uniform_power_transform(j, s, self.delta)

    def lap_surv(self, j, s):
        d = mp.mpf(self.delta)
        return d * _uniform_power_transform(j, s, d) - _uniform_power_transform(j + 1, s, d)

    def cdf_integral(self, w):
        w = np.asarray(w, dtype=float)
        d = self.delta
        return np.where(w <= 0, 0.0, np.where(w < d, w * w / (2 * d), w - d / 2))

    def sample(self, rng, size):
        return rng.uniform(0.0, self.delta, size)


@dataclass(frozen=True)
class Degenerate(ShorteningLaw):
    """Point mass at ``v0``; only meant for exact Monte Carlo checks."""

    v0: float = 0.5
    kind: str = field(default="degenerate", init=False)

    @property
    def delta(self):
        return self.v0

    def density(self, v):
        raise TypeError("a point mass has no density")

    def cdf(self, v):
        return np.where(np.asarray(v, dtype=float) >= self.v0, 1.0, 0.0)

    def moment(self, i):
        return mp.mpf(self.v0) ** i

    def lap_g(self, j, s):
        v0 = mp.mpf(self.v0)
        return v0 ** j * mp.exp(-mp.mpf(s) * v0)

    def lap_surv(self, j, s):
        return mp.mpf(self.v0) * _uniform_power_transform(j, s, self.v0)

    def cdf_integral(self, w):
        return np.maximum(np.asarray(w, dtype=float) - self.v0, 0.0)

    def sample(self, rng, size):
        return np.full(size, float(self.v0))


class TabulatedLaw(ShorteningLaw):
    """Piecewise-linear density given by its values on a grid starting at 0."""

    kind = "tabulated"

    def __init__(self, grid: Sequence[float], values: Sequence[float]):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid[0] != 0 or np.any(np.diff(grid) <= 0) or np.any(values < 0):
            raise ValueError("grid must start at 0 and increase; values must be nonnegative")
        mass = float(np.sum(np.diff(grid) * (values[1:] + values[:-1]) / 2))
        if abs(mass - 1) > 1e-9:
            raise NonNormalizedDensity(f"tabulated shortening density integrates to {mass!r}")
        self.grid = grid
        self.values = values
        self.delta = float(grid[-1])
        self._cum = np.concatenate([[0.0], np.cumsum(np.diff(grid) * (values[1:] + values[:-1]) / 2)])
        fine = np.linspace(0.0, self.delta, 20001)
        cdf_fine = self.cdf(fine)
        self._fine = fine
        self._fine_cdf = cdf_fine
        self._fine_int = np.concatenate(
            [[0.0], np.cumsum(np.diff(fine) * (cdf_fine[1:] + cdf_fine[:-1]) / 2)])

    def density(self, v):
        return np.interp(v, self.grid, self.values, left=0.0, right=0.0)

    def cdf(self, v):
        v = np.clip(np.asarray(v, dtype=float), 0.0, self.delta)
        k = np.clip(np.searchsorted(self.grid, v, side="right") - 1, 0, len(self.grid) - 2)
        x0 = self.grid[k]
        h = self.grid[k + 1] - x0
        slope = (self.values[k + 1] - self.values[k]) / h
        u = v - x0
        return np.minimum(self._cum[k] + self.values[k] * u + slope * u * u / 2, 1.0)

    def _g_mp(self, v):
        k = min(max(bisect.bisect_right(self.grid.tolist(), float(v)) - 1, 0), len(self.grid) - 2)
        x0, x1 = mp.mpf(self.grid[k]), mp.mpf(self.grid[k + 1])
        y0, y1 = mp.mpf(self.values[k]), mp.mpf(self.values[k + 1])
        return y0 + (y1 - y0) * (v - x0) / (x1 - x0)

    def _cdf_mp(self, v):
        k = min(max(bisect.bisect_right(self.grid.tolist(), float(v)) - 1, 0), len(self.grid) - 2)
        cum = mp.fsum((mp.mpf(self.grid[i + 1]) - mp.mpf(self.grid[i]))
                      * (mp.mpf(self.values[i + 1]) + mp.mpf(self.values[i])) / 2 for i in range(k))
        x0, x1 = mp.mpf(self.grid[k]), mp.mpf(self.grid[k + 1])
        y0, y1 = mp.mpf(self.values[k]), mp.mpf(self.values[k + 1])
        u = v - x0
        return cum + y0 * u + (y1 - y0) / (x1 - x0) * u * u / 2

    def _breaks(self, upper):
        pts = [mp.mpf(g) for g in self.grid if g < upper]
        return pts + [mp.mpf(upper)]

    def moment(self, i):
        return mp.quad(lambda v: v ** i * self._g_mp(v), self._breaks(self.delta))

    def lap_g(self, j, s):
        s = mp.mpf(s)
        return mp.quad(lambda v: v ** j * mp.exp(-s * v) * self._g_mp(v), self._breaks(self.delta))

    def lap_surv(self, j, s):
        s = mp.mpf(s)
        return mp.quad(lambda v: (1 - self._cdf_mp(v)) * v ** j * mp.exp(-s * v),
                       self._breaks(self.delta))

    def cdf_integral(self, w):
        w = np.asarray(w, dtype=float)
        inside = np.interp(np.clip(w, 0.0, self.delta), self._fine, self._fine_int)
        return np.where(w <= 0, 0.0, inside + np.maximum(w - self.delta, 0.0))

    def sample(self, rng, size):
        u = rng.uniform(0.0, 1.0, size)
        return np.interp(u, self._fine_cdf, self._fine)


@dataclass(frozen=True)
class Moments:
    m1: mp.mpf
    m2: mp.mpf
    m3: mp.mpf


def moments(law: ShorteningLaw, digits: int = MODEL_DIGITS) -> Moments:
    """First three moments of the shortening law."""
    with mp.workdps(digits):
        if isinstance(law, TabulatedLaw):
            mass = mp.quad(law._g_mp, law._breaks(law.delta))
            if abs(mass - 1) > mp.mpf("1e-9"):
                raise NonNormalizedDensity(f"shortening density integrates to {mass}")
        m = Moments(*(law.moment(i) for i in (1, 2, 3)))
    return m


# ---------------------------------------------------------------------------
# initial distributions
# ---------------------------------------------------------------------------

class InitialDistribution:
    kind = "abstract"
    abscissa = -mp.inf

    def pdf(self, x):
        raise NotImplementedError

    def pdf_mp(self, x):
        raise NotImplementedError

    def laplace(self, p):
        """Multiprecision Laplace transform at the current mpmath precision."""
        if mp.re(p) <= self.abscissa:
            raise AbscissaViolation(f"Re(p)={mp.re(p)} is not above {self.abscissa}")
        return mp.quad(lambda x: mp.exp(-p * x) * self.pdf_mp(x), [0, self.mean(), mp.inf])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def quantile(self, q: float) -> float:
        raise NotImplementedError

    def params(self) -> list[float]:
        raise NotImplementedError


def gamma_derivative(shape: float, rate: float, n: int, x):
    """n-th derivative of the Gamma(shape, rate) density, by the Leibniz expansion.

    Terms whose power of ``x`` would be negative vanish for integer shapes and
    are dropped.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    lx = np.log(np.where(pos, x, 1.0))
    for j in range(n + 1):
        power = shape - 1 - j
        if float(power).is_integer() and power < 0:
            continue
        log_mag = (shape * math.log(rate) - special.gammaln(shape - j) + power * lx
                   - rate * x + (n - j) * math.log(rate))
        coeff = math.comb(n, j) * (-1.0) ** (n - j) * special.gammasgn(shape - j)
        term = coeff * np.exp(log_mag)
        if power == 0:
            term = np.where(x >= 0, term, 0.0)
        else:
            term = np.where(pos, term, 0.0)
        out = out + term
    return out


@dataclass(frozen=True)
class Gamma(InitialDistribution):
    shape: float
    rate: float
    kind: str = field(default="gamma", init=False)

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("Gamma parameters must be positive")

    @property
    def abscissa(self):
        return -mp.mpf(self.rate)

    def pdf(self, x):
        return stats.gamma.pdf(x, a=self.shape, scale=1.0 / self.rate)

    def pdf_mp(self, x):
        x = mp.mpf(x)
        if x <= 0:
            return mp.mpf(0)
        ell, beta = mp.mpf(self.shape), mp.mpf(self.rate)
        return mp.exp(ell * mp.log(beta) + (ell - 1) * mp.log(x) - beta * x - mp.loggamma(ell))

    def derivative(self, x, n: int):
        return gamma_derivative(self.shape, self.rate, n, x)

    def laplace(self, p):
        if mp.re(p) <= self.abscissa:
            raise AbscissaViolation(f"Re(p)={mp.re(p)} is not above {self.abscissa}")
        return (1 + p / mp.mpf(self.rate)) ** (-mp.mpf(self.shape))

    def sample(self, rng, size):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def mean(self):
        return self.shape / self.rate

    @property
    def cv(self):
        return 1.0 / math.sqrt(self.shape)

    def quantile(self, q):
        return float(stats.gamma.ppf(q, a=self.shape, scale=1.0 / self.rate))

    def params(self):
        return [self.shape, self.rate]


@dataclass(frozen=True)
class Weibull(InitialDistribution):
    shape: float
    scale: float
    kind: str = field(default="weibull", init=False)

    def pdf(self, x):
        return stats.weibull_min.pdf(x, c=self.shape, scale=self.scale)

    def pdf_mp(self, x):
        x = mp.mpf(x)
        if x <= 0:
            return mp.mpf(0)
        k, s = mp.mpf(self.shape), mp.mpf(self.scale)
        return k / s * (x / s) ** (k - 1) * mp.exp(-(x / s) ** k)

    def sample(self, rng, size):
        return self.scale * rng.weibull(self.shape, size)

    def mean(self):
        return self.scale * math.gamma(1 + 1 / self.shape)

    def quantile(self, q):
        return float(stats.weibull_min.ppf(q, c=self.shape, scale=self.scale))

    def params(self):
        return [self.shape, self.scale]


@dataclass(frozen=True)
class Nakagami(InitialDistribution):
    """Nakagami law with shape ``m`` and spread ``omega`` (the mean square)."""

    m: float
    omega: float
    kind: str = field(default="nakagami", init=False)

    def pdf(self, x):
        return stats.nakagami.pdf(x, nu=self.m, scale=math.sqrt(self.omega))

    def pdf_mp(self, x):
        x = mp.mpf(x)
        if x <= 0:
            return mp.mpf(0)
        m, om = mp.mpf(self.m), mp.mpf(self.omega)
        return 2 * m ** m / (mp.gamma(m) * om ** m) * x ** (2 * m - 1) * mp.exp(-m * x * x / om)

    def sample(self, rng, size):
        return np.sqrt(rng.gamma(self.m, self.omega / self.m, size))

    def mean(self):
        return math.exp(math.lgamma(self.m + 0.5) - math.lgamma(self.m)) * math.sqrt(self.omega / self.m)

    def quantile(self, q):
        return float(stats.nakagami.ppf(q, nu=self.m, scale=math.sqrt(self.omega)))

    def params(self):
        return [self.m, self.omega]


@dataclass(frozen=True)
class Mixture(InitialDistribution):
    weights: tuple
    components: tuple
    kind: str = field(default="mixture", init=False)

    def __post_init__(self):
        if abs(sum(self.weights) - 1) > 1e-12 or len(self.weights) != len(self.components):
            raise NonNormalizedDensity("mixture weights must sum to one")

    @property
    def abscissa(self):
        return max(c.abscissa for c in self.components)

    def pdf(self, x):
        return sum(w * c.pdf(x) for w, c in zip(self.weights, self.components))

    def pdf_mp(self, x):
        return mp.fsum(mp.mpf(w) * c.pdf_mp(x) for w, c in zip(self.weights, self.components))

    def laplace(self, p):
        return mp.fsum(mp.mpf(w) * c.laplace(p) for w, c in zip(self.weights, self.components))

    def sample(self, rng, size):
        which = rng.choice(len(self.weights), size=size, p=self.weights)
        out = np.empty(size)
        for k, comp in enumerate(self.components):
            idx = np.flatnonzero(which == k)
            out[idx] = comp.sample(rng, idx.size)
        return out

    def mean(self):
        return sum(w * c.mean() for w, c in zip(self.weights, self.components))

    def quantile(self, q):
        cdf = lambda x: sum(w * quad_cdf(c, x) for w, c in zip(self.weights, self.components)) - q
        hi = max(c.quantile(min(q + (1 - q) / 2, 1 - 1e-15)) for c in self.components)
        return float(optimize.brentq(cdf, 0.0, hi))

    def params(self):
        out = []
        for w, c in zip(self.weights, self.components):
            out += [w, *c.params()]
        return out


def quad_cdf(dist: InitialDistribution, x: float) -> float:
    if isinstance(dist, Gamma):
        return float(stats.gamma.cdf(x, a=dist.shape, scale=1.0 / dist.rate))
    from scipy.integrate import quad
    return quad(dist.pdf, 0.0, x, limit=200)[0]


class TabulatedDensity(InitialDistribution):
    """Piecewise-linear density on a grid, zero outside it."""

    kind = "tabulated"

    def __init__(self, grid, values):
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        mass = float(np.trapezoid(self.values, self.grid))
        if abs(mass - 1) > 1e-10:
            raise NonNormalizedDensity(f"tabulated initial density integrates to {mass!r}")
        self._cdf = np.concatenate([[0.0], np.cumsum(np.diff(self.grid) * (self.values[1:] + self.values[:-1]) / 2)])

    def pdf(self, x):
        return np.interp(x, self.grid, self.values, left=0.0, right=0.0)

    def pdf_mp(self, x):
        return mp.mpf(float(self.pdf(float(x))))

    def laplace(self, p):
        pts = [mp.mpf(g) for g in self.grid]
        ys = [mp.mpf(v) for v in self.values]
        total = mp.mpc(0) if isinstance(p, (complex, mp.mpc)) else mp.mpf(0)
        for a, b_, ya, yb in zip(pts[:-1], pts[1:], ys[:-1], ys[1:]):
            total += mp.quad(lambda x: mp.exp(-p * x) * (ya + (yb - ya) * (x - a) / (b_ - a)), [a, b_])
        return total

    def sample(self, rng, size):
        return np.interp(rng.uniform(0, 1, size), self._cdf, self.grid)

    def mean(self):
        return float(np.trapezoid(self.grid * self.values, self.grid))

    def quantile(self, q):
        return float(np.interp(q, self._cdf, self.grid))

    def params(self):
        return list(self.grid) + list(self.values)


@dataclass(frozen=True)
class PointMass(InitialDistribution):
    """Deterministic initial length; test-only, it has no density."""

    x0: float
    kind: str = field(default="point", init=False)

    def pdf(self, x):
        raise TypeError("a point mass has no density")

    def laplace(self, p):
        return mp.exp(-p * mp.mpf(self.x0))

    def sample(self, rng, size):
        return np.full(size, float(self.x0))

    def mean(self):
        return self.x0

    def quantile(self, q):
        return self.x0

    def params(self):
        return [self.x0]


def density_and_laplace(n0: InitialDistribution, x, p, digits: int = MODEL_DIGITS):
    """Density of ``n0`` at ``x`` together with its Laplace transform at ``p``."""
    with mp.workdps(digits):
        return n0.pdf(x), n0.laplace(p)


# ---------------------------------------------------------------------------
# configuration and derived constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    b: float
    N: float
    law: ShorteningLaw
    n0: InitialDistribution

    def __post_init__(self):
        if not (self.b > 0 and self.N > 0):
            raise ValueError("b and N must be positive")

    def with_N(self, N: float) -> "ModelConfig":
        return ModelConfig(self.b, N, self.law, self.n0)

    def with_n0(self, n0: InitialDistribution) -> "ModelConfig":
        return ModelConfig(self.b, self.N, self.law, n0)

    @cached_property
    def moments(self) -> Moments:
        return moments(self.law, digits=max(MODEL_DIGITS, mp.mp.dps))

    @property
    def mu(self):
        """Drift ``b m1`` of the approximated dynamics."""
        return mp.mpf(self.b) * self.moments.m1

    @property
    def sigma2(self):
        """Diffusion variance ``b m2 / N``."""
        return mp.mpf(self.b) * self.moments.m2 / mp.mpf(self.N)


def q_N(config: ModelConfig, p):
    """b m1 p + (b m2 / 2N) p**2."""
    b, N = mp.mpf(config.b), mp.mpf(config.N)
    m = config.moments
    return b * m.m1 * p + b * m.m2 / (2 * N) * p * p


def link_threshold(config: ModelConfig):
    """-(b m1)**2 2N/(b m2): the lower bound on Re q_N inside the admissible set."""
    b, N = mp.mpf(config.b), mp.mpf(config.N)
    m = config.moments
    return -(b * m.m1) ** 2 * 2 * N / (b * m.m2)


def in_P_N(config: ModelConfig, p, R_n0, R_u) -> bool:
    p = mp.mpc(p)
    if not mp.re(p) > R_n0:
        return False
    return bool(mp.re(q_N(config, p)) > max(mp.mpf(R_u), link_threshold(config)))


@dataclass(frozen=True)
class SpectralConstants:
    lam: mp.mpf
    lamN: mp.mpf
    C_N: mp.mpf
    beta_N: mp.mpf


def spectral_constants(config: ModelConfig, lam, digits: int = MODEL_DIGITS) -> SpectralConstants:
    with mp.workdps(digits):
        lam = mp.mpf(lam)
        b, N = mp.mpf(config.b), mp.mpf(config.N)
        m = moments(config.law, digits)
        if lam <= 0:
            raise DegenerateLambda("lambda must be positive")
        lamN = lam * (1 - lam * m.m2 / (2 * m.m1 * N))
        if lamN <= 0:
            raise DegenerateLambda(f"lambda_N = {lamN} is not positive")
        C_N = b / 2 * (1 - config.law.lap_g(0, 2 * m.m1 * lamN / (m.m2 * lam)))
        if N <= b * m.m1 * lamN / C_N:
            beta_N = N * C_N
        else:
            beta_N = b * m.m1 * lamN
        return SpectralConstants(lam, lamN, C_N, beta_N)


@dataclass(frozen=True)
class EnvelopeConstants:
    C_lambda: float
    D_lambda: float
    lam: float
    lam_prime: float


def _grid_sup(f, lo, hi, tol=1e-6):
    """Supremum of a positive function on [lo, hi] via geometric grids, then local polish."""
    n = 512
    best = None
    while True:
        xs = np.geomspace(lo, hi, n)
        vals = f(xs)
        k = int(np.argmax(vals))
        cur = float(vals[k])
        if best is not None and abs(cur - best) <= tol * abs(cur):
            break
        best = cur
        n *= 2
        if n > 2 ** 20:
            break
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, n - 1)]
    res = optimize.minimize_scalar(lambda x: -float(f(np.array([x]))[0]), bounds=(a, b),
                                   method="bounded", options={"xatol": 1e-14 * b})
    return max(cur, -float(res.fun))


def default_lambdas(config: ModelConfig) -> tuple[float, float]:
    """lambda = beta/2 and lambda' = min(lambda, (2N m1/m2 - 2 lambda)/2)."""
    n0 = config.n0
    if not isinstance(n0, Gamma):
        raise TypeError("default envelope rates are only defined for Gamma initial laws")
    m = config.moments
    lam = n0.rate / 2
    upper = 2 * config.N * float(m.m1) / float(m.m2) - 2 * lam
    if upper <= 0:
        raise DegenerateLambda("no admissible lambda' for this N")
    return lam, min(lam, upper / 2)


def envelope_constants(n0: Gamma, lam: float, lam_prime: float) -> EnvelopeConstants:
    """Smallest constants with |n0'''| <= C e^{-lam x} and |n0''| <= D e^{-lam x}(1 - e^{-lam' x})."""
    if not isinstance(n0, Gamma) or n0.shape < 4 or not float(n0.shape).is_integer():
        raise ValueError("envelope constants need an integer Gamma shape of at least 4")
    if lam >= n0.rate:
        raise UnboundedEnvelope(f"lambda={lam} does not leave decay below rate {n0.rate}")
    if lam_prime <= 0:
        raise UnboundedEnvelope("lambda' must be positive for a finite second-derivative envelope")
    ell, beta = n0.shape, n0.rate
    hi = 4 * (ell + 40) / (beta - lam)
    lo = 1e-8 / beta

    def third(x):
        return np.abs(n0.derivative(x, 3)) * np.exp(lam * x)

    def second(x):
        return np.abs(n0.derivative(x, 2)) * np.exp(lam * x) / -np.expm1(-lam_prime * x)

    return EnvelopeConstants(_grid_sup(third, lo, hi), _grid_sup(second, lo, hi), lam, lam_prime)
