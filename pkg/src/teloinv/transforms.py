"""High-precision Laplace transforms: explicit cemetery law, link map and friends."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable

import mpmath as mp
import numpy as np

from .bell import bell_table
from .errors import AbscissaViolation, InsufficientHorizon, NonIntegerShape, OutsidePN
from .model import Gamma, ModelConfig, in_P_N, link_threshold, q_N

LAPLACE_DIGITS = 200


@dataclass(frozen=True)
class LaplaceFn:
    """A Laplace transform together with its abscissa of convergence."""

    eval: Callable
    abscissa: object
    repr: str

    def __call__(self, p):
        if mp.re(p) <= self.abscissa:
            raise AbscissaViolation(f"Re(p)={mp.re(p)} is not above {self.abscissa}")
        return self.eval(p)


def law_transform_family(law, j: int, s, digits: int = LAPLACE_DIGITS):
    """(L(g v^j)(s), L((1 - G) v^j)(s)) for the shortening law."""
    with mp.workdps(digits):
        return law.lap_g(j, s), law.lap_surv(j, s)


@dataclass(frozen=True)
class CemeteryExplicit:
    """Cemetery density sum_i a_i t^i exp(-rate t) for an Erlang initial law.

    ``rate`` is b m1 times the effective decay constant ``beta_tilde``.
    """

    a: tuple
    beta_tilde: mp.mpf
    bm1: mp.mpf
    digits: int

    @property
    def rate(self):
        return self.bm1 * self.beta_tilde

    @property
    def abscissa(self):
        return -self.rate

    def laplace(self, p):
        """sum_i a_i i! / (p + rate)^(i+1), by Horner's rule in 1/(p + rate)."""
        with mp.workdps(self.digits):
            w = 1 / (p + self.rate)
            acc = 0
            for i in range(len(self.a) - 1, -1, -1):
                acc = (acc + self.a[i] * mp.factorial(i)) * w
            return acc

    def flux(self, t):
        """Cemetery density at times ``t`` (float array)."""
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        with mp.workdps(self.digits):
            for idx, tv in np.ndenumerate(t):
                tv = mp.mpf(tv)
                acc = mp.mpf(0)
                for coef in reversed(self.a):
                    acc = acc * tv + coef
                out[idx] = float(acc * mp.exp(-self.rate * tv))
        return out

    def as_laplace_fn(self) -> LaplaceFn:
        return LaplaceFn(self.laplace, self.abscissa, "CemeteryExplicit")


_cemetery_cache: dict = {}


def explicit_cemetery_laplace(config: ModelConfig, digits: int = LAPLACE_DIGITS) -> CemeteryExplicit:
    """Closed-form cemetery density of the scaled model started from an Erlang law.

    Writing the initial density as beta^l/(l-1)! (-d/dbeta)^(l-1) exp(-beta x)
    and propagating each exponential exactly gives
    a_i = b beta^l/(l-1)! sum_{j>=i} C(l-1, j) N^-(l-1-j) L((1-G) v^(l-1-j))(beta/N) B_{j,i}(z)
    with z_k = b N^-(k-1) L(g v^k)(beta/N).
    """
    n0 = config.n0
    if not isinstance(n0, Gamma):
        raise NonIntegerShape("the explicit cemetery transform needs a Gamma initial law")
    if not float(n0.shape).is_integer() or n0.shape < 1:
        raise NonIntegerShape(f"shape {n0.shape} is not a positive integer")
    key = (config.b, config.N, config.law, n0.shape, n0.rate, digits)
    if key in _cemetery_cache:
        return _cemetery_cache[key]
    ell = int(n0.shape)
    law = config.law
    with mp.workdps(digits + 10):
        b, N, beta = mp.mpf(config.b), mp.mpf(config.N), mp.mpf(n0.rate)
        m1 = law.moment(1)
        s = beta / N
        beta_tilde = N / m1 * (1 - law.lap_g(0, s))
        z = [b / N ** (k - 1) * law.lap_g(k, s) for k in range(1, ell)]
        y = [law.lap_surv(m, s) / N ** m for m in range(ell)]
        table = bell_table(ell - 1, z, zero=mp.mpf(0), one=mp.mpf(1))
        front = b * beta ** ell / mp.factorial(ell - 1)
        a = []
        for i in range(ell):
            acc = mp.fsum(comb(ell - 1, j) * y[ell - 1 - j] * table[j][i] for j in range(i, ell))
            a.append(front * acc)
    with mp.workdps(digits):
        out = CemeteryExplicit(tuple(+c for c in a), +beta_tilde, b * m1, digits)
    _cemetery_cache[key] = out
    return out


def link_prefactor(config: ModelConfig, p):
    """1 + p b m1 / ((b m1)^2 2N/(b m2) + q_N(p))."""
    b = mp.mpf(config.b)
    return 1 + p * b * config.moments.m1 / (-link_threshold(config) + q_N(config, p))


def link_map(config: ModelConfig, L_u: LaplaceFn, p, R_n0=None):
    """Approximate Laplace transform of n0 from the transform of the cemetery law."""
    if R_n0 is None:
        R_n0 = getattr(config.n0, "abscissa", -mp.inf)
    if not in_P_N(config, p, R_n0, L_u.abscissa):
        raise OutsidePN(f"p={p} is outside the admissible set")
    return link_prefactor(config, p) * L_u(q_N(config, p))


def gamma_mixture_laplace(kde, p):
    """(1/n) sum_i (1 + p/beta_i)^(-ell_i) for a Gamma-kernel estimator."""
    if mp.re(p) <= -min(kde.betas):
        raise AbscissaViolation("p is left of the mixture's abscissa")
    betas, ells = kde.mp_params()
    return mp.fsum((1 + p / bt) ** (-el) for bt, el in zip(betas, ells)) / len(betas)


def numeric_laplace(series, p, digits: int = 30):
    """Trapezoid transform of a sampled cemetery density plus an exponential tail."""
    t = np.asarray(series.t_grid, dtype=float)
    f = np.asarray(series.flux, dtype=float)
    mass = float(np.trapezoid(f, t))
    if mass < 1 - 1e-4:
        raise InsufficientHorizon(f"series holds mass {mass:.6f} < 1 - 1e-4")
    with mp.workdps(digits):
        p = mp.mpmathify(p)
        w = [mp.exp(-p * mp.mpf(tv)) * mp.mpf(fv) for tv, fv in zip(t, f)]
        body = mp.fsum((t[k + 1] - t[k]) * (w[k] + w[k + 1]) / 2 for k in range(len(t) - 1))
        # tail: single exponential fitted on the last tenth of the horizon
        start = t[-1] - 0.1 * (t[-1] - t[0])
        sel = (t >= start) & (f > 0)
        if sel.sum() >= 2:
            slope = np.polyfit(t[sel], np.log(f[sel]), 1)[0]
            rate = max(-slope, 1e-12)
            body += w[-1] / (rate + p)
        return body
