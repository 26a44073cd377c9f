"""Gaver-Stehfest inversion with exact weights, and the initial-law estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import mpmath as mp
import numpy as np

from .errors import PrecisionExhausted
from .model import ModelConfig, q_N
from .transforms import LaplaceFn, explicit_cemetery_laplace, gamma_mixture_laplace, link_prefactor

GS_DIGITS = 200


@lru_cache(maxsize=None)
def _exact_weights(K: int) -> tuple[Fraction, ...]:
    out = []
    for n in range(1, 2 * K + 1):
        s = 0
        for j in range((n + 1) // 2, min(n, K) + 1):
            s += j ** (K + 1) * comb(K, j) * comb(2 * j, j) * comb(j, n - j)
        out.append(Fraction((-1) ** (n + K) * s, factorial(K)))
    return tuple(out)


@dataclass(frozen=True)
class GSPlan:
    K: int
    weights: tuple
    digits: int

    @property
    def mp_weights(self):
        return _mp_weights(self.K, self.digits)


@lru_cache(maxsize=None)
def _mp_weights(K: int, digits: int):
    with mp.workdps(digits):
        return tuple(mp.mpf(w.numerator) / w.denominator for w in _exact_weights(K))


def gs_weights(K: int, digits: int = GS_DIGITS) -> GSPlan:
    if K < 1:
        raise ValueError("K must be at least 1")
    return GSPlan(K, _exact_weights(K), digits)


def gs_digit_budget(K: int, margin: int = 40) -> int:
    """Working digits that leave ``margin`` digits after the weights' cancellation."""
    top = max(abs(w) for w in _exact_weights(K))
    digits = len(str(top.numerator)) - len(str(top.denominator)) + 1
    return digits + margin


@dataclass(frozen=True)
class GSResult:
    value: mp.mpf
    max_partial: mp.mpf
    exhausted: bool


def gs_invert_detail(L, x, plan: GSPlan, scale=0) -> GSResult:
    """(ln2/x) sum_n V_n L(n ln2/x), with a cancellation diagnostic.

    The sum is flagged as exhausted when its largest partial sum exceeds
    10^(digits-10) times max(|result|, scale).
    """
    with mp.workdps(plan.digits):
        x = mp.mpf(x)
        if x <= 0:
            raise ValueError("x must be positive")
        c = mp.ln2 / x
        acc = mp.mpf(0)
        peak = mp.mpf(0)
        for n, w in enumerate(plan.mp_weights, start=1):
            acc += w * L(n * c)
            peak = max(peak, abs(acc))
        value = c * acc
        peak = c * peak
        ref = max(abs(value), mp.mpf(scale))
        exhausted = bool(peak > mp.mpf(10) ** (plan.digits - 10) * ref)
        return GSResult(value, peak, exhausted)


def gs_invert(L, x, plan: GSPlan, strict: bool = False, scale=0):
    res = gs_invert_detail(L, x, plan, scale)
    if strict and res.exhausted:
        raise PrecisionExhausted(
            f"partial sums reached {mp.nstr(res.max_partial, 5)} for a result of {mp.nstr(res.value, 5)}")
    return res.value


@dataclass
class EstimateCurve:
    x: np.ndarray
    values: np.ndarray
    estimator_id: str
    params: dict = field(default_factory=dict)
    exhausted: int = 0

    def negative_mass(self) -> float:
        return float(np.trapezoid(np.maximum(-self.values, 0.0), self.x))

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.x))

    def l1_to(self, truth) -> float:
        return float(np.trapezoid(np.abs(self.values - truth), self.x))


def _check_grid(x_grid):
    x = np.asarray(x_grid, dtype=float)
    if np.any(x <= 0):
        raise ValueError("estimates are only defined for x > 0")
    return x


def _gs_curve(F, x, plan, strict):
    vals = np.empty(len(x))
    bad = 0
    for k, xv in enumerate(x):
        res = gs_invert_detail(F, xv, plan, scale=1)
        if res.exhausted:
            if strict:
                raise PrecisionExhausted(f"cancellation exhausted {plan.digits} digits at x={xv}")
            bad += 1
        vals[k] = float(res.value)
    return vals, bad


def estimate_n0_noise_free(config: ModelConfig, K: int, x_grid, digits: int = GS_DIGITS,
                           strict: bool = True) -> EstimateCurve:
    """Invert the link map applied to the exact cemetery transform of the scaled model."""
    x = _check_grid(x_grid)
    plan = gs_weights(K, digits)
    cem = explicit_cemetery_laplace(config, digits)

    def F(p):
        q = q_N(config, p)
        return link_prefactor(config, p) * cem.laplace(q)

    with mp.workdps(digits):
        vals, bad = _gs_curve(F, x, plan, strict)
    params = dict(N=config.N, b=config.b, K=K, digits=digits, n0=config.n0.kind,
                  n0_params=config.n0.params())
    return EstimateCurve(x, vals, "GS_noise_free", params, bad)


def estimate_n0_from_samples(config: ModelConfig, kde, K: int, x_grid, digits: int = GS_DIGITS,
                             strict: bool = True, seed=None) -> EstimateCurve:
    """Invert the link map applied to the transform of a Gamma-kernel estimator."""
    x = _check_grid(x_grid)
    plan = gs_weights(K, digits)

    with mp.workdps(digits):
        def F(p):
            q = q_N(config, p)
            return link_prefactor(config, p) * gamma_mixture_laplace(kde, q)

        vals, bad = _gs_curve(F, x, plan, strict)
    params = dict(N=config.N, b=config.b, K=K, digits=digits, alpha=kde.alpha, n_d=len(kde.sample),
                  variant=kde.variant, seed=seed)
    return EstimateCurve(x, vals, "GS_sampled", params, bad)


def estimate_n0_first_order(config: ModelConfig, source, x_grid, seed=None) -> EstimateCurve:
    """(1/b m1) times the cemetery density at x/(b m1).

    ``source`` is an explicit cemetery law (``flux(t)``), a sampled series
    (``flux_at(t)``) or a ``(sample, alpha)`` pair for the log-kernel estimator.
    """
    x = np.asarray(x_grid, dtype=float)
    bm1 = float(config.b * config.moments.m1)
    params = dict(N=config.N, b=config.b)
    if isinstance(source, tuple):
        from .kde import log_kde_eval

        sample, alpha = source
        t = x / bm1
        vals = np.where(t > 0, log_kde_eval(sample, alpha, np.where(t > 0, t, 1.0)), 0.0) / bm1
        params.update(alpha=alpha, n_d=len(sample), seed=seed)
    else:
        density = source.flux_at if hasattr(source, "flux_at") else source.flux
        vals = np.asarray(density(x / bm1), dtype=float) / bm1
    return EstimateCurve(x, vals, "FirstOrder_old", params)
