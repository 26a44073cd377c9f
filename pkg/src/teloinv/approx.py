"""Second-order advection-diffusion approximation of the scaled model.

Contains a conservative solver for the approximated system, the drifted heat
kernel, explicit convolution formulas for the second and third spatial
derivatives of its solution, and evaluators for the derivative and error bounds.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import StabilityViolation
from .model import (EnvelopeConstants, Gamma, ModelConfig, SpectralConstants, default_lambdas,
                    envelope_constants, spectral_constants)
from .simulate import CemeterySeries, ForwardSolution, GridFunction, _cell_averages


@dataclass(frozen=True)
class HeatKernelParams:
    mu: float
    sigmaN2: float

    def __post_init__(self):
        if not (self.mu > 0 and self.sigmaN2 > 0):
            raise ValueError("mu and sigma_N^2 must be positive")

    @classmethod
    def from_config(cls, config: ModelConfig) -> "HeatKernelParams":
        return cls(float(config.mu), float(config.sigma2))

    @property
    def decay(self) -> float:
        """2 mu / sigma_N^2, the rate of the reflection weight."""
        return 2 * self.mu / self.sigmaN2


def psi_kernel(params: HeatKernelParams, t, x):
    """Gaussian with mean -mu t and variance sigma_N^2 t."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("the heat kernel needs t > 0")
    var = params.sigmaN2 * t
    return np.exp(-(x + params.mu * t) ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var)


def _convolve(f, params: HeatKernelParams, t: float, z: float, support: float) -> float:
    """int_0^inf f(y) psi(t, z - y) dy, restricted to where the Gaussian lives."""
    centre = z + params.mu * t
    spread = math.sqrt(params.sigmaN2 * t)
    lo = max(0.0, centre - 14 * spread)
    hi = min(support, centre + 14 * spread)
    if hi <= lo:
        return 0.0
    g = lambda y: float(f(np.array([y]))[0]) * float(psi_kernel(params, t, z - y))
    pts = [c for c in (centre,) if lo < c < hi]
    with warnings.catch_warnings():
        # the tolerances sit at the float floor; quad reports that without harm
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(g, lo, hi, points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def _support(n0) -> float:
    return float(n0.quantile(1 - 1e-15)) * 1.5


def second_derivative_explicit(config: ModelConfig, n0pp, t: float, x: float) -> float:
    """Second spatial derivative of the approximated solution by the reflected heat kernel.

    At t = 0 this is n0''(x); afterwards (n0'' * psi)(x) - exp(-2 mu x / sigma^2) (n0'' * psi)(-x).
    """
    if t == 0:
        return float(n0pp(np.array([x]))[0])
    params = HeatKernelParams.from_config(config)
    supp = _support(config.n0)
    direct = _convolve(n0pp, params, t, x, supp)
    mirror = _convolve(n0pp, params, t, -x, supp)
    return direct - math.exp(-params.decay * x) * mirror


def third_derivative_explicit(config: ModelConfig, n0pp, n0ppp, t: float, x: float) -> float:
    """Third spatial derivative, differentiating the reflected convolution in x.

    Uses (n0'' * psi)' = n0''' * psi, valid because n0''(0) = 0.
    """
    if t == 0:
        return float(n0ppp(np.array([x]))[0])
    params = HeatKernelParams.from_config(config)
    supp = _support(config.n0)
    k = params.decay
    direct = _convolve(n0ppp, params, t, x, supp)
    mirror3 = _convolve(n0ppp, params, t, -x, supp)
    mirror2 = _convolve(n0pp, params, t, -x, supp)
    return direct + math.exp(-k * x) * (mirror3 + k * mirror2)


# ---------------------------------------------------------------------------
# solver for the approximated system
# ---------------------------------------------------------------------------

def solve_advection_diffusion(config: ModelConfig, x_max: float, h: float, dt: float,
                              T: float | None = None, store_times=None, flux_tol: float = 1e-4,
                              t_cap: float = 1e4) -> ForwardSolution:
    """Finite-volume solver for u_t = mu u_x + (sigma^2/2) u_xx on the half-line.

    Interior face fluxes use centred values and differences.  At x = 0 the trace and
    slope come from the linear profile through the first two cell averages, which
    imposes u_xx(t, 0) = 0; the resulting face flux is the boundary outflow u_d.  The
    first cell then evolves by pure transport, u_t = mu u_x.
    """
    mu = float(config.mu)
    diff = float(config.sigma2) / 2
    if dt > h * h * config.N / (config.b * float(config.moments.m2)) * (1 + 1e-12):
        raise StabilityViolation(f"dt={dt} exceeds h^2 N/(b m2)")
    if mu * h / diff > 2:
        raise StabilityViolation("cell Peclet number above 2: refine h")
    M = int(math.ceil(x_max / h))
    edges = h * np.arange(M + 1)
    centres = (edges[:-1] + edges[1:]) / 2
    u = _cell_averages(config.n0, edges)

    def boundary(u):
        slope = (u[1] - u[0]) / h
        trace = u[0] - slope * h / 2
        return trace, slope

    def rhs(u):
        J = np.empty(M + 1)
        J[1:M] = mu * (u[:-1] + u[1:]) / 2 + diff * (u[1:] - u[:-1]) / h
        trace, slope = boundary(u)
        J[0] = mu * trace + diff * slope
        J[M] = 0.0
        return (J[1:] - J[:-1]) / h, J[0]

    store = None if store_times is None else sorted(float(s) for s in store_times)
    snapshots = [GridFunction(centres, u.copy(), 0.0)]
    ts, fl = [0.0], [rhs(u)[1]]
    F, t = 0.0, 0.0
    mass0 = h * u.sum()
    residuals = [abs(mass0 - 1)]
    next_store = 0
    if store is not None:
        while next_store < len(store) and store[next_store] <= 0:
            next_store += 1
    while True:
        if T is not None and t >= T - 1e-12:
            break
        if T is None and (F >= 1 - flux_tol or t >= t_cap):
            break
        tau = dt if T is None else min(dt, T - t)
        if store is not None and next_store < len(store):
            tau = min(tau, store[next_store] - t)
        k1, f1 = rhs(u)
        k2, f2 = rhs(u + tau / 2 * k1)
        k3, f3 = rhs(u + tau / 2 * k2)
        k4, f4 = rhs(u + tau * k3)
        u = u + tau / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        F += tau / 6 * (f1 + 2 * f2 + 2 * f3 + f4)
        t += tau
        if not np.all(np.isfinite(u)):
            raise StabilityViolation(f"non-finite values at t={t}")
        ts.append(t)
        fl.append(rhs(u)[1])
        residuals.append(abs(h * u.sum() + F - 1))
        hit = store is not None and next_store < len(store) and abs(t - store[next_store]) < 1e-12
        if hit:
            next_store += 1
        if hit or store is None:
            snapshots.append(GridFunction(centres, u.copy(), t))
    series = CemeterySeries(np.array(ts), np.array(fl))
    return ForwardSolution(snapshots, series, np.array(residuals))


def boundary_trace(snapshot: GridFunction):
    """(u(t,0), u_x(t,0)) reconstructed as in the solver."""
    h = snapshot.x_grid[1] - snapshot.x_grid[0]
    u = snapshot.values
    slope = (u[1] - u[0]) / h
    return u[0] - slope * h / 2, slope


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoremBound:
    c1: float
    c2: float
    c3: float
    c4: float
    spectral: SpectralConstants
    envelope: EnvelopeConstants


def make_theorem_bound(config: ModelConfig, lam: float | None = None,
                       lam_prime: float | None = None) -> TheoremBound:
    """Constants of the error bounds; rates default to beta/2 and its admissible companion."""
    if not isinstance(config.n0, Gamma):
        raise TypeError("bounds are instantiated for Gamma initial laws")
    d_lam, d_lp = default_lambdas(config)
    lam = d_lam if lam is None else lam
    lam_prime = d_lp if lam_prime is None else lam_prime
    m = config.moments
    m1, m2, m3 = float(m.m1), float(m.m2), float(m.m3)
    if not 0 <= lam_prime < 2 * config.N * m1 / m2 - 2 * lam:
        raise ValueError("lambda' outside [0, 2N m1/m2 - 2 lambda)")
    env = envelope_constants(config.n0, lam, lam_prime)
    spec = spectral_constants(config, lam)
    b = config.b
    c1 = env.C_lambda * b * m3 / 6
    c3 = env.D_lambda * b * m1 * m3 / (3 * m2)
    c4 = env.D_lambda * b * m3 / 6
    return TheoremBound(c1, c1, c3, c4, spec, env)


def _rates(config: ModelConfig, bound: TheoremBound):
    m = config.moments
    m1, m2 = float(m.m1), float(m.m2)
    lam, lamN = float(bound.spectral.lam), float(bound.spectral.lamN)
    omega = 2 * config.N * m1 / m2 * lamN / lam
    return m1, m2, lam, lamN, omega


def theorem_bound(config: ModelConfig, bound: TheoremBound, t, x):
    """Right-hand sides of the pointwise density bound and of the flux bound."""
    m1, m2, lam, lamN, omega = _rates(config, bound)
    b, N = config.b, config.N
    C_N, beta_N = float(bound.spectral.C_N), float(bound.spectral.beta_N)
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    slow = np.exp(-b * m1 * lamN * t)
    fast = (bound.c2 / N ** 3 + bound.c3 / N ** 2) / C_N * np.exp(-beta_N * t)
    bound_a = bound.c1 * t / N ** 2 * slow * np.exp(-lam * x) + fast * np.exp(-omega * x)
    bound_b = (b * m1 * bound.c1 * t + bound.c4) / N ** 2 * slow + b * m1 * fast
    return bound_a, bound_b


def eigen_envelope(config: ModelConfig, lam: float, t, x):
    """exp(-mu lamN t) [exp(-lam x) - exp(-omega x)], the decaying mode behind the bounds."""
    spec = spectral_constants(config, lam)
    m = config.moments
    lamN = float(spec.lamN)
    omega = 2 * config.N * float(m.m1) / float(m.m2) * lamN / lam
    mu = float(config.mu)
    return np.exp(-mu * lamN * np.asarray(t)) * (np.exp(-lam * np.asarray(x)) - np.exp(-omega * np.asarray(x)))


def lemma_bounds_check(config: ModelConfig, bound: TheoremBound, t: float, x: float):
    """(|u_xx|, its bound, |u_xxx|, its bound) at one point."""
    m1, m2, lam, lamN, omega = _rates(config, bound)
    if config.N < lam * m2 / m1:
        raise ValueError("the derivative bounds need N >= lambda m2/m1")
    n0 = config.n0
    pp = lambda y: n0.derivative(y, 2)
    ppp = lambda y: n0.derivative(y, 3)
    C, D = bound.envelope.C_lambda, bound.envelope.D_lambda
    decay = math.exp(-config.b * m1 * lamN * t)
    lhs2 = abs(second_derivative_explicit(config, pp, t, x))
    rhs2 = D * decay * (math.exp(-lam * x) - math.exp(-omega * x))
    lhs3 = abs(third_derivative_explicit(config, pp, ppp, t, x))
    rhs3 = C * decay * math.exp(-lam * x) + (C + D * 2 * config.N * m1 / m2) * decay * math.exp(-omega * x)
    return lhs2, rhs2, lhs3, rhs3
