"""Ground-truth data for the scaled model: a finite-volume solver and a lineage sampler."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from .errors import MassDrift, NonTermination, StabilityViolation
from .model import ModelConfig

MAX_DIVISIONS = 10 ** 9


@dataclass(frozen=True)
class GridFunction:
    x_grid: np.ndarray
    values: np.ndarray
    time: float

    def mass(self) -> float:
        # values are cell averages on a uniform grid of cell centres
        h = self.x_grid[1] - self.x_grid[0]
        return float(h * self.values.sum())

    def at(self, x):
        """Linear interpolation, extrapolated linearly to the left edge."""
        x = np.asarray(x, dtype=float)
        xs, vs = self.x_grid, self.values
        inner = np.interp(x, xs, vs)
        slope = (vs[1] - vs[0]) / (xs[1] - xs[0])
        return np.where(x < xs[0], vs[0] + slope * (x - xs[0]), inner)


@dataclass(frozen=True)
class CemeterySeries:
    t_grid: np.ndarray
    flux: np.ndarray
    cumulative: np.ndarray | None = None

    def flux_at(self, t):
        t = np.asarray(t, dtype=float)
        end = self.t_grid[-1]
        inside = np.interp(np.minimum(t, end), self.t_grid, self.flux)
        return np.where(t > end * (1 + 1e-9), 0.0, inside)

    # estimators only need a callable density
    flux_fn = flux_at

    def mass(self) -> float:
        return float(np.trapezoid(self.flux, self.t_grid))


@dataclass
class ForwardSolution:
    snapshots: list
    cemetery: CemeterySeries
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def snapshot_at(self, t: float) -> GridFunction:
        times = np.array([s.time for s in self.snapshots])
        k = int(np.argmin(np.abs(times - t)))
        if abs(times[k] - t) > 1e-9 * max(1.0, t):
            raise KeyError(f"no stored snapshot at t={t}")
        return self.snapshots[k]


def _cell_averages(n0, edges):
    nodes, weights = np.polynomial.legendre.leggauss(8)
    a, b = edges[:-1], edges[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    return (n0.pdf(pts) * weights[None, :]).sum(axis=1) / 2


def transfer_weights(config: ModelConfig, h: float):
    """Fractions of a cell's mass moved d cells to the left, and the fraction lost per cell.

    For mass spread uniformly on cell j and a shortening v/N, the share landing
    d cells lower is a second difference of w -> int_0^w G, so every weight is
    exact and the two arrays add up to one cell by cell.
    """
    N = config.N
    law = config.law
    reach = int(math.ceil(law.delta / (N * h))) + 1
    d = np.arange(reach + 1)
    Gam = lambda w: law.cdf_integral(w)
    W = (Gam(N * (d + 1) * h) - 2 * Gam(N * d * h) + Gam(N * (d - 1) * h)) / (h * N)
    j = np.arange(reach + 1)
    death = 1 - (Gam(N * (j + 1) * h) - Gam(N * j * h)) / (h * N)
    death = np.clip(death, 0.0, 1.0)
    return W, death


def solve_scaled_model(config: ModelConfig, x_max: float, h: float, dt: float, T: float | None = None,
                       store_times=None, flux_tol: float = 1e-4, t_cap: float = 1e4) -> ForwardSolution:
    """Finite-volume method of lines for the scaled jump model, stepped with classic RK4.

    Unknowns are cell masses; the jump integral is applied to the piecewise-constant
    reconstruction with exact transfer weights, and the boundary flux is the mass those
    jumps carry below zero.  Mass plus integrated flux is therefore an invariant of the
    semi-discrete system and of RK4.  Without ``T`` the run stops once the integrated
    flux reaches ``1 - flux_tol``.
    """
    bN = config.b * config.N
    if dt > 1 / (2 * bN) * (1 + 1e-12):
        raise StabilityViolation(f"dt={dt} exceeds 1/(2bN)={1 / (2 * bN)}")
    M = int(math.ceil(x_max / h))
    edges = h * np.arange(M + 1)
    centres = (edges[:-1] + edges[1:]) / 2
    W, death = transfer_weights(config, h)
    D = len(W)
    m = h * _cell_averages(config.n0, edges)
    initial_mass = m.sum()

    def rhs(mass):
        padded = np.concatenate([mass, np.zeros(D - 1)])
        inflow = np.correlate(padded, W, mode="valid")
        k = min(D, len(mass))
        flux = bN * float(death[:k] @ mass[:k])
        return bN * (inflow - mass), flux

    store = None if store_times is None else sorted(float(s) for s in store_times)
    snapshots = [GridFunction(centres, m / h, 0.0)]
    ts, fl, cum = [0.0], [rhs(m)[1]], [0.0]
    F = 0.0
    t = 0.0
    residuals = [abs(initial_mass - 1)]
    step = 0
    next_store = 0
    if store is not None:
        while next_store < len(store) and store[next_store] <= 0:
            next_store += 1
    while True:
        if T is not None and t >= T - 1e-12:
            break
        if T is None and (F >= 1 - flux_tol or t >= t_cap):
            break
        tau = dt
        if T is not None:
            tau = min(dt, T - t)
        if store is not None and next_store < len(store):
            tau = min(tau, store[next_store] - t)
        k1, f1 = rhs(m)
        k2, f2 = rhs(m + tau / 2 * k1)
        k3, f3 = rhs(m + tau / 2 * k2)
        k4, f4 = rhs(m + tau * k3)
        m = m + tau / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        F += tau / 6 * (f1 + 2 * f2 + 2 * f3 + f4)
        t += tau
        step += 1
        if m.min() < -1e-6 * h:
            raise StabilityViolation(f"negative value {m.min() / h} at t={t}")
        ts.append(t)
        fl.append(rhs(m)[1])
        cum.append(F)
        residual = abs(m.sum() + F - 1)
        residuals.append(residual)
        if residual > 1e-5:
            raise MassDrift(f"conservation residual {residual} at t={t}")
        hit = store is not None and next_store < len(store) and abs(t - store[next_store]) < 1e-12
        if hit:
            next_store += 1
        if hit or store is None:
            snapshots.append(GridFunction(centres, m / h, t))
    if store is not None and snapshots[-1].time != t:
        snapshots.append(GridFunction(centres, m / h, t))
    series = CemeterySeries(np.array(ts), np.array(fl), np.array(cum))
    return ForwardSolution(snapshots, series, np.array(residuals))


# ---------------------------------------------------------------------------
# lineage sampler
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SenescenceSample:
    times: np.ndarray
    seed: int
    config: ModelConfig

    def __len__(self):
        return len(self.times)

    def finalize(self) -> "SenescenceSample":
        return SenescenceSample(np.sort(self.times), self.seed, self.config)


def lineage_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, lineage index)."""
    key = np.array([seed % 2 ** 64, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _one_lineage(config: ModelConfig, rng: np.random.Generator) -> float:
    x0 = float(config.n0.sample(rng, 1)[0])
    N = config.N
    threshold = x0 * N
    m1 = float(config.moments.m1)
    total = 0.0
    divisions = 0
    while True:
        batch = int(max(threshold - total, 0) / m1 * 1.1) + 8
        v = config.law.sample(rng, batch)
        csum = total + np.cumsum(v)
        hit = np.flatnonzero(csum > threshold)
        if hit.size:
            divisions += int(hit[0]) + 1
            break
        total = float(csum[-1])
        divisions += batch
        if divisions > MAX_DIVISIONS:
            raise NonTermination("lineage exceeded the division cap")
    waits = rng.standard_exponential(divisions)
    return float(waits.sum() / (config.b * N))


def sample_senescence_times(config: ModelConfig, n_d: int, seed: int) -> SenescenceSample:
    """Senescence times of ``n_d`` independent lineages.

    Each lineage draws its initial length, then shortens by v/N at the events of a
    rate-bN Poisson clock until the length drops below zero.
    """
    if n_d < 1:
        raise ValueError("n_d must be at least 1")
    times = np.array([_one_lineage(config, lineage_rng(seed, i)) for i in range(n_d)])
    return SenescenceSample(times, seed, config)


def empirical_laplace(sample, p):
    """(1/n) sum_i exp(-p T_i)."""
    times = sample.times if hasattr(sample, "times") else np.asarray(sample)
    if mp.re(p) < 0:
        raise ValueError("empirical transform needs Re(p) >= 0")
    if isinstance(p, (int, float)):
        return float(np.mean(np.exp(-p * times)))
    return complex(np.mean(np.exp(-complex(p) * times)))
