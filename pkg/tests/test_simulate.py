import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from teloinv.errors import StabilityViolation
from teloinv.model import Degenerate, Gamma, ModelConfig, PointMass, Uniform
from teloinv.simulate import (_cell_averages, empirical_laplace, sample_senescence_times, solve_scaled_model,
                              transfer_weights)


def _x_max(config):
    return config.n0.quantile(1 - 1e-12) + 3 * config.law.delta


@pytest.fixture(scope="module")
def solution912(cfg912):
    return solve_scaled_model(cfg912, _x_max(cfg912), 1 / 160, 1 / 80)


def test_one_division_kills():
    N, b = 40.0, 1.0
    cfg = ModelConfig(b, N, Degenerate(1.0), PointMass(0.5 / N))
    sample = sample_senescence_times(cfg, 20000, seed=3)
    n = len(sample)
    assert abs(sample.times.mean() * b * N - 1) < 3 / math.sqrt(n)


@pytest.mark.parametrize("k", [2, 5])
def test_k_divisions_kill(k):
    N, b = 40.0, 1.0
    cfg = ModelConfig(b, N, Degenerate(1.0), PointMass((k - 0.5) / N))
    sample = sample_senescence_times(cfg, 20000, seed=k)
    rel_sd = 1 / math.sqrt(k * len(sample))
    assert abs(sample.times.mean() * b * N / k - 1) < 3 * rel_sd


def test_sample_deterministic(cfg912):
    a = sample_senescence_times(cfg912, 50, seed=11)
    b = sample_senescence_times(cfg912, 50, seed=11)
    c = sample_senescence_times(cfg912, 50, seed=12)
    np.testing.assert_array_equal(a.times, b.times)
    assert not np.array_equal(a.times, c.times)
    assert (a.times > 0).all()


def test_substreams_are_per_lineage(cfg912):
    short = sample_senescence_times(cfg912, 10, seed=5)
    long = sample_senescence_times(cfg912, 40, seed=5)
    np.testing.assert_array_equal(short.times, long.times[:10])


def test_finalize_sorts(cfg912):
    s = sample_senescence_times(cfg912, 30, seed=1).finalize()
    assert np.all(np.diff(s.times) >= 0)


def test_monte_carlo_matches_solver(cfg912, solution912):
    n = 10_000
    sample = sample_senescence_times(cfg912, n, seed=2024).finalize()
    series = solution912.cemetery
    ecdf = np.arange(1, n + 1) / n
    model_cdf = np.interp(sample.times, series.t_grid, series.cumulative)
    ks = max(np.max(np.abs(ecdf - model_cdf)), np.max(np.abs(ecdf - 1 / n - model_cdf)))
    assert ks < 1.63 / math.sqrt(n)


def test_conservation(solution912):
    assert solution912.residuals.max() <= 1e-6


def test_positivity(solution912):
    assert min(s.values.min() for s in solution912.snapshots) >= -1e-10


def test_initial_snapshot_is_cell_average(cfg912, solution912):
    snap = solution912.snapshots[0]
    h = snap.x_grid[1] - snap.x_grid[0]
    edges = np.concatenate([snap.x_grid - h / 2, [snap.x_grid[-1] + h / 2]])
    np.testing.assert_allclose(snap.values, _cell_averages(cfg912.n0, edges), rtol=0, atol=1e-14)
    assert snap.time == 0.0
    # cell averages approach point values at second order
    assert np.max(np.abs(snap.values - cfg912.n0.pdf(snap.x_grid))) < h ** 2 * 10


def test_refinement_converges(cfg912):
    T = 1.0
    x_max = _x_max(cfg912)
    hs = [1 / 40, 1 / 80, 1 / 160]
    finals = []
    for h in hs:
        sol = solve_scaled_model(cfg912, x_max, h, 1 / 80, T=T)
        finals.append(sol.snapshots[-1])
    fine = finals[-1]

    def l1_to_fine(snap):
        return float(np.sum(np.abs(snap.at(fine.x_grid) - fine.values)) * (fine.x_grid[1] - fine.x_grid[0]))

    d0, d1 = l1_to_fine(finals[0]), l1_to_fine(finals[1])
    assert d1 <= 0.5 * d0


@pytest.mark.parametrize("law", [Uniform(1.0), Degenerate(0.7)])
def test_transfer_weights_partition(law):
    cfg = ModelConfig(1.0, 40.0, law, Gamma(9, 12))
    W, death = transfer_weights(cfg, 1 / 160)
    # cell j keeps, moves or loses all of its mass
    for j in range(len(death)):
        assert W[:j + 1].sum() + death[j] == pytest.approx(1.0, abs=1e-14)
    assert (W >= -1e-15).all() and (death >= 0).all()


def test_stability_violation(cfg912):
    with pytest.raises(StabilityViolation):
        solve_scaled_model(cfg912, 4.0, 1 / 80, 1 / 40, T=0.1)


def test_store_times(cfg912):
    sol = solve_scaled_model(cfg912, _x_max(cfg912), 1 / 80, 1 / 80, T=1.0, store_times=[0.33, 0.5])
    assert [round(s.time, 12) for s in sol.snapshots] == [0.0, 0.33, 0.5, 1.0]
    assert sol.snapshot_at(0.5).time == pytest.approx(0.5)
    with pytest.raises(KeyError):
        sol.snapshot_at(0.7)


def test_empirical_laplace_basics(cfg912):
    sample = sample_senescence_times(cfg912, 200, seed=4)
    assert empirical_laplace(sample, 0.0) == pytest.approx(1.0, abs=1e-15)
    values = [empirical_laplace(sample, p) for p in (0.1, 0.5, 1, 5, 50)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert empirical_laplace(sample, 1e4) < 1e-100
    with pytest.raises(ValueError):
        empirical_laplace(sample, -1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 20), st.floats(-20, 20))
def test_empirical_laplace_bounded(re, im):
    times = np.array([0.2, 0.7, 1.3])
    assert abs(empirical_laplace(times, complex(re, im))) <= 1 + 1e-12
