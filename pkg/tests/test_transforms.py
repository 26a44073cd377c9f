import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from teloinv.errors import AbscissaViolation, InsufficientHorizon, NonIntegerShape, OutsidePN
from teloinv.kde import GammaKDE
from teloinv.model import Gamma, ModelConfig, Uniform, Weibull
from teloinv.simulate import CemeterySeries, solve_scaled_model
from teloinv.transforms import (LaplaceFn, explicit_cemetery_laplace, gamma_mixture_laplace, law_transform_family,
                                link_map, numeric_laplace)


def uniform_cfg(n0, N=40.0):
    return ModelConfig(1.0, N, Uniform(1.0), n0)


def test_family_j0():
    with mp.workdps(50):
        s = mp.mpf("0.7")
        lg, ls = law_transform_family(Uniform(1.0), 0, s, 50)
        assert mp.almosteq(lg, (1 - mp.exp(-s)) / s, 1e-45)
        assert mp.almosteq(ls, mp.quad(lambda v: (1 - v) * mp.exp(-s * v), [0, 1]), 1e-45)


def test_family_small_s_gives_moments():
    with mp.workdps(60):
        for j in range(4):
            lg, _ = law_transform_family(Uniform(1.0), j, mp.mpf("1e-20"), 60)
            assert mp.almosteq(lg, mp.mpf(1) / (j + 1), 1e-18)


def test_family_j1_quadrature():
    with mp.workdps(40):
        lg, ls = law_transform_family(Uniform(1.0), 1, 2, 40)
        assert mp.almosteq(lg, mp.quad(lambda v: v * mp.exp(-2 * v), [0, 1]), 1e-20)
        assert mp.almosteq(ls, mp.quad(lambda v: (1 - v) * v * mp.exp(-2 * v), [0, 1]), 1e-20)


def test_explicit_shape_one():
    cfg = uniform_cfg(Gamma(1, 3))
    cem = explicit_cemetery_laplace(cfg, 60)
    with mp.workdps(60):
        s = mp.mpf(3) / 40
        a0 = 3 * mp.quad(lambda v: (1 - v) * mp.exp(-s * v), [0, 1])
        assert len(cem.a) == 1
        assert mp.almosteq(cem.a[0], a0, 1e-50)
        assert mp.almosteq(cem.laplace(mp.mpf(2)), a0 / (2 + cem.rate), 1e-50)


def test_explicit_total_mass(cfg912):
    cem = explicit_cemetery_laplace(cfg912)
    with mp.workdps(200):
        assert abs(cem.laplace(mp.mpf(0)) - 1) < mp.mpf("1e-30")


def derivative_oracle(cfg, p, digits=60):
    """b beta^l/(l-1)! (-d/dbeta)^(l-1) [L(1-G)(beta/N) / (p + bN(1 - Lg(beta/N)))]."""
    n0, b, N = cfg.n0, cfg.b, cfg.N
    ell = int(n0.shape)
    with mp.workdps(digits):
        def f(beta):
            s = beta / N
            lg = (1 - mp.exp(-s)) / s
            ls = (s - 1 + mp.exp(-s)) / s ** 2
            return ls / (p + b * N * (1 - lg))

        beta = mp.mpf(n0.rate)
        d = mp.diff(f, beta, ell - 1)
        return b * beta ** ell / mp.factorial(ell - 1) * (-1) ** (ell - 1) * d


@pytest.mark.parametrize("p", ["0.5", "1", "2"])
def test_explicit_matches_derivative_oracle(cfg912, p):
    cem = explicit_cemetery_laplace(cfg912)
    with mp.workdps(80):
        got = cem.laplace(mp.mpf(p))
    assert mp.almosteq(got, derivative_oracle(cfg912, mp.mpf(p), 80), 1e-40)


def test_explicit_non_integer_shape():
    with pytest.raises(NonIntegerShape):
        explicit_cemetery_laplace(uniform_cfg(Gamma(2.5, 3)))
    with pytest.raises(NonIntegerShape):
        explicit_cemetery_laplace(uniform_cfg(Weibull(11, 2)))


def test_explicit_completely_monotone(cfg912):
    cem = explicit_cemetery_laplace(cfg912, 60)
    assert all(a > 0 for a in cem.a)
    # d^k/dp^k sum a_i i!/(p+r)^(i+1) = (-1)^k sum a_i (i+k)!/(p+r)^(i+k+1)
    with mp.workdps(60):
        for p in (0, 0.5, 3, 10):
            w = 1 / (p + cem.rate)
            for k in range(4):
                closed = (-1) ** k * mp.fsum(a * mp.factorial(i + k) * w ** (i + k + 1) for i, a in enumerate(cem.a))
                assert (-1) ** k * closed > 0
                numeric = mp.diff(cem.laplace, mp.mpf(p), k, h=mp.mpf("1e-12"))
                assert mp.almosteq(numeric, closed, 1e-10)


def test_explicit_abscissa(cfg912):
    cem = explicit_cemetery_laplace(cfg912, 60)
    fn = cem.as_laplace_fn()
    with pytest.raises(AbscissaViolation):
        fn(cem.abscissa - 1)
    assert fn(0) == cem.laplace(0)


def test_link_map_basics(cfg912):
    fn = explicit_cemetery_laplace(cfg912, 60).as_laplace_fn()
    with mp.workdps(60):
        assert mp.almosteq(link_map(cfg912, fn, mp.mpf(0)), 1, 1e-40)
        p = mp.mpc(1, 0.5)
        assert mp.almosteq(link_map(cfg912, fn, mp.conj(p)), mp.conj(link_map(cfg912, fn, p)), 1e-40)
        with pytest.raises(OutsidePN):
            link_map(cfg912, fn, mp.mpc(0, 40))


def link_gap(N, p=1):
    cfg = uniform_cfg(Gamma(16, 16), N)
    fn = explicit_cemetery_laplace(cfg, 60).as_laplace_fn()
    with mp.workdps(60):
        return abs(link_map(cfg, fn, mp.mpf(p)) - (1 + mp.mpf(p) / 16) ** -16)


def test_link_map_second_order():
    g40, g80, g160 = link_gap(40), link_gap(80), link_gap(160)
    assert 3 < g40 / g80 < 5
    assert 12 <= g40 / g160 <= 20


def test_gamma_mixture_transform():
    kde = GammaKDE(np.array([1.0, 2.5]), 0.3)
    with mp.workdps(40):
        assert mp.almosteq(gamma_mixture_laplace(kde, 0), 1, 1e-35)
        direct = sum((1 + mp.mpf(2) / b) ** -kde.ells_mp()[0] for b in kde.betas_mp()) / 2
        assert mp.almosteq(gamma_mixture_laplace(kde, 2), direct, 1e-35)
        with pytest.raises(AbscissaViolation):
            gamma_mixture_laplace(kde, -min(kde.betas) - 1)


def test_gamma_mixture_concentrates():
    gaps = []
    with mp.workdps(30):
        for alpha in (0.2, 0.05, 0.01):
            kde = GammaKDE(np.array([1.3]), alpha)
            gaps.append(abs(gamma_mixture_laplace(kde, 2) - mp.exp(-2 * mp.mpf(1.3))))
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-4


@pytest.fixture(scope="module")
def fv_series(cfg912):
    return solve_scaled_model(cfg912, x_max=3.0, h=1 / 320, dt=1 / 80).cemetery


def test_numeric_laplace_mass(fv_series):
    # the exponential tail supplies the mass still alive at the end of the run
    total = float(numeric_laplace(fv_series, 0))
    assert total >= fv_series.cumulative[-1]
    assert total == pytest.approx(1, abs=2e-5)


def test_numeric_laplace_matches_explicit(cfg912, fv_series):
    exact = explicit_cemetery_laplace(cfg912, 60).laplace(mp.mpf(1))
    assert abs(float(numeric_laplace(fv_series, 1)) - float(exact)) < 1e-4


def test_numeric_laplace_monotone(fv_series):
    vals = [float(numeric_laplace(fv_series, p, digits=20)) for p in np.linspace(0, 8, 9)]
    assert np.all(np.diff(vals) < 0)


def test_numeric_laplace_horizon():
    t = np.linspace(0, 1, 50)
    with pytest.raises(InsufficientHorizon):
        numeric_laplace(CemeterySeries(t, np.full(50, 0.5)), 1)


def test_laplace_fn_guard():
    fn = LaplaceFn(lambda p: 1 / (p + 1), -1, "ClosedGamma")
    with pytest.raises(AbscissaViolation):
        fn(-1)
    assert fn(1) == 0.5


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 20))
def test_explicit_transform_bounded_by_one(p):
    cem = explicit_cemetery_laplace(uniform_cfg(Gamma(9, 12)), 60)
    with mp.workdps(60):
        v = cem.laplace(mp.mpf(p))
    assert 0 < v < 1
