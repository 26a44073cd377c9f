"""Experiment runners behind the command line: each writes CSV, SVG and a manifest."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy import signal, stats

from . import io, svg
from .errors import InsufficientPoints
from .kde import (VARIANTS, Bandwidth, GammaKDE, bandwidth_nrd, bandwidth_sj, gamma_kernel_params, gamma_laplace,
                  lognormal_laplace)
from .model import Gamma, Mixture, ModelConfig, Nakagami, Uniform, Weibull, in_P_N
from .simulate import sample_senescence_times
from .stehfest import (GS_DIGITS, estimate_n0_first_order, estimate_n0_from_samples, estimate_n0_noise_free,
                       gs_digit_budget)
from .transforms import explicit_cemetery_laplace

EXPERIMENTS = ("noise_free", "convergence", "small_variability", "noisy", "kernel_compare", "laplace_set",
               "roundoff")

NOISE_FREE_LAWS = ((9, 12), (16, 16), (25, 30), (49, 50))
SMALL_VARIABILITY_LAWS = ((100, 120), (225, 200), (324, 330), (400, 500))
CONVERGENCE_NS = tuple(1 + 4 * k for k in range(26))

# Largest K free of visible round-off at 200 digits, per sample size and law.
K_GUIDANCE = {
    30: {"gamma_9_12": 16, "gamma_25_30": 20, "gamma_49_50": 24},
    300: {"gamma_9_12": 16, "gamma_16_16": 22, "gamma_25_30": 22, "gamma_49_50": 22,
          "weibull_11_2": 36, "nakagami_6_4": 24, "mixture": 16},
    3000: {"gamma_9_12": 16, "gamma_25_30": 24, "gamma_49_50": 32},
}


@dataclass
class ExperimentSpec:
    name: str
    out: Path
    config: ModelConfig | None = None
    seed: int = 0
    digits: int | None = None
    K: int | None = None
    nd: int | None = None
    bandwidth: str = "auto"
    points: int = 200
    Ns: tuple | None = None

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.name!r}")
        self.out = Path(self.out)
        self.out.mkdir(parents=True, exist_ok=True)

    @property
    def base(self) -> ModelConfig:
        if self.config is not None:
            return self.config
        return ModelConfig(1.0, 40.0, Uniform(1.0), Gamma(25, 30))


@dataclass
class RunResult:
    spec: ExperimentSpec
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    fits: tuple = ()
    errors: tuple = ()

    def add(self, path):
        self.files.append(Path(path))
        return path


@dataclass(frozen=True)
class FitResult:
    slope_fixed: float
    C: float
    points_used: int
    residuals: tuple = ()


def fit_constrained(errors, Ns, slope: float) -> FitResult:
    """log C = mean(log err + slope log N) over the last third of the points."""
    err = np.asarray(errors, dtype=float)
    N = np.asarray(Ns, dtype=float)
    k = err.size
    if k < 3 or N.size != k:
        raise InsufficientPoints("a constrained fit needs at least three points")
    used = math.ceil(k / 3)
    le, lN = np.log(err[-used:]), np.log(N[-used:])
    logC = float(np.mean(le + slope * lN))
    res = le - (logC - slope * lN)
    return FitResult(float(slope), math.exp(logC), used, tuple(float(r) for r in res))


def fit_free(errors, Ns) -> tuple[float, float]:
    """Least-squares (slope, intercept) of log err against log N."""
    slope, icpt = np.polyfit(np.log(np.asarray(Ns, float)), np.log(np.asarray(errors, float)), 1)
    return float(slope), float(icpt)


def law_name(n0) -> str:
    if n0.kind == "mixture":
        return "mixture"
    return n0.kind + "_" + "_".join(f"{p:g}" for p in n0.params())


def default_grid(n0, points: int = 200) -> np.ndarray:
    """``points`` uniform points on (0, 1.2 q_0.999]."""
    top = 1.2 * n0.quantile(0.999)
    return np.linspace(0.0, top, points + 1)[1:]


def l1(x, a, b) -> float:
    return float(np.trapezoid(np.abs(np.asarray(a) - np.asarray(b)), x))


def total_variation(values) -> float:
    return float(np.sum(np.abs(np.diff(values))))


def oscillation_metric(estimate, truth) -> float:
    """|TV(estimate) - TV(truth)| on the grid."""
    return abs(total_variation(estimate) - total_variation(truth))


def _digits(spec: ExperimentSpec, K: int, floor: int = GS_DIGITS) -> int:
    return spec.digits if spec.digits is not None else max(floor, gs_digit_budget(K))


def choose_bandwidth(method: str, log_times, n_d: int):
    """nrd below 100 observations and SJ above, unless a method or value is forced."""
    if method == "auto":
        method = "nrd" if n_d < 100 else "sj"
    if method == "nrd":
        return bandwidth_nrd(log_times)
    if method == "sj":
        return bandwidth_sj(log_times)
    return Bandwidth(float(method), "fixed")


def write_manifest(result: RunResult, **extra) -> Path:
    spec = result.spec
    items = {"experiment": spec.name, "seed": spec.seed, "digits_requested": spec.digits, "K": spec.K,
             "nd": spec.nd, "bandwidth": spec.bandwidth, "points": spec.points}
    items.update(io.config_items(spec.base))
    items.update(extra)
    items.update({f"result.{k}": v for k, v in result.summary.items()})
    items["files"] = [f.name for f in result.files]
    path = io.write_keyvalue(spec.out / "manifest.txt", items)
    result.files.append(path)
    return path


# ---------------------------------------------------------------------------
# noise-free estimation
# ---------------------------------------------------------------------------

def _noise_free_one(config, K, digits, x, result, tag):
    truth = config.n0.pdf(x)
    est = estimate_n0_noise_free(config, K, x, digits, strict=False)
    old = estimate_n0_first_order(config, explicit_cemetery_laplace(config), x)
    out = result.spec.out
    result.add(io.write_csv(out / f"{tag}_truth.csv", ["x", "value"], [x, truth],
                            {"integral": float(np.trapezoid(truth, x))}))
    result.add(io.write_estimate(out / f"{tag}_gs.csv", est, digits))
    result.add(io.write_estimate(out / f"{tag}_old.csv", old))
    result.add(svg.line_chart(out / f"{tag}.svg", {"truth": (x, truth), "GS": (x, est.values),
                                                   "first order": (x, old.values)}, title=tag))
    return truth, est, old


def run_noise_free(spec: ExperimentSpec) -> RunResult:
    """Truth, GS and first-order curves for four Gamma initial laws."""
    result = RunResult(spec)
    K = spec.K or 250
    digits = _digits(spec, K)
    rows = []
    for shape, rate in NOISE_FREE_LAWS:
        config = spec.base.with_n0(Gamma(shape, rate))
        x = default_grid(config.n0, spec.points)
        tag = law_name(config.n0)
        truth, est, old = _noise_free_one(config, K, digits, x, result, tag)
        rows.append((tag, est.l1_to(truth), old.l1_to(truth), est.exhausted))
    names, gs_err, old_err, bad = zip(*rows)
    result.add(io.write_csv(spec.out / "errors.csv", ["law", "l1_gs", "l1_old", "exhausted"],
                            [names, gs_err, old_err, bad]))
    result.summary.update({f"l1_gs.{n}": e for n, e in zip(names, gs_err)})
    result.summary.update({f"l1_old.{n}": e for n, e in zip(names, old_err)})
    write_manifest(result, digits_used=digits, K_used=K)
    return result


def run_convergence(spec: ExperimentSpec) -> RunResult:
    """L1 errors against N on Gamma(16,16), with constrained and free log-log fits."""
    result = RunResult(spec)
    K = spec.K or 64
    digits = _digits(spec, K)
    Ns = tuple(spec.Ns or CONVERGENCE_NS)
    n0 = Gamma(16, 16)
    x = default_grid(n0, spec.points)
    truth = n0.pdf(x)
    new, old = [], []
    for N in Ns:
        config = spec.base.with_n0(n0).with_N(float(N))
        new.append(estimate_n0_noise_free(config, K, x, digits, strict=False).l1_to(truth))
        old.append(estimate_n0_first_order(config, explicit_cemetery_laplace(config), x).l1_to(truth))
    fit_new, fit_old = fit_constrained(new, Ns, 2.0), fit_constrained(old, Ns, 1.0)
    free_new, free_old = fit_free(new, Ns)[0], fit_free(old, Ns)[0]
    result.add(io.write_csv(spec.out / "convergence.csv", ["N", "l1_gs", "l1_old"], [Ns, new, old],
                            {"K": K, "digits": digits}))
    result.add(io.write_csv(spec.out / "fits.csv", ["estimator", "slope_fixed", "C", "points_used", "free_slope"],
                            [["gs", "old"], [fit_new.slope_fixed, fit_old.slope_fixed], [fit_new.C, fit_old.C],
                             [fit_new.points_used, fit_old.points_used], [free_new, free_old]]))
    Na = np.asarray(Ns, float)
    result.add(svg.line_chart(spec.out / "convergence.svg",
                              {"GS": (Na, new), "first order": (Na, old),
                               "C/N^2": (Na, fit_new.C / Na ** 2), "C/N": (Na, fit_old.C / Na)},
                              title="L1 error against N", xlabel="N", ylabel="L1", logx=True, logy=True))
    result.summary.update(free_slope_gs=free_new, free_slope_old=free_old, C_gs=fit_new.C, C_old=fit_old.C,
                          residuals_gs=list(fit_new.residuals), residuals_old=list(fit_old.residuals))
    result.fits = (fit_new, fit_old)
    result.errors = (np.array(new), np.array(old))
    write_manifest(result, digits_used=digits, K_used=K, Ns=list(Ns))
    return result


def run_small_variability(spec: ExperimentSpec) -> RunResult:
    """Estimates for four concentrated Gammas; negative-part mass should grow as cv shrinks."""
    result = RunResult(spec)
    K = spec.K or 250
    digits = _digits(spec, K)
    rows = []
    for shape, rate in SMALL_VARIABILITY_LAWS:
        config = spec.base.with_n0(Gamma(shape, rate))
        x = default_grid(config.n0, spec.points)
        tag = law_name(config.n0)
        truth, est, old = _noise_free_one(config, K, digits, x, result, tag)
        mode_err = abs(x[np.argmax(est.values)] - (shape - 1) / rate)
        rows.append((tag, config.n0.cv, est.negative_mass(), mode_err, est.l1_to(truth), old.l1_to(truth)))
    cols = list(zip(*rows))
    result.add(io.write_csv(spec.out / "small_variability.csv",
                            ["law", "cv", "negative_mass", "mode_error", "l1_gs", "l1_old"], cols))
    neg = np.array(cols[2])
    result.summary.update(cv=list(cols[1]), negative_mass=list(neg),
                          monotone=bool(np.all(np.diff(neg) >= 0)))
    write_manifest(result, digits_used=digits, K_used=K)
    return result


# ---------------------------------------------------------------------------
# sampled data
# ---------------------------------------------------------------------------

def alternative_laws():
    """Weibull(11, 2), Nakagami(6, 4) and the bimodal Gamma mixture."""
    return (Weibull(11, 2), Nakagami(6, 4), Mixture((0.5, 0.5), (Gamma(8, 8), Gamma(11, 3))))


def count_modes(x, values, rel_prominence: float = 0.1) -> int:
    values = np.asarray(values, dtype=float)
    peaks, _ = signal.find_peaks(values, prominence=rel_prominence * values.max())
    return int(peaks.size)


def noisy_estimate(config, n_d, seed, K, digits, x, bandwidth="auto"):
    """(sample, bandwidth, GS estimate, first-order estimate) for one seeded sample."""
    sample = sample_senescence_times(config, n_d, seed)
    logs = np.log(sample.times)
    bw = choose_bandwidth(bandwidth, logs, n_d)
    kde = GammaKDE(sample, bw.value)
    est = estimate_n0_from_samples(config, kde, K, x, digits, strict=False, seed=seed)
    old = estimate_n0_first_order(config, (sample.times, bw.value), x, seed=seed)
    return sample, bw, est, old


def run_noisy(spec: ExperimentSpec) -> RunResult:
    """Seeded samples at n_d in {30, 300, 3000}, plus the non-Gamma laws at n_d = 300."""
    result = RunResult(spec)
    sizes = (spec.nd,) if spec.nd else (30, 300, 3000)
    jobs = []
    for n_d in sizes:
        laws = [Gamma(*p) for p in ((9, 12), (25, 30), (49, 50))]
        if n_d == 300:
            laws = [Gamma(*p) for p in NOISE_FREE_LAWS] + list(alternative_laws())
        for n0 in laws:
            jobs.append((n_d, n0))
    rows = []
    for n_d, n0 in jobs:
        tag = f"{law_name(n0)}_nd{n_d}"
        K = spec.K or K_GUIDANCE.get(n_d, K_GUIDANCE[300]).get(law_name(n0), 22)
        digits = spec.digits or GS_DIGITS
        config = spec.base.with_n0(n0)
        x = default_grid(n0, spec.points)
        truth = n0.pdf(x)
        sample, bw, est, old = noisy_estimate(config, n_d, spec.seed, K, digits, x, spec.bandwidth)
        result.add(io.write_sample(spec.out / f"{tag}_sample.csv", sample))
        result.add(io.write_estimate(spec.out / f"{tag}_gs.csv", est, digits))
        result.add(io.write_estimate(spec.out / f"{tag}_old.csv", old))
        result.add(svg.line_chart(spec.out / f"{tag}.svg", {"truth": (x, truth), "GS": (x, est.values),
                                                            "first order": (x, old.values)}, title=tag))
        rows.append((tag, n_d, K, bw.value, bw.method, est.l1_to(truth), old.l1_to(truth),
                     count_modes(x, est.values), est.exhausted))
    cols = list(zip(*rows))
    result.add(io.write_csv(spec.out / "errors.csv",
                            ["run", "n_d", "K", "alpha", "bandwidth", "l1_gs", "l1_old", "modes_gs", "exhausted"],
                            cols))
    for r in rows:
        result.summary[f"l1_gs.{r[0]}"] = r[5]
        result.summary[f"l1_old.{r[0]}"] = r[6]
    write_manifest(result, digits_used=spec.digits or GS_DIGITS)
    return result


def run_kernel_compare(spec: ExperimentSpec) -> RunResult:
    """Laplace and density gaps between the log-normal kernel and its three Gamma surrogates."""
    result = RunResult(spec)
    a = math.log(2)
    ps = np.linspace(0, 10, 201)
    t = np.linspace(1e-3, 5, 400)
    for alpha in (0.2, 0.4):
        ln = np.array([lognormal_laplace(a, alpha, p) for p in ps])
        cols, header, curves = [ps, ln], ["p", "lognormal"], {}
        dens = {"lognormal": stats.lognorm.pdf(t, s=alpha, scale=math.exp(a))}
        for variant in VARIANTS:
            params = gamma_kernel_params(a, alpha, variant)
            gl = np.array([gamma_laplace(params, p) for p in ps])
            abs_gap = np.abs(gl - ln)
            cols += [abs_gap, abs_gap / ln]
            header += [f"abs_{variant}", f"rel_{variant}"]
            curves[variant] = (ps, abs_gap)
            dens[variant] = stats.gamma.pdf(t, a=params.ell_star, scale=1 / params.beta_star)
            result.summary[f"max_abs.{variant}.{alpha}"] = float(abs_gap.max())
            result.summary[f"max_rel.{variant}.{alpha}"] = float((abs_gap / ln).max())
        result.add(io.write_csv(spec.out / f"laplace_gaps_alpha{alpha}.csv", header, cols))
        result.add(io.write_csv(spec.out / f"densities_alpha{alpha}.csv", ["t", *dens], [t, *dens.values()]))
        result.add(svg.line_chart(spec.out / f"laplace_gaps_alpha{alpha}.svg", curves, xlabel="p",
                                  ylabel="|gap|", title=f"alpha={alpha}"))
        result.add(svg.line_chart(spec.out / f"densities_alpha{alpha}.svg",
                                  {k: (t, v) for k, v in dens.items()}, xlabel="t", title=f"alpha={alpha}"))
    write_manifest(result)
    return result


def laplace_set_mask(config: ModelConfig, alpha_r, beta_r, re, im) -> np.ndarray:
    """mask[i, j] = (re[j] + i im[i]) lies in the admissible set for (alpha_r, beta_r)."""
    with mp.workdps(30):
        return np.array([[in_P_N(config, mp.mpc(r, m), alpha_r, beta_r) for r in re] for m in im])


def run_laplace_set(spec: ExperimentSpec) -> RunResult:
    """Rasters of the admissible set, which narrows as |Im p| grows and holds no vertical line."""
    result = RunResult(spec)
    config = spec.base
    re = np.linspace(-3, 3, 121)
    im = np.linspace(-60, 60, 121)
    for alpha_r, beta_r in ((-1, -3), (-2, -1)):
        mask = laplace_set_mask(config, alpha_r, beta_r, re, im)
        tag = f"laplace_set_{alpha_r}_{beta_r}"
        R, I = np.meshgrid(re, im)
        result.add(io.write_csv(spec.out / f"{tag}.csv", ["Re(p)", "Im(p)", "member"],
                                [R.ravel(), I.ravel(), mask.ravel()]))
        result.add(svg.raster(spec.out / f"{tag}.svg", mask, (re[0], re[-1]), (im[0], im[-1]),
                              title=f"alpha={alpha_r}, beta={beta_r}", vlines=(alpha_r, 0.0, 1.0, 2.0)))
        result.summary[f"symmetric.{tag}"] = bool(np.array_equal(mask, mask[::-1]))
        result.summary[f"full_columns.{tag}"] = int(mask.all(axis=0).sum())
    write_manifest(result)
    return result


def run_roundoff(spec: ExperimentSpec) -> RunResult:
    """The same noisy inputs at K = 36, inverted with 16 and with 200 digits."""
    result = RunResult(spec)
    K = spec.K or 36
    n_d = spec.nd or 300
    high = spec.digits or GS_DIGITS
    for n0 in (Gamma(9, 12), Gamma(25, 30)):
        config = spec.base.with_n0(n0)
        x = default_grid(n0, spec.points)
        truth = n0.pdf(x)
        sample = sample_senescence_times(config, n_d, spec.seed)
        bw = choose_bandwidth(spec.bandwidth, np.log(sample.times), n_d)
        kde = GammaKDE(sample, bw.value)
        tag = law_name(n0)
        curves = {"truth": (x, truth)}
        for digits in (16, high):
            t0 = time.perf_counter()
            est = estimate_n0_from_samples(config, kde, K, x, digits, strict=False, seed=spec.seed)
            result.summary[f"seconds.{tag}.{digits}"] = round(time.perf_counter() - t0, 2)
            result.summary[f"oscillation.{tag}.{digits}"] = oscillation_metric(est.values, truth)
            result.summary[f"negative_mass.{tag}.{digits}"] = est.negative_mass()
            result.add(io.write_estimate(spec.out / f"{tag}_digits{digits}.csv", est, digits))
            curves[f"{digits} digits"] = (x, est.values)
        result.add(svg.line_chart(spec.out / f"{tag}_roundoff.svg", curves, title=f"{tag}, K={K}"))
    write_manifest(result, K_used=K, nd_used=n_d, digits_high=high)
    return result


RUNNERS = {
    "noise_free": run_noise_free,
    "convergence": run_convergence,
    "small_variability": run_small_variability,
    "noisy": run_noisy,
    "kernel_compare": run_kernel_compare,
    "laplace_set": run_laplace_set,
    "roundoff": run_roundoff,
}


def run(spec: ExperimentSpec) -> RunResult:
    return RUNNERS[spec.name](spec)
