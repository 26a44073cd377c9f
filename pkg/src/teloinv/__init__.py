"""Estimation of the initial telomere-length law from senescence times.

The scaled jump model, its advection-diffusion approximation, exact Laplace
transforms of the senescence-time law, Gaver-Stehfest inversion and kernel
density estimation of observed times.
"""
from .approx import (HeatKernelParams, make_theorem_bound, psi_kernel, second_derivative_explicit,
                     solve_advection_diffusion, theorem_bound, third_derivative_explicit)
from .bell import bell_complete, bell_partial
from .errors import *  # noqa: F401,F403
from .kde import (GammaKDE, bandwidth_nrd, bandwidth_sj, gamma_kernel_params, log_kde_eval)
from .model import (Degenerate, Gamma, Mixture, ModelConfig, Nakagami, Uniform, Weibull, envelope_constants,
                    moments, q_N, spectral_constants)
from .simulate import empirical_laplace, sample_senescence_times, solve_scaled_model
from .stehfest import (EstimateCurve, estimate_n0_first_order, estimate_n0_from_samples,
                       estimate_n0_noise_free, gs_invert, gs_weights)
from .transforms import explicit_cemetery_laplace, link_map, numeric_laplace

__version__ = "0.1.0"
