"""Pickands, Piterbarg and Berman constants by Monte Carlo, and sojourn-time tails
of Gaussian processes checked against their high-level asymptotics."""
from .analytic import (BoundPair, expected_occupation, gamma_fn, normal_survival,
                       pickands_lower_bound_new, pickands_lower_bound_old, t_constant_closed,
                       t_constant_finite)
from .constants import (ConstantEstimate, estimate_berman_B, estimate_berman_locally_stationary,
                        estimate_berman_rate, estimate_Btilde, estimate_G_cdf, estimate_occupation_mean,
                        estimate_pickands_berman, estimate_pickands_sup, estimate_piterbarg,
                        estimate_piterbarg_sup)
from .kernels import BACKEND
from .paths import DomainError, Grid, PathSample, ProcessModel, RateFunction, SpectralFailureError
from .stats import McEstimate, SeedSpec, make_stream

__version__ = "0.1.0"
