"""Existence and orbital stability of solitary waves of the extended Boussinesq equation

    v_tt + (-v + a v^2 + b v^3)_xx + v_xxxx = 0.
"""
from .model import (
    BQError,
    ExistenceVerdict,
    ModelParams,
    NumericalError,
    Polarity,
    PreconditionError,
    WaveId,
    classify_existence,
    is_heimburg_jackson,
    wellposed_at_constants,
)
from .moment import MomentEval, evaluate_moment, moment, moment_dd_fd, moment_dd_integral, mu_closed_form
from .profile import WaveProfile, profile_abscissa, sample_profile
from .stability import RegionScan, StabilityVerdict, Verdict, classify, find_thresholds, scan_region

__version__ = "0.1.0"
