"""Monitored single-particle circuits and their multifractal statistics.

Quantum and classical brick-wall circuits under sparse site measurements,
closed-form reference models, trajectory-ensemble averaging and power-law
exponent fits.
"""
__version__ = "0.1.0"

from .analytic import (DivergentIntegralError, ResetParams, resetting_closed_forms,
                       simulate_reset_walk, single_shot_mean_ipr, single_shot_typical_ln_ipr)
from .ensemble import ExperimentSpec, RunResult, TrajectoryError, default_T, derive_stream, run
from .observables import EnsembleStats, coarse_grain, ipr, position_variance, recenter
from .qdyn import CircuitSchedule, MeasurementScheme, sample_haar_unitary
from .scaling import exponent_table, fit_power_law
