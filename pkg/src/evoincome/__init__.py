"""Evolutionary market model: stochastic processes, income mixture and estimators."""

from .errors import EvoIncomeError
from .income import MixtureParams, mixture_density, mixture_sample
from .sde import DriftDiffusion, NoiseSpec, simulate, simulate_ensemble, stationary_density

__version__ = "0.1.0"

__all__ = [
    "DriftDiffusion",
    "EvoIncomeError",
    "MixtureParams",
    "NoiseSpec",
    "mixture_density",
    "mixture_sample",
    "simulate",
    "simulate_ensemble",
    "stationary_density",
]
