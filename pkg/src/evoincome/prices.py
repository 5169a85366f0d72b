"""Short-run price fluctuations around the mean price.

Competition between products acts as a constant restoring force of size
``b`` on a price deviation ``dp``; random purchase noise with correlation
``D * delta(t - t')`` broadens it.  In the competitive regime the stationary
law is a Laplace (double exponential) density.  Without competition the
restoring force changes sign and the deviations spread without bound.

The noise correlation here is ``D * delta``, so one step has noise variance
``D * dt`` and the process maps onto :mod:`evoincome.sde` with amplitude
``D / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoStationaryDistributionError, SingularityError
from .sde import DriftDiffusion, NoiseSpec, simulate, simulate_ensemble

REGIMES = ("competitive", "non_competitive")


@dataclass(frozen=True)
class PriceFluctParams:
    relaxation: float
    amplitude: float
    regime: str = "competitive"

    def __post_init__(self):
        if not self.relaxation > 0:
            raise ValueError("relaxation rate b must be > 0")
        if not self.amplitude > 0:
            raise ValueError("noise amplitude D must be > 0")
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")

    @property
    def drift_sign(self):
        return -1.0 if self.regime == "competitive" else 1.0

    def model(self):
        """The price process as a :class:`DriftDiffusion` (amplitude ``D/2``)."""
        b = self.drift_sign * self.relaxation
        return DriftDiffusion(lambda x: b * np.sign(x), lambda x: np.ones_like(x, dtype=float))

    @property
    def sde_amplitude(self):
        return 0.5 * self.amplitude


@dataclass(frozen=True)
class SubbotinTailParams:
    """Large-deviation tail of the price law.

    ``beta`` is the size-scaling exponent of the price-fluctuation width; it
    is carried for reference only and does not enter the density.
    """

    scale: float
    normalizer: float = 1.0
    beta: float = 0.15

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale sigma_p must be > 0")
        if not self.normalizer > 0:
            raise ValueError("normalizer C_p must be > 0")


def price_fluct_step(dp, params, dt, noise_draw):
    """Advance a price deviation by one step.

    ``dp - b*sign(dp)*dt + sqrt(D*dt)*draw`` in the competitive regime; the
    drift sign is flipped without competition.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    drift = params.drift_sign * params.relaxation * np.sign(dp)
    out = dp + drift * dt + math.sqrt(params.amplitude * dt) * np.asarray(noise_draw)
    return float(out) if np.ndim(out) == 0 else out


def laplace_density(dp, params):
    """Normalized stationary law ``(b/D) exp(-(2b/D)|dp|)``."""
    if params.regime != "competitive":
        raise NoStationaryDistributionError(
            "without competition the restoring force vanishes; the Laplace law is not stable")
    rate = 2.0 * params.relaxation / params.amplitude
    out = 0.5 * rate * np.exp(-rate * np.abs(np.asarray(dp, dtype=float)))
    return float(out) if out.ndim == 0 else out


def laplace_cdf(dp, params):
    if params.regime != "competitive":
        raise NoStationaryDistributionError("no stationary law without competition")
    rate = 2.0 * params.relaxation / params.amplitude
    x = np.asarray(dp, dtype=float)
    out = np.where(x < 0, 0.5 * np.exp(rate * x), 1.0 - 0.5 * np.exp(-rate * x))
    return float(out) if out.ndim == 0 else out


def laplace_mean_abs(params):
    """Mean absolute deviation ``D / (2b)`` of the stationary law."""
    return params.amplitude / (2.0 * params.relaxation)


def laplace_variance(params):
    return params.amplitude**2 / (2.0 * params.relaxation**2)


def subbotin_tail_density(dp, params):
    """``C_p exp(-|dp|/sigma_p) / |dp|``, valid for large ``|dp|``."""
    x = np.abs(np.asarray(dp, dtype=float))
    if np.any(x == 0):
        raise SingularityError("tail density is singular at dp = 0")
    out = params.normalizer * np.exp(-x / params.scale) / x
    return float(out) if out.ndim == 0 else out


def simulate_price(params, dp0=0.0, dt=0.01, n_steps=10_000, seed=0):
    """Single price-deviation trajectory."""
    return simulate(params.model(), dp0, dt, n_steps, NoiseSpec(params.sde_amplitude, seed))


def price_ensemble(params, n_replicas, dt, n_steps, seed=0, burn_in=0, record_every=1, dp0=0.0):
    """Independent price-deviation replicas, recorded after ``burn_in``."""
    return simulate_ensemble(params.model(), dp0, dt, n_steps,
                             NoiseSpec(params.sde_amplitude, seed), n_replicas,
                             burn_in=burn_in, record_every=record_every)


def windowed_mean_abs(values, n_windows):
    """Mean of ``|dp|`` over consecutive time windows.

    ``values`` is ``(n_times, n_replicas)`` or 1-d; rows are split into
    ``n_windows`` contiguous windows.
    """
    v = np.abs(np.asarray(values, dtype=float))
    if v.ndim == 1:
        v = v[:, None]
    chunks = np.array_split(v, n_windows, axis=0)
    return np.array([c.mean() for c in chunks])
