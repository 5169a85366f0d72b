"""Firm sizes from proportionate growth of business units.

A business unit's sales follow Gibrat's law, so at fixed age the unit-size
distribution is lognormal.  A firm adds a size-proportional growth term
``a * x`` (preferential attachment) and, in the cash-cow approximation, its
fluctuations are those of its dominant unit scaled by that unit's share.
Firm sales then obey ``dx/dt = a x + x rho`` with ``<rho rho'> = 2 D' delta``.

The process has no stationary law by itself.  Ensembles are confined by a
reflecting floor ``x_min``; optionally the total sales of the population are
held fixed at every step (total sales are a slow variable on the short time
scale).  Note that with fixed total sales a uniform attachment rate cancels
out of the relative dynamics entirely.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonNormalizableWarning
from .sde import BlockNormals, gibrat_step


@dataclass(frozen=True)
class BusinessUnit:
    sales: float
    fitness_sigma: float = 0.0

    def __post_init__(self):
        if not self.sales > 0:
            raise DomainError("business-unit sales must be > 0")
        if self.fitness_sigma < 0:
            raise ValueError("fitness_sigma must be >= 0")


@dataclass(frozen=True)
class Firm:
    units: tuple
    classification: str = "private"

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        if self.classification not in ("private", "capital"):
            raise ValueError("classification must be 'private' or 'capital'")

    @property
    def sales(self):
        """Total unit sales of the firm (sum over its business units)."""
        return math.fsum(u.sales for u in self.units)


@dataclass
class FirmPopulation:
    firms: list = field(default_factory=list)

    def sales(self, classification=None):
        return np.array([f.sales for f in self.firms
                         if classification is None or f.classification == classification])

    def private(self):
        return FirmPopulation([f for f in self.firms if f.classification == "private"])


@dataclass(frozen=True)
class FirmGrowthParams:
    attach_rate: float
    noise_amplitude: float
    cash_cow_share: float = 1.0
    mean_unit_profit: float = 1.0

    def __post_init__(self):
        if self.attach_rate < 0:
            raise ValueError("attach_rate must be >= 0")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be >= 0")
        if not 0 < self.cash_cow_share <= 1:
            raise ValueError("cash_cow_share must lie in (0, 1]")
        if not self.mean_unit_profit > 0:
            raise ValueError("mean_unit_profit must be > 0")
        if self.noise_amplitude > 0 and self.attach_rate / self.noise_amplitude > 10:
            warnings.warn("attach_rate is not small compared with the noise amplitude",
                          stacklevel=2)


@dataclass(frozen=True)
class LognormalParams:
    y0: float
    u: float
    omega: float
    tau: float

    def __post_init__(self):
        if not (self.y0 > 0 and self.omega > 0 and self.tau > 0):
            raise ValueError("need y0 > 0, omega > 0, tau > 0")

    @property
    def log_mean(self):
        return math.log(self.y0) + self.u * self.tau

    @property
    def log_std(self):
        return self.omega * math.sqrt(self.tau)


def cash_cow_select(firm):
    """Index of the business unit with the largest sales (first on ties)."""
    units = firm.units if isinstance(firm, Firm) else firm
    if len(units) == 0:
        raise DomainError("firm has no business units")
    sales = [u.sales if isinstance(u, BusinessUnit) else float(u) for u in units]
    return int(np.argmax(sales))


def firm_sales_step(x, params, dt, noise_draw):
    """Log-space step ``x * exp(a dt + sqrt(2 D' dt) draw)``; always positive."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    rate = params.attach_rate + math.sqrt(2.0 * params.noise_amplitude / dt) * np.asarray(noise_draw)
    return gibrat_step(x, rate, dt)


def power_law_exponent(params):
    """Density exponent ``1 + a/D'`` of the firm-size tail."""
    if params.noise_amplitude == 0:
        raise DomainError("power-law exponent undefined for zero noise amplitude")
    lam = 1.0 + params.attach_rate / params.noise_amplitude
    if lam <= 1.0:
        warnings.warn("exponent <= 1: the size law is not normalizable", NonNormalizableWarning,
                      stacklevel=2)
    return lam


def lognormal_product_density(y, params):
    """Lognormal business-unit size density at age ``tau``."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("y must be > 0")
    s2 = params.omega**2 * params.tau
    z = np.log(y / params.y0) - params.u * params.tau
    out = np.exp(-z * z / (2.0 * s2)) / (math.sqrt(2.0 * math.pi * params.tau) * params.omega * y)
    return float(out) if out.ndim == 0 else out


def profit_from_sales(x, params):
    """Firm profit ``<pi> * x`` at the constant mean unit profit."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("sales must be > 0")
    out = params.mean_unit_profit * x
    return float(out) if out.ndim == 0 else out


@dataclass
class FirmEnsemble:
    sales: np.ndarray
    units: np.ndarray | None
    time: float
    total_history: np.ndarray


def simulate_firm_ensemble(params, n_firms, n_steps, dt=1.0, x0=1.0, x_min=None, seed=0,
                           conserve_total=False, mode="cash_cow", units_per_firm=4,
                           history_every=100):
    """Evolve ``n_firms`` independent firm sizes.

    Parameters
    ----------
    params : FirmGrowthParams
    n_firms, n_steps : int
    dt : float
    x0 : float
        Initial firm size (all firms start equal).
    x_min : float, optional
        Reflecting floor, default 1% of the initial mean size.  Sizes that
        fall below it are mirrored in log space, ``x -> x_min**2 / x``.
    conserve_total : bool
        Rescale all firms after each step so that total sales keep their
        initial value.  The rescaling is applied before the floor (so the
        floor acts on relative sizes) and once more after it; the floor then
        holds up to the second, small rescaling factor.
    mode : {"cash_cow", "full"}
        ``cash_cow`` draws one fluctuation per firm with amplitude ``D'``.
        ``full`` tracks ``units_per_firm`` units per firm; the cash cow holds
        the share ``nu`` and every unit fluctuates independently with
        amplitude ``D'/nu**2``, so the firm noise reduces to the cash-cow
        form when the other units are small.
    history_every : int
        Record total sales every this many steps.
    """
    if mode not in ("cash_cow", "full"):
        raise ValueError("mode must be 'cash_cow' or 'full'")
    if not x0 > 0:
        raise DomainError("x0 must be > 0")
    x_min = 0.01 * x0 if x_min is None else float(x_min)
    if not 0 < x_min < x0:
        raise DomainError("need 0 < x_min < x0")
    a, amp = params.attach_rate, params.noise_amplitude

    if mode == "cash_cow":
        state = np.full((n_firms, 1), float(x0))
        unit_amp = amp
    else:
        if units_per_firm < 2:
            raise ValueError("full mode needs units_per_firm >= 2")
        nu = params.cash_cow_share
        shares = np.full(units_per_firm, (1.0 - nu) / (units_per_firm - 1))
        shares[0] = nu
        state = np.tile(x0 * shares, (n_firms, 1))
        state = np.where(state > 0, state, x0 * 1e-12)
        unit_amp = amp / nu**2

    n_units = state.shape[1]
    normals = BlockNormals(seed, n_firms * n_units)
    scale = math.sqrt(2.0 * unit_amp * dt)
    total0 = state.sum()
    history = [total0]
    chunk = max(1, min(n_steps, (1 << 21) // (n_firms * n_units)))
    done = 0
    while done < n_steps:
        m = min(chunk, n_steps - done)
        draws = normals.draw(m).reshape(m, n_firms, n_units)
        for k in range(m):
            state = gibrat_step(state, a + scale / dt * draws[k], dt)
            if conserve_total:
                state *= total0 / state.sum()
            x = state.sum(axis=1)
            low = x < x_min
            if np.any(low):
                state[low] *= (x_min * x_min / x[low] ** 2)[:, None]
            if conserve_total:
                state *= total0 / state.sum()
            if (done + k + 1) % history_every == 0:
                history.append(state.sum())
        done += m
    sales = state.sum(axis=1)
    return FirmEnsemble(sales, state if mode == "full" else None, n_steps * dt, np.array(history))
