"""Total personal income distribution.

The density is a three-source mixture

    P(h) = n_pf * P_F(h) + n_e * P_E(h) + n_ue * P_UE(h)

with a capital-income component ``P_F`` (lognormal body, optional Pareto
tail), an exponential labour-income component ``P_E`` with mean wage ``T``
and a Gaussian "insurance peak" ``P_UE`` from unemployment transfers.
Incomes are in whatever currency unit the data uses.

Splice of the capital component: below ``h_splice`` the lognormal is used
as is, above it ``C * h**-lambda`` with ``C`` fixed by continuity, and the
whole component is renormalized.  The default crossover is where the
lognormal's log-log slope equals ``-lambda``, ``h0 * exp((lambda - 1) sigma_f**2)``,
which makes the junction smooth in log-log coordinates.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError, InvalidParamsError, ParameterConsistencyWarning
from .sde import DriftDiffusion, NoiseSpec, replica_rng, simulate, simulate_ensemble

_SQRT2PI = math.sqrt(2.0 * math.pi)
WEIGHTS = ("n_pf", "n_e", "n_ue")

# JSON field names; ``lambda`` is stored as the attribute ``lam``.
JSON_FIELDS = ("n_pf", "n_e", "n_ue", "h0", "sigma_f", "lambda", "h_splice",
               "pareto_enabled", "t_wage", "h_ue", "sigma_ue")


@dataclass(frozen=True, kw_only=True)
class MixtureParams:
    n_pf: float
    n_e: float
    n_ue: float
    h0: float
    sigma_f: float
    t_wage: float
    h_ue: float
    sigma_ue: float
    lam: float = 2.5
    h_splice: float | None = None
    pareto_enabled: bool = False

    @classmethod
    def published(cls):
        """Published parameters of the Australian 1994-95 fit (Pareto part off)."""
        return cls(n_pf=0.11, sigma_f=0.2, h0=28e3, n_e=0.77, t_wage=1.9e4,
                   n_ue=0.12, sigma_ue=1200.0, h_ue=7.4e3)

    @property
    def weights(self):
        return np.array([self.n_pf, self.n_e, self.n_ue])

    @property
    def splice(self):
        if self.h_splice is not None:
            return float(self.h_splice)
        return self.h0 * math.exp((self.lam - 1.0) * self.sigma_f**2)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def validate(self):
        w = self.weights
        if np.any(~np.isfinite(w)) or np.any(w < 0) or np.any(w > 1):
            raise InvalidParamsError(f"weights must lie in [0, 1], got {w.tolist()}")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidParamsError(f"weights must sum to 1, got {w.sum()!r}")
        for name in ("h0", "sigma_f", "t_wage", "h_ue", "sigma_ue"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidParamsError(f"{name} must be finite and > 0, got {v!r}")
        if self.pareto_enabled:
            if not self.lam > 1:
                raise InvalidParamsError("lambda must be > 1 for an integrable Pareto tail")
            if not self.splice > 0:
                raise InvalidParamsError("h_splice must be > 0")
        return self

    def to_dict(self):
        d = {}
        for key in JSON_FIELDS:
            attr = "lam" if key == "lambda" else key
            d[key] = getattr(self, attr)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(JSON_FIELDS)
        if unknown:
            raise InvalidParamsError(f"unknown mixture fields: {sorted(unknown)}")
        kwargs = {("lam" if k == "lambda" else k): v for k, v in d.items()}
        for k in ("pareto_enabled",):
            if k in kwargs:
                kwargs[k] = bool(kwargs[k])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise InvalidParamsError(str(exc)) from None


def _out(a):
    return float(a) if np.ndim(a) == 0 else a


def _positive(h, what="income"):
    h = np.asarray(h, dtype=float)
    if np.any(~(h > 0)):
        raise DomainError(f"{what} must be > 0")
    return h


def _lognormal(h, h0, s):
    return np.exp(-np.log(h / h0) ** 2 / (2.0 * s * s)) / (_SQRT2PI * s * h)


def _capital_parts(p):
    """(splice point, lognormal at splice, body mass, tail mass, total)."""
    hs = p.splice
    f_hs = float(_lognormal(hs, p.h0, p.sigma_f))
    body = float(ndtr(math.log(hs / p.h0) / p.sigma_f))
    tail = f_hs * hs / (p.lam - 1.0)
    return hs, f_hs, body, tail, body + tail


def capital_density(h, params):
    """Capital-income density of private firms (lognormal, optional Pareto tail)."""
    h = _positive(h)
    p = params
    if not p.pareto_enabled:
        return _out(_lognormal(h, p.h0, p.sigma_f))
    hs, f_hs, _, _, z = _capital_parts(p)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(h <= hs, _lognormal(h, p.h0, p.sigma_f), f_hs * (hs / h) ** p.lam)
    return _out(out / z)


def capital_cdf(h, params):
    h = np.asarray(h, dtype=float)
    p = params
    with np.errstate(divide="ignore"):
        z = np.log(np.maximum(h, 0.0) / p.h0) / p.sigma_f
    if not p.pareto_enabled:
        return _out(np.where(h > 0, ndtr(z), 0.0))
    hs, _, body, tail, tot = _capital_parts(p)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        upper = (body + tail * (1.0 - (hs / h) ** (p.lam - 1.0))) / tot
    out = np.where(h <= 0, 0.0, np.where(h <= hs, ndtr(z) / tot, upper))
    return _out(out)


def labour_density(h, params):
    """Exponential (Boltzmann-Gibbs) wage density with mean ``t_wage``."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise DomainError("wage income must be >= 0")
    t = params.t_wage
    return _out(np.exp(-h / t) / t)


def labour_cdf(h, params):
    h = np.asarray(h, dtype=float)
    return _out(np.where(h > 0, -np.expm1(-np.maximum(h, 0.0) / params.t_wage), 0.0))


def insurance_density(h, params):
    """Gaussian insurance peak, truncated at zero income and renormalized.

    For peaks several widths above zero the truncation is immaterial
    (``h_ue=7400, sigma_ue=1200`` loses less than 1e-9 of the mass).
    """
    h = np.asarray(h, dtype=float)
    mu, s = params.h_ue, params.sigma_ue
    kept = ndtr(mu / s)
    z = (h - mu) / s
    out = np.where(h >= 0, np.exp(-0.5 * z * z) / (_SQRT2PI * s) / kept, 0.0)
    return _out(out)


def insurance_cdf(h, params):
    h = np.asarray(h, dtype=float)
    mu, s = params.h_ue, params.sigma_ue
    lo = ndtr(-mu / s)
    out = np.where(h > 0, (ndtr((h - mu) / s) - lo) / (1.0 - lo), 0.0)
    return _out(out)


def component_densities(h, params):
    """Weighted component densities ``{"capital", "labour", "insurance"}``.

    Zero-weight components are returned as zeros without being evaluated.
    """
    h = _positive(h)
    z = np.zeros_like(h)
    return {
        "capital": params.n_pf * capital_density(h, params) if params.n_pf else z,
        "labour": params.n_e * labour_density(h, params) if params.n_e else z,
        "insurance": params.n_ue * insurance_density(h, params) if params.n_ue else z,
    }


def mixture_density(h, params):
    params.validate()
    c = component_densities(h, params)
    return _out(c["capital"] + c["labour"] + c["insurance"])


def mixture_cdf(h, params):
    params.validate()
    h = np.asarray(h, dtype=float)
    out = np.zeros_like(h)
    if params.n_pf:
        out = out + params.n_pf * capital_cdf(h, params)
    if params.n_e:
        out = out + params.n_e * labour_cdf(h, params)
    if params.n_ue:
        out = out + params.n_ue * insurance_cdf(h, params)
    return _out(out)


def mixture_quantile(q, params, lo=None, hi=None):
    """Income below which a fraction ``q`` of the population lies (bisection)."""
    lo = 0.0 if lo is None else lo
    hi = hi if hi is not None else max(params.h0, params.t_wage, params.h_ue)
    while mixture_cdf(hi, params) < q:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mixture_cdf(mid, params) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return 0.5 * (lo + hi)


def mixture_sample(params, n, seed=0):
    """``n`` i.i.d. incomes from the mixture, deterministic per seed.

    A component is picked with probabilities ``(n_pf, n_e, n_ue)`` and the
    income is drawn by inverting that component's CDF.
    """
    params.validate()
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = replica_rng(seed, 0)
    pick = rng.random(n)
    v = np.maximum(rng.random(n), np.finfo(float).tiny)
    comp = np.searchsorted(np.cumsum(params.weights)[:2], pick, side="right")
    out = np.empty(n)

    m = comp == 0
    if np.any(m):
        out[m] = _capital_inverse(v[m], params)
    m = comp == 1
    out[m] = -params.t_wage * np.log1p(-v[m])
    m = comp == 2
    if np.any(m):
        mu, s = params.h_ue, params.sigma_ue
        lo = ndtr(-mu / s)
        out[m] = mu + s * ndtri(lo + v[m] * (1.0 - lo))
    return out


def _capital_inverse(v, p):
    if not p.pareto_enabled:
        return p.h0 * np.exp(p.sigma_f * ndtri(v))
    hs, _, body, tail, tot = _capital_parts(p)
    x = v * tot
    out = np.empty_like(v)
    lower = x < body
    out[lower] = p.h0 * np.exp(p.sigma_f * ndtri(x[lower]))
    frac = 1.0 - (x[~lower] - body) / tail
    out[~lower] = hs * np.maximum(frac, np.finfo(float).tiny) ** (-1.0 / (p.lam - 1.0))
    return out


# wage process

@dataclass(frozen=True)
class WageProcessParams:
    """Wage Langevin process ``dw/dt = -zeta + noise`` on ``w >= 0``.

    The noise has correlation ``2 Q delta``; the stationary law is
    exponential with mean ``Q / zeta``.  ``t_wage`` defaults to that value
    and a warning is issued when a supplied mean wage disagrees with it.
    """

    zeta: float
    q_amplitude: float
    t_wage: float | None = None

    def __post_init__(self):
        if not (self.zeta > 0 and self.q_amplitude > 0):
            raise ValueError("zeta and q_amplitude must be > 0")
        implied = self.q_amplitude / self.zeta
        if self.t_wage is None:
            object.__setattr__(self, "t_wage", implied)
        elif not self.t_wage > 0:
            raise ValueError("t_wage must be > 0")
        elif abs(self.t_wage - implied) > 1e-6 * implied:
            warnings.warn(f"mean wage {self.t_wage} differs from Q/zeta = {implied}",
                          ParameterConsistencyWarning, stacklevel=2)

    @property
    def stationary_mean(self):
        return self.q_amplitude / self.zeta

    def model(self):
        z = self.zeta
        return DriftDiffusion(lambda w: -z + 0.0 * w, lambda w: 1.0 + 0.0 * w, 0.0, "reflecting")


def simulate_wage_process(params, w0, dt, n_steps, seed=0):
    if w0 < 0:
        raise DomainError("w0 must be >= 0")
    return simulate(params.model(), w0, dt, n_steps, NoiseSpec(params.q_amplitude, seed))


def wage_ensemble(params, n_replicas, dt, n_steps, seed=0, burn_in=0, record_every=1, w0=None):
    w0 = params.stationary_mean if w0 is None else w0
    if np.any(np.asarray(w0) < 0):
        raise DomainError("w0 must be >= 0")
    return simulate_ensemble(params.model(), w0, dt, n_steps, NoiseSpec(params.q_amplitude, seed),
                             n_replicas, burn_in=burn_in, record_every=record_every)
