"""Histograms, goodness of fit, tail exponents, max-entropy and mixture fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import (
    DomainError,
    InfeasibleError,
    InsufficientTailError,
    InvalidCDFError,
    InvalidParamsError,
)
from .income import (
    MixtureParams,
    capital_cdf,
    insurance_cdf,
    labour_cdf,
)


# empirical distributions

@dataclass(frozen=True)
class EmpiricalDistribution:
    """Either a raw sample or a density histogram on contiguous bins."""

    sample: np.ndarray | None = None
    edges: np.ndarray | None = None
    density: np.ndarray | None = None

    def __post_init__(self):
        if (self.sample is None) == (self.edges is None):
            raise ValueError("give either a sample or histogram edges and densities")
        if self.sample is not None:
            s = np.asarray(self.sample, dtype=float).ravel()
            if s.size == 0:
                raise ValueError("empty sample")
            if not np.all(np.isfinite(s)):
                raise ValueError("sample contains non-finite values")
            object.__setattr__(self, "sample", s)
            return
        e = np.asarray(self.edges, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if e.ndim != 1 or e.size < 2 or d.shape != (e.size - 1,):
            raise ValueError("need n+1 edges for n densities")
        if not np.all(np.diff(e) > 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("densities must be finite and >= 0")
        mass = float(np.sum(d * np.diff(e)))
        if abs(mass - 1.0) > 1e-6:
            raise ValueError(f"histogram mass is {mass!r}, expected 1")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "density", d)

    @classmethod
    def from_bins(cls, left, right, density):
        left, right = np.asarray(left, dtype=float), np.asarray(right, dtype=float)
        if left.size == 0 or not np.array_equal(left[1:], right[:-1]):
            raise ValueError("histogram bins must be contiguous")
        return cls(edges=np.append(left, right[-1]), density=density)

    @property
    def is_histogram(self):
        return self.edges is not None

    @property
    def bin_left(self):
        return self.edges[:-1]

    @property
    def bin_right(self):
        return self.edges[1:]

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def build_histogram(sample, n_bins=None, bin_width=None, range=None):
    """Density-normalized histogram of ``sample``.

    Give ``n_bins`` (default 50) or ``bin_width``.  A constant sample with
    ``bin_width`` gets a single bin starting at the value.
    """
    s = EmpiricalDistribution(sample=sample).sample
    if bin_width is not None:
        if n_bins is not None:
            raise ValueError("give n_bins or bin_width, not both")
        if not bin_width > 0:
            raise ValueError("bin_width must be > 0")
        lo, hi = range if range is not None else (s.min(), s.max())
        n = max(1, int(math.floor((hi - lo) / bin_width)) + 1)
        bins = lo + bin_width * np.arange(n + 1)
    else:
        bins = 50 if n_bins is None else int(n_bins)
    counts, edges = np.histogram(s, bins=bins, range=range)
    total = counts.sum()
    if total == 0:
        raise ValueError("no sample values inside the histogram range")
    return EmpiricalDistribution(edges=edges, density=counts / (total * np.diff(edges)))


def _eval_cdf(cdf, x):
    try:
        out = np.asarray(cdf(x), dtype=float)
        if out.shape != x.shape:
            raise ValueError
    except (TypeError, ValueError):
        out = np.array([float(cdf(v)) for v in x])
    return out


def ks_statistic(dist, cdf):
    """Kolmogorov-Smirnov distance between ``dist`` and a model CDF.

    For a histogram the empirical CDF is compared at the bin edges.
    """
    if dist.is_histogram:
        x = dist.edges
        emp = np.concatenate([[0.0], np.cumsum(dist.density * dist.widths)])
        f = _eval_cdf(cdf, x)
        _check_cdf(f)
        return float(np.max(np.abs(emp - f)))
    x = np.sort(dist.sample)
    n = x.size
    f = _eval_cdf(cdf, x)
    _check_cdf(f)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def _check_cdf(f):
    if np.any(~np.isfinite(f)) or np.any(f < 0) or np.any(f > 1):
        raise InvalidCDFError("cdf values must lie in [0, 1]")
    if np.any(np.diff(f) < -1e-12):
        raise InvalidCDFError("cdf must be nondecreasing")


# tail exponents

@dataclass(frozen=True)
class HillEstimate:
    exponent: float
    stderr: float
    k: int
    by_k: dict
    stable: bool

    @property
    def drift(self):
        """Spread of the estimates over ``k`` in units of the standard error."""
        vals = np.array(list(self.by_k.values()))
        return float((vals.max() - vals.min()) / self.stderr)


def _hill(x_desc, k):
    return 1.0 + k / np.sum(np.log(x_desc[:k] / x_desc[k]))


def hill_tail_exponent(sample, k):
    """Hill estimate of the density exponent from the ``k`` largest values.

    Also evaluates the estimator at ``k/4, k/2, 2k`` (where allowed); if
    those disagree by more than four standard errors the tail is flagged
    as unstable, as happens for samples without a power-law tail.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if np.any(~(x > 0)):
        raise DomainError("Hill estimation needs a positive sample")
    n = x.size
    k = int(k)
    if k < 10 or k >= n / 2:
        raise InsufficientTailError(f"need 10 <= k < n/2, got k={k}, n={n}")
    x_desc = -np.sort(-x)
    lam = _hill(x_desc, k)
    stderr = (lam - 1.0) / math.sqrt(k)
    by_k = {}
    for kk in (k // 4, k // 2, k, 2 * k):
        if 10 <= kk < n / 2:
            by_k[kk] = float(_hill(x_desc, kk))
    spread = max(by_k.values()) - min(by_k.values())
    return HillEstimate(float(lam), float(stderr), k, by_k, bool(spread <= 4.0 * stderr))


# maximum entropy

@dataclass(frozen=True)
class EntropySolution:
    bin_values: np.ndarray
    occupation: np.ndarray
    multiplier: float

    @property
    def entropy(self):
        p = self.occupation[self.occupation > 0]
        return float(-np.sum(p * np.log(p)))

    def to_dict(self):
        return {"bin_values": self.bin_values.tolist(),
                "occupation": self.occupation.tolist(),
                "multiplier": self.multiplier}


def _gibbs(w, beta):
    logits = -beta * w
    p = np.exp(logits - logits.max())
    return p / p.sum()


def max_entropy_wage(bins, mean_constraint):
    """Entropy-maximizing occupation of wage bins at a fixed mean wage.

    The solution is ``P_l ~ exp(-beta w_l)``; ``beta`` is found by
    bisection because the mean is strictly decreasing in it.
    """
    w = np.asarray(bins, dtype=float)
    if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)):
        raise ValueError("bins must be a non-empty list of finite values")
    m = float(mean_constraint)
    lo_w, hi_w = w.min(), w.max()
    if not lo_w <= m <= hi_w:
        raise InfeasibleError(f"mean {m} outside the bin range [{lo_w}, {hi_w}]")
    if lo_w == hi_w or m in (lo_w, hi_w):
        beta = 0.0 if lo_w == hi_w else (math.inf if m == lo_w else -math.inf)
        p = (w == m).astype(float)
        return EntropySolution(w, p / p.sum(), beta)

    def excess(beta):
        return float(np.dot(_gibbs(w, beta), w)) - m

    scale = 50.0 / np.max(np.abs(w))
    lo, hi = -scale, scale
    # widen the bracket for means very close to the range ends
    while excess(hi) > 0:
        lo, hi = hi, 2.0 * hi
    while excess(lo) < 0:
        lo, hi = 2.0 * lo, lo
    beta = optimize.bisect(excess, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)
    p = _gibbs(w, beta)
    return EntropySolution(w, p, float(beta))


# mixture fitting

SHAPE_PARAMS = {
    "n_pf": ("h0", "sigma_f", "lambda", "h_splice"),
    "n_e": ("t_wage",),
    "n_ue": ("h_ue", "sigma_ue"),
}
ALL_PARAMS = ("n_pf", "n_e", "n_ue", "h0", "sigma_f", "lambda", "h_splice", "t_wage",
              "h_ue", "sigma_ue")


MAX_LOG_STEP = 1.0


def _attr(name):
    return "lam" if name == "lambda" else name


@dataclass
class FitResult:
    params: MixtureParams
    objective_value: float
    stderr: dict
    converged: bool
    n_iterations: int
    cost_history: list = field(default_factory=list)
    message: str = ""

    def to_dict(self):
        d = self.params.to_dict()
        d.update(objective_value=self.objective_value, converged=self.converged,
                 n_iterations=self.n_iterations,
                 stderr={k: (None if not math.isfinite(v) else v) for k, v in self.stderr.items()})
        return d


class _Packing:
    """Maps an unconstrained vector to :class:`MixtureParams`.

    Free weights share the mass left by frozen weights through a softmax
    (first free weight is the reference); positive parameters are stored
    as logarithms and ``lambda`` as ``log(lambda - 1)``.
    """

    def __init__(self, init, frozen):
        self.init = init
        w = {k: getattr(init, k) for k in SHAPE_PARAMS}
        active = [k for k in SHAPE_PARAMS if w[k] > 0]
        self.free_w = [k for k in active if k not in frozen]
        self.mass = 1.0 - sum(w[k] for k in SHAPE_PARAMS if k not in self.free_w)
        if self.free_w and not self.mass > 0:
            raise InfeasibleError("frozen weights leave no mass for the free ones")
        self.free_shape = []
        for comp in active:
            for name in SHAPE_PARAMS[comp]:
                if name in frozen:
                    continue
                if name in ("lambda", "h_splice") and not init.pareto_enabled:
                    continue
                if name == "h_splice" and init.h_splice is None:
                    continue
                self.free_shape.append(name)

    @property
    def size(self):
        return max(0, len(self.free_w) - 1) + len(self.free_shape)

    def pack(self, p):
        u = []
        if len(self.free_w) > 1:
            ref = math.log(getattr(p, self.free_w[0]))
            u += [math.log(getattr(p, k)) - ref for k in self.free_w[1:]]
        for name in self.free_shape:
            v = getattr(p, _attr(name))
            u.append(math.log(v - 1.0) if name == "lambda" else math.log(v))
        return np.array(u)

    def unpack(self, u):
        changes = {}
        nw = max(0, len(self.free_w) - 1)
        if self.free_w:
            logits = np.concatenate([[0.0], u[:nw]])
            e = np.exp(logits - logits.max())
            shares = self.mass * e / e.sum()
            changes.update(zip(self.free_w, shares.tolist()))
        for name, v in zip(self.free_shape, u[nw:]):
            v = math.exp(min(v, 700.0))
            changes[_attr(name)] = 1.0 + v if name == "lambda" else v
        return self.init.replace(**changes)


def bin_average_density(edges, params):
    """Model density averaged over each bin, by CDF differences."""
    e = np.asarray(edges, dtype=float)
    e = np.maximum(e, 0.0)
    w = np.diff(np.asarray(edges, dtype=float))
    out = np.zeros(e.size - 1)
    for weight, cdf in ((params.n_pf, capital_cdf), (params.n_e, labour_cdf),
                        (params.n_ue, insurance_cdf)):
        if weight:
            out += weight * np.diff(cdf(e, params))
    return out / w


def fit_mixture(dist, init, frozen=(), h_floor=0.0, max_iter=500, gtol=1e-10, xtol=1e-12,
                ftol=1e-14):
    """Weighted least-squares fit of the income mixture to a density histogram.

    Minimizes ``sum (model - empirical)**2 * width`` over bins whose left
    edge is at or above ``h_floor``.  The model value of a bin is the
    mixture's average density over it.  The optimizer is a damped
    Gauss-Newton (Levenberg-Marquardt) iteration with a finite-difference
    Jacobian in the unconstrained coordinates of :class:`_Packing`; only
    cost-decreasing steps are accepted.

    Standard errors come from the Gauss-Newton covariance and are mapped
    back to the natural parameters.
    """
    frozen = set(frozen)
    unknown = frozen - set(ALL_PARAMS)
    if unknown:
        raise InvalidParamsError(f"unknown parameter names: {sorted(unknown)}")
    try:
        init.validate()
    except InvalidParamsError as exc:
        raise InfeasibleError(f"infeasible initial parameters: {exc}") from None
    if not dist.is_histogram:
        dist = build_histogram(dist.sample, n_bins=200)
    if dist.density.size < 10:
        raise ValueError("fit needs at least 10 histogram bins")

    pk = _Packing(init, frozen)
    edges, emp = dist.edges, dist.density
    wts = np.where(dist.bin_left >= h_floor, dist.widths, 0.0)
    sqw = np.sqrt(wts)
    scale = max(float(np.sqrt(np.sum(emp**2 * wts))), np.finfo(float).tiny)

    def residuals(u):
        with np.errstate(all="ignore"):
            model = bin_average_density(edges, pk.unpack(u))
        r = (model - emp) * sqw / scale
        return np.where(np.isfinite(r), r, 1e150)

    def objective(r):
        return float(np.dot(r, r)) * scale * scale

    u = pk.pack(init)
    r = residuals(u)
    cost = float(np.dot(r, r))
    history = [objective(r)]
    if pk.size == 0:
        return FitResult(init, history[0], {}, True, 0, history, "no free parameters")

    def jacobian(u, r0):
        J = np.empty((r0.size, u.size))
        for j in range(u.size):
            h = 1e-6 * max(1.0, abs(u[j]))
            up, dn = u.copy(), u.copy()
            up[j] += h
            dn[j] -= h
            J[:, j] = (residuals(up) - residuals(dn)) / (2.0 * h)
        return J

    mu = None
    converged, message = False, "maximum iterations reached"
    it = 0
    J = jacobian(u, r)
    while it < max_iter:
        it += 1
        A = J.T @ J
        g = J.T @ r
        if np.max(np.abs(g)) <= gtol:
            converged, message = True, "gradient norm below tolerance"
            break
        diag = np.maximum(np.diag(A), 1e-12 * max(1.0, np.max(np.diag(A))))
        if mu is None:
            mu = 1.0
        try:
            step = np.linalg.solve(A + mu * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            mu *= 10.0
            continue
        if np.linalg.norm(step) <= xtol * (np.linalg.norm(u) + xtol):
            converged, message = True, "step size below tolerance"
            break
        # at most a factor e per parameter and iteration
        step *= min(1.0, MAX_LOG_STEP / np.max(np.abs(step)))
        u_new = u + step
        r_new = residuals(u_new)
        cost_new = float(np.dot(r_new, r_new))
        if cost_new < cost:
            decrease = cost - cost_new
            u, r, cost = u_new, r_new, cost_new
            history.append(objective(r))
            mu = max(mu / 3.0, 1e-12)
            if decrease <= ftol * cost or cost == 0.0:
                converged, message = True, "relative cost decrease below tolerance"
                break
            J = jacobian(u, r)
        else:
            mu *= 4.0
            if mu > 1e16:
                converged, message = True, "no further descent possible"
                break

    params = pk.unpack(u)
    return FitResult(params, objective(r), _standard_errors(pk, u, J, r), converged, it,
                     history, message)


def _standard_errors(pk, u, J, r):
    m, n = J.shape
    # a lone free weight is pinned by the simplex and has no error
    names = (pk.free_w if len(pk.free_w) > 1 else []) + pk.free_shape
    if m <= n:
        return {k: math.nan for k in names}
    s2 = float(np.dot(r, r)) / (m - n)
    cov_u = s2 * np.linalg.pinv(J.T @ J)

    def natural(v):
        p = pk.unpack(v)
        return np.array([getattr(p, _attr(k)) for k in names])

    T = np.empty((len(names), n))
    for j in range(n):
        h = 1e-7 * max(1.0, abs(u[j]))
        up, dn = u.copy(), u.copy()
        up[j] += h
        dn[j] -= h
        T[:, j] = (natural(up) - natural(dn)) / (2.0 * h)
    var = np.einsum("ij,jk,ik->i", T, cov_u, T)
    return {k: float(math.sqrt(v)) if v >= 0 else math.nan for k, v in zip(names, var)}
