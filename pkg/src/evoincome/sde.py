"""Stochastic differential equation kernels.

All Langevin equations in the package have the form

    dx/dt = F(x) + G(x) * rho(t),    <rho(t) rho(t')> = 2 * A * delta(t - t')

where ``A`` is the noise *amplitude*.  One Euler-Maruyama increment of the
noise term therefore has variance ``2 * A * dt``.  Processes whose literature
form uses a correlation ``D * delta`` instead of ``2 D * delta`` are mapped onto
this convention by passing ``A = D / 2`` (see :mod:`evoincome.prices`).

Random numbers come from counter-based Philox streams.  An ensemble of
replicas is split into fixed blocks of ``REPLICA_BLOCK`` columns and each block
gets its own stream keyed by ``(seed, block_index)``, so results do not depend
on how the time axis is chunked or in which order blocks are evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, NonNormalizableError, NumericOverflowError

REPLICA_BLOCK = 1024
BOUNDARIES = ("none", "reflecting", "absorbing")
_MAX_SEED = 2**64

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class NoiseSpec:
    amplitude: float
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError(f"noise amplitude must be finite and >= 0, got {self.amplitude}")
        if not (0 <= int(self.seed) < _MAX_SEED):
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True)
class DriftDiffusion:
    """Drift ``F``, diffusion ``G`` and the boundary treatment at ``domain_low``.

    ``drift`` and ``diffusion`` must accept floats and numpy arrays.
    """

    drift: Callable
    diffusion: Callable
    domain_low: float = -math.inf
    boundary: str = "none"

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.boundary != "none" and not math.isfinite(self.domain_low):
            raise ValueError("a reflecting or absorbing boundary needs a finite domain_low")

    def check_domain(self, x):
        if self.boundary != "none" and np.any(np.asarray(x) < self.domain_low):
            raise DomainError(f"initial state below domain_low={self.domain_low}")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    absorbed: bool = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 1:
            raise ValueError("times and values must be 1-d arrays of equal, nonzero length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class EnsembleSample:
    """States of ``n_replicas`` independent replicas at the recorded times.

    ``values`` has shape ``(len(times), n_replicas)``.
    """

    times: np.ndarray
    values: np.ndarray
    absorbed: np.ndarray = field(default=None)

    def pooled(self):
        """All recorded states flattened into a single sample."""
        return self.values.ravel()


def sign(x):
    """``np.sign`` with sign(0) = 0 (symmetric drift at the fixed point)."""
    return np.sign(x)


def replica_rng(seed, index):
    """Independent Philox generator for stream ``index`` of master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


class BlockNormals:
    """Standard normal draws of shape ``(rows, n_replicas)``, block-seeded.

    Successive calls continue every block's stream, so drawing ``a`` rows
    and then ``b`` rows yields exactly the same numbers as drawing ``a + b``.
    """

    def __init__(self, seed, n_replicas, block=REPLICA_BLOCK):
        if n_replicas < 1:
            raise ValueError("n_replicas must be >= 1")
        self.n_replicas = int(n_replicas)
        self._blocks = []
        for b, start in enumerate(range(0, self.n_replicas, block)):
            stop = min(start + block, self.n_replicas)
            self._blocks.append((start, stop, replica_rng(seed, b)))

    def draw(self, rows):
        out = np.empty((rows, self.n_replicas))
        for start, stop, rng in self._blocks:
            out[:, start:stop] = rng.standard_normal((rows, stop - start))
        return out


def _apply_boundary(x, model):
    """Returns the boundary-corrected state and a mask of absorbed entries."""
    if model.boundary == "reflecting":
        low = model.domain_low
        return np.where(x < low, 2.0 * low - x, x), None
    if model.boundary == "absorbing":
        hit = x <= model.domain_low
        return np.where(hit, model.domain_low, x), hit
    return x, None


def euler_maruyama_step(x, model, dt, noise_draw, amplitude):
    """One Euler-Maruyama step followed by the model's boundary rule.

    Parameters
    ----------
    x : float or ndarray
        Current state(s).
    model : DriftDiffusion
    dt : float
        Time step, > 0.
    noise_draw : float or ndarray
        Standard normal variate(s), broadcastable against ``x``.
    amplitude : float
        Noise amplitude ``A``; the increment is ``G(x) * sqrt(2 A dt) * draw``.

    Returns
    -------
    float or ndarray
        Updated state, same shape as ``x``.  An absorbing boundary clamps to
        ``domain_low``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if amplitude < 0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    scalar = np.ndim(x) == 0 and np.ndim(noise_draw) == 0
    xa = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        new = (xa + model.drift(xa) * dt
               + model.diffusion(xa) * math.sqrt(2.0 * amplitude * dt) * np.asarray(noise_draw))
    if not np.all(np.isfinite(new)):
        raise NumericOverflowError(
            f"non-finite state after step: x={x!r}, dt={dt}, draw={noise_draw!r}, "
            f"amplitude={amplitude}")
    new, _ = _apply_boundary(new, model)
    return float(new) if scalar else new


def simulate(model, x0, dt, n_steps, noise):
    """Single trajectory of ``n_steps`` Euler-Maruyama steps.

    With an absorbing boundary the trajectory stays at ``domain_low`` after
    the first hit and ``Trajectory.absorbed`` is set.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    model.check_domain(x0)
    rng = replica_rng(noise.seed, 0)
    scale = math.sqrt(2.0 * noise.amplitude * dt)
    F, G = model.drift, model.diffusion
    low, boundary = model.domain_low, model.boundary
    values = np.empty(n_steps + 1)
    x = float(x0)
    values[0] = x
    absorbed = False
    chunk = 1 << 16
    i = 0
    while i < n_steps:
        m = min(chunk, n_steps - i)
        draws = rng.standard_normal(m).tolist()
        for k in range(m):
            if not absorbed:
                xn = x + F(x) * dt + G(x) * scale * draws[k]
                if not math.isfinite(xn):
                    raise NumericOverflowError(
                        f"non-finite state at step {i + k}: x={x!r}, dt={dt}, draw={draws[k]!r}")
                if boundary == "reflecting" and xn < low:
                    xn = 2.0 * low - xn
                elif boundary == "absorbing" and xn <= low:
                    xn = low
                    absorbed = True
                x = float(xn)
            values[i + k + 1] = x
        i += m
    times = dt * np.arange(n_steps + 1)
    return Trajectory(times, values, absorbed)


def simulate_ensemble(model, x0, dt, n_steps, noise, n_replicas, burn_in=0, record_every=1):
    """Vectorised Euler-Maruyama over independent replicas.

    States are recorded at steps ``burn_in, burn_in + record_every, ...``
    up to ``n_steps`` (step 0 is the initial state).

    Returns
    -------
    EnsembleSample
        ``values[j]`` holds all replicas at time ``times[j]``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_steps < 1 or record_every < 1 or burn_in < 0:
        raise ValueError("need n_steps >= 1, record_every >= 1, burn_in >= 0")
    if burn_in > n_steps:
        raise ValueError("burn_in exceeds n_steps")
    x = np.broadcast_to(np.asarray(x0, dtype=float), (n_replicas,)).copy()
    model.check_domain(x)
    normals = BlockNormals(noise.seed, n_replicas)
    scale = math.sqrt(2.0 * noise.amplitude * dt)
    absorbed = np.zeros(n_replicas, dtype=bool)
    record_steps = list(range(burn_in, n_steps + 1, record_every))
    out = np.empty((len(record_steps), n_replicas))
    row = 0
    if record_steps[0] == 0:
        out[0] = x
        row = 1
    chunk = max(1, min(n_steps, (1 << 21) // n_replicas))
    step = 0
    while step < n_steps:
        m = min(chunk, n_steps - step)
        draws = normals.draw(m)
        for k in range(m):
            with np.errstate(over="ignore", invalid="ignore"):
                xn = x + model.drift(x) * dt + model.diffusion(x) * scale * draws[k]
            if not np.all(np.isfinite(xn)):
                bad = int(np.flatnonzero(~np.isfinite(xn))[0])
                raise NumericOverflowError(
                    f"non-finite state at step {step + k}, replica {bad}: "
                    f"x={x[bad]!r}, dt={dt}, draw={draws[k, bad]!r}")
            xn, hit = _apply_boundary(xn, model)
            if hit is not None:
                absorbed |= hit
                xn = np.where(absorbed, model.domain_low, xn)
            x = xn
            if row < len(record_steps) and step + k + 1 == record_steps[row]:
                out[row] = x
                row += 1
        step += m
    times = dt * np.asarray(record_steps, dtype=float)
    return EnsembleSample(times, out, absorbed)


def gibrat_step(y, delta_f, dt):
    """Proportionate-effect update ``y * exp(delta_f * dt)``.

    The update is the exact solution of ``(1/y) dy/dt = delta_f`` over one
    step; it is evaluated in log space and clipped to the positive float
    range so that the result is strictly positive for all finite inputs.
    """
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise DomainError("gibrat_step needs y > 0")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    growth = np.asarray(delta_f, dtype=float) * dt
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        out = y * np.exp(growth)
        bad = ~((out > 0) & np.isfinite(out))
        if np.any(bad):
            logged = np.exp(np.log(y) + growth)
            out = np.where(bad, np.clip(logged, np.finfo(float).tiny, np.finfo(float).max), out)
    return float(out) if out.ndim == 0 else out


def cumulative_trapezoid(f, x):
    """Running trapezoidal integral of samples ``f`` on grid ``x``, starting at 0."""
    out = np.zeros_like(f, dtype=float)
    out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(x))
    return out


def stationary_density(model, amplitude, grid):
    """Stationary density of the Fokker-Planck equation for ``model``.

    Uses the additive-noise transform h = int dx/G, which gives

        P(x) = exp( (1/A) * int^x F(x')/G(x')^2 dx' ) / (N * G(x))

    with the integral and the normalization ``N`` evaluated by trapezoidal
    quadrature on ``grid``.  The grid is the accuracy knob.

    Raises
    ------
    DomainError
        If ``G`` is not strictly positive on the grid, or the grid is not
        strictly increasing.
    NonNormalizableError
        If the normalization integral overflows or is not positive.
    """
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
        raise DomainError("grid must be a strictly increasing 1-d array with >= 2 points")
    g = np.broadcast_to(np.asarray(model.diffusion(x), dtype=float), x.shape)
    if np.any(~(g > 0)):
        raise DomainError("diffusion G(x) must be > 0 on the whole grid")
    f = np.broadcast_to(np.asarray(model.drift(x), dtype=float), x.shape)
    potential = cumulative_trapezoid(f / g**2, x) / amplitude
    log_p = potential - np.log(g)
    if not np.all(np.isfinite(log_p)):
        raise NonNormalizableError("non-finite potential on grid")
    log_p -= log_p.max()
    p = np.exp(log_p)
    norm = _trapezoid(p, x)
    if not (np.isfinite(norm) and norm > 0):
        raise NonNormalizableError("normalization integral is not finite and positive")
    return p / norm
