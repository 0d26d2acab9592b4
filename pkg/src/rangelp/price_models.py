"""Seeded price generators.

The CEX price ``P`` follows a geometric Brownian motion stepped with its exact
log-space solution. The AMM price ``Z`` mean-reverts towards ``P``,

    dZ = theta (P - Z) dt + gamma Z dB,

and is stepped with Euler-Maruyama. ``W`` (driving ``P``) and ``B`` are
independent. All rates are per year; one minute is ``1 / 525600`` years.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _random
from ._validation import check_price

__all__ = [
    "MINUTES_PER_YEAR",
    "GbmParams",
    "MeanRevParams",
    "SimGrid",
    "JointPath",
    "DegenerateStepError",
    "gbm_step",
    "mr_step",
    "joint_path",
    "exogenous_path",
    "band_violations",
]

MINUTES_PER_YEAR = 525600


class DegenerateStepError(ValueError):
    """An Euler-Maruyama step of the AMM price produced a non-positive value."""

    def __init__(self, message, step=None, value=None):
        super().__init__(message)
        self.step = step
        self.value = value


@dataclass(frozen=True)
class GbmParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError("GBM parameters must be finite")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma!r}")


@dataclass(frozen=True)
class MeanRevParams:
    theta: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.gamma)):
            raise ValueError("mean-reversion parameters must be finite")
        if self.theta <= 0:
            raise ValueError(f"theta must be > 0, got {self.theta!r}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")


@dataclass(frozen=True)
class SimGrid:
    """Uniform time grid of ``n_steps`` steps of length ``dt`` years."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_minutes(cls, minutes, n_steps):
        return cls(minutes / MINUTES_PER_YEAR, n_steps)

    @classmethod
    def for_horizon(cls, dt, horizon):
        """Grid of step ``dt`` whose last point is the first at or after ``horizon``."""
        return cls(dt, max(1, int(math.ceil(horizon / dt - 1e-9))))

    @property
    def horizon(self):
        return self.dt * self.n_steps

    @property
    def times(self):
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class JointPath:
    """Simulated (P, Z) on a uniform grid, ``n_steps + 1`` points each."""

    p: np.ndarray
    z: np.ndarray
    grid: SimGrid
    noise_w: np.ndarray = field(default=None, repr=False, compare=False)
    noise_b: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = self.grid.n_steps + 1
        if len(self.p) != n or len(self.z) != n:
            raise ValueError(f"paths must have {n} points, got {len(self.p)} and {len(self.z)}")
        if np.any(self.p <= 0) or np.any(self.z <= 0):
            raise ValueError("all prices on a path must be positive")

    def to_array(self):
        """``(n_steps + 1, 2)`` array with columns (P, Z)."""
        return np.column_stack([self.p, self.z])


def _gbm_log_increment(params, dt, noise):
    return (params.mu - 0.5 * params.sigma**2) * dt + params.sigma * math.sqrt(dt) * noise


def gbm_step(P, params, dt, noise):
    """Exact GBM transition ``P exp((mu - sigma^2/2) dt + sigma sqrt(dt) noise)``.

    Works elementwise on arrays.
    """
    return P * np.exp(_gbm_log_increment(params, dt, noise))


def mr_step(Z, P, params, dt, noise):
    """One Euler-Maruyama step of the mean-reverting AMM price.

    Raises
    ------
    DegenerateStepError
        If the step lands on a non-positive price. The value is never clamped.
    ValueError
        If ``theta * dt >= 1``; the deterministic part would overshoot ``P``.
    """
    if params.theta * dt >= 1.0:
        raise ValueError(f"theta*dt = {params.theta * dt!r} must be < 1 for a stable step")
    Z_next = _mr_step_unchecked(Z, P, params, dt, noise)
    if np.any(Z_next <= 0):
        bad = Z_next if np.ndim(Z_next) == 0 else Z_next[Z_next <= 0][0]
        raise DegenerateStepError(f"mean-reversion step produced non-positive price {float(bad)!r}", value=float(bad))
    return Z_next


def _mr_step_unchecked(Z, P, params, dt, noise):
    return Z + params.theta * (P - Z) * dt + params.gamma * Z * math.sqrt(dt) * noise


def _gbm_series(p0, params, dt, noise):
    """Sequential exact GBM stepping along the last axis of ``noise``."""
    noise = np.asarray(noise, dtype=np.float64)
    factors = np.exp(_gbm_log_increment(params, dt, noise))
    start = np.broadcast_to(np.asarray(p0, dtype=np.float64), noise.shape[:-1] + (1,))
    # cumprod multiplies left to right, so entry i+1 is exactly gbm_step of entry i
    return np.cumprod(np.concatenate([start, factors], axis=-1), axis=-1)


def _mr_series(z0, p, params, dt, noise):
    """Euler-Maruyama recursion for Z given the P path; vectorised over leading axes.

    Returns the Z array and a boolean mask of paths that hit a non-positive price
    (entries after the failing step are NaN for those paths).
    """
    if params.theta * dt >= 1.0:
        raise ValueError(f"theta*dt = {params.theta * dt!r} must be < 1 for a stable step")
    noise = np.asarray(noise, dtype=np.float64)
    n = noise.shape[-1]
    z = np.empty(noise.shape[:-1] + (n + 1,))
    z[..., 0] = z0
    failed = np.zeros(noise.shape[:-1], dtype=bool)
    for i in range(n):
        zi = _mr_step_unchecked(z[..., i], p[..., i], params, dt, noise[..., i])
        bad = ~(zi > 0)
        if np.any(bad):
            failed |= bad
            zi = np.where(bad, np.nan, zi)
        z[..., i + 1] = zi
    return z, failed


def joint_path(gbm, mr, grid, p0, z0, seed):
    """Simulate the CEX price ``P`` and the mean-reverting AMM price ``Z``.

    ``P[i+1] = gbm_step(P[i])`` with noise from stream W and
    ``Z[i+1] = mr_step(Z[i], P[i])`` with noise from stream B. ``seed`` is an
    int or a ``numpy.random.SeedSequence`` (Monte Carlo rounds pass the latter).
    """
    p0 = check_price(p0, "p0")
    z0 = check_price(z0, "z0")
    eps_w = _random.standard_normals(seed, _random.W_STREAM, grid.n_steps)
    eps_b = _random.standard_normals(seed, _random.B_STREAM, grid.n_steps)
    p = _gbm_series(p0, gbm, grid.dt, eps_w)
    z, failed = _mr_series(z0, p, mr, grid.dt, eps_b)
    if failed:
        step = int(np.flatnonzero(~(z[1:] > 0))[0])
        raise DegenerateStepError(
            f"mean-reversion step {step} produced a non-positive price; grid too coarse for theta/gamma",
            step=step,
        )
    return JointPath(p, z, grid, eps_w, eps_b)


def exogenous_path(gbm, grid, z0, seed):
    """GBM for the AMM price with the exchange price pinned to it (``P == Z``)."""
    z0 = check_price(z0, "z0")
    eps_w = _random.standard_normals(seed, _random.W_STREAM, grid.n_steps)
    z = _gbm_series(z0, gbm, grid.dt, eps_w)
    return JointPath(z, z.copy(), grid, eps_w, None)


def band_violations(z, alpha):
    """Count steps where ``z[i+1]`` leaves ``[z[i] / alpha, alpha * z[i]]`` (per path)."""
    z = np.asarray(z, dtype=np.float64)
    ratio = z[..., 1:] / z[..., :-1]
    return np.sum((ratio > alpha) | (ratio < 1.0 / alpha), axis=-1)
