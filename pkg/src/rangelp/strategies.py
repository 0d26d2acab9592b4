"""Liquidity-chasing rebalancing rules and their continuous-time dynamics.

A chasing LP holds ``L`` on ``[Z / alpha, alpha Z]``. Each step it withdraws
at the new AMM price ``Z'``, swaps at the exchange price ``P'`` so that the
rebalance is self-financing, and re-deposits on ``[Z' / alpha, alpha Z']``.

With ``P == Z`` (exogenous model) the liquidity decays deterministically at
rate ``sigma^2 / (8 (sqrt(alpha) - 1))``. When ``Z`` mean-reverts to an
independent GBM ``P`` the liquidity is an SDE whose drift is proportional to
the cubic ``f(delta)`` in the relative deviation ``delta = (P - Z) / Z``.
The gated rule only chases while ``delta`` is inside the interval where
``f > 0`` and otherwise arbitrages ``Z`` back to ``P`` before re-depositing.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._roots import newton_bisect
from ._validation import check_alpha, check_nonnegative, check_paired_prices, check_price
from .price_models import MeanRevParams

__all__ = [
    "LiquidityUnderflowError",
    "ChasingConfig",
    "GateConfig",
    "DriftDiffusion",
    "chasing_update",
    "chasing_ratio",
    "gated_update",
    "gated_ratio",
    "decay_rate",
    "closed_form_decay",
    "f_delta",
    "safe_interval_exact",
    "safe_interval_approx",
    "price_band",
    "theorem2_coeffs",
    "theorem2_coeffs_ratio_form",
    "self_financing_residual",
    "ChasingStrategy",
]


class LiquidityUnderflowError(ValueError):
    """The update rule returned negative liquidity.

    This happens only when a one-step move is far outside ``[Z/alpha, alpha Z]``,
    which the derivation of the update rule excludes.
    """

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


@dataclass(frozen=True)
class ChasingConfig:
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))


@dataclass(frozen=True)
class GateConfig:
    """Deviation band ``(delta_l, delta_r)`` inside which the LP keeps chasing."""

    alpha: float
    delta_l: float
    delta_r: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        if not -1.0 < self.delta_l < 0.0 < self.delta_r:
            raise ValueError(
                f"gate needs -1 < delta_l < 0 < delta_r, got ({self.delta_l!r}, {self.delta_r!r})"
            )

    @classmethod
    def from_params(cls, params, alpha, method="exact"):
        """Gate from the safe interval of ``params`` (``method`` is 'exact' or 'approx')."""
        solver = {"exact": safe_interval_exact, "approx": safe_interval_approx}[method]
        lo, hi = solver(params)
        return cls(alpha, lo, hi)

    def inside(self, delta):
        return (self.delta_l < delta) & (delta < self.delta_r)


@dataclass(frozen=True)
class DriftDiffusion:
    """Coefficients of ``dL / L = drift dt + diffusion dB``."""

    drift: float
    diffusion: float


def _sqrt(x):
    return np.sqrt(x) if isinstance(x, np.ndarray) else math.sqrt(x)


def chasing_ratio(Z, Z_next, P_next, alpha):
    """``L' / L`` of the chasing rule; elementwise on arrays, no sign check."""
    a = 1.0 / _sqrt(alpha)
    new = P_next / _sqrt(Z_next) + _sqrt(Z_next)
    old = P_next / _sqrt(Z) + _sqrt(Z)
    return (new - a * old) / new / (1.0 - a)


def gated_ratio(Z, Z_next, P_next, alpha):
    """``L' / L`` after arbitraging the AMM price from ``Z_next`` to ``P_next``."""
    a = 1.0 / _sqrt(alpha)
    new = P_next / _sqrt(Z_next) + _sqrt(Z_next)
    old = P_next / _sqrt(Z) + _sqrt(Z)
    return (new - a * old) / (2.0 * _sqrt(P_next)) / (1.0 - a)


def chasing_update(L, Z, Z_next, P_next, alpha):
    """Liquidity after one self-financing re-centre of the range.

    Parameters
    ----------
    L : float
        Liquidity held on ``[Z / alpha, alpha * Z]``.
    Z, Z_next : float
        AMM price before and after the step.
    P_next : float
        Exchange price at which the rebalancing swap is done.
    alpha : float
        Range width factor, > 1.

    Returns
    -------
    float
        Liquidity on ``[Z_next / alpha, alpha * Z_next]``.

    Raises
    ------
    LiquidityUnderflowError
        If the rule gives negative liquidity.
    """
    L = check_nonnegative(L, "L")
    Z = check_price(Z, "Z")
    Z_next = check_price(Z_next, "Z_next")
    P_next = check_price(P_next, "P_next")
    alpha = check_alpha(alpha)
    L_next = L * chasing_ratio(Z, Z_next, P_next, alpha)
    if L_next < 0.0:
        raise LiquidityUnderflowError(
            f"chasing update gave L'={L_next!r} (Z={Z!r}, Z'={Z_next!r}, P'={P_next!r}, alpha={alpha!r}); "
            "the price move is too large for the range",
            L=L, Z=Z, Z_next=Z_next, P_next=P_next, alpha=alpha, L_next=L_next,
        )
    return L_next


def gated_update(L, Z, Z_next, P_next, cfg):
    """One step of the arbitrage-gated strategy.

    Returns
    -------
    L_next : float
    arbitraged : bool
        True when the deviation ``(P_next - Z_next) / Z_next`` left the gate.
    Z_effective : float
        AMM price after the step: ``Z_next``, or ``P_next`` after arbitrage.
    """
    L = check_nonnegative(L, "L")
    Z = check_price(Z, "Z")
    Z_next = check_price(Z_next, "Z_next")
    P_next = check_price(P_next, "P_next")
    delta = (P_next - Z_next) / Z_next
    if cfg.inside(delta):
        return chasing_update(L, Z, Z_next, P_next, cfg.alpha), False, Z_next
    L_next = L * gated_ratio(Z, Z_next, P_next, cfg.alpha)
    if L_next < 0.0:
        raise LiquidityUnderflowError(
            f"gated update gave L'={L_next!r} (Z={Z!r}, Z'={Z_next!r}, P'={P_next!r})",
            L=L, Z=Z, Z_next=Z_next, P_next=P_next, alpha=cfg.alpha, L_next=L_next,
        )
    return L_next, True, P_next


def decay_rate(sigma, alpha):
    return sigma**2 / (8.0 * (math.sqrt(alpha) - 1.0))


def closed_form_decay(L0, sigma, alpha, t):
    """Deterministic liquidity of the chasing strategy when ``P == Z`` is a GBM.

    ``L0 * exp(-sigma^2 t / (8 (sqrt(alpha) - 1)))``; ``t`` may be an array.
    """
    L0 = check_nonnegative(L0, "L0")
    sigma = check_nonnegative(sigma, "sigma")
    alpha = check_alpha(alpha)
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    return L0 * np.exp(-decay_rate(sigma, alpha) * np.asarray(t, dtype=np.float64))


def f_delta(delta, params):
    """Liquidity drift numerator ``-(θ/2)δ³ - (θ - γ²/8)δ² + γ²δ + γ²/2``."""
    theta, g2 = params.theta, params.gamma**2
    return ((-0.5 * theta * delta - (theta - g2 / 8.0)) * delta + g2) * delta + 0.5 * g2


def _f_delta_prime(delta, params):
    theta, g2 = params.theta, params.gamma**2
    return (-1.5 * theta * delta - 2.0 * (theta - g2 / 8.0)) * delta + g2


def safe_interval_exact(params):
    """Roots of ``f`` around zero: ``-1 < delta_l < 0 < delta_r``.

    ``f(-1) < 0 < f(0)`` brackets the left root; the right bracket is grown
    by doubling until ``f`` turns negative. With ``gamma == 0`` the interval
    collapses to ``(0.0, 0.0)``.
    """
    if params.gamma == 0.0:
        return 0.0, 0.0
    f = lambda d: f_delta(d, params)  # noqa: E731
    df = lambda d: _f_delta_prime(d, params)  # noqa: E731
    left = newton_bisect(f, df, -1.0, 0.0)
    hi = 1.0
    while f(hi) > 0.0:
        hi *= 2.0
    right = newton_bisect(f, df, 0.0, hi)
    return left, right


def safe_interval_approx(params):
    """Roots of the quadratic ``-θδ² + γ²δ + γ²/2`` (valid when ``γ² << θ``)."""
    centre = params.gamma**2 / (2.0 * params.theta)
    half = params.gamma / math.sqrt(2.0 * params.theta)
    return centre - half, centre + half


def price_band(P, delta_l, delta_r):
    """AMM prices ``Z`` with ``(P - Z) / Z`` strictly inside ``(delta_l, delta_r)``."""
    P = check_price(P, "P")
    return P / (1.0 + delta_r), P / (1.0 + delta_l)


def theorem2_coeffs(P, Z, params, alpha):
    """Drift and diffusion of ``dL / L`` for the chasing strategy, deviation form.

    ``drift = f(δ) / ((√α - 1)(δ + 2)²)``,
    ``diffusion = -γδ / (2 (√α - 1)(δ + 2))``. Elementwise on arrays.
    """
    k = _sqrt(alpha) - 1.0
    delta = (P - Z) / Z
    return DriftDiffusion(
        f_delta(delta, params) / (k * (delta + 2.0) ** 2),
        -params.gamma * delta / (2.0 * k * (delta + 2.0)),
    )


def theorem2_coeffs_ratio_form(P, Z, params, alpha):
    """Same coefficients evaluated from the price ratio ``r = P / Z`` directly."""
    k = _sqrt(alpha) - 1.0
    theta, g2 = params.theta, params.gamma**2
    r = P / Z
    drift = (g2 / 8.0 * r**2 + 0.75 * g2 * r - 3.0 * g2 / 8.0 + 0.5 * (1.0 - r**2) * theta * (r - 1.0)) / (1.0 + r) ** 2
    diffusion = 0.5 * (1.0 - r**2) * params.gamma / (1.0 + r) ** 2
    return DriftDiffusion(drift / k, diffusion / k)


def self_financing_residual(L, L_next, Z, Z_next, P_next, alpha, background=0.0, deposit_price=None):
    """Value mismatch ``dY + P' dX`` of a rebalance at exchange price ``P_next``.

    The old position is withdrawn at ``Z_next``. The new one is deposited on
    ``[c / alpha, alpha c]`` at AMM price ``c`` (``deposit_price``, default
    ``Z_next``; pass ``P_next`` for an arbitraged step). Deposit amounts are
    obtained from the pool's virtual reserves with ``background`` liquidity
    on the full range, which cancels out. ``dX, dY`` are the swap legs; a
    self-financing rebalance has zero residual.
    """
    c = Z_next if deposit_price is None else deposit_price
    a = 1.0 / _sqrt(alpha)
    x_out = L * (1.0 / _sqrt(Z_next) - a / _sqrt(Z))
    y_out = L * (_sqrt(Z_next) - a * _sqrt(Z))
    l = background
    x_pool, y_pool = l * (1.0 - a) / _sqrt(c), l * (1.0 - a) * _sqrt(c)
    x_after, y_after = (l + L_next) * (1.0 - a) / _sqrt(c), (l + L_next) * (1.0 - a) * _sqrt(c)
    dX = (x_after - x_pool) - x_out
    dY = (y_after - y_pool) - y_out
    return dY + P_next * dX


class ChasingStrategy(TransformerMixin, BaseEstimator):
    """Backtest the chasing rule on an observed (P, Z) path.

    Parameters
    ----------
    alpha : float, default=1.1
        Range width factor.
    l0 : float, default=1000.0
        Initial liquidity.

    ``transform`` maps an ``(n, 2)`` array of (P, Z) rows to the ``(n,)``
    liquidity path. Nothing is learned in ``fit``; it only validates input.
    """

    def __init__(self, alpha=1.1, l0=1000.0):
        self.alpha = alpha
        self.l0 = l0

    def fit(self, X, y=None):
        check_paired_prices(X, min_length=2)
        check_alpha(self.alpha)
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_paired_prices(X, min_length=2)
        p, z = X[:, 0], X[:, 1]
        ratios = chasing_ratio(z[:-1], z[1:], p[1:], float(self.alpha))
        if np.any(ratios < 0):
            step = int(np.flatnonzero(ratios < 0)[0])
            raise LiquidityUnderflowError(f"negative liquidity at step {step}", step=step)
        return self.l0 * np.concatenate([[1.0], np.cumprod(ratios)])
