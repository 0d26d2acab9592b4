"""Parameter estimation from observed price series.

``P`` (exchange) is a GBM: the drift and volatility come from the sample
mean and unbiased sample variance of log-returns. ``Z`` (AMM) follows
``dZ = theta (P - Z) dt + gamma Z dB``; ``theta`` and ``gamma`` are the
maximum-likelihood estimates of its Euler-Maruyama discretisation. Sums use
``math.fsum`` so long minute series do not lose digits.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_dt, check_paired_prices, check_price_series
from .price_models import MINUTES_PER_YEAR, MeanRevParams
from .strategies import safe_interval_approx, safe_interval_exact

__all__ = [
    "PairedSeries",
    "EstimatedParams",
    "CsvFormatError",
    "estimate_gbm",
    "estimate_mr",
    "GBMEstimator",
    "MeanReversionEstimator",
    "read_price_csv",
    "load_price_series",
    "load_paired_csv",
]

MINUTE = 1.0 / MINUTES_PER_YEAR


class CsvFormatError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


@dataclass(frozen=True)
class PairedSeries:
    """(P, Z) observed on a shared uniform grid of spacing ``dt`` years."""

    p: np.ndarray
    z: np.ndarray
    dt: float
    start_minute: int = None
    dropped_p: int = 0
    dropped_z: int = 0

    def __post_init__(self):
        X = check_paired_prices(np.column_stack([self.p, self.z]))
        check_dt(self.dt)
        object.__setattr__(self, "p", X[:, 0].copy())
        object.__setattr__(self, "z", X[:, 1].copy())

    def __len__(self):
        return len(self.p)


@dataclass(frozen=True)
class EstimatedParams:
    mu_hat: float
    sigma_hat: float
    theta_hat: float = None
    gamma_hat: float = None


def _log_returns(series):
    p = check_price_series(series)
    return np.log(p[1:] / p[:-1])


def estimate_gbm(series, dt):
    """Unbiased GBM estimates ``(mu_hat, sigma_hat)`` per unit of ``dt``.

    With ``r_i = ln(P[i+1] / P[i])``, ``N`` returns, mean ``m`` and
    ``s2 = sum (r_i - m)^2 / (N - 1)``:

        sigma_hat^2 = s2 / dt,    mu_hat = m / dt + s2 / (2 dt).
    """
    dt = check_dt(dt)
    r = _log_returns(series)
    n = len(r)
    mean = math.fsum(r) / n
    s2 = math.fsum((r - mean) ** 2) / (n - 1)
    return mean / dt + s2 / (2.0 * dt), math.sqrt(s2 / dt)


def estimate_mr(series):
    """Euler-Maruyama MLE ``(theta_hat, gamma_hat)`` from a :class:`PairedSeries`.

    ``theta_hat = sum(dZ (P - Z) / Z^2) / (dt sum((P - Z)^2 / Z^2))``. The
    variance estimate is the mean squared standardised residual,
    ``gamma_hat^2 = sum((dZ - theta_hat (P - Z) dt)^2 / Z^2) / (N dt)``, which
    equals the closed form ``(C B - A^2) / (N dt B)`` and cannot round below zero.

    Raises
    ------
    ValueError
        If ``P == Z`` at every observation (``theta`` is not identified).
    """
    p, z, dt = series.p, series.z, series.dt
    n = len(z) - 1
    u = (z[1:] - z[:-1]) / z[:-1]
    v = (p[:-1] - z[:-1]) / z[:-1]
    denom = math.fsum(v * v)
    if denom == 0.0:
        raise ValueError("P equals Z at every observation; theta is not identified")
    beta = math.fsum(u * v) / denom
    theta = beta / dt
    resid = u - beta * v
    gamma2 = math.fsum(resid * resid) / (n * dt)
    return theta, math.sqrt(gamma2)


def _mr_closed_form_gamma2(series):
    """``(C B - A^2) / (N dt B)`` evaluated literally (reference for tests)."""
    p, z, dt = series.p, series.z, series.dt
    n = len(z) - 1
    u = (z[1:] - z[:-1]) / z[:-1]
    v = (p[:-1] - z[:-1]) / z[:-1]
    A, B, C = math.fsum(u * v), math.fsum(v * v), math.fsum(u * u)
    return (C * B - A * A) / (n * dt * B)


class GBMEstimator(BaseEstimator):
    """Fit GBM drift and volatility to a 1-d price series.

    Parameters
    ----------
    dt : float, default=1/525600
        Observation spacing in years (one minute by default).

    Attributes
    ----------
    mu_ : float
    sigma_ : float
    n_returns_ : int
    """

    def __init__(self, dt=MINUTE):
        self.dt = dt

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        self.mu_, self.sigma_ = estimate_gbm(X, self.dt)
        self.n_returns_ = len(X) - 1
        return self

    @property
    def drift_per_step_(self):
        """Expected log-return per observation, ``(mu - sigma^2/2) dt``."""
        check_is_fitted(self)
        return (self.mu_ - 0.5 * self.sigma_**2) * self.dt


class MeanReversionEstimator(BaseEstimator):
    """Fit ``theta`` and ``gamma`` of the AMM price to paired (P, Z) data.

    ``fit`` takes an ``(n, 2)`` array with columns (P, Z). After fitting, the
    safe deviation interval of the fitted model is available as
    ``safe_interval_`` (exact cubic roots) and ``safe_interval_approx_``.

    Parameters
    ----------
    dt : float, default=1/525600
        Observation spacing in years.
    """

    def __init__(self, dt=MINUTE):
        self.dt = dt

    def fit(self, X, y=None):
        X = check_paired_prices(X)
        self.theta_, self.gamma_ = estimate_mr(PairedSeries(X[:, 0], X[:, 1], self.dt))
        self.n_features_in_ = 2
        params = self.params_
        self.safe_interval_ = safe_interval_exact(params)
        self.safe_interval_approx_ = safe_interval_approx(params)
        return self

    @property
    def params_(self):
        check_is_fitted(self, "theta_")
        return MeanRevParams(self.theta_, self.gamma_)

    def score(self, X, y=None):
        """Mean Gaussian log-likelihood per transition under the fitted parameters."""
        check_is_fitted(self, "theta_")
        X = check_paired_prices(X)
        p, z = X[:, 0], X[:, 1]
        mean = z[:-1] + self.theta_ * (p[:-1] - z[:-1]) * self.dt
        var = self.gamma_**2 * z[:-1] ** 2 * self.dt
        resid = z[1:] - mean
        return float(np.mean(-0.5 * np.log(2.0 * math.pi * var) - resid**2 / (2.0 * var)))


def read_price_csv(path):
    """Parse a ``timestamp,price`` CSV into (unix seconds, prices) arrays.

    Timestamps must be integers and strictly increasing; prices finite and
    positive. Any violation raises :class:`CsvFormatError` with the line number.
    """
    ts, prices = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "price"]:
            raise CsvFormatError(path, 1, f"expected header 'timestamp,price', got {header!r}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise CsvFormatError(path, line, f"expected 2 fields, got {len(row)}")
            try:
                t = int(row[0].strip())
            except ValueError:
                raise CsvFormatError(path, line, f"timestamp {row[0]!r} is not an integer") from None
            try:
                price = float(row[1].strip())
            except ValueError:
                raise CsvFormatError(path, line, f"price {row[1]!r} is not a number") from None
            if not math.isfinite(price) or price <= 0.0:
                raise CsvFormatError(path, line, f"price must be positive and finite, got {row[1]!r}")
            if ts and t <= ts[-1]:
                raise CsvFormatError(path, line, f"timestamp {t} does not increase (previous {ts[-1]})")
            ts.append(t)
            prices.append(price)
    if not ts:
        raise CsvFormatError(path, 2, "no data rows")
    return np.array(ts, dtype=np.int64), np.array(prices, dtype=np.float64)


def _minute_buckets(ts, prices):
    """Last observation in each minute bucket."""
    minutes = ts // 60
    last = np.ones(len(minutes), dtype=bool)
    last[:-1] = minutes[1:] != minutes[:-1]
    return minutes[last], prices[last]


def _fill_or_reject(minutes, columns, gaps, what):
    steps = np.diff(minutes)
    if np.all(steps == 1):
        return minutes, columns
    if gaps == "error":
        i = int(np.flatnonzero(steps != 1)[0])
        raise ValueError(
            f"{what} is not on a uniform minute grid: gap of {int(steps[i])} minutes after minute {int(minutes[i])}"
        )
    if gaps != "ffill":
        raise ValueError(f"gaps must be 'error' or 'ffill', got {gaps!r}")
    full = np.arange(minutes[0], minutes[-1] + 1)
    idx = np.searchsorted(minutes, full, side="right") - 1
    return full, [c[idx] for c in columns]


def load_price_series(path, gaps="error"):
    """One price file on a uniform one-minute grid; returns ``(prices, dt)``."""
    minutes, prices = _minute_buckets(*read_price_csv(path))
    _, (prices,) = _fill_or_reject(minutes, [prices], gaps, path)
    return prices, MINUTE


def load_paired_csv(path_p, path_z, gaps="error"):
    """Join exchange and AMM price files on minute buckets.

    Rows whose minute has no counterpart in the other file are dropped and
    counted in ``dropped_p`` / ``dropped_z``. ``gaps`` controls missing
    minutes inside the joined window: ``"error"`` rejects them, ``"ffill"``
    carries the last joined observation forward.

    Raises
    ------
    CsvFormatError
        Malformed or non-monotone rows.
    ValueError
        Empty intersection, or gaps with ``gaps="error"``.
    """
    mp, pp = _minute_buckets(*read_price_csv(path_p))
    mz, pz = _minute_buckets(*read_price_csv(path_z))
    common, ip, iz = np.intersect1d(mp, mz, assume_unique=True, return_indices=True)
    if len(common) == 0:
        raise ValueError(f"{path_p} and {path_z} share no minute buckets")
    minutes, (p, z) = _fill_or_reject(common, [pp[ip], pz[iz]], gaps, "joined series")
    return PairedSeries(
        p, z, MINUTE,
        start_minute=int(minutes[0]),
        dropped_p=len(mp) - len(common),
        dropped_z=len(mz) - len(common),
    )
