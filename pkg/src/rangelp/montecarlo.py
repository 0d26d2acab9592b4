"""Monte Carlo experiment harness.

Rounds are independent: round ``r`` draws its noise from
``round_seed(base_seed, r)``, so the result does not depend on how rounds
are split into chunks or spread across worker processes. Within a chunk,
rounds are simulated together as the leading axis of numpy arrays; time
steps are sequential.

Paths on which the update rule breaks down (negative liquidity, or a
non-positive AMM price from the Euler step) are dropped from the aggregates
and counted in ``TrajectoryStats.aborted``.
"""

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _random
from .price_models import (
    GbmParams,
    JointPath,
    MeanRevParams,
    SimGrid,
    _gbm_series,
    _mr_step_unchecked,
    _mr_series,
)
from .strategies import (
    GateConfig,
    chasing_ratio,
    closed_form_decay,
    gated_ratio,
    theorem2_coeffs,
)
from ._validation import check_alpha

__all__ = [
    "MODELS",
    "STRATEGIES",
    "ExperimentConfig",
    "TrajectoryStats",
    "AllPathsAbortedError",
    "run_experiment",
    "simulate_liquidity",
    "pathwise_compare",
    "export_stats",
    "read_stats",
    "default_workers",
]

MODELS = ("exogenous", "mean-reverting")
STRATEGIES = ("chasing", "gated", "theorem2-sde", "closed-form")
CSV_HEADER = ["step", "t_years", "mean_L", "p10_L", "p50_L", "p90_L", "aborted", "band_violations"]
WORKERS_ENV = "RANGELP_WORKERS"

_CHUNK_ROUNDS = 50


class AllPathsAbortedError(RuntimeError):
    pass


def default_workers():
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one Monte Carlo run.

    ``gate`` is ``"exact"``, ``"approx"`` or an explicit ``(delta_l, delta_r)``
    pair and only matters for the gated strategy. ``p0`` defaults to ``z0``.
    """

    model: str
    strategy: str
    gbm: GbmParams
    grid: SimGrid
    mr: MeanRevParams = None
    rounds: int = 100
    z0: float = 2000.0
    l0: float = 1000.0
    alpha: float = 1.1
    base_seed: int = 0
    gate: object = "exact"
    p0: float = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        check_alpha(self.alpha)
        if int(self.rounds) != self.rounds or self.rounds < 1:
            raise ValueError(f"rounds must be a positive integer, got {self.rounds!r}")
        if not self.l0 > 0:
            raise ValueError(f"l0 must be > 0, got {self.l0!r}")
        if not self.z0 > 0 or (self.p0 is not None and not self.p0 > 0):
            raise ValueError("initial prices must be positive")
        if self.model == "mean-reverting" and self.mr is None:
            raise ValueError("the mean-reverting model needs MeanRevParams")
        if self.strategy == "theorem2-sde" and self.model != "mean-reverting":
            raise ValueError("theorem2-sde integrates the mean-reverting liquidity SDE")
        if self.strategy == "closed-form" and self.model != "exogenous":
            raise ValueError("the closed-form curve exists only for the exogenous model")
        if not (isinstance(self.gate, str) and self.gate in ("exact", "approx")):
            lo, hi = self.gate
            object.__setattr__(self, "gate", (float(lo), float(hi)))
        if self.strategy == "gated" and self.model == "mean-reverting":
            self.gate_config()

    @property
    def initial_p(self):
        return self.z0 if self.p0 is None else self.p0

    def gate_config(self):
        if isinstance(self.gate, str):
            return GateConfig.from_params(self.mr, self.alpha, self.gate)
        return GateConfig(self.alpha, *self.gate)

    def replace(self, **changes):
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return ExperimentConfig(**data)

    def to_dict(self):
        d = asdict(self)
        d["gate"] = self.gate if isinstance(self.gate, str) else list(self.gate)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["gbm"] = GbmParams(**d["gbm"])
        d["grid"] = SimGrid(**d["grid"])
        if d.get("mr") is not None:
            d["mr"] = MeanRevParams(**d["mr"])
        if not isinstance(d.get("gate", "exact"), str):
            d["gate"] = tuple(d["gate"])
        return cls(**d)


@dataclass
class TrajectoryStats:
    """Per-step ensemble summary of the liquidity paths.

    ``aborted[i]`` counts paths that broke down at or before step ``i``;
    ``band_violations[i]`` counts retained paths whose AMM price left
    ``[Z/alpha, alpha Z]`` on the step into ``i``. ``final`` holds ``L_T`` of
    every retained path (not exported).
    """

    t: np.ndarray
    mean: np.ndarray
    p10: np.ndarray
    p50: np.ndarray
    p90: np.ndarray
    aborted: np.ndarray
    band_violations: np.ndarray
    final: np.ndarray = field(default=None, repr=False)

    @property
    def n_steps(self):
        return len(self.t) - 1

    def equals(self, other):
        names = ("t", "mean", "p10", "p50", "p90", "aborted", "band_violations")
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names)

    @classmethod
    def empty(cls):
        z = np.zeros(0)
        return cls(z, z, z, z, z, np.zeros(0, dtype=int), np.zeros(0, dtype=int))


def _round_noise(cfg, r, substeps=1):
    """Standard normals for round ``r`` on the configured grid.

    With ``substeps > 1`` the draws are made on a grid ``substeps`` times finer
    and summed in blocks, giving the coarse increments of the same Brownian path.
    """
    seed = _random.round_seed(cfg.base_seed, r)
    n = cfg.grid.n_steps
    out = []
    components = (_random.W_STREAM,) if cfg.model == "exogenous" else (_random.W_STREAM, _random.B_STREAM)
    for c in components:
        eps = _random.standard_normals(seed, c, n * substeps)
        if substeps > 1:
            eps = eps.reshape(n, substeps).sum(axis=1) / math.sqrt(substeps)
        out.append(eps)
    return out


def _stack_noise(cfg, rounds, substeps=1):
    draws = [_round_noise(cfg, r, substeps) for r in rounds]
    return [np.stack([d[c] for d in draws]) for c in range(len(draws[0]))]


def _prices(cfg, noise):
    if cfg.model == "exogenous":
        z = _gbm_series(cfg.z0, cfg.gbm, cfg.grid.dt, noise[0])
        return z, z, np.zeros(z.shape[0], dtype=bool)
    p = _gbm_series(cfg.initial_p, cfg.gbm, cfg.grid.dt, noise[0])
    z, failed = _mr_series(cfg.z0, p, cfg.mr, cfg.grid.dt, noise[1])
    return p, z, failed


def _band_flags(z, alpha):
    with np.errstate(invalid="ignore"):
        ratio = z[:, 1:] / z[:, :-1]
    return (ratio > alpha) | (ratio < 1.0 / alpha)


def _cumulate(l0, ratios):
    """``L`` path from per-step ratios; a path aborts at the first ratio <= 0 or NaN."""
    bad = ~(ratios > 0)
    with np.errstate(invalid="ignore", over="ignore"):
        L = l0 * np.concatenate([np.ones((ratios.shape[0], 1)), np.cumprod(ratios, axis=1)], axis=1)
    return L, _first_true(bad)


def _first_true(flags):
    """Index of the step (1-based point index) where each path first fails, -1 if never."""
    any_bad = flags.any(axis=1)
    idx = np.where(any_bad, flags.argmax(axis=1) + 1, -1)
    return idx


def _simulate_gated(cfg, p, noise_b):
    gate = cfg.gate_config()
    dt, alpha = cfg.grid.dt, cfg.alpha
    R, n = noise_b.shape
    z = np.empty((R, n + 1))
    L = np.empty((R, n + 1))
    band = np.zeros((R, n), dtype=bool)
    arb = np.zeros((R, n), dtype=bool)
    z[:, 0] = cfg.z0
    L[:, 0] = cfg.l0
    abort_at = np.full(R, -1)
    with np.errstate(invalid="ignore", divide="ignore"):
        for i in range(n):
            zi = z[:, i]
            z_next = _mr_step_unchecked(zi, p[:, i], cfg.mr, dt, noise_b[:, i])
            p_next = p[:, i + 1]
            ratio_z = z_next / zi
            band[:, i] = (ratio_z > alpha) | (ratio_z < 1.0 / alpha)
            delta = (p_next - z_next) / z_next
            inside = gate.inside(delta)
            ratio = np.where(
                inside,
                chasing_ratio(zi, z_next, p_next, alpha),
                gated_ratio(zi, z_next, p_next, alpha),
            )
            arb[:, i] = ~inside
            broken = ~((z_next > 0) & (ratio > 0)) & (abort_at < 0)
            abort_at[broken] = i + 1
            L[:, i + 1] = L[:, i] * ratio
            z[:, i + 1] = np.where(inside, z_next, p_next)
            if np.any(broken):
                # keep the recursion finite for aborted paths; they are discarded later
                z[broken, i + 1] = p_next[broken]
                L[broken, i + 1] = np.nan
    return L, abort_at, band


def _simulate_chunk(cfg, rounds):
    """Liquidity paths for the given round indices.

    Returns ``(L, abort_at, band)``: ``L`` is ``(k, n + 1)``, ``abort_at[j]`` is
    the point index at which round ``j`` broke down (-1 if it did not) and
    ``band`` is a ``(k, n)`` boolean array of alpha-band violations.
    """
    noise = _stack_noise(cfg, rounds)
    if cfg.strategy == "gated" and cfg.model == "mean-reverting":
        p = _gbm_series(cfg.initial_p, cfg.gbm, cfg.grid.dt, noise[0])
        return _simulate_gated(cfg, p, noise[1])

    p, z, failed = _prices(cfg, noise)
    band = _band_flags(z, cfg.alpha)
    if cfg.strategy == "theorem2-sde":
        ratios = _sde_ratios(cfg, p, z, noise[1])
    else:
        # exogenous gated never leaves the gate (delta == 0), so it is chasing
        with np.errstate(invalid="ignore"):
            ratios = chasing_ratio(z[:, :-1], z[:, 1:], p[:, 1:], cfg.alpha)
    L, abort_at = _cumulate(cfg.l0, ratios)
    if np.any(failed):
        z_bad = _first_true(~(z[:, 1:] > 0))
        abort_at = np.where((abort_at < 0) | ((z_bad >= 0) & (z_bad < abort_at)), z_bad, abort_at)
    return L, abort_at, band


def _sde_ratios(cfg, p, z, noise_b):
    """Euler-Maruyama factors ``1 + drift dt + diffusion dB`` sharing the AMM noise."""
    dt = cfg.grid.dt
    with np.errstate(invalid="ignore"):
        coeffs = theorem2_coeffs(p[:, :-1], z[:, :-1], cfg.mr, cfg.alpha)
        return 1.0 + coeffs.drift * dt + coeffs.diffusion * math.sqrt(dt) * noise_b


def _chunks(n_rounds, size=_CHUNK_ROUNDS):
    return [list(range(s, min(s + size, n_rounds))) for s in range(0, n_rounds, size)]


def _run_chunk(args):
    cfg, rounds = args
    return _simulate_chunk(cfg, rounds)


def simulate_liquidity(cfg, workers=1):
    """Raw per-round liquidity paths ``(rounds, n_steps + 1)``, abort indices and band flags."""
    chunks = _chunks(cfg.rounds)
    if workers is None:
        workers = default_workers()
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
            parts = list(pool.map(_run_chunk, [(cfg, c) for c in chunks]))
    else:
        parts = [_simulate_chunk(cfg, c) for c in chunks]
    L = np.concatenate([part[0] for part in parts])
    abort_at = np.concatenate([part[1] for part in parts])
    band = np.concatenate([part[2] for part in parts])
    return L, abort_at, band


def run_experiment(cfg, workers=1):
    """Run ``cfg.rounds`` independent rounds and summarise the liquidity paths.

    Parameters
    ----------
    cfg : ExperimentConfig
    workers : int or None, default=1
        Worker processes; ``None`` uses ``default_workers()``. The result is
        identical for every value.

    Returns
    -------
    TrajectoryStats

    Raises
    ------
    AllPathsAbortedError
        If no round completed.
    """
    t = cfg.grid.times
    n_points = cfg.grid.n_steps + 1
    if cfg.strategy == "closed-form":
        curve = closed_form_decay(cfg.l0, cfg.gbm.sigma, cfg.alpha, t)
        zeros = np.zeros(n_points, dtype=int)
        return TrajectoryStats(t, curve, curve.copy(), curve.copy(), curve.copy(), zeros, zeros.copy(), curve[-1:].copy())

    L, abort_at, band = simulate_liquidity(cfg, workers)
    kept = abort_at < 0
    if not np.any(kept):
        raise AllPathsAbortedError(f"all {cfg.rounds} paths aborted")
    aborted = np.array([np.sum((abort_at >= 0) & (abort_at <= i)) for i in range(n_points)]) if np.any(~kept) \
        else np.zeros(n_points, dtype=int)
    violations = np.concatenate([[0], band[kept].sum(axis=0)])
    Lk = L[kept]
    p10, p50, p90 = np.percentile(Lk, [10, 50, 90], axis=0)
    return TrajectoryStats(t, Lk.mean(axis=0), p10, p50, p90, aborted, violations, Lk[:, -1].copy())


def round_path(cfg, r):
    """The (P, Z) path of round ``r`` for the non-gated strategies."""
    noise = _stack_noise(cfg, [r])
    p, z, _ = _prices(cfg, noise)
    return JointPath(p[0], z[0], cfg.grid, noise[0][0], noise[1][0] if len(noise) > 1 else None)


def pathwise_compare(cfg, substeps=1, workers=1):
    """Largest relative gap between chasing-rule and SDE liquidity on shared noise.

    For each round the chasing update and an Euler-Maruyama integration of
    the liquidity SDE are driven by the same (P, Z) path; the SDE uses the
    Brownian increments that moved ``Z``. Returns
    ``max |L_chasing - L_sde| / L_chasing`` over steps and completed rounds.

    ``substeps`` draws the noise on a grid that many times finer and sums it,
    so runs at ``dt`` with ``substeps=2`` and at ``dt/2`` with ``substeps=1``
    see the same Brownian paths.
    """
    if cfg.model != "mean-reverting" or cfg.strategy != "chasing":
        raise ValueError("pathwise_compare needs model='mean-reverting' and strategy='chasing'")
    worst = 0.0
    completed = 0
    for rounds in _chunks(cfg.rounds):
        noise = _stack_noise(cfg, rounds, substeps)
        p, z, failed = _prices(cfg, noise)
        with np.errstate(invalid="ignore"):
            L_chase, a1 = _cumulate(cfg.l0, chasing_ratio(z[:, :-1], z[:, 1:], p[:, 1:], cfg.alpha))
            L_sde, a2 = _cumulate(cfg.l0, _sde_ratios(cfg, p, z, noise[1]))
        ok = (a1 < 0) & (a2 < 0) & ~failed
        if np.any(ok):
            dev = np.abs(L_chase[ok] - L_sde[ok]) / L_chase[ok]
            worst = max(worst, float(dev.max()))
            completed += int(ok.sum())
    if completed == 0:
        raise AllPathsAbortedError(f"all {cfg.rounds} paths aborted")
    return worst


def export_stats(stats, path):
    """Write ``stats`` as CSV with 17 significant digits (lossless for float64)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i in range(len(stats.t)):
            writer.writerow([
                i,
                f"{stats.t[i]:.17g}",
                f"{stats.mean[i]:.17g}",
                f"{stats.p10[i]:.17g}",
                f"{stats.p50[i]:.17g}",
                f"{stats.p90[i]:.17g}",
                int(stats.aborted[i]),
                int(stats.band_violations[i]),
            ])


def read_stats(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = list(reader)
    if not rows:
        return TrajectoryStats.empty()
    cols = list(zip(*rows))
    floats = [np.array(c, dtype=np.float64) for c in cols[1:6]]
    ints = [np.array(c, dtype=int) for c in cols[6:8]]
    return TrajectoryStats(*floats, *ints)
