"""Range-liquidity LP strategies for concentrated-liquidity AMMs.

Submodules
----------
amm           token amounts, trade flows and decomposition of range liquidity
price_models  seeded GBM / mean-reverting price generators
strategies    chasing and arbitrage-gated update rules, liquidity SDE, safe interval
estimators    GBM and mean-reversion parameter estimation, CSV ingestion
montecarlo    experiment harness, pathwise SDE comparison, stats export
cli           ``rangelp`` command line
"""

__version__ = "0.1.0"

from .amm import LiquidityPosition, PriceRange, TokenAmounts, decompose, deposit_amounts, trade_deltas, withdraw_amounts
from .estimators import GBMEstimator, MeanReversionEstimator, PairedSeries, estimate_gbm, estimate_mr, load_paired_csv
from .montecarlo import ExperimentConfig, TrajectoryStats, export_stats, pathwise_compare, run_experiment
from .price_models import GbmParams, JointPath, MeanRevParams, SimGrid, exogenous_path, gbm_step, joint_path, mr_step
from .strategies import (
    ChasingStrategy,
    GateConfig,
    chasing_update,
    closed_form_decay,
    f_delta,
    gated_update,
    safe_interval_approx,
    safe_interval_exact,
    self_financing_residual,
    theorem2_coeffs,
)
