import pytest

from rangelp.price_models import GbmParams, MeanRevParams, SimGrid

MINUTE = 1.0 / 525600

# parameters fitted to ETH-USDC (CEX) and a Uniswap v3 pool (AMM), per year
MU_HAT = -1.17
SIGMA_HAT = 0.75
THETA_HAT = 1058.49
GAMMA_HAT = 0.68


@pytest.fixture
def gbm_params():
    return GbmParams(MU_HAT, SIGMA_HAT)


@pytest.fixture
def mr_params():
    return MeanRevParams(THETA_HAT, GAMMA_HAT)


@pytest.fixture
def minute_grid():
    return SimGrid(MINUTE, 1000)
