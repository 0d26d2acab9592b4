import math

import numpy as np
import pytest

from rangelp import _random
from rangelp.price_models import (
    DegenerateStepError,
    GbmParams,
    MeanRevParams,
    SimGrid,
    band_violations,
    exogenous_path,
    gbm_step,
    joint_path,
    mr_step,
)

from conftest import MINUTE


class TestGbmStep:
    def test_frozen(self):
        assert gbm_step(123.0, GbmParams(0.0, 0.0), 0.5, 1.7) == 123.0

    def test_deterministic_drift(self):
        assert gbm_step(50.0, GbmParams(0.1, 0.0), 1.0, -3.0) == pytest.approx(50.0 * math.exp(0.1), rel=1e-15)

    def test_reference_value(self, gbm_params):
        # 50-digit mpmath evaluation of the exact transition
        out = gbm_step(2000.0, gbm_params, MINUTE, 1.0)
        assert out == pytest.approx(2002.0645573277088391, rel=1e-14)

    def test_positive_for_extreme_noise(self):
        assert gbm_step(1.0, GbmParams(0.0, 5.0), 1.0, -40.0) > 0

    def test_rejects_negative_sigma(self):
        with pytest.raises(ValueError):
            GbmParams(0.0, -0.1)


class TestMrStep:
    def test_equilibrium(self):
        assert mr_step(7.0, 7.0, MeanRevParams(3.0, 0.0), 0.01, 2.5) == 7.0

    def test_deterministic_relaxation(self):
        dt = 0.01
        out = mr_step(10.0, 20.0, MeanRevParams(0.5 / dt, 0.0), dt, 0.0)
        assert out == pytest.approx(15.0, rel=1e-15)

    def test_reference_value(self, mr_params):
        out = mr_step(2000.0, 2010.0, mr_params, MINUTE, 0.0)
        assert out == pytest.approx(2000.020138698630137, rel=1e-15)
        assert out == pytest.approx(2000.0 + 1058.49 * 10.0 * MINUTE, rel=1e-15)

    def test_degenerate_step_is_an_error(self):
        with pytest.raises(DegenerateStepError):
            mr_step(1.0, 1.0, MeanRevParams(1.0, 2.0), 0.25, -1.0)

    def test_unstable_grid(self):
        with pytest.raises(ValueError, match="theta"):
            mr_step(1.0, 1.0, MeanRevParams(100.0, 0.1), 0.01, 0.0)

    def test_vectorised(self, mr_params):
        z = np.array([2000.0, 2001.0])
        out = mr_step(z, np.array([2002.0, 1990.0]), mr_params, MINUTE, np.array([0.3, -0.2]))
        assert out.shape == (2,)
        assert out[0] == mr_step(2000.0, 2002.0, mr_params, MINUTE, 0.3)


class TestJointPath:
    def test_same_seed_identical(self, gbm_params, mr_params, minute_grid):
        a = joint_path(gbm_params, mr_params, minute_grid, 2000.0, 2000.0, seed=11)
        b = joint_path(gbm_params, mr_params, minute_grid, 2000.0, 2000.0, seed=11)
        assert np.array_equal(a.p, b.p) and np.array_equal(a.z, b.z)

    def test_different_seed_differs(self, gbm_params, mr_params, minute_grid):
        a = joint_path(gbm_params, mr_params, minute_grid, 2000.0, 2000.0, seed=1)
        b = joint_path(gbm_params, mr_params, minute_grid, 2000.0, 2000.0, seed=2)
        assert not np.array_equal(a.p, b.p)

    def test_constant_without_noise(self, minute_grid):
        path = joint_path(GbmParams(0.0, 0.0), MeanRevParams(1000.0, 0.0), minute_grid, 5.0, 5.0, seed=3)
        assert np.all(path.p == 5.0) and np.all(path.z == 5.0)

    def test_lengths_and_positivity(self, gbm_params, mr_params, minute_grid):
        path = joint_path(gbm_params, mr_params, minute_grid, 2000.0, 1990.0, seed=0)
        assert len(path.p) == len(path.z) == minute_grid.n_steps + 1
        assert np.all(path.p > 0) and np.all(path.z > 0)
        assert path.to_array().shape == (minute_grid.n_steps + 1, 2)

    def test_follows_step_functions(self, gbm_params, mr_params, minute_grid):
        path = joint_path(gbm_params, mr_params, minute_grid, 2000.0, 1995.0, seed=5)
        for i in (0, 17, 500, 999):
            assert path.p[i + 1] == gbm_step(path.p[i], gbm_params, MINUTE, path.noise_w[i])
            assert path.z[i + 1] == pytest.approx(
                mr_step(path.z[i], path.p[i], mr_params, MINUTE, path.noise_b[i]), rel=1e-15
            )

    def test_independent_drivers(self, gbm_params, mr_params):
        grid = SimGrid(MINUTE, 100_000)
        path = joint_path(gbm_params, mr_params, grid, 2000.0, 2000.0, seed=21)
        dlogp = np.diff(np.log(path.p))
        z, p = path.z, path.p
        resid = (z[1:] - z[:-1] - mr_params.theta * (p[:-1] - z[:-1]) * MINUTE) / z[:-1]
        corr = np.corrcoef(dlogp, resid)[0, 1]
        assert abs(corr) < 0.02

    def test_degenerate_step_reports_index(self):
        grid = SimGrid(0.5, 200)
        with pytest.raises(DegenerateStepError) as err:
            joint_path(GbmParams(0.0, 0.1), MeanRevParams(0.1, 3.0), grid, 1.0, 1.0, seed=0)
        assert isinstance(err.value.step, int) and 0 <= err.value.step < 200

    def test_alpha_band_rarely_violated(self, gbm_params, mr_params):
        grid = SimGrid(MINUTE, 200_000)
        path = joint_path(gbm_params, mr_params, grid, 2000.0, 2000.0, seed=4)
        assert band_violations(path.z, 1.1) / grid.n_steps < 1e-6


class TestExogenousPath:
    def test_p_equals_z(self, gbm_params, minute_grid):
        path = exogenous_path(gbm_params, minute_grid, 2000.0, seed=9)
        assert np.array_equal(path.p, path.z)

    def test_deterministic(self, gbm_params, minute_grid):
        a = exogenous_path(gbm_params, minute_grid, 2000.0, seed=9)
        b = exogenous_path(gbm_params, minute_grid, 2000.0, seed=9)
        assert np.array_equal(a.z, b.z)

    def test_log_increment_moments(self, gbm_params):
        n = 100_000
        path = exogenous_path(gbm_params, SimGrid(MINUTE, n), 2000.0, seed=2)
        r = np.diff(np.log(path.z))
        var_target = gbm_params.sigma**2 * MINUTE
        assert np.var(r, ddof=1) == pytest.approx(var_target, rel=0.05)
        mean_target = (gbm_params.mu - 0.5 * gbm_params.sigma**2) * MINUTE
        assert abs(r.mean() - mean_target) < 4.0 * math.sqrt(var_target / n)


class TestGrid:
    def test_minutes(self):
        grid = SimGrid.from_minutes(1, 35280)
        assert grid.dt == 1 / 525600
        assert grid.horizon == pytest.approx(35280 / 525600)

    def test_for_horizon(self):
        assert SimGrid.for_horizon(MINUTE, 0.05).n_steps == 26280

    @pytest.mark.parametrize("dt,n", [(0.0, 1), (-1.0, 5), (1.0, 0), (1.0, 2.5)])
    def test_invalid(self, dt, n):
        with pytest.raises(ValueError):
            SimGrid(dt, n)


def test_round_streams_are_distinct_and_stable():
    a = _random.standard_normals(_random.round_seed(5, 0), _random.W_STREAM, 8)
    b = _random.standard_normals(_random.round_seed(5, 1), _random.W_STREAM, 8)
    c = _random.standard_normals(_random.round_seed(5, 0), _random.B_STREAM, 8)
    again = _random.standard_normals(_random.round_seed(5, 0), _random.W_STREAM, 8)
    assert np.array_equal(a, again)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    # a prefix of a longer draw is the shorter draw: the step index addresses the counter
    longer = _random.standard_normals(_random.round_seed(5, 0), _random.W_STREAM, 20)
    assert np.array_equal(longer[:8], a)
