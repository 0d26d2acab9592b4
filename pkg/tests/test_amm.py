import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangelp.amm import (
    LiquidityPosition,
    PriceRange,
    TokenAmounts,
    decompose,
    deposit_amounts,
    trade_deltas,
    withdraw_amounts,
)

prices = st.floats(min_value=1e-3, max_value=1e6, allow_nan=False, allow_infinity=False)
liquidity = st.just(0.0) | st.floats(min_value=1e-6, max_value=1e9, allow_nan=False, allow_infinity=False)


def rel_close(a, b, rtol=1e-12):
    scale = max(abs(a), abs(b))
    return abs(a - b) <= rtol * scale or scale == 0.0


class TestDepositAmounts:
    def test_below_range_is_all_x(self):
        amounts = deposit_amounts(1.0, 2.0, PriceRange(4.0, 9.0))
        assert amounts.x == pytest.approx(1.0 / 2 - 1.0 / 3, rel=1e-15)
        assert amounts.y == 0.0

    def test_above_range_is_all_y(self):
        amounts = deposit_amounts(1000.0, 20.0, PriceRange(4.0, 9.0))
        assert amounts == TokenAmounts(0.0, 1000.0)

    def test_in_range_reference_values(self):
        # 50-digit mpmath evaluation
        amounts = deposit_amounts(1000.0, 2000.0, PriceRange(2000.0 / 1.1, 2200.0))
        assert amounts.x == pytest.approx(1.0406081394368535342, rel=1e-13)
        assert amounts.y == pytest.approx(2081.2162788737070685, rel=1e-13)

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_bad_price(self, bad):
        with pytest.raises(ValueError):
            deposit_amounts(1.0, bad, PriceRange(1.0, 2.0))

    def test_rejects_inverted_range(self):
        with pytest.raises(ValueError, match="inverted"):
            PriceRange(9.0, 4.0)

    @pytest.mark.parametrize("edge", ["lower", "upper"])
    def test_continuous_at_bounds(self, edge):
        rng = PriceRange(1500.0, 2500.0)
        z = getattr(rng, edge)
        eps = 1e-9 * rng.lower
        left = deposit_amounts(10.0, z - eps, rng)
        right = deposit_amounts(10.0, z + eps, rng)
        assert left.x == pytest.approx(right.x, abs=1e-9)
        assert left.y == pytest.approx(right.y, abs=1e-6)

    @given(liquidity, prices, st.floats(0.01, 100.0))
    def test_homogeneous_in_liquidity(self, L, Z, c):
        rng = PriceRange(Z / 1.3, Z * 1.7)
        base = deposit_amounts(L, Z, rng)
        scaled = deposit_amounts(c * L, Z, rng)
        assert rel_close(scaled.x, c * base.x, 1e-13)
        assert rel_close(scaled.y, c * base.y, 1e-13)

    def test_full_range_sentinels(self):
        amounts = deposit_amounts(3.0, 16.0, PriceRange.full())
        assert amounts == TokenAmounts(0.75, 12.0)


class TestWithdrawAmounts:
    def test_no_move_equals_deposit(self):
        out = withdraw_amounts(1000.0, 2000.0, 2000.0, 1.1)
        ref = deposit_amounts(1000.0, 2000.0, PriceRange.around(2000.0, 1.1))
        assert out == ref

    def test_reference_values(self):
        out = withdraw_amounts(1000.0, 2050.0, 2000.0, 1.1)
        assert out.x == pytest.approx(0.76623357940826541546, rel=1e-13)
        assert out.y == pytest.approx(2636.7824195649962732, rel=1e-13)

    def test_zero_liquidity(self):
        assert tuple(withdraw_amounts(0.0, 2050.0, 2000.0, 1.1)) == (0.0, 0.0)

    def test_exit_outside_range(self):
        with pytest.raises(ValueError, match="outside"):
            withdraw_amounts(1.0, 2300.0, 2000.0, 1.1)

    @given(liquidity, prices, st.floats(1.0001, 3.0), st.floats(0.0, 1.0))
    def test_matches_deposit_in_range(self, L, Zc, alpha, u):
        rng = PriceRange.around(Zc, alpha)
        Z_exit = min(max(rng.lower * (rng.upper / rng.lower) ** u, rng.lower), rng.upper)
        out = withdraw_amounts(L, Z_exit, Zc, alpha)
        ref = deposit_amounts(L, Z_exit, rng)
        assert out.x >= 0 and out.y >= 0
        assert rel_close(out.x, ref.x) and rel_close(out.y, ref.y)


class TestTradeDeltas:
    def test_no_trade(self):
        assert trade_deltas(5.0, 3.0, 3.0, PriceRange(1.0, 10.0)) == (0.0, 0.0)

    def test_full_range_reference(self):
        x_out, y_in = trade_deltas(1.0, 1.0, 4.0, PriceRange.full())
        assert x_out == pytest.approx(0.5, rel=1e-15)
        assert y_in == pytest.approx(1.0, rel=1e-15)

    def test_price_rise_removes_x_adds_y(self):
        x_out, y_in = trade_deltas(7.0, 2.0, 2.5, PriceRange(1.0, 3.0))
        assert x_out > 0 and y_in > 0
        # reserve changes have opposite signs
        assert (-x_out) * y_in <= 0

    def test_price_fall_reverses_flows(self):
        x_out, y_in = trade_deltas(7.0, 2.5, 2.0, PriceRange(1.0, 3.0))
        assert x_out < 0 and y_in < 0

    def test_rejects_price_outside_range(self):
        with pytest.raises(ValueError):
            trade_deltas(1.0, 2.0, 5.0, PriceRange(1.0, 3.0))

    @settings(max_examples=300)
    @given(liquidity, prices, st.floats(0.5, 2.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_equivalent_to_full_range(self, L, Z, ratio, u, v):
        Z_next = Z * ratio
        lo, hi = min(Z, Z_next), max(Z, Z_next)
        a = lo / (1.0 + 1e-6 + u)
        b = hi * (1.0 + 1e-6 + 10.0 * v)
        ranged = trade_deltas(L, Z, Z_next, PriceRange(a, b))
        full = trade_deltas(L, Z, Z_next, PriceRange.full())
        assert rel_close(ranged[0], full[0]) and rel_close(ranged[1], full[1])
        x_direct = (1.0 - math.sqrt(Z / Z_next)) * L / math.sqrt(Z)
        y_direct = (math.sqrt(Z_next / Z) - 1.0) * L * math.sqrt(Z)
        assert rel_close(full[0], x_direct) and rel_close(full[1], y_direct)


class TestDecompose:
    def test_hand_example(self):
        parts = decompose(1.0, 4.0, 1.0, 9.0)
        amounts = [p.amounts(4.0) for p in parts]
        assert [tuple(a) for a in amounts] == pytest.approx([(0.0, 1.0), (0.5 - 1 / 3, 1.0), (1 / 3, 0.0)])
        total = amounts[0] + amounts[1] + amounts[2]
        assert total.x == pytest.approx(0.5, rel=1e-15)
        assert total.y == pytest.approx(2.0, rel=1e-15)

    def test_zero_liquidity(self):
        parts = decompose(0.0, 4.0, 1.0, 9.0)
        assert all(p.liquidity == 0.0 for p in parts)
        assert all(tuple(p.amounts(4.0)) == (0.0, 0.0) for p in parts)

    def test_wide_range_limit(self):
        parts = decompose(2.0, 4.0, 1e-300, 1e300)
        outer = [tuple(parts[0].amounts(4.0)), tuple(parts[2].amounts(4.0))]
        assert max(abs(v) for pair in outer for v in pair) < 1e-140
        assert tuple(parts[1].amounts(4.0)) == pytest.approx((1.0, 4.0), rel=1e-15)

    def test_rejects_price_outside(self):
        with pytest.raises(ValueError):
            decompose(1.0, 10.0, 1.0, 9.0)

    @settings(max_examples=300)
    @given(liquidity, prices, st.floats(0.001, 0.999), st.floats(1.001, 1000.0))
    def test_additivity(self, l, Z, fa, fb):
        parts = decompose(l, Z, Z * fa, Z * fb)
        total = sum((p.amounts(Z) for p in parts), TokenAmounts(0.0, 0.0))
        assert rel_close(total.x, l / math.sqrt(Z))
        assert rel_close(total.y, l * math.sqrt(Z))

    def test_position_rejects_negative_liquidity(self):
        with pytest.raises(ValueError):
            LiquidityPosition(-1.0, PriceRange(1.0, 2.0))


def test_pure_functions_are_thread_safe():
    from concurrent.futures import ThreadPoolExecutor

    rng = PriceRange(1500.0, 2500.0)
    args = [(float(L), float(Z)) for L, Z in zip(np.linspace(1, 100, 200), np.linspace(1600, 2400, 200))]
    serial = [deposit_amounts(L, Z, rng) for L, Z in args]
    with ThreadPoolExecutor(8) as pool:
        threaded = list(pool.map(lambda a: deposit_amounts(a[0], a[1], rng), args))
    assert serial == threaded
