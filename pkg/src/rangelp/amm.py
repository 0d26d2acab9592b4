"""Range-liquidity arithmetic for a Uniswap-v3-style AMM.

Prices are quoted as token Y per token X and kept continuous (no ticks).
A range may use ``0.0`` as its lower bound and ``math.inf`` as its upper
bound; the square-root formulas reduce to the correct limits there
(``sqrt(0) == 0`` and ``1 / sqrt(inf) == 0``) so no special casing is needed.
"""

import math
from dataclasses import dataclass

from ._validation import check_alpha, check_nonnegative, check_price

__all__ = [
    "PriceRange",
    "LiquidityPosition",
    "TokenAmounts",
    "deposit_amounts",
    "withdraw_amounts",
    "trade_deltas",
    "decompose",
]


@dataclass(frozen=True)
class PriceRange:
    """Closed price interval ``[lower, upper]``.

    ``lower`` may be ``0.0`` and ``upper`` may be ``math.inf`` to express the
    unbounded ranges ``(0, b)``, ``(a, inf)`` and ``(0, inf)``.
    """

    lower: float
    upper: float

    def __post_init__(self):
        lower, upper = float(self.lower), float(self.upper)
        if math.isnan(lower) or math.isnan(upper):
            raise ValueError("range bounds must not be NaN")
        if lower < 0.0 or lower == math.inf:
            raise ValueError(f"lower bound must be in [0, inf), got {lower!r}")
        if upper <= lower:
            raise ValueError(f"inverted range: lower={lower!r} >= upper={upper!r}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def full(cls):
        return cls(0.0, math.inf)

    @classmethod
    def around(cls, center, alpha):
        """The chasing range ``[center / alpha, alpha * center]``."""
        center = check_price(center, "center")
        alpha = check_alpha(alpha)
        return cls(center / alpha, alpha * center)

    def contains(self, price):
        return self.lower <= price <= self.upper


@dataclass(frozen=True)
class LiquidityPosition:
    liquidity: float
    range: PriceRange

    def __post_init__(self):
        object.__setattr__(self, "liquidity", check_nonnegative(self.liquidity, "liquidity"))

    def amounts(self, price):
        return deposit_amounts(self.liquidity, price, self.range)


@dataclass(frozen=True)
class TokenAmounts:
    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y

    def __add__(self, other):
        return TokenAmounts(self.x + other.x, self.y + other.y)


def deposit_amounts(L, Z, price_range):
    """Token amounts backing ``L`` liquidity on ``price_range`` at price ``Z``.

    Parameters
    ----------
    L : float
        Liquidity, non-negative.
    Z : float
        Current AMM price of X in Y.
    price_range : PriceRange

    Returns
    -------
    TokenAmounts
        Below the range the position is all X, above it all Y.
    """
    L = check_nonnegative(L, "L")
    Z = check_price(Z, "Z")
    lo, hi = price_range.lower, price_range.upper
    if Z < lo:
        return TokenAmounts(L * (1.0 / math.sqrt(lo) - 1.0 / math.sqrt(hi)), 0.0)
    if Z > hi:
        return TokenAmounts(0.0, L * (math.sqrt(hi) - math.sqrt(lo)))
    return TokenAmounts(
        L * (1.0 / math.sqrt(Z) - 1.0 / math.sqrt(hi)),
        L * (math.sqrt(Z) - math.sqrt(lo)),
    )


def withdraw_amounts(L, Z_exit, entry_center, alpha):
    """Tokens returned when pulling ``L`` from ``[Z_c / alpha, alpha * Z_c]`` at ``Z_exit``.

    Raises ``ValueError`` when ``Z_exit`` has left the range, since the
    chasing strategy assumes every one-step move stays inside it.
    """
    L = check_nonnegative(L, "L")
    Z_exit = check_price(Z_exit, "Z_exit")
    Zc = check_price(entry_center, "entry_center")
    alpha = check_alpha(alpha)
    lo, hi = Zc / alpha, alpha * Zc
    if not lo <= Z_exit <= hi:
        raise ValueError(
            f"exit price {Z_exit!r} outside the position range [{lo!r}, {hi!r}]"
        )
    return TokenAmounts(
        L * (1.0 / math.sqrt(Z_exit) - 1.0 / math.sqrt(hi)),
        L * (math.sqrt(Z_exit) - math.sqrt(lo)),
    )


def trade_deltas(L, Z, Z_next, price_range):
    """Token flows of a trade moving the price from ``Z`` to ``Z_next``.

    Sign convention: the pair ``(x_out, y_in)`` is X leaving the pool and Y
    entering it. A price rise gives two non-negative numbers; a price fall
    gives two non-positive ones (X added, Y removed). The pool reserve change
    is ``(-x_out, +y_in)``, whose product is never positive.

    The result depends only on ``L`` and the two prices, not on the range,
    as long as both prices lie inside it.
    """
    L = check_nonnegative(L, "L")
    Z = check_price(Z, "Z")
    Z_next = check_price(Z_next, "Z_next")
    if not (price_range.contains(Z) and price_range.contains(Z_next)):
        raise ValueError(
            f"prices {Z!r} -> {Z_next!r} must stay inside [{price_range.lower!r}, {price_range.upper!r}]"
        )
    held = deposit_amounts(L, Z, price_range)
    x_virtual = held.x + L / math.sqrt(price_range.upper)
    y_virtual = held.y + L * math.sqrt(price_range.lower)
    x_out = (1.0 - math.sqrt(Z / Z_next)) * x_virtual
    y_in = (math.sqrt(Z_next / Z) - 1.0) * y_virtual
    return x_out, y_in


def decompose(l, Z, a, b):
    """Split full-range liquidity ``l`` into positions on (0, a), (a, b), (b, inf)."""
    l = check_nonnegative(l, "l")
    Z = check_price(Z, "Z")
    a = float(a)
    b = float(b)
    if not (0.0 < a < Z < b < math.inf):
        raise ValueError(f"need 0 < a < Z < b < inf, got a={a!r}, Z={Z!r}, b={b!r}")
    return (
        LiquidityPosition(l, PriceRange(0.0, a)),
        LiquidityPosition(l, PriceRange(a, b)),
        LiquidityPosition(l, PriceRange(b, math.inf)),
    )
