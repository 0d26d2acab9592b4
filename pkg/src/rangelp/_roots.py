"""Safeguarded Newton iteration on a sign-change bracket."""

import math


class BracketError(RuntimeError):
    pass


def newton_bisect(f, df, a, b, xtol=1e-15, maxiter=200):
    """Root of ``f`` in ``[a, b]`` given ``f(a)`` and ``f(b)`` of opposite sign.

    Newton steps are taken while they stay inside the current bracket and
    shrink it at least as fast as bisection would; otherwise the bracket is
    halved. Terminates when the bracket is narrower than
    ``xtol * max(1, |x|)`` or ``f(x) == 0``.
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if math.copysign(1.0, fa) == math.copysign(1.0, fb):
        raise BracketError(f"f({a!r}) = {fa!r} and f({b!r}) = {fb!r} do not bracket a root")
    # orient so that f(lo) < 0 < f(hi)
    lo, hi = (a, b) if fa < 0 else (b, a)
    x = 0.5 * (a + b)
    dx_old = abs(b - a)
    dx = dx_old
    fx, dfx = f(x), df(x)
    for _ in range(maxiter):
        if fx == 0.0:
            return x
        newton_out = ((x - hi) * dfx - fx) * ((x - lo) * dfx - fx) > 0.0
        if newton_out or abs(2.0 * fx) > abs(dx_old * dfx):
            dx_old = dx
            dx = 0.5 * (hi - lo)
            x = lo + dx
        else:
            dx_old = dx
            dx = fx / dfx
            x -= dx
        if abs(dx) <= xtol * max(1.0, abs(x)):
            return x
        fx, dfx = f(x), df(x)
        if fx < 0.0:
            lo = x
        else:
            hi = x
    raise BracketError(f"no convergence after {maxiter} iterations (bracket [{lo!r}, {hi!r}])")
