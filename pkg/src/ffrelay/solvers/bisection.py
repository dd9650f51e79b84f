"""Generic bisection for quasi-convex threshold problems."""

from __future__ import annotations

import math


class BracketError(ValueError):
    """Raised when the initial bracket does not straddle the threshold."""


def expected_iterations(tau_lo: float, tau_hi: float, eps: float) -> int:
    return max(0, math.ceil(math.log2((tau_hi - tau_lo) / eps)))


def bisect(feasible, tau_lo: float, tau_hi: float, eps: float,
           check_bracket: bool = True):
    """Largest feasible tau for a monotone feasibility predicate.

    Requires feasible(tau_lo) and not feasible(tau_hi); halves the bracket
    until its width drops below eps and returns the feasible left endpoint.
    The iteration count is exactly ceil(log2((tau_hi - tau_lo)/eps)).
    """
    if not (tau_lo < tau_hi):
        raise BracketError("need tau_lo < tau_hi")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if check_bracket:
        if not feasible(tau_lo):
            raise BracketError(
                "tau_lo is infeasible; widen the bracket downwards")
        if feasible(tau_hi):
            raise BracketError(
                "tau_hi is feasible; widen the bracket upwards")
    while tau_hi - tau_lo >= eps:
        mid = 0.5 * (tau_lo + tau_hi)
        if feasible(mid):
            tau_lo = mid
        else:
            tau_hi = mid
    return tau_lo
