"""Euclidean projections onto the two constraint sets of the joint design."""

from __future__ import annotations

import numpy as np

from ..numkit import hermitian_eig


def project_power_halfspace(p, budget: float) -> np.ndarray:
    """Project onto {p : p >= 0, sum(p) <= budget}.

    If clipping to the nonnegative orthant already lands inside the budget,
    that clip is the projection.  Otherwise the budget is active and the
    problem reduces to the classic capped-simplex projection
    p* = max(p - theta, 0), with theta fixed by sum(p*) = budget.
    """
    p = np.asarray(p, dtype=float).ravel()
    if budget < 0:
        raise ValueError("budget must be >= 0")
    clipped = np.maximum(p, 0.0)
    total = clipped.sum()
    if total <= budget:
        return clipped
    u = np.sort(p)[::-1]
    cumsum = np.cumsum(u) - budget
    theta_cand = cumsum / np.arange(1, p.size + 1)
    j = np.nonzero(theta_cand < u)[0][-1]
    out = np.maximum(p - theta_cand[j], 0.0)
    # exact feasibility: remove the round-off excess from the active entries
    excess = out.sum() - budget
    if excess != 0.0:
        active = out > 0
        out[active] -= excess / active.sum()
        out = np.maximum(out, 0.0)
    return out


def project_ellipsoid(r, phi, budget: float, tol: float = 1e-10) -> np.ndarray:
    """Project onto the ellipsoid {r : r^H phi r <= budget}, phi Hermitian PD.

    Diagonalise phi = U diag(d) U^H and solve the scalar secular equation
    sum_i d_i |c_i|^2 / (1 + nu d_i)^2 = budget for the multiplier nu >= 0
    by monotone bisection; the projection is U (c / (1 + nu d)).
    Interior points are returned unchanged.
    """
    r = np.asarray(r, dtype=complex).ravel()
    if budget <= 0:
        raise ValueError("budget must be > 0")
    d, U = hermitian_eig(phi)
    if d[-1] <= 0:
        raise ValueError("phi must be positive definite")
    c = U.conj().T @ r
    w = d * np.abs(c) ** 2

    def residual(nu):
        return float(np.sum(w / (1.0 + nu * d) ** 2) - budget)

    if residual(0.0) <= 0.0:
        return r
    lo, hi = 0.0, 1.0 / d[-1]
    while residual(hi) > 0.0:
        hi *= 2.0
        if hi > 1e30:
            raise RuntimeError("ellipsoid projection failed to bracket")
    # bisect on nu; the constraint residual is strictly decreasing
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    nu = hi                     # feasible side
    v = c / (1.0 + nu * d)
    out = U @ v
    # polish: tiny radial correction so the residual meets tol exactly
    val = float(np.real(np.conj(out) @ (phi @ out)))
    if val > budget:
        out *= np.sqrt(budget / val) * (1.0 - 1e-15)
        val = float(np.real(np.conj(out) @ (phi @ out)))
    if abs(val - budget) > tol * max(1.0, budget) and val > budget:
        raise RuntimeError("ellipsoid projection residual out of tolerance")
    return out
