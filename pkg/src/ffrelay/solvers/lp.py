"""Dense two-phase simplex with Bland's rule.

Problem sizes here are tiny (at most a couple hundred variables), so a
deterministic tableau method beats anything fancier: identical pivots on
identical inputs, which the reproducibility contract of the experiment
runner relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_PIVOT_TOL = 1e-10


@dataclass
class LinearProgram:
    """maximize c^T x  s.t.  rows of (A, sense, b), x >= 0."""

    c: np.ndarray
    A: np.ndarray
    senses: list          # "<=", ">=", "=" per row
    b: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.A.shape != (self.b.size, self.c.size):
            raise ValueError("inconsistent LP dimensions")
        if len(self.senses) != self.b.size:
            raise ValueError("one sense per constraint row required")
        for s in self.senses:
            if s not in ("<=", ">=", "="):
                raise ValueError(f"unknown sense {s!r}")


@dataclass
class LpResult:
    status: str                        # optimal | infeasible | unbounded
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    basis: list = field(default_factory=list)


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _simplex(T, basis, max_iter=20000):
    """Bland's rule on a tableau whose last row holds reduced costs."""
    it = 0
    while it < max_iter:
        it += 1
        z = T[-1, :-1]
        enter_candidates = np.nonzero(z < -_PIVOT_TOL)[0]
        if enter_candidates.size == 0:
            return "optimal", it
        col = int(enter_candidates[0])
        ratios = []
        for i in range(T.shape[0] - 1):
            a = T[i, col]
            if a > _PIVOT_TOL:
                ratios.append((T[i, -1] / a, basis[i], i))
        if not ratios:
            return "unbounded", it
        ratios.sort(key=lambda t: (t[0], t[1]))
        row = ratios[0][2]
        _pivot(T, row, col)
        basis[row] = col
        it += 0
    return "iteration_limit", it


def solve_lp(c, constraints) -> LpResult:
    """maximize c^T x subject to x >= 0 and (a, sense, b) rows.

    ``constraints`` is an iterable of (coefficients, sense, rhs) with sense
    in {"<=", ">=", "="}.
    """
    rows = list(constraints)
    if not rows:
        raise ValueError("at least one constraint required")
    A = np.array([np.asarray(a, dtype=float).ravel() for a, _, _ in rows])
    senses = [s for _, s, _ in rows]
    b = np.array([float(v) for _, _, v in rows])
    return _solve(LinearProgram(c=c, A=A, senses=senses, b=b))


def _solve(lp: LinearProgram) -> LpResult:
    m, n = lp.A.shape
    A = lp.A.copy()
    b = lp.b.copy()
    senses = list(lp.senses)
    for i in range(m):                      # make rhs nonnegative
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0
            senses[i] = {"<=": ">=", ">=": "<=", "=": "="}[senses[i]]

    n_slack = sum(1 for s in senses if s == "<=")
    n_surp = sum(1 for s in senses if s == ">=")
    n_art = sum(1 for s in senses if s in (">=", "="))
    total = n + n_slack + n_surp + n_art
    slack0, surp0, art0 = n, n + n_slack, n + n_slack + n_surp

    T = np.zeros((m + 1, total + 1))
    basis = [0] * m
    si = ti = ai = 0
    for i in range(m):
        T[i, :n] = A[i]
        T[i, -1] = b[i]
        if senses[i] == "<=":
            T[i, slack0 + si] = 1.0
            basis[i] = slack0 + si
            si += 1
        elif senses[i] == ">=":
            T[i, surp0 + ti] = -1.0
            T[i, art0 + ai] = 1.0
            basis[i] = art0 + ai
            ti += 1
            ai += 1
        else:
            T[i, art0 + ai] = 1.0
            basis[i] = art0 + ai
            ai += 1

    iters = 0
    if n_art:
        # phase 1: maximize -(sum of artificials)
        T[-1, art0:art0 + n_art] = 1.0
        for i in range(m):
            if basis[i] >= art0:
                T[-1] -= T[i]
        status, it = _simplex(T, basis)
        iters += it
        if status != "optimal":
            return LpResult(status="infeasible", iterations=iters)
        if T[-1, -1] < -1e-7 * max(1.0, np.abs(b).max()):
            return LpResult(status="infeasible", iterations=iters)
        # drive surviving artificials out of the basis where possible
        for i in range(m):
            if basis[i] >= art0:
                pivot_col = next(
                    (j for j in range(art0) if abs(T[i, j]) > _PIVOT_TOL), None)
                if pivot_col is not None:
                    _pivot(T, i, pivot_col)
                    basis[i] = pivot_col
        keep = np.ones(total + 1, dtype=bool)
        keep[art0:art0 + n_art] = False
        col_map = np.cumsum(keep) - 1
        T = T[:, keep]
        basis = [int(col_map[bc]) if bc < art0 else -1 for bc in basis]
        total -= n_art

    # phase 2 objective row: maximize c^T x  ->  reduced costs -c
    T[-1, :] = 0.0
    T[-1, :n] = -lp.c
    for i in range(m):
        bc = basis[i]
        if bc >= 0 and bc < n and abs(lp.c[bc]) > 0:
            T[-1] += lp.c[bc] * T[i]
    status, it = _simplex(T, basis)
    iters += it
    if status == "unbounded":
        return LpResult(status="unbounded", iterations=iters)
    if status != "optimal":
        return LpResult(status="infeasible", iterations=iters)

    x = np.zeros(total)
    for i, bc in enumerate(basis):
        if bc >= 0:
            x[bc] = T[i, -1]
    x = np.maximum(x[:n], 0.0)          # clip round-off negatives
    return LpResult(status="optimal", x=x, objective=float(lp.c @ x),
                    iterations=iters, basis=list(basis))
