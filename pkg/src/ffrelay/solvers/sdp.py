"""Dense Hermitian SDP solver (primal-dual interior point, HKM direction).

Complex Hermitian problems are solved through the real symmetric embedding
[[Re A, -Im A], [Im A, Re A]], whose inner products carry a factor of two
that is absorbed into the right-hand sides and inverted on extraction.  The
core works on the standard form

    minimize   <C, X> + c_lin . v + c_free . u
    subject to <A_i, X> + Lmat[i] . v + Fmat[i] . u = b_i,
               X >= 0 (PSD),  v >= 0,  u free,

with one dense PSD block, a nonnegative orthant absorbing inequality slacks,
and a handful of free scalars (the max-min margin variable).  Problem sizes
here are tiny (embedding dimension <= ~20, a few dozen constraints), so
everything is dense and a Mehrotra predictor-corrector with the symmetrised
HKM direction converges in a handful of iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..numkit import hermitize, is_hermitian

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
_STEP_FRAC = 0.98


# ---------------------------------------------------------------------------
# public problem/solution containers
# ---------------------------------------------------------------------------

@dataclass
class SdpProblem:
    """min <C, X> s.t. <A_i, X> (sense_i) b_i, X PSD; all matrices Hermitian."""

    C: np.ndarray
    constraints: list                 # (A_i, b_i, sense) with sense in {'>=', '<='}
    n: int

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=complex)
        if self.C.shape != (self.n, self.n):
            raise ValueError("cost matrix must be n x n")
        if not self.constraints:
            raise ValueError("at least one constraint required")
        checked = []
        for A, bi, sense in self.constraints:
            A = np.asarray(A, dtype=complex)
            if A.shape != (self.n, self.n):
                raise ValueError("constraint matrix must be n x n")
            if sense not in (">=", "<="):
                raise ValueError("sense must be '>=' or '<='")
            if not is_hermitian(A, 1e-10):
                raise ValueError("constraint matrices must be Hermitian")
            checked.append((hermitize(A), float(bi), sense))
        if not is_hermitian(self.C, 1e-10):
            raise ValueError("cost matrix must be Hermitian")
        self.C = hermitize(self.C)
        self.constraints = checked


@dataclass
class SdpSolution:
    X: np.ndarray
    objective: float
    duals: np.ndarray                 # one nonnegative multiplier per constraint
    status: str                       # optimal | infeasible | max_iter
    kkt_residuals: tuple              # (primal, dual, gap), relative
    iterations: int = 0
    margin: float | None = None       # set by the free-margin wrapper
    extras: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# real embedding helpers
# ---------------------------------------------------------------------------

def embed(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def extract(Xe) -> np.ndarray:
    """Inverse of :func:`embed` on the PSD face (average of the two copies)."""
    n = Xe.shape[0] // 2
    re = 0.5 * (Xe[:n, :n] + Xe[n:, n:])
    im = 0.5 * (Xe[n:, :n] - Xe[:n, n:])
    return hermitize(re + 1j * im)


# ---------------------------------------------------------------------------
# core interior-point method
# ---------------------------------------------------------------------------

def _sym(M):
    return 0.5 * (M + M.T)


def _max_step_psd(X, D):
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * max(1.0, float(np.trace(X)) / X.shape[0])
        try:
            L = np.linalg.cholesky(X + jitter * np.eye(X.shape[0]))
        except np.linalg.LinAlgError:
            return 0.0
    Li = np.linalg.inv(L)
    w = np.linalg.eigvalsh(_sym(Li @ D @ Li.T))
    lam = w[0]
    return np.inf if lam >= -1e-14 else -1.0 / lam


def _max_step_lin(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    with np.errstate(over="ignore", divide="ignore"):
        return float(np.min(-v[neg] / dv[neg]))


class _ConeResult(dict):
    pass


def _solve_cone(C, A, b, Lmat, c_lin, Fmat=None, c_free=None,
                tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> _ConeResult:
    s = C.shape[0]
    m = b.size
    p = c_lin.size
    A = np.asarray(A, dtype=float).reshape(m, s, s)
    Lmat = np.asarray(Lmat, dtype=float).reshape(m, p)
    q = 0 if c_free is None else c_free.size
    Fmat = np.zeros((m, q)) if Fmat is None else np.asarray(Fmat, float).reshape(m, q)
    c_free = np.zeros(q) if c_free is None else np.asarray(c_free, float)
    eye = np.eye(s)

    norm_dat = max(1.0, float(np.abs(b).max()),
                   float(np.linalg.norm(C)),
                   max(float(np.linalg.norm(Ai)) for Ai in A) if m else 1.0)
    beta_p = max(1.0, float(np.sqrt(s)), float(np.abs(b).max()))
    beta_d = max(1.0, float(np.linalg.norm(C)) / max(1.0, np.sqrt(s)))
    X = beta_p * eye
    v = beta_p * np.ones(p)
    u = np.zeros(q)
    S = beta_d * eye
    z = beta_d * np.ones(p)
    y = np.zeros(m)

    def adjoint_A(yy):
        return np.einsum("i,iab->ab", yy, A)

    best = None
    best_score = np.inf
    status = "max_iter"
    it_done = 0

    for it in range(1, max_iter + 1):
        it_done = it
        Rp = b - np.einsum("iab,ab->i", A, X)
        if p:
            Rp = Rp - Lmat @ v
        if q:
            Rp = Rp - Fmat @ u
        Rd = C - adjoint_A(y) - S
        rl = c_lin - Lmat.T @ y - z if p else np.zeros(0)
        rf = c_free - Fmat.T @ y if q else np.zeros(0)
        gap_inner = float(np.sum(X * S) + (v @ z if p else 0.0))
        mu = gap_inner / (s + p)

        pobj = float(np.sum(C * X) + (c_lin @ v if p else 0.0) +
                     (c_free @ u if q else 0.0))
        dobj = float(b @ y)
        rel_gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        rel_p = float(np.linalg.norm(Rp)) / (1.0 + float(np.linalg.norm(b)))
        dnorm = np.sqrt(np.linalg.norm(Rd) ** 2 +
                        (np.linalg.norm(rl) ** 2 if p else 0.0) +
                        (np.linalg.norm(rf) ** 2 if q else 0.0))
        rel_d = float(dnorm) / (1.0 + float(np.linalg.norm(C)) +
                                (float(np.linalg.norm(c_lin)) if p else 0.0))
        score = max(rel_p, rel_d, rel_gap)
        if score < best_score:
            best_score = score
            best = (X.copy(), v.copy(), u.copy(), y.copy(), S.copy(),
                    z.copy(), (rel_p, rel_d, rel_gap), pobj, dobj)
        if rel_p <= tol and rel_d <= tol and rel_gap <= tol:
            status = "optimal"
            break
        if mu <= 1e-300:
            break

        try:
            cS = cho_factor(S)
            Sinv = cho_solve(cS, eye)
        except np.linalg.LinAlgError:
            break
        Sinv = _sym(Sinv)

        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            U = np.einsum("ab,jbc,cd->jad", X, A, Sinv, optimize=True)
            Usym = 0.5 * (U + U.transpose(0, 2, 1))
            M = np.einsum("iab,jab->ij", A, Usym, optimize=True)
            if p:
                M = M + (Lmat * (v / z)) @ Lmat.T
        if not np.all(np.isfinite(M)):
            break

        def direction(Rc, rc_l):
            E0 = _sym((Rc - X @ Rd) @ Sinv)
            rhs = Rp - np.einsum("iab,ab->i", A, E0)
            if p:
                rhs = rhs - Lmat @ ((rc_l - v * rl) / z)
            reg = 1e-13 * norm_dat
            if q:
                # KKT system with the free block: [[M, F], [F^T, 0]]
                K = np.zeros((m + q, m + q))
                K[:m, :m] = M + reg * np.eye(m)
                K[:m, m:] = Fmat
                K[m:, :m] = Fmat.T
                rhs_full = np.concatenate([rhs, rf])
                try:
                    sol = np.linalg.solve(K, rhs_full)
                except np.linalg.LinAlgError:
                    sol = np.linalg.lstsq(K, rhs_full, rcond=None)[0]
                dy, du = sol[:m], sol[m:]
            else:
                try:
                    cM = cho_factor(M + reg * np.eye(m))
                    dy = cho_solve(cM, rhs)
                except np.linalg.LinAlgError:
                    dy = np.linalg.lstsq(M + 1e-9 * norm_dat * np.eye(m), rhs,
                                         rcond=None)[0]
                du = np.zeros(0)
            At_dy = adjoint_A(dy)
            dS = Rd - At_dy
            dX = E0 + _sym(X @ At_dy @ Sinv)
            if p:
                dz = rl - Lmat.T @ dy
                dv = (rc_l - v * rl) / z + (v / z) * (Lmat.T @ dy)
            else:
                dz = np.zeros(0)
                dv = np.zeros(0)
            return dy, dX, dS, dv, dz, du

        # predictor
        Rc_aff = -(X @ S)
        rc_aff = -(v * z) if p else np.zeros(0)
        dy_a, dX_a, dS_a, dv_a, dz_a, du_a = direction(Rc_aff, rc_aff)
        ap = min(1.0, _STEP_FRAC * _max_step_psd(X, dX_a),
                 _STEP_FRAC * _max_step_lin(v, dv_a) if p else np.inf)
        ad = min(1.0, _STEP_FRAC * _max_step_psd(S, dS_a),
                 _STEP_FRAC * _max_step_lin(z, dz_a) if p else np.inf)
        gap_aff = float(np.sum((X + ap * dX_a) * (S + ad * dS_a)))
        if p:
            gap_aff += float((v + ap * dv_a) @ (z + ad * dz_a))
        mu_aff = gap_aff / (s + p)
        sigma = min(1.0, max(1e-10, (mu_aff / mu) ** 3))

        # corrector
        Rc = sigma * mu * eye - X @ S - dX_a @ dS_a
        rc_l = (sigma * mu - v * z - dv_a * dz_a) if p else np.zeros(0)
        dy, dX, dS, dv, dz, du = direction(Rc, rc_l)
        ap = min(1.0, _STEP_FRAC * _max_step_psd(X, dX),
                 _STEP_FRAC * _max_step_lin(v, dv) if p else np.inf)
        ad = min(1.0, _STEP_FRAC * _max_step_psd(S, dS),
                 _STEP_FRAC * _max_step_lin(z, dz) if p else np.inf)
        if min(ap, ad) < 1e-12:
            break

        X = _sym(X + ap * dX)
        v = v + ap * dv
        u = u + ap * du
        y = y + ad * dy
        S = _sym(S + ad * dS)
        z = z + ad * dz

    X, v, u, y, S, z, residuals, pobj, dobj = best
    return _ConeResult(X=X, v=v, u=u, y=y, S=S, z=z, status=status,
                       residuals=residuals, pobj=pobj, dobj=dobj,
                       iterations=it_done)


# ---------------------------------------------------------------------------
# wrappers: Hermitian problems with inequality rows
# ---------------------------------------------------------------------------

def _assemble(problem: SdpProblem, margin_rows=None):
    """Embed and scale; returns core data plus undo information.

    ``margin_rows``: indices of '>=' rows that additionally receive the free
    margin scalar t, used by :func:`solve_sdp_with_free_margin`.
    """
    m = len(problem.constraints)
    margin_rows = set(margin_rows or ())
    s = 2 * problem.n
    A = np.zeros((m, s, s))
    b = np.zeros(m)
    Lmat = np.zeros((m, m))
    q = 1 if margin_rows else 0
    Fmat = np.zeros((m, q))
    row_scale = np.zeros(m)
    senses = []
    for i, (Ai, bi, sense) in enumerate(problem.constraints):
        Ae = embed(Ai)
        d = max(1.0, float(np.linalg.norm(Ae)), abs(2.0 * bi))
        row_scale[i] = d
        A[i] = Ae / d
        b[i] = 2.0 * bi / d
        senses.append(sense)
        Lmat[i, i] = -1.0 if sense == ">=" else 1.0
        if i in margin_rows:
            Fmat[i, 0] = -2.0 / d     # embedded-side margin is 2t
    Ce = embed(problem.C)
    c_scale = max(1.0, float(np.linalg.norm(Ce)))
    c_lin = np.zeros(m)
    c_free = np.array([-1.0]) if margin_rows else None
    return dict(C=Ce / c_scale, A=A, b=b, Lmat=Lmat, c_lin=c_lin,
                Fmat=Fmat if margin_rows else None, c_free=c_free,
                row_scale=row_scale, c_scale=c_scale, senses=senses,
                margin_rows=margin_rows)


def _finish(problem: SdpProblem, data, core, tol,
            margin_mode: bool = False) -> SdpSolution:
    # rhs was doubled to absorb the embedding's factor two, so the complex
    # iterate is the plain block average
    X = extract(core["X"])
    senses = data["senses"]
    dual_scale = 1.0 if margin_mode else data["c_scale"]
    y = core["y"] * dual_scale / data["row_scale"]
    duals = np.array([yi if s == ">=" else -yi for yi, s in zip(y, senses)])
    obj = float(np.real(np.trace(problem.C @ X)))
    margin = float(core["u"][0]) if margin_mode else None
    # constraint violation on the complex side (margin rows include t)
    viol = 0.0
    for i, (Ai, bi, sense) in enumerate(problem.constraints):
        g = float(np.real(np.trace(Ai @ X)))
        rhs = bi + (margin if (margin_mode and i in data["margin_rows"]) else 0.0)
        err = (rhs - g) if sense == ">=" else (g - bi)
        viol = max(viol, err / (1.0 + abs(bi)))
    if margin_mode:
        rel_d, rel_gap = core["residuals"][1], core["residuals"][2]
    else:
        Sc = problem.C - sum(d * (Ai if s == ">=" else -Ai)
                             for d, (Ai, bi, s) in zip(duals, problem.constraints))
        dual_eig = float(np.linalg.eigvalsh(hermitize(Sc))[0])
        rel_d = max(0.0, -dual_eig) / (1.0 + float(np.linalg.norm(problem.C)))
        dobj = float(sum(d * (bi if s == ">=" else -bi)
                         for d, (Ai, bi, s) in zip(duals, problem.constraints)))
        rel_gap = abs(obj - dobj) / (1.0 + abs(obj) + abs(dobj))
    # 'optimal' is judged on the descaled complex-side residuals so the
    # reported guarantee matches the reported numbers
    residuals = (max(viol, 0.0), rel_d, rel_gap)
    status = "optimal" if max(residuals) <= tol else "max_iter"
    return SdpSolution(X=X, objective=obj, duals=duals, status=status,
                       kkt_residuals=residuals,
                       iterations=core["iterations"], margin=margin,
                       extras=dict(embedded=core))


def _phase1_feasible(data, tol) -> bool:
    """Certify feasibility: minimize one artificial scalar that patches the
    residual of a strictly interior starting point; feasible iff it reaches
    ~0."""
    A, b, Lmat, c_lin = data["A"], data["b"], data["Lmat"], data["c_lin"]
    s = A.shape[1]
    p = c_lin.size
    beta = max(1.0, float(np.abs(b).max()))
    X0 = beta * np.eye(s)
    v0 = beta * np.ones(p)
    r0 = b - np.einsum("iab,ab->i", A, X0) - Lmat @ v0
    Lx = np.hstack([Lmat, r0[:, None]])
    cx = np.zeros(p + 1)
    cx[-1] = 1.0
    core = _solve_cone(np.zeros((s, s)), A, b, Lx, cx,
                       tol=max(tol, 1e-9), max_iter=DEFAULT_MAX_ITER)
    theta = float(core["v"][-1])
    return theta <= 1e-6 * max(1.0, beta)


def solve_sdp(problem: SdpProblem, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER) -> SdpSolution:
    """Solve a Hermitian SDP with inequality constraints.

    status 'optimal' guarantees the reported complex-side KKT residuals are
    within tol; 'infeasible' is certified by a phase-1 problem; 'max_iter'
    returns the best iterate reached.
    """
    data = _assemble(problem)
    inner_tol = max(tol * 2e-2, 1e-12)
    core = _solve_cone(data["C"], data["A"], data["b"], data["Lmat"],
                       data["c_lin"], tol=inner_tol, max_iter=max_iter)
    sol = _finish(problem, data, core, tol)
    if sol.status != "optimal":
        if not _phase1_feasible(data, tol):
            sol.status = "infeasible"
    return sol


def solve_sdp_with_free_margin(problem: SdpProblem, margin_rows,
                               tol: float = DEFAULT_TOL,
                               max_iter: int = DEFAULT_MAX_ITER) -> SdpSolution:
    """Maximise a free margin t added to the selected '>=' rows.

    Solves  max t  s.t.  <A_i, X> >= b_i + t (i in margin_rows), the other
    constraints unchanged, X PSD.  Always feasible (t can go negative), so
    it doubles as a robust feasibility certificate: the set defined by the
    original rows is nonempty iff the optimal margin is >= 0 (within tol).
    The cost matrix of ``problem`` is ignored.
    """
    data = _assemble(problem, margin_rows=margin_rows)
    inner_tol = max(tol * 2e-2, 1e-12)
    core = _solve_cone(np.zeros_like(data["C"]), data["A"], data["b"],
                       data["Lmat"], data["c_lin"], Fmat=data["Fmat"],
                       c_free=data["c_free"], tol=inner_tol,
                       max_iter=max_iter)
    sol = _finish(problem, data, core, tol, margin_mode=True)
    sol.objective = sol.margin if sol.margin is not None else sol.objective
    return sol
