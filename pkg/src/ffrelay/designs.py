"""The three relay-filter design algorithms.

* ``design_power_min``      -- minimise relay transmit power under
  per-subcarrier SNR floors (semidefinite relaxation + rank-one extraction).
* ``design_worst_snr``      -- maximise the worst subcarrier SNR for a fixed
  source allocation (bisection over a feasibility SDP).
* ``allocate_source_power`` -- maximise the worst subcarrier SNR over the
  source allocation for a fixed filter (a small LP).
* ``design_joint_worst_snr``-- alternate the two previous steps.
* ``design_rate_pgm``       -- maximise the sum rate jointly over filter and
  allocation by projected gradient descent with successive projections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import model
from .model import QuadraticForms, RdStats, SystemConfig
from .numkit import hermitian_eig
from .solvers import (
    SdpProblem,
    bisect,
    project_ellipsoid,
    project_power_halfspace,
    solve_lp,
    solve_sdp,
    solve_sdp_with_free_margin,
)

RANK_ONE_THRESHOLD = 1e-6
N_RANDOMIZATIONS = 1000
LN2 = math.log(2.0)


@dataclass
class DesignResult:
    r: np.ndarray | None
    p_s: np.ndarray | None
    objective: float
    kind: str                         # relay_power | worst_snr | sum_rate
    feasible: bool = True
    rank_ratio: float = 0.0
    duals: np.ndarray | None = None
    trace: list = field(default_factory=list)
    used_randomization: bool = False
    iterations: int = 0
    warnings: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# rank-one extraction
# ---------------------------------------------------------------------------

def _rank_ratio(X) -> float:
    vals, _ = hermitian_eig(X)
    if vals.size < 2 or vals[0] <= 0:
        return 0.0
    return float(max(vals[1], 0.0) / vals[0])


def _principal_vector(X) -> np.ndarray:
    vals, vecs = hermitian_eig(X)
    return np.sqrt(max(vals[0], 0.0)) * vecs[:, 0]


def _gaussian_candidates(X, rng, count):
    vals, vecs = hermitian_eig(X)
    vals = np.clip(vals, 0.0, None)
    half = vecs * np.sqrt(vals)
    n = X.shape[0]
    Z = (rng.standard_normal((n, count)) + 1j * rng.standard_normal((n, count)))
    return half @ (Z / np.sqrt(2.0))


def _extract_power_min(X, forms, gamma, targets, rng):
    """Smallest-power filter meeting every SNR floor, from the SDP matrix."""
    ratio = _rank_ratio(X)
    candidates = [_principal_vector(X)]
    used_rand = ratio > RANK_ONE_THRESHOLD
    if used_rand:
        candidates += list(_gaussian_candidates(X, rng, N_RANDOMIZATIONS).T)
    best_r, best_power = None, np.inf
    phi_s = forms.phi_s[targets]
    phi_n = forms.phi_n[targets]
    for cand in candidates:
        a = np.einsum("i,kij,j->k", cand.conj(), phi_s, cand).real
        b = np.einsum("i,kij,j->k", cand.conj(), phi_n, cand).real
        margin = a - gamma * b
        if np.any(margin <= 0):
            continue
        scale2 = float(np.max(gamma * forms.sigma_d2 / margin))
        power = scale2 * model.relay_power(cand, forms)
        if power < best_power:
            best_power = power
            best_r = np.sqrt(scale2) * cand
    return best_r, best_power, ratio, used_rand


def _extract_worst_snr(X, forms, P_r_max, rng, warm_filters=()):
    """Best-worst-SNR filter within the relay budget, from the SDP matrix.

    ``warm_filters`` join the candidate pool; scaling any candidate up to
    the full relay budget raises every subcarrier SNR, so a previous
    iterate can never be beaten by extraction noise.
    """
    ratio = _rank_ratio(X)
    candidates = [_principal_vector(X)] + [np.asarray(w, dtype=complex)
                                           for w in warm_filters if w is not None]
    used_rand = ratio > RANK_ONE_THRESHOLD
    if used_rand:
        candidates += list(_gaussian_candidates(X, rng, N_RANDOMIZATIONS).T)
    best_r, best_obj = None, -np.inf
    for cand in candidates:
        power = model.relay_power(cand, forms)
        if power <= 0:
            continue
        r = cand * np.sqrt(P_r_max / power)
        obj = float(np.min(model.all_subcarrier_snr(r, forms)))
        if obj > best_obj:
            best_obj, best_r = obj, r
    return best_r, best_obj, ratio, used_rand


# ---------------------------------------------------------------------------
# relay power minimisation under SNR floors
# ---------------------------------------------------------------------------

def design_power_min(forms: QuadraticForms, gamma, targets=None,
                     tol: float = 1e-8, seed: int = 0) -> DesignResult:
    """min relay power s.t. SNR_k >= gamma_k on the target subcarriers.

    ``gamma`` is a scalar or a vector matching ``targets`` (default: all
    subcarriers).  Infeasible floors yield feasible=False.
    """
    N = forms.phi_s.shape[0]
    targets = np.arange(N) if targets is None else np.asarray(targets, dtype=int)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), targets.shape).copy()
    if np.any(gamma <= 0):
        raise ValueError("SNR floors must be > 0")
    cons = [(forms.phi_s[k] - g * forms.phi_n[k], forms.sigma_d2 * g, ">=")
            for k, g in zip(targets, gamma)]
    prob = SdpProblem(C=forms.phi_p, constraints=cons, n=forms.cfg.L_r)
    sol = solve_sdp(prob, tol=tol)
    if sol.status == "infeasible":
        return DesignResult(r=None, p_s=forms.p_s, objective=np.inf,
                            kind="relay_power", feasible=False,
                            duals=sol.duals, iterations=sol.iterations,
                            extras=dict(sdp_status=sol.status))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(101,)))
    r, power, ratio, used_rand = _extract_power_min(sol.X, forms, gamma,
                                                    targets, rng)
    if r is None:
        return DesignResult(r=None, p_s=forms.p_s, objective=np.inf,
                            kind="relay_power", feasible=False,
                            duals=sol.duals, rank_ratio=ratio,
                            used_randomization=used_rand,
                            warnings=["extraction found no feasible filter"],
                            extras=dict(sdp_status=sol.status,
                                        sdp_objective=sol.objective))
    return DesignResult(r=r, p_s=forms.p_s, objective=power,
                        kind="relay_power", rank_ratio=ratio,
                        duals=sol.duals, used_randomization=used_rand,
                        iterations=sol.iterations,
                        extras=dict(sdp_objective=sol.objective,
                                    sdp_status=sol.status,
                                    kkt_residuals=sol.kkt_residuals,
                                    targets=targets, gamma=gamma))


# ---------------------------------------------------------------------------
# worst-subcarrier SNR: filter step (bisection over feasibility SDPs)
# ---------------------------------------------------------------------------

def snr_feasibility(forms: QuadraticForms, tau: float, P_r_max: float,
                    tol: float = 1e-8):
    """Margin certificate for: exists X PSD with all subcarrier SNRs >= tau
    and relay power <= P_r_max.  Feasible iff the returned margin >= ~0."""
    N = forms.phi_s.shape[0]
    cons = [(forms.phi_s[k] - tau * forms.phi_n[k], forms.sigma_d2 * tau, ">=")
            for k in range(N)]
    cons.append((forms.phi_p, P_r_max, "<="))
    prob = SdpProblem(C=np.zeros_like(forms.phi_p), constraints=cons,
                      n=forms.cfg.L_r)
    return solve_sdp_with_free_margin(prob, margin_rows=range(N), tol=tol)


def _snr_upper_bound(forms: QuadraticForms, P_r_max: float) -> float:
    lam_p = float(np.linalg.eigvalsh(forms.phi_p)[0])
    bound = 0.0
    for k in range(forms.phi_s.shape[0]):
        lam_s = float(np.linalg.eigvalsh(forms.phi_s[k])[-1])
        bound = max(bound, lam_s * P_r_max / (lam_p * forms.sigma_d2))
    return bound


def design_worst_snr(forms: QuadraticForms, P_r_max: float, eps: float,
                     tau_lo: float = 0.0, seed: int = 0,
                     sdp_tol: float = 1e-8, warm_filters=()) -> DesignResult:
    """max-min subcarrier SNR over the relay filter, fixed source powers."""
    if P_r_max <= 0:
        raise ValueError("P_r_max must be > 0")
    state = {}

    def feasible(tau):
        sol = snr_feasibility(forms, tau, P_r_max, tol=sdp_tol)
        ok = sol.margin >= -1e-7 * (1.0 + forms.sigma_d2 * abs(tau))
        if ok:
            state["X"] = sol.X
            state["tau"] = tau
        return ok

    tau_hi = max(_snr_upper_bound(forms, P_r_max), tau_lo + 1.0, 10 * eps)
    for _ in range(60):
        if not feasible(tau_hi):
            break
        tau_hi *= 2.0
    else:
        raise RuntimeError("could not find an infeasible upper bracket")

    tau_star = bisect(feasible, tau_lo, tau_hi, eps)
    if "X" not in state:
        return DesignResult(r=None, p_s=forms.p_s, objective=0.0,
                            kind="worst_snr", feasible=False,
                            warnings=["no feasible point found"])
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(202,)))
    r, achieved, ratio, used_rand = _extract_worst_snr(
        state["X"], forms, P_r_max, rng, warm_filters=warm_filters)
    return DesignResult(r=r, p_s=forms.p_s, objective=achieved,
                        kind="worst_snr", rank_ratio=ratio,
                        used_randomization=used_rand,
                        trace=[tau_star],
                        extras=dict(tau_bisection=tau_star,
                                    relay_power=model.relay_power(r, forms)))


# ---------------------------------------------------------------------------
# worst-subcarrier SNR: source power step (LP)
# ---------------------------------------------------------------------------

@dataclass
class AllocationResult:
    p_s: np.ndarray | None
    tau: float
    feasible: bool
    status: str = "optimal"


def allocate_source_power(r, cfg: SystemConfig, f, tau0: float,
                          rd_stats: RdStats | None = None,
                          unit_forms: QuadraticForms | None = None) -> AllocationResult:
    """max-min subcarrier SNR over the source allocation, fixed filter.

    Solves the LP  max tau  s.t.  sum p <= P_s_max,
    sum p*C1 + C2 <= P_r_max,  p_k*C3_k >= tau,  tau >= tau0,  and returns
    the minimal allocation p_k = tau*/C3_k (the LP optimum is not unique;
    spreading leftover power cannot raise the worst subcarrier).
    """
    N = cfg.N
    C1, C2, C3 = model.lp_coefficients(r, cfg, f, rd_stats=rd_stats,
                                       forms=unit_forms)
    if C2 > cfg.P_r_max * (1 + 1e-12):
        return AllocationResult(None, 0.0, False, "relay budget exceeded by filter")
    dead = C3 <= 0
    if np.any(dead) and tau0 > 0:
        return AllocationResult(None, 0.0, False, "dead subcarrier below floor")
    if np.any(dead):
        return AllocationResult(np.zeros(N), 0.0, True, "optimal")

    c = np.zeros(N + 1)
    c[-1] = 1.0
    rows = [
        (np.concatenate([np.ones(N), [0.0]]), "<=", cfg.P_s_max),
        (np.concatenate([C1, [0.0]]), "<=", cfg.P_r_max - C2),
    ]
    for k in range(N):
        row = np.zeros(N + 1)
        row[k] = C3[k]
        row[-1] = -1.0
        rows.append((row, ">=", 0.0))
    rows.append((np.concatenate([np.zeros(N), [1.0]]), ">=", tau0))
    res = solve_lp(c, rows)
    if res.status != "optimal":
        return AllocationResult(None, 0.0, False, res.status)
    tau = float(res.x[-1])
    p = tau / C3
    return AllocationResult(p, tau, True, "optimal")


# ---------------------------------------------------------------------------
# alternating joint design
# ---------------------------------------------------------------------------

def design_joint_worst_snr(cfg: SystemConfig, f, eps: float | None = None,
                           rd_stats: RdStats | None = None,
                           max_rounds: int = 30, seed: int = 0) -> DesignResult:
    """Alternate filter bisection and source-power LP until the worst SNR
    stops improving by eps.  The achieved-objective trace is non-decreasing
    (up to solver tolerance) because each step keeps the other block's last
    iterate feasible."""
    eps = cfg.eps if eps is None else eps
    p = np.full(cfg.N, cfg.P_s_max / cfg.N)
    r = None
    trace = []
    warnings = []
    tau_floor = 0.0
    unit_forms = model.build_quadratic_forms(cfg, f, np.ones(cfg.N),
                                             rd_stats=rd_stats)
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        forms = model.build_quadratic_forms(cfg, f, p, rd_stats=rd_stats)
        tau_lo = max(0.0, tau_floor * (1 - 1e-6) - 1e-12)
        try:
            step = design_worst_snr(forms, cfg.P_r_max, eps, tau_lo=tau_lo,
                                    seed=seed + rounds,
                                    warm_filters=(r,) if r is not None else ())
        except Exception as exc:          # keep last feasible iterate
            warnings.append(f"filter step failed: {exc}")
            break
        if not step.feasible:
            warnings.append("filter step infeasible")
            break
        r = step.r
        tau0 = step.objective
        trace.append(tau0)
        alloc = allocate_source_power(r, cfg, f, tau0, rd_stats=rd_stats,
                                      unit_forms=unit_forms)
        if not alloc.feasible:
            warnings.append(f"allocation step: {alloc.status}")
            break
        p = alloc.p_s
        trace.append(alloc.tau)
        tau_floor = alloc.tau
        if abs(alloc.tau - tau0) < eps:
            break
    forms = model.build_quadratic_forms(cfg, f, p, rd_stats=rd_stats)
    objective = float(np.min(model.all_subcarrier_snr(r, forms))) if r is not None else 0.0
    return DesignResult(r=r, p_s=p, objective=objective, kind="worst_snr",
                        feasible=r is not None, trace=trace,
                        iterations=rounds, warnings=warnings,
                        extras=dict(relay_power=(model.relay_power(r, forms)
                                                 if r is not None else 0.0)))


# ---------------------------------------------------------------------------
# sum-rate maximisation by projected gradient
# ---------------------------------------------------------------------------

def rate_cost(p, r, q1, phi_n, sigma_d2):
    """Negative sum rate in bits per OFDM symbol."""
    b1 = np.einsum("a,kab,b->k", r.conj(), q1, r).real
    b2 = np.einsum("a,kab,b->k", r.conj(), phi_n, r).real + sigma_d2
    snr = p * b1 / b2
    return -float(np.sum(np.log2(1.0 + snr)))

def rate_gradient(p, r, q1, phi_n, sigma_d2):
    """Gradient of the negative sum rate.

    Returns (grad_p, grad_r) where grad_r matches central finite differences
    over the real and imaginary parts of r (i.e. it is twice the conjugate
    Wirtinger derivative).
    """
    r = np.asarray(r, dtype=complex).ravel()
    p = np.asarray(p, dtype=float).ravel()
    q1r = np.einsum("kab,b->ka", q1, r)
    q2r = np.einsum("kab,b->ka", phi_n, r)
    b1 = np.einsum("a,ka->k", r.conj(), q1r).real
    b2 = np.einsum("a,ka->k", r.conj(), q2r).real + sigma_d2
    snr = p * b1 / b2
    grad_p = -(1.0 / LN2) * (b1 / b2) / (1.0 + snr)
    coeff = -(1.0 / LN2) * p / (b2 ** 2 * (1.0 + snr))
    d_wirtinger = np.einsum("k,ka->a", coeff * b2, q1r) - \
        np.einsum("k,ka->a", coeff * b1, q2r)
    return grad_p, 2.0 * d_wirtinger


def design_rate_pgm(cfg: SystemConfig, f, rd_stats: RdStats | None = None,
                    options: dict | None = None) -> DesignResult:
    """Joint sum-rate maximisation by projected gradient descent.

    Each iteration takes a gradient step and projects successively: the
    allocation onto its budget half-space, then -- with the relay-power
    ellipsoid rebuilt for that new allocation -- the filter onto the
    ellipsoid.  Armijo backtracking keeps the accepted cost trace
    non-increasing; every accepted iterate is feasible.
    """
    opts = dict(max_iter=500, tol=1e-7, armijo=1e-4, shrink=0.5,
                fix_filter=False, p0=None, r0=None)
    opts.update(options or {})
    N, L_r = cfg.N, cfg.L_r

    unit = model.build_quadratic_forms(cfg, f, np.ones(N), rd_stats=rd_stats)
    q1, phi_n, sigma_d2 = unit.q1, unit.phi_n, cfg.sigma_d2

    def phi_p_of(p):
        return model._phi_p_from_pi(cfg, model.relay_input_covariance(cfg, f, p))

    p = np.full(N, cfg.P_s_max / N) if opts["p0"] is None else np.asarray(opts["p0"], float).copy()
    phi_p = phi_p_of(p)
    if opts["r0"] is None:
        r = np.zeros(L_r, dtype=complex)
        r[0] = 1.0
        r *= np.sqrt(0.8 * cfg.P_r_max / model.quad(phi_p, r))
    else:
        r = np.asarray(opts["r0"], dtype=complex).copy()
        r = project_ellipsoid(r, phi_p, cfg.P_r_max)

    cost = rate_cost(p, r, q1, phi_n, sigma_d2)
    trace = [-cost]
    budget_trace = [(float(np.sum(p)), model.quad(phi_p, r))]
    alpha = 1.0
    it = 0
    for it in range(1, opts["max_iter"] + 1):
        g_p, g_r = rate_gradient(p, r, q1, phi_n, sigma_d2)
        accepted = False
        alpha = min(alpha * 2.0, 1e6)
        while alpha > 1e-14:
            p_new = project_power_halfspace(p - alpha * g_p, cfg.P_s_max)
            phi_p_new = phi_p_of(p_new)
            if opts["fix_filter"]:
                r_new = r
            else:
                r_new = project_ellipsoid(r - alpha * g_r, phi_p_new,
                                          cfg.P_r_max)
            step2 = float(np.sum((p_new - p) ** 2) +
                          np.sum(np.abs(r_new - r) ** 2))
            cost_new = rate_cost(p_new, r_new, q1, phi_n, sigma_d2)
            if cost_new <= cost - opts["armijo"] * step2 / max(alpha, 1e-300):
                accepted = True
                break
            alpha *= opts["shrink"]
        if not accepted:
            break
        rel_change = abs(cost_new - cost) / max(1.0, abs(cost))
        p, r, phi_p, cost = p_new, r_new, phi_p_new, cost_new
        trace.append(-cost)
        budget_trace.append((float(np.sum(p)), model.quad(phi_p, r)))
        if rel_change < opts["tol"]:
            break

    return DesignResult(r=r, p_s=p, objective=-cost, kind="sum_rate",
                        trace=trace, iterations=it,
                        extras=dict(relay_power=model.quad(phi_p, r),
                                    source_power=float(np.sum(p)),
                                    rate_per_subcarrier=-cost / N,
                                    budget_trace=budget_trace))
