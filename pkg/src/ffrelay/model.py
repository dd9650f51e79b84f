"""Closed-form link model: selector matrices, covariances and quadratic forms.

Everything downstream (the design algorithms and the link simulator) is
expressed through three families of Hermitian forms in the relay filter
vector r (length L_r):

* ``phi_s[k]``  -- received signal power on subcarrier k is r^H phi_s[k] r,
* ``phi_n[k]``  -- received (relay-injected) noise power is r^H phi_n[k] r,
  so SNR_k = r^H phi_s[k] r / (r^H phi_n[k] r + sigma_d2),
* ``phi_p``     -- relay transmit power is r^H phi_p r.

Index conventions (load-bearing, do not change casually):

* Windows are stacked newest-first; the banded matrices F, G, R from
  :func:`ffrelay.numkit.toeplitz_filter` implement the source-relay channel,
  relay-destination channel and relay filter in that ordering.
* Subcarrier k modulates the window vector xi_k with entries
  ``xi_k(a) = w^(-a k)/sqrt(N)`` (the right-eigenvector family of circulant
  matrices) and is demodulated by ``xi_k^H``.  Under this pairing the
  end-to-end gain of subcarrier k is exactly the k-th circulant eigenvalue
  of the truncated cascade (``signal_coefficients``), and column k of the
  prefix-extended IDFT matrix from :func:`ffrelay.numkit.dft_rows` carries
  subcarrier k with natural ordering.  That ordering is pinned by the exact
  identity between the quadratic relay-power form and its per-subcarrier
  linear expansion (see ``lp_coefficients``), which is a unit test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz as _toeplitz

from .numkit import dft_rows, hermitize, toeplitz_filter


# ---------------------------------------------------------------------------
# configuration / channel containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemConfig:
    """OFDM and channel dimensions plus noise/power/tolerance scalars.

    All powers are linear.  ``L_cp`` must cover the total channel-plus-filter
    memory (L_f + L_r + L_g - 3) so the end-to-end chain acts circularly on
    each symbol window, and cannot exceed N (a prefix is a copy of the
    window tail).
    """

    N: int
    L_f: int
    L_g: int
    L_r: int
    L_cp: int
    sigma_r2: float = 1.0
    sigma_d2: float = 1.0
    sigma_g2: float = 1.0
    P_s_max: float = 100.0
    P_r_max: float = 100.0
    eps: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        for name in ("L_f", "L_g", "L_r"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        min_cp = self.L_f + self.L_g + self.L_r - 3
        if self.L_cp < min_cp:
            raise ValueError(
                f"L_cp={self.L_cp} too short: needs >= L_f+L_g+L_r-3 = {min_cp}")
        if self.L_cp > self.N:
            raise ValueError("L_cp must not exceed N")
        for name in ("sigma_r2", "sigma_d2", "sigma_g2", "P_s_max", "P_r_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")

    @property
    def rd_len(self) -> int:
        """Rows/cols bookkeeping: length of the relay output window."""
        return self.N + self.L_g - 1

    @property
    def ext_len(self) -> int:
        """Length of the prefix-extended source window feeding the chain."""
        return self.N + self.L_g + self.L_r + self.L_f - 3


def min_cyclic_prefix(L_f: int, L_g: int, L_r: int) -> int:
    return L_f + L_g + L_r - 3


@dataclass(frozen=True)
class RdStats:
    """Second-order description of the relay-destination channel.

    ``profile`` holds the per-tap variances (length L_g); the i.i.d. case is
    a constant profile.  Only these statistics -- never a tap realisation --
    are available to the designer.
    """

    profile: np.ndarray

    def __post_init__(self):
        prof = np.asarray(self.profile, dtype=float).ravel()
        if prof.size < 1 or np.any(prof < 0) or prof.sum() <= 0:
            raise ValueError("tap-variance profile must be nonnegative, nonzero")
        object.__setattr__(self, "profile", prof)

    @property
    def L_g(self) -> int:
        return int(self.profile.size)

    @staticmethod
    def iid(sigma_g2: float, L_g: int) -> "RdStats":
        return RdStats(np.full(L_g, float(sigma_g2)))


@dataclass
class ChannelRealization:
    """One channel draw: SR state f (known to the designer), RD state g.

    Design code must consume ``f`` and ``rd_stats`` only; ``g`` exists for
    the simulator/oracle side.
    """

    f: np.ndarray
    g: np.ndarray
    rd_stats: RdStats

    def designer_view(self):
        return np.asarray(self.f, dtype=complex), self.rd_stats


def draw_channel(cfg: SystemConfig, rng, rd_stats: RdStats | None = None) -> ChannelRealization:
    """i.i.d. complex-Gaussian taps: f_l ~ CN(0,1), g_l ~ CN(0, profile_l)."""
    stats = rd_stats if rd_stats is not None else RdStats.iid(cfg.sigma_g2, cfg.L_g)
    f = (rng.standard_normal(cfg.L_f) + 1j * rng.standard_normal(cfg.L_f)) / np.sqrt(2)
    scale = np.sqrt(stats.profile / 2.0)
    g = scale * (rng.standard_normal(stats.L_g) + 1j * rng.standard_normal(stats.L_g))
    return ChannelRealization(f=f, g=g, rd_stats=stats)


# ---------------------------------------------------------------------------
# structured-matrix plumbing
# ---------------------------------------------------------------------------

_dft_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def cached_dft(N: int, ext: int):
    key = (N, ext)
    if key not in _dft_cache:
        _dft_cache[key] = dft_rows(N, ext)
    return _dft_cache[key]


def build_selectors(cfg: SystemConfig):
    """Explicit 0/1 selectors E1, E2 and the truncation matrix T.

    With R = toeplitz_filter(r, N+L_g-1):
      vec(R^T) = E1^H r   and   vec(R) = E2^H r,
    and T = [I_N; 0] truncates the length-``ext`` first row of the cascade
    down to the N entries that generate the circular channel matrix.
    """
    M = cfg.rd_len                # rows of R
    Q = M + cfg.L_r - 1           # cols of R
    L_r = cfg.L_r
    E1 = np.zeros((L_r, M * Q))
    E2 = np.zeros((L_r, M * Q))
    for t in range(L_r):
        for i in range(M):            # vec(R^T) block i = row i of R
            c = i + t
            E1[t, i * Q + c] = 1.0
        for c in range(Q):            # vec(R) block c = column c of R
            i = c - t
            if 0 <= i < M:
                E2[t, c * M + i] = 1.0
    # first row of G R F has length N + L_f + L_g + L_r - 3; T keeps its
    # first N entries
    T = np.zeros((cfg.N + cfg.L_f + cfg.L_g + cfg.L_r - 3, cfg.N))
    T[:cfg.N, :] = np.eye(cfg.N)
    return E1, E2, T


def source_covariance(p_s, cfg: SystemConfig):
    """Covariance of the source window and of its prefix-extended version.

    ``p_s`` is the per-subcarrier power vector in subcarrier order
    k = 0..N-1.  Both outputs are Hermitian PSD; the N x N window covariance
    is the top-left block of the extended one.
    """
    p = np.asarray(p_s, dtype=float).ravel()
    if p.size != cfg.N:
        raise ValueError("p_s must have length N")
    if np.any(p < 0):
        raise ValueError("source powers must be nonnegative")
    W, W_ext = cached_dft(cfg.N, cfg.ext_len - cfg.N)
    # subcarrier k modulates xi_k = conj(row k of W); column k of W_ext is
    # the prefix-extended copy of xi_k up to a unit phase
    cov_x = (W.conj().T * p) @ W.T
    cov_ext = (W_ext * p) @ W_ext.conj().T
    return hermitize(cov_x), hermitize(cov_ext)


# ---------------------------------------------------------------------------
# quadratic forms
# ---------------------------------------------------------------------------

@dataclass
class QuadraticForms:
    """All Hermitian forms for one (config, channel, power) tuple.

    ``q1[k]`` is the signal form with the subcarrier power factored out
    (phi_s[k] = p_s[k] * q1[k]); it is what power-allocation code needs.
    ``b_k`` columns are the rank-one factors of the inner signal kernels and
    ``m_k`` the per-subcarrier noise kernels, both retained for tests.
    """

    cfg: SystemConfig
    p_s: np.ndarray
    phi_s: np.ndarray          # (N, L_r, L_r)
    phi_n: np.ndarray          # (N, L_r, L_r)
    phi_p: np.ndarray          # (L_r, L_r)
    q1: np.ndarray             # (N, L_r, L_r), phi_s[k] / p_s[k]
    sigma_d2: float
    b_k: np.ndarray = field(repr=False, default=None)   # (rd_len+L_r-1, N)
    m_k: np.ndarray = field(repr=False, default=None)   # (N, rd_len, rd_len)


def _signal_kernel_factors(cfg: SystemConfig, f):
    """Rank-one factors of the signal kernels K_k = b_k b_k^H.

    b_k = conj(F T xi_k): the SR-filtered, zero-extended modulation vector,
    conjugated so that r^H E1 (I_tap (x) K_k) E1^H r reproduces the expected
    received signal power.
    """
    W, _ = cached_dft(cfg.N, cfg.ext_len - cfg.N)
    F = toeplitz_filter(f, cfg.rd_len + cfg.L_r - 1)
    pad = np.zeros((F.shape[1], cfg.N), dtype=complex)
    pad[:cfg.N, :] = W.conj().T                 # column k = xi_k, zero-extended
    return (F @ pad).conj()


def _noise_kernels(cfg: SystemConfig, profile):
    """m_k = E{G^H xi_k xi_k^H G} = sum_l profile[l] * shift_l(xi_k) outer."""
    N, M, L_g = cfg.N, cfg.rd_len, len(profile)
    W, _ = cached_dft(N, cfg.ext_len - N)
    shifted = np.zeros((L_g, M, N), dtype=complex)
    for l in range(L_g):
        shifted[l, l:l + N, :] = W.conj().T     # column k = xi_k
    m = np.zeros((N, M, M), dtype=complex)
    for l in range(L_g):
        if profile[l] == 0:
            continue
        m += profile[l] * np.einsum("ck,dk->kcd", shifted[l], shifted[l].conj())
    return m


def _noise_kernels_fixed(cfg: SystemConfig, g):
    """Deterministic-g variant: m_k = (G^H xi_k)(G^H xi_k)^H."""
    N, M = cfg.N, cfg.rd_len
    W, _ = cached_dft(N, cfg.ext_len - N)
    G = toeplitz_filter(g, N)
    V = G.conj().T @ W.conj().T                 # column k = G^H xi_k
    return np.einsum("ck,dk->kcd", V, V.conj())


def _phi_n_from_kernels(cfg: SystemConfig, m_k):
    """Collapse each rd-window kernel into its L_r x L_r filter form.

    The selector identity reduces E2 (I (x) m) E2^H to the Toeplitz matrix of
    diagonal sums of m.
    """
    L_r = cfg.L_r
    N = m_k.shape[0]
    phi = np.zeros((N, L_r, L_r), dtype=complex)
    for k in range(N):
        diag_sums = np.array([np.trace(m_k[k], offset=d) for d in range(L_r)])
        phi[k] = cfg.sigma_r2 * _toeplitz(diag_sums, diag_sums.conj())
    return phi


def _phi_p_from_pi(cfg: SystemConfig, Pi):
    """phi_p = sum of the sliding L_r x L_r diagonal blocks of Pi*."""
    L_r, M = cfg.L_r, cfg.rd_len
    Pc = Pi.conj()
    phi = np.zeros((L_r, L_r), dtype=complex)
    for c in range(M):
        phi += Pc[c:c + L_r, c:c + L_r]
    return hermitize(phi)


def relay_input_covariance(cfg: SystemConfig, f, p_s):
    """Pi = F cov_ext F^H + sigma_r2 I: covariance of the relay input window."""
    _, cov_ext = source_covariance(p_s, cfg)
    F = toeplitz_filter(f, cfg.rd_len + cfg.L_r - 1)
    Pi = F @ cov_ext @ F.conj().T
    Pi[np.diag_indices_from(Pi)] += cfg.sigma_r2
    return hermitize(Pi)


def build_quadratic_forms(cfg: SystemConfig, f, p_s,
                          rd_stats: RdStats | None = None,
                          g_fixed=None) -> QuadraticForms:
    """Assemble phi_s, phi_n, phi_p for a channel description.

    ``rd_stats`` selects the stochastic RD model (default: i.i.d. taps with
    variance cfg.sigma_g2).  ``g_fixed`` instead conditions every form on a
    known RD realisation, which is what the simulator-side cross-checks and
    mismatch evaluations need.
    """
    f = np.asarray(f, dtype=complex).ravel()
    if f.size != cfg.L_f:
        raise ValueError("f must have length L_f")
    p = np.asarray(p_s, dtype=float).ravel()
    if p.size != cfg.N or np.any(p < 0):
        raise ValueError("p_s must be a nonnegative length-N vector")

    N, L_r = cfg.N, cfg.L_r
    B = _signal_kernel_factors(cfg, f)

    if g_fixed is not None:
        g = np.asarray(g_fixed, dtype=complex).ravel()
        if g.size != cfg.L_g:
            raise ValueError("g must have length L_g")
        # signal form conditioned on g is rank one: p_k |z_k^T r|^2 where
        # z_k[t] = sqrt(N) w_k^H T^T F^T shift_t(g)
        hfg = np.convolve(f, g)
        windows = np.zeros((L_r, N), dtype=complex)
        for t in range(L_r):
            hi = min(N, t + hfg.size)
            if t < hi:
                windows[t, t:hi] = hfg[:hi - t]
        z = np.fft.fft(windows, n=N, axis=1)       # z[t, k]
        q1 = np.einsum("tk,uk->ktu", z.conj(), z)
        m_k = _noise_kernels_fixed(cfg, g)
    else:
        stats = rd_stats if rd_stats is not None else RdStats.iid(cfg.sigma_g2, cfg.L_g)
        if stats.L_g != cfg.L_g:
            raise ValueError("rd_stats profile length must equal L_g")
        q1 = np.zeros((N, L_r, L_r), dtype=complex)
        for l in range(stats.L_g):
            if stats.profile[l] == 0:
                continue
            Bl = B[l:l + L_r, :]
            q1 += N * stats.profile[l] * np.einsum("tk,uk->ktu", Bl, Bl.conj())
        m_k = _noise_kernels(cfg, stats.profile)

    phi_s = q1 * p[:, None, None]
    phi_n = _phi_n_from_kernels(cfg, m_k)
    phi_p = _phi_p_from_pi(cfg, relay_input_covariance(cfg, f, p))
    return QuadraticForms(cfg=cfg, p_s=p, phi_s=phi_s, phi_n=phi_n,
                          phi_p=phi_p, q1=q1, sigma_d2=cfg.sigma_d2,
                          b_k=B, m_k=m_k)


def quad(A, r):
    """Real value of r^H A r (guards the tiny imaginary residue)."""
    return float(np.real(np.conj(r) @ (A @ r)))


def subcarrier_snr(r, forms: QuadraticForms, k: int) -> float:
    r = np.asarray(r, dtype=complex).ravel()
    return quad(forms.phi_s[k], r) / (quad(forms.phi_n[k], r) + forms.sigma_d2)


def all_subcarrier_snr(r, forms: QuadraticForms) -> np.ndarray:
    r = np.asarray(r, dtype=complex).ravel()
    sig = np.einsum("a,kab,b->k", r.conj(), forms.phi_s, r).real
    noi = np.einsum("a,kab,b->k", r.conj(), forms.phi_n, r).real
    return sig / (noi + forms.sigma_d2)


def relay_power(r, forms: QuadraticForms) -> float:
    return quad(forms.phi_p, np.asarray(r, dtype=complex).ravel())


def signal_coefficients(cfg: SystemConfig, f, r, g) -> np.ndarray:
    """Per-subcarrier complex gain d_k of the end-to-end filtered chain.

    d_k = sqrt(N) w_k^H T^T F^T R^T g_tilde, equal to the DFT of the first N
    taps of the cascade f * r * g.
    """
    h = np.convolve(np.convolve(np.asarray(f, complex).ravel(),
                                np.asarray(r, complex).ravel()),
                    np.asarray(g, complex).ravel())
    return np.fft.fft(h[:cfg.N], n=cfg.N)


def lp_coefficients(r, cfg: SystemConfig, f, rd_stats: RdStats | None = None,
                    forms: QuadraticForms | None = None):
    """Linear-programming view of the link for a fixed relay filter.

    Returns (C1, C2, C3) such that for every power vector p:
      relay power  = sum_k p[k] * C1[k] + C2      (identical to r^H phi_p r)
      SNR_k        = p[k] * C3[k].
    The first identity pins the subcarrier-to-extended-column mapping and is
    enforced by a unit test at 1e-10 relative accuracy.
    """
    r = np.asarray(r, dtype=complex).ravel()
    if r.size != cfg.L_r:
        raise ValueError("r must have length L_r")
    f = np.asarray(f, dtype=complex).ravel()
    _, W_ext = cached_dft(cfg.N, cfg.ext_len - cfg.N)
    F = toeplitz_filter(f, cfg.rd_len + cfg.L_r - 1)
    R = toeplitz_filter(r, cfg.rd_len)
    RFW = R @ (F @ W_ext)
    C1 = np.sum(np.abs(RFW) ** 2, axis=0)
    C2 = cfg.sigma_r2 * float(np.sum(np.abs(R) ** 2))
    if forms is None:
        forms = build_quadratic_forms(cfg, f, np.ones(cfg.N), rd_stats=rd_stats)
    sig = np.einsum("a,kab,b->k", r.conj(), forms.q1, r).real
    noi = np.einsum("a,kab,b->k", r.conj(), forms.phi_n, r).real
    C3 = sig / (noi + forms.sigma_d2)
    return C1, C2, C3
