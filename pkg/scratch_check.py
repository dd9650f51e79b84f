# scratch validation of conventions (not shipped)
import numpy as np
from ffrelay import model, numkit

rng = np.random.default_rng(7)

cfg = model.SystemConfig(N=8, L_f=3, L_g=2, L_r=3, L_cp=5)
f = rng.standard_normal(cfg.L_f) + 1j * rng.standard_normal(cfg.L_f)
g = rng.standard_normal(cfg.L_g) + 1j * rng.standard_normal(cfg.L_g)
r = rng.standard_normal(cfg.L_r) + 1j * rng.standard_normal(cfg.L_r)
p = rng.uniform(0.2, 2.0, cfg.N)

# --- 1. selectors: vec(R^T) = E1^H r, vec(R) = E2^H r
E1, E2, T = model.build_selectors(cfg)
R = numkit.toeplitz_filter(r, cfg.rd_len)
vecRT = R.T.flatten(order="F")   # stack columns of R^T
vecR = R.flatten(order="F")
print("E1 identity:", np.abs(E1.conj().T @ r - vecRT).max())
print("E2 identity:", np.abs(E2.conj().T @ r - vecR).max())

# --- 2. explicit Kronecker route vs efficient forms
W, W_ext = model.cached_dft(cfg.N, cfg.ext_len - cfg.N)
F = numkit.toeplitz_filter(f, cfg.rd_len + cfg.L_r - 1)
G = numkit.toeplitz_filter(g, cfg.N)
forms = model.build_quadratic_forms(cfg, f, p)

M = cfg.rd_len
Itil = np.zeros((M, M)); Itil[:cfg.L_g, :cfg.L_g] = np.eye(cfg.L_g)
errS = errN = 0.0
for k in range(cfg.N):
    w_k = W[k, :].T
    K_k = np.outer(forms.b_k[:, k], forms.b_k[:, k].conj())
    Ktil = np.kron(Itil, K_k)
    phiS_exp = cfg.N * p[k] * cfg.sigma_g2 * E1 @ Ktil @ E1.conj().T
    errS = max(errS, np.abs(phiS_exp - forms.phi_s[k]).max())
    Mtil = np.kron(np.eye(M + cfg.L_r - 1), forms.m_k[k])
    phiN_exp = cfg.sigma_r2 * E2 @ Mtil @ E2.conj().T
    errN = max(errN, np.abs(phiN_exp - forms.phi_n[k]).max())
print("phi_s explicit-vs-efficient:", errS)
print("phi_n explicit-vs-efficient:", errN)

Pi = model.relay_input_covariance(cfg, f, p)
phiP_exp = E1 @ np.kron(np.eye(M), Pi.conj()) @ E1.conj().T
print("phi_p explicit-vs-efficient:", np.abs(phiP_exp - forms.phi_p).max())

# --- 3. relay power: quadratic form vs direct trace vs LP expansion
P_quad = model.relay_power(r, forms)
cov_x, cov_ext = model.source_covariance(p, cfg)
P_trace = np.real(np.trace(R @ (F @ cov_ext @ F.conj().T + cfg.sigma_r2 * np.eye(F.shape[0])) @ R.conj().T))
C1, C2, C3 = model.lp_coefficients(r, cfg, f)
P_lin = float(p @ C1 + C2)
print("relay power quad vs trace:", abs(P_quad - P_trace) / P_trace)
print("relay power quad vs linear:", abs(P_quad - P_lin) / P_quad)

# --- 4. Monte Carlo: simulate the time chain, compare with closed forms
def chain_demod(cfg, f, r, g, s, noise_r=None, noise_d=None):
    # s: (N,) ascending subcarrier index; returns demodulated (N,)
    W, _ = model.cached_dft(cfg.N, cfg.ext_len - cfg.N)
    x_desc = W @ s
    x_time = x_desc[::-1]
    xt = np.concatenate([x_time[cfg.N - cfg.L_cp:], x_time])  # n = -L_cp..N-1
    y_r = np.convolve(xt, f)[:xt.size]
    if noise_r is not None:
        y_r = y_r + noise_r
    y_t = np.convolve(y_r, r)[:xt.size]
    y_d = np.convolve(y_t, g)[:xt.size]
    if noise_d is not None:
        y_d = y_d + noise_d
    win = y_d[cfg.L_cp:cfg.L_cp + cfg.N]
    y_desc = win[::-1]
    return W.conj().T @ y_desc

# noiseless diagonalization: output == d_k s_k
s = (rng.standard_normal(cfg.N) + 1j * rng.standard_normal(cfg.N)) / np.sqrt(2)
out = chain_demod(cfg, f, r, g, s)
d = model.signal_coefficients(cfg, f, r, g)
print("diagonalization error:", np.abs(out - d * s).max())

# signal power MC vs fixed-g closed form
forms_g = model.build_quadratic_forms(cfg, f, p, g_fixed=g)
sig_pred = np.einsum("a,kab,b->k", r.conj(), forms_g.phi_s, r).real
sig_mc = np.abs(d) ** 2 * p
print("fixed-g signal form vs |d|^2 p:", np.abs(sig_pred - sig_mc).max() / sig_mc.max())

# noise power MC vs fixed-g closed form (empirical over noise draws)
trials = 20000
acc = np.zeros(cfg.N)
nr_all = (rng.standard_normal((trials, cfg.N + cfg.L_cp)) + 1j * rng.standard_normal((trials, cfg.N + cfg.L_cp))) * np.sqrt(cfg.sigma_r2 / 2)
nd_all = (rng.standard_normal((trials, cfg.N + cfg.L_cp)) + 1j * rng.standard_normal((trials, cfg.N + cfg.L_cp))) * np.sqrt(cfg.sigma_d2 / 2)
from scipy.signal import lfilter
yr = lfilter(f, [1.0], nr_all, axis=1)
yt = lfilter(r, [1.0], yr, axis=1)
# careful: noise enters at the relay input; the chain for noise is r then g
yt_n = lfilter(r, [1.0], nr_all, axis=1)
yd_n = lfilter(g, [1.0], yt_n, axis=1) + nd_all
win = yd_n[:, cfg.L_cp:cfg.L_cp + cfg.N][:, ::-1]
Wm, _ = model.cached_dft(cfg.N, cfg.ext_len - cfg.N)
dem = win @ Wm.conj()           # (trials, N): entry k = w_k^H win
noise_mc = np.mean(np.abs(dem) ** 2, axis=0)
noise_pred = np.einsum("a,kab,b->k", r.conj(), forms_g.phi_n, r).real + cfg.sigma_d2
print("fixed-g noise MC vs form:", np.abs(noise_mc - noise_pred).max() / noise_pred.max())

# stochastic-g forms vs average of fixed-g forms over many g draws
ng = 20000
prof = np.full(cfg.L_g, cfg.sigma_g2)
gs = (rng.standard_normal((ng, cfg.L_g)) + 1j * rng.standard_normal((ng, cfg.L_g))) * np.sqrt(prof / 2)
accS = np.zeros((cfg.N, cfg.L_r, cfg.L_r), dtype=complex)
accN = np.zeros_like(accS)
for i in range(200):
    fg = model.build_quadratic_forms(cfg, f, p, g_fixed=gs[i])
    accS += fg.phi_s; accN += fg.phi_n
accS /= 200; accN /= 200
print("E_g phi_s(fixed) vs stochastic:", np.abs(accS - forms.phi_s).max() / np.abs(forms.phi_s).max())
print("E_g phi_n(fixed) vs stochastic:", np.abs(accN - forms.phi_n).max() / np.abs(forms.phi_n).max())

# relay power measured from the chain
trials = 5000
S = (rng.standard_normal((cfg.N, trials)) + 1j * rng.standard_normal((cfg.N, trials))) * np.sqrt(p[:, None] / 2)
Xd = Wm @ S                     # descending windows per column
Xt = Xd[::-1, :]
XT = np.vstack([Xt[cfg.N - cfg.L_cp:, :], Xt])
yr = lfilter(f, [1.0], XT, axis=0) + (rng.standard_normal(XT.shape) + 1j * rng.standard_normal(XT.shape)) * np.sqrt(cfg.sigma_r2 / 2)
yt = lfilter(r, [1.0], yr, axis=0)
# y_t window: n = -(L_g-1) .. N-1  -> array rows L_cp-(L_g-1) .. L_cp+N-1
wstart = cfg.L_cp - (cfg.L_g - 1)
yt_win = yt[wstart:cfg.L_cp + cfg.N, :]
P_emp = np.mean(np.sum(np.abs(yt_win) ** 2, axis=0))
print("relay power MC vs form:", abs(P_emp - P_quad) / P_quad)
