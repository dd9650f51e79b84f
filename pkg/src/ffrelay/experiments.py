"""Experiment orchestration: config parsing, sweeps, trial dispatch.

A run is described by a flat INI config (see ``example_config``) plus CLI
overrides.  Every (sweep point, trial) pair becomes one output row; each
sweep point also gets an aggregate row with the mean over feasible trials
and the feasibility count.  Rows carry the seed and a config hash, so any
row can be reproduced in isolation.

All dB values in configs are powers relative to unit noise variance and are
converted to linear scale at parse time.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import designs, model, simkit
from .model import RdStats, SystemConfig

MODES = ("power-min", "worst-snr", "worst-snr-joint", "rate-max",
         "validate", "mismatch")

COLUMNS = [
    "mode", "sweep", "sweep_value", "trial", "seed", "config_hash",
    "feasible", "objective", "worst_snr", "sum_rate_bits", "relay_power",
    "source_power", "rank_ratio", "randomized", "iterations", "ber",
    "emp_worst_snr", "emp_relay_power", "snr_relerr_max", "power_relerr",
    "objective_matched", "degradation", "wall_time_s",
]


class ConfigError(ValueError):
    pass


def db_to_linear(db: float) -> float:
    return float(10.0 ** (db / 10.0))


@dataclass
class ExperimentSpec:
    mode: str
    cfg: SystemConfig
    trials: int = 1
    sweep_name: str | None = None
    sweep_values: list = field(default_factory=list)
    seed: int = 0
    options: dict = field(default_factory=dict)
    timing: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; pick one of {MODES}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.sweep_values and not self.sweep_name:
            raise ConfigError("sweep values without a sweep axis")

    def config_hash(self) -> str:
        blob = io.StringIO()
        blob.write(f"mode={self.mode};trials={self.trials};seed={self.seed};")
        blob.write(f"sweep={self.sweep_name}={self.sweep_values};")
        for k in sorted(vars(self.cfg)):
            blob.write(f"{k}={getattr(self.cfg, k)};")
        for k in sorted(self.options):
            blob.write(f"{k}={self.options[k]};")
        return hashlib.sha256(blob.getvalue().encode()).hexdigest()[:12]


_SWEEPABLE = {
    "l_r": ("L_r", int),
    "l_f": ("L_f", int),
    "l_g": ("L_g", int),
    "n": ("N", int),
    "p_r_max_db": ("P_r_max", db_to_linear),
    "p_s_max_db": ("P_s_max", db_to_linear),
    "gamma_db": (None, db_to_linear),    # handled through options
    "rho": (None, float),
}


def apply_sweep(cfg: SystemConfig, options: dict, name: str, value):
    """Return (cfg, options) with one sweep axis applied."""
    if name not in _SWEEPABLE:
        raise ConfigError(f"cannot sweep over {name!r}")
    attr, conv = _SWEEPABLE[name]
    value = conv(value)
    if attr is None:
        options = dict(options, **{name: value})
        return cfg, options
    kwargs = {attr: value}
    if attr in ("L_r", "L_f", "L_g", "N"):
        dims = dict(N=cfg.N, L_f=cfg.L_f, L_g=cfg.L_g, L_r=cfg.L_r)
        dims[attr] = value
        kwargs["L_cp"] = min(max(cfg.L_cp, model.min_cyclic_prefix(
            dims["L_f"], dims["L_g"], dims["L_r"])), dims["N"])
    return replace(cfg, **kwargs), options


# ---------------------------------------------------------------------------
# config file parsing
# ---------------------------------------------------------------------------

def example_config() -> str:
    return """\
# ffrelay experiment configuration (dB powers are relative to unit noise)
[system]
n = 32
l_f = 3
l_g = 3
l_r = 4
l_cp = auto            ; auto = minimal prefix covering the chain memory
sigma_r2 = 1.0
sigma_d2 = 1.0
sigma_g2 = 1.0
p_s_max_db = 20
p_r_max_db = 20
eps = 1e-3
seed = 1

[experiment]
mode = worst-snr
trials = 10
sweep = l_r: 1, 2, 4

[power-min]
gamma_db = 5
targets = 0:28         ; subcarriers that must meet the SNR floor

[validate]
frames = 2000
g_draws = 50
; f and g may pin a fixed channel (comma-separated re/im pairs)
; f = -0.0477+0.7546j, 0.1938+0.2019j, -0.4832-0.2111j
; g = -0.8370-0.2463j, -0.3438+0.1734j, -0.5136+0.4147j

[mismatch]
algorithm = joint_worst_snr
rho = 0.0, 0.1
true_l_g = 3
true_profile = uniform
"""


def _parse_complex_list(text: str) -> np.ndarray:
    return np.array([complex(tok.strip().replace(" ", ""))
                     for tok in text.split(",")], dtype=complex)


def _parse_values(text: str):
    return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]


def _parse_targets(text: str, N: int):
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi)))
    return [int(tok) for tok in text.split(",") if tok.strip()]


def parse_config(text: str, overrides: dict | None = None) -> ExperimentSpec:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    overrides = overrides or {}

    try:
        sys_s = parser["system"]
    except KeyError:
        raise ConfigError("missing [system] section")
    N = sys_s.getint("n", 32)
    L_f = sys_s.getint("l_f", 3)
    L_g = sys_s.getint("l_g", 3)
    L_r = sys_s.getint("l_r", 4)
    cp_raw = sys_s.get("l_cp", "auto").strip()
    L_cp = (model.min_cyclic_prefix(L_f, L_g, L_r) if cp_raw == "auto"
            else int(cp_raw))
    try:
        cfg = SystemConfig(
            N=N, L_f=L_f, L_g=L_g, L_r=L_r, L_cp=L_cp,
            sigma_r2=sys_s.getfloat("sigma_r2", 1.0),
            sigma_d2=sys_s.getfloat("sigma_d2", 1.0),
            sigma_g2=sys_s.getfloat("sigma_g2", 1.0),
            P_s_max=db_to_linear(sys_s.getfloat("p_s_max_db", 20.0)),
            P_r_max=db_to_linear(sys_s.getfloat("p_r_max_db", 20.0)),
            eps=sys_s.getfloat("eps", 1e-3),
            seed=sys_s.getint("seed", 0),
        )
    except ValueError as exc:
        raise ConfigError(f"[system] {exc}") from exc

    exp = parser["experiment"] if parser.has_section("experiment") else {}
    mode = overrides.get("mode") or exp.get("mode", "worst-snr")
    trials = int(overrides.get("trials") or exp.get("trials", 1))
    seed = int(overrides["seed"]) if overrides.get("seed") is not None \
        else (cfg.seed if "seed" not in exp else int(exp.get("seed")))

    sweep_name, sweep_values = None, []
    sweep_raw = exp.get("sweep", "").strip() if exp else ""
    if sweep_raw:
        if ":" not in sweep_raw:
            raise ConfigError("sweep must look like 'axis: v1, v2, ...'")
        sweep_name, vals = sweep_raw.split(":", 1)
        sweep_name = sweep_name.strip().lower()
        sweep_values = _parse_values(vals)

    options: dict = {}
    if parser.has_section("power-min"):
        pm = parser["power-min"]
        options["gamma_db"] = pm.getfloat("gamma_db", 5.0)
        options["targets"] = _parse_targets(pm.get("targets", f"0:{max(N - 4, 1)}"), N)
    else:
        options["gamma_db"] = 5.0
        options["targets"] = list(range(max(N - 4, 1)))
    if parser.has_section("validate"):
        va = parser["validate"]
        options["frames"] = va.getint("frames", 2000)
        options["g_draws"] = va.getint("g_draws", 50)
        if va.get("f", None):
            options["fixed_f"] = _parse_complex_list(va.get("f"))
        if va.get("g", None):
            options["fixed_g"] = _parse_complex_list(va.get("g"))
    else:
        options["frames"] = 2000
        options["g_draws"] = 50
    if parser.has_section("mismatch"):
        mm = parser["mismatch"]
        options["algorithm"] = mm.get("algorithm", "joint_worst_snr").strip()
        options["rho"] = _parse_values(mm.get("rho", "0.0, 0.1"))
        options["true_l_g"] = mm.getint("true_l_g", L_g)
        options["true_profile"] = mm.get("true_profile", "uniform").strip()
        options["mismatch_trials"] = mm.getint("trials", 0) or None
    else:
        options["algorithm"] = "joint_worst_snr"
        options["rho"] = [0.0, 0.1]
        options["true_l_g"] = L_g
        options["true_profile"] = "uniform"
        options["mismatch_trials"] = None

    try:
        return ExperimentSpec(mode=mode, cfg=cfg, trials=trials,
                              sweep_name=sweep_name, sweep_values=sweep_values,
                              seed=seed, options=options,
                              timing=bool(overrides.get("timing", False)))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# single-trial runners
# ---------------------------------------------------------------------------

def _blank_row(spec: ExperimentSpec, sweep_value, trial) -> dict:
    return {c: "" for c in COLUMNS} | {
        "mode": spec.mode,
        "sweep": spec.sweep_name or "",
        "sweep_value": sweep_value if sweep_value is not None else "",
        "trial": trial,
        "seed": spec.seed,
        "config_hash": spec.config_hash(),
    }


def _true_rd_stats(cfg: SystemConfig, options) -> RdStats:
    L = int(options.get("true_l_g", cfg.L_g))
    kind = options.get("true_profile", "uniform")
    if kind == "uniform":
        prof = np.full(L, cfg.sigma_g2)
    elif kind.startswith("exp"):
        decay = float(kind.split(":", 1)[1]) if ":" in kind else 0.5
        prof = cfg.sigma_g2 * decay ** np.arange(L)
        prof *= L * cfg.sigma_g2 / prof.sum()     # keep total tap power
    else:
        raise ConfigError(f"unknown RD profile {kind!r}")
    return RdStats(prof)


def run_trial(spec: ExperimentSpec, sweep_idx: int, trial: int) -> dict:
    """One (sweep point, trial) cell; deterministic given (spec, indices)."""
    cfg, options = spec.cfg, spec.options
    sweep_value = None
    if spec.sweep_name:
        sweep_value = spec.sweep_values[sweep_idx]
        cfg, options = apply_sweep(cfg, options, spec.sweep_name, sweep_value)
    row = _blank_row(spec, sweep_value, trial)
    # channel stream keyed by trial only: sweep points share channels, so
    # per-instance comparisons (e.g. longer filters nest shorter ones) pair up
    rng = simkit.stream_rng(spec.seed, 11, trial)
    fixed_f = options.get("fixed_f")
    fixed_g = options.get("fixed_g")
    ch = model.draw_channel(cfg, rng)
    if fixed_f is not None:
        ch.f = np.asarray(fixed_f, complex)
    if fixed_g is not None:
        ch.g = np.asarray(fixed_g, complex)
    t0 = time.perf_counter()

    if spec.mode == "power-min":
        gamma = db_to_linear(options["gamma_db"])
        targets = [k for k in options["targets"] if k < cfg.N]
        p = np.full(cfg.N, cfg.P_s_max / cfg.N)
        forms = model.build_quadratic_forms(cfg, ch.f, p)
        res = designs.design_power_min(forms, gamma, targets=targets,
                                       seed=spec.seed + trial)
        row.update(feasible=int(res.feasible),
                   objective=res.objective if res.feasible else "",
                   relay_power=res.objective if res.feasible else "",
                   source_power=float(p.sum()),
                   rank_ratio=res.rank_ratio,
                   randomized=int(res.used_randomization),
                   iterations=res.iterations)
        if res.feasible:
            snrs = model.all_subcarrier_snr(res.r, forms)
            row.update(worst_snr=float(snrs[targets].min()),
                       ber=float(np.mean(simkit.ber_uncoded_qpsk(snrs))))

    elif spec.mode in ("worst-snr", "worst-snr-joint"):
        if spec.mode == "worst-snr":
            p = np.full(cfg.N, cfg.P_s_max / cfg.N)
            forms = model.build_quadratic_forms(cfg, ch.f, p)
            res = designs.design_worst_snr(forms, cfg.P_r_max, cfg.eps,
                                           seed=spec.seed + trial)
        else:
            res = designs.design_joint_worst_snr(cfg, ch.f, eps=cfg.eps,
                                                 seed=spec.seed + trial)
            forms = model.build_quadratic_forms(cfg, ch.f, res.p_s)
        snrs = model.all_subcarrier_snr(res.r, forms) if res.feasible else None
        row.update(feasible=int(res.feasible),
                   objective=res.objective,
                   worst_snr=res.objective,
                   relay_power=res.extras.get("relay_power", ""),
                   source_power=float(np.sum(res.p_s)),
                   rank_ratio=res.rank_ratio,
                   randomized=int(res.used_randomization),
                   iterations=res.iterations)
        if snrs is not None:
            row.update(ber=float(np.mean(simkit.ber_uncoded_qpsk(snrs))))

    elif spec.mode == "rate-max":
        res = designs.design_rate_pgm(cfg, ch.f)
        forms = model.build_quadratic_forms(cfg, ch.f, res.p_s)
        snrs = model.all_subcarrier_snr(res.r, forms)
        row.update(feasible=1, objective=res.objective,
                   sum_rate_bits=res.objective,
                   worst_snr=float(snrs.min()),
                   relay_power=res.extras["relay_power"],
                   source_power=res.extras["source_power"],
                   iterations=res.iterations,
                   ber=float(np.mean(simkit.ber_uncoded_qpsk(snrs))))

    elif spec.mode == "validate":
        p = np.full(cfg.N, cfg.P_s_max / cfg.N)
        forms = model.build_quadratic_forms(cfg, ch.f, p)
        res = designs.design_worst_snr(forms, cfg.P_r_max, cfg.eps,
                                       seed=spec.seed + trial)
        rep = simkit.simulate_link(
            cfg, ch.f,
            ch.g if fixed_g is not None else RdStats.iid(cfg.sigma_g2, cfg.L_g),
            res.r, p, frames=options["frames"], g_draws=options["g_draws"],
            seed=spec.seed + 1000 + trial)
        snr_err = float(np.abs(rep.empirical_snr / rep.analytic_snr - 1).max())
        pow_err = float(abs(rep.empirical_relay_power /
                            rep.analytic_relay_power - 1))
        row.update(feasible=int(res.feasible), objective=res.objective,
                   worst_snr=res.objective,
                   relay_power=rep.analytic_relay_power,
                   source_power=float(p.sum()),
                   rank_ratio=res.rank_ratio, iterations=res.iterations,
                   ber=rep.ber_analytic,
                   emp_worst_snr=float(rep.empirical_snr.min()),
                   emp_relay_power=rep.empirical_relay_power,
                   snr_relerr_max=snr_err, power_relerr=pow_err)
        row["_freq_response"] = frequency_response_table(cfg, ch.f, res.r, ch.g)

    elif spec.mode == "mismatch":
        rho = float(options.get("rho_value", 0.0))
        true_rd = _true_rd_stats(cfg, options)
        assumed_rd = RdStats.iid(cfg.sigma_g2, cfg.L_g)
        rep = simkit.run_mismatch_experiment(
            cfg, true_rd, assumed_rd, rho, options["algorithm"],
            trials=1, seed=spec.seed + 5000 + trial)
        row.update(feasible=1,
                   objective=float(rep.objective_mismatched[0]),
                   objective_matched=float(rep.objective_matched[0]),
                   degradation=float(rep.objective_matched[0] -
                                     rep.objective_mismatched[0]))

    if spec.timing:
        row["wall_time_s"] = time.perf_counter() - t0
    return row


def frequency_response_table(cfg: SystemConfig, f, r, g, points: int = 256):
    """|H| of the bare channel cascade and of the relay-shaped cascade."""
    if g is None:
        return None
    h_fg = np.convolve(np.asarray(f, complex), np.asarray(g, complex))
    h_frg = np.convolve(np.convolve(np.asarray(f, complex),
                                    np.asarray(r, complex)),
                        np.asarray(g, complex))
    H1 = np.abs(np.fft.fft(h_fg, points))
    H2 = np.abs(np.fft.fft(h_frg, points))
    return [{"bin": i, "freq": i / points, "h_channel_abs": float(H1[i]),
             "h_shaped_abs": float(H2[i])} for i in range(points)]


# ---------------------------------------------------------------------------
# full experiment
# ---------------------------------------------------------------------------

def _task(args):
    spec, sweep_idx, trial = args
    return run_trial(spec, sweep_idx, trial)


def run_experiment(spec: ExperimentSpec, workers: int = 1):
    """All (sweep point, trial) rows plus one aggregate row per sweep point.

    Rows come back ordered by (sweep index, trial) regardless of worker
    completion order, so output artifacts are deterministic.
    """
    if spec.mode == "mismatch":
        return _run_mismatch_experiment(spec, workers)
    sweep_points = len(spec.sweep_values) if spec.sweep_name else 1
    tasks = [(spec, si, t) for si in range(sweep_points)
             for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_task, tasks))
    else:
        rows = [_task(t) for t in tasks]
    rows.extend(_aggregate(spec, rows, sweep_points))
    return rows


def _run_mismatch_experiment(spec: ExperimentSpec, workers: int = 1):
    rows = []
    rho_values = spec.options.get("rho", [0.0])
    trials = spec.options.get("mismatch_trials") or spec.trials
    for si, rho in enumerate(rho_values):
        sub = ExperimentSpec(mode="mismatch", cfg=spec.cfg, trials=trials,
                             sweep_name="rho", sweep_values=list(rho_values),
                             seed=spec.seed,
                             options=dict(spec.options, rho_value=rho),
                             timing=spec.timing)
        tasks = [(sub, si, t) for t in range(trials)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                batch = list(pool.map(_task, tasks))
        else:
            batch = [_task(t) for t in tasks]
        for row in batch:
            row["sweep"], row["sweep_value"] = "rho", rho
        rows.extend(batch)
    rows.extend(_aggregate(spec, rows, len(rho_values),
                           sweep_name="rho", sweep_values=rho_values))
    return rows


_MEAN_FIELDS = ("objective", "worst_snr", "sum_rate_bits", "relay_power",
                "source_power", "rank_ratio", "ber", "emp_worst_snr",
                "emp_relay_power", "snr_relerr_max", "power_relerr",
                "objective_matched", "degradation")


def _aggregate(spec: ExperimentSpec, rows, sweep_points, sweep_name=None,
               sweep_values=None):
    sweep_name = sweep_name if sweep_name is not None else spec.sweep_name
    sweep_values = sweep_values if sweep_values is not None else spec.sweep_values
    out = []
    for si in range(sweep_points):
        value = sweep_values[si] if sweep_name else None
        group = [r for r in rows
                 if (not sweep_name or r["sweep_value"] == value)
                 and r["trial"] != "mean"]
        feasible = [r for r in group if r.get("feasible") == 1]
        agg = _blank_row(spec, value, "mean")
        agg["sweep"] = sweep_name or ""
        agg["feasible"] = (len(feasible) / len(group)) if group else ""
        for name in _MEAN_FIELDS:
            vals = [r[name] for r in feasible
                    if isinstance(r.get(name), (int, float)) and r[name] != ""]
            if vals:
                agg[name] = float(np.mean(vals))
        out.append(agg)
    return out
