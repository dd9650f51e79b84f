"""Command-line front end.

Subcommands:
  design    one design run at the base config (exit 3 when infeasible)
  sweep     trials x sweep-axis experiment, delimited output (+ figures)
  validate  design + time-domain cross-check + frequency-response dump
  mismatch  channel-information mismatch study
  report    re-render figures and a summary from emitted rows

Exit codes: 0 success, 2 configuration error, 3 infeasible single design.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import experiments, report
from .experiments import ConfigError, ExperimentSpec, example_config, parse_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _add_common(sub):
    sub.add_argument("--config", help="experiment config file (INI)")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--trials", type=int, default=None)
    sub.add_argument("--out", default="out/run",
                     help="output path stem (directories are created)")
    sub.add_argument("--format", default="csv,json",
                     help="comma list from {csv,json}")
    sub.add_argument("--workers", type=int, default=1)
    sub.add_argument("--plot", action="store_true",
                     help="render figures next to the delimited output")
    sub.add_argument("--timing", action="store_true",
                     help="record wall time per row (breaks byte-level "
                          "determinism between reruns)")


def build_parser():
    ap = argparse.ArgumentParser(prog="ffrelay",
                                 description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sp = ap.add_subparsers(dest="command", required=True)
    for name in ("design", "sweep", "validate", "mismatch"):
        sub = sp.add_parser(name)
        _add_common(sub)
        if name in ("design", "sweep"):
            sub.add_argument("--mode", default=None,
                             choices=("power-min", "worst-snr",
                                      "worst-snr-joint", "rate-max"))
    rep = sp.add_parser("report")
    rep.add_argument("--rows", required=True, help="emitted .csv or .json file")
    rep.add_argument("--out", default=None, help="figure directory "
                     "(default: alongside the rows file)")
    ex = sp.add_parser("example-config")
    ex.add_argument("--out", default=None, help="write instead of print")
    return ap


def _load_spec(args, mode_override=None) -> ExperimentSpec:
    text = example_config()
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    overrides = dict(mode=mode_override or getattr(args, "mode", None),
                     trials=args.trials, seed=args.seed, timing=args.timing)
    return parse_config(text, overrides)


def _emit(args, rows):
    formats = tuple(t.strip() for t in args.format.split(",") if t.strip())
    files = report.emit_report(rows, args.out, formats=formats)
    if args.plot:
        out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
        stem = os.path.basename(args.out)
        files += report.render_figures(rows, out_dir, stem=stem)
        freq = [r for r in rows if r.get("_freq_response")]
        if freq:
            freq_rows = []
            for row in freq:
                for entry in row["_freq_response"]:
                    freq_rows.append({"trial": row["trial"], **entry})
            files += report.render_frequency_response(freq_rows, out_dir,
                                                      stem=stem + "_freqresp")
    for path in files:
        print(path)
    return files


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "example-config":
        text = example_config()
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
            print(args.out)
        else:
            print(text, end="")
        return EXIT_OK

    if args.command == "report":
        rows = report.read_rows(args.rows)
        if not rows:
            print("no rows found", file=sys.stderr)
            return EXIT_CONFIG
        out_dir = args.out or (os.path.dirname(os.path.abspath(args.rows)) or ".")
        stem = os.path.splitext(os.path.basename(args.rows))[0]
        files = report.render_figures(rows, out_dir, stem=stem)
        means = [r for r in rows if str(r.get("trial")) == "mean"]
        for r in means:
            print(f"sweep {r.get('sweep', '')}={r.get('sweep_value', '')}: "
                  f"feasible={r.get('feasible', '')} "
                  f"objective={r.get('objective', '')}")
        for path in files:
            print(path)
        return EXIT_OK

    try:
        if args.command == "design":
            spec = _load_spec(args)
            spec.trials = 1 if args.trials is None else spec.trials
            spec.sweep_name, spec.sweep_values = None, []
        elif args.command == "sweep":
            spec = _load_spec(args)
        elif args.command == "validate":
            spec = _load_spec(args, mode_override="validate")
            spec.sweep_name, spec.sweep_values = None, []
        else:
            spec = _load_spec(args, mode_override="mismatch")
            spec.sweep_name, spec.sweep_values = None, []
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        rows = experiments.run_experiment(spec, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(args, rows)

    if args.command == "design":
        data_rows = [r for r in rows if r["trial"] != "mean"]
        if any(r.get("feasible") != 1 for r in data_rows):
            print("design infeasible", file=sys.stderr)
            return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
