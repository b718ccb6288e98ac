"""Command line entry point: ``mfextremes {simulate,analyze,limits,run,report}``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from .extremes import RegionSet
from .harness.config import WORKERS_ENV, ExperimentConfig, load_config
from .harness.experiment import analyze, load_result, run_experiment, simulate_experiment
from .harness.report import load_report, render_report
from .limits import TailParams, gev_cdf, lambda_weights, poisson_intensity, topk_joint_prob


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _experiment_config(args) -> ExperimentConfig:
    overrides = list(args.set or [])
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    return load_config(args.config, overrides)


def _output_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.output) if args.output else Path(cfg.output_dir) / cfg.name


def cmd_simulate(args) -> int:
    cfg = _experiment_config(args)
    out = _output_dir(args, cfg)
    result = simulate_experiment(cfg, out)
    print(f"wrote {cfg.replications} replications x {cfg.n_particles} particles to {out} ({result.elapsed_seconds:.1f}s)")
    return 0


def cmd_analyze(args) -> int:
    directory = Path(args.directory)
    cfg = None
    if args.config or args.set:
        base = args.config or directory / "config.ini"
        cfg = load_config(base, args.set or [])
    report = analyze(load_result(directory, cfg))
    report.save(directory / "report.json")
    print(render_report(report), end="")
    return 0 if report.verdict == "pass" else 1


def cmd_run(args) -> int:
    cfg = _experiment_config(args)
    report = run_experiment(cfg, _output_dir(args, cfg))
    print(render_report(report), end="")
    return 0 if report.verdict == "pass" else 1


def cmd_report(args) -> int:
    print(render_report(load_report(args.report)), end="")
    return 0


def cmd_limits(args) -> int:
    tail = TailParams(args.gamma)
    print(f"gamma = {tail.gamma:g}   support = ({tail.lower:g}, {tail.upper:g}]")
    if args.x:
        print("\n       x     Gamma(x)")
        for x in _floats(args.x):
            print(f"{x:8.4g}  {float(gev_cdf(x, tail)):.10f}")
    if args.region:
        region = RegionSet(tuple(float(v) for v in r.split()) for r in args.region.split(";") if r.strip())
        print(f"\nnu(region) = {poisson_intensity(region, tail):.10g}")
    if args.thresholds:
        x = _floats(args.thresholds)
        lam = lambda_weights(x, tail)
        print("\n j  threshold     lambda_j")
        for j, (xj, lj) in enumerate(zip(x, lam), start=1):
            print(f"{j:2d}  {xj:9.4g}  {lj:.10f}")
        top = topk_joint_prob(x, tail, args.truncation)
        print(f"\nP(top-{len(x)} exceed thresholds) = {top.value:.10f}  (truncation {top.truncation}, bound {top.error_bound:.3g})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfextremes", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_args(p):
        p.add_argument("config", nargs="?", help="INI experiment file (defaults apply when omitted)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key, e.g. tests.girsanov=true")
        p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
        p.add_argument("-o", "--output", help="output directory (default output_dir/name)")

    p = sub.add_parser("simulate", help="simulate both systems and write endpoint/pattern CSVs")
    experiment_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="run the checks on a directory written by simulate")
    p.add_argument("directory")
    p.add_argument("--config", help="use this config instead of DIRECTORY/config.ini")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="simulate, analyse and write report.json")
    experiment_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="render a JSON report as a text table")
    p.add_argument("report")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("limits", help="print limit quantities for an extreme value index")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--x", help="comma list of points for the GEV cdf")
    p.add_argument("--thresholds", help="comma list x_1 >= ... >= x_k for lambda_j and the top-k probability")
    p.add_argument("--region", help="';'-separated 'a b c d' rectangles for nu")
    p.add_argument("--truncation", type=int, default=40)
    p.set_defaults(func=cmd_limits)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"mfextremes: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
