"""Command line: ``chemotaxis-dsm {run, sweep, check-gamma, analyze}``.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .experiments import AnalysisError, analyze, is_monotone_transition, run_experiment, sweep
from .kinetics import KineticsError, check_assumptions

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _load(path):
    try:
        return load_config(path)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    art = run_experiment(cfg, args.out, make_figures=False if args.no_figures else None)
    print(f"{art.directory}: {art.verdict.describe()}")
    if art.failure:
        print(f"solver failure: {art.failure}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _parse_values(text: str):
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            out.append(float(item))
        except ValueError:
            raise ConfigError([f"--values: {item!r} is not a number"]) from None
    if not out:
        raise ConfigError(["--values: empty value list"])
    return out


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    values = _parse_values(args.values)
    rows, summary = sweep(cfg, args.axis, values, jobs=args.jobs, out_dir=args.out, make_figures=False if args.no_figures else None)
    for r in rows:
        extra = f"  [{r.error}]" if r.error else ""
        print(f"{r.value:<12.6g} {r.verdict:<28} max_u={r.max_u_final:.6g} delta_hat={r.delta_hat:.6g}{extra}")
    print(f"monotone transition: {'yes' if is_monotone_transition(rows) else 'no'}")
    print(f"summary: {summary}")
    if not args.no_figures and cfg.output.figures:
        from .plotting import plot_sweep

        plot_sweep(rows, args.axis, Path(summary).with_suffix(".png"))
    return EXIT_SOLVER if any(r.verdict in ("error", "dt-collapse") for r in rows) else EXIT_OK


def cmd_check_gamma(args) -> int:
    cfg = _load(args.config)
    a = cfg.assumptions
    spec = cfg.build_params().motility
    report = check_assumptions(spec, k=a.k, l=a.l, chi=a.chi, b0=a.b0, s_range=(a.s_min, a.s_max), samples=a.samples, N=a.N)
    print(report.format())
    return EXIT_OK


def cmd_analyze(args) -> int:
    rep = analyze(args.dir)
    print(rep.text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chemotaxis-dsm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (default: output.dir)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a configuration over one numeric axis")
    p.add_argument("config")
    p.add_argument("--axis", required=True, help="section.key, e.g. initial.critical_fraction")
    p.add_argument("--values", required=True, help="comma separated numbers")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: cores - 1)")
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-gamma", help="print the motility assumption report")
    p.add_argument("config")
    p.set_defaults(func=cmd_check_gamma)

    p = sub.add_parser("analyze", help="re-derive verdict and checks from a run directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except (KineticsError, AnalysisError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
