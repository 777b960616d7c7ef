"""Command line entry points.

``cohtree run --config cfg`` executes the full pipeline; the config file
carries the input paths and any settings, and the flags override it.
``cohtree synth`` writes a synthetic dataset in the same CSV schema the
pipeline ingests, with the seed recorded in a manifest.

Exit codes: 0 success, 2 usage (bad flags, bad config, missing input file),
3 data validation failure, 4 numerical degeneracy.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import CohtreeError, UsageError, ValidationError
from .graph import EXPORT_FORMATS, SectorLabeling
from .pipeline import METRIC_CHOICES, build_pipeline_config, parse_config_text, run_pipeline
from .synth import (
    GENERATOR_KINDS,
    GeneratorSpec,
    ar1,
    delayed_copy,
    factor_market,
    spec_manifest,
    white_noise,
    write_dataset,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohtree",
        description="Taxonomic trees over financial time series from "
        "correlation- and coherence-based distances.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the pipeline on a price dataset")
    run.add_argument("--config", required=True, metavar="PATH",
                     help="key=value config file (prices/calendar paths live here)")
    run.add_argument("--metric", choices=METRIC_CHOICES, help="override the metric selection")
    run.add_argument("--segment-length", type=int, metavar="N", help="Welch segment length")
    run.add_argument("--overlap", type=float, metavar="F", help="Welch overlap fraction")
    run.add_argument("--grid-step", type=float, metavar="SECONDS", help="resampling grid step")
    run.add_argument("--out", metavar="DIR", help="output directory")
    run.add_argument("--skip-bad-rows", action="store_true", default=None,
                     help="skip malformed price rows instead of aborting")
    run.add_argument("--export", action="append", choices=EXPORT_FORMATS, metavar="FORMAT",
                     help="tree export format (repeatable): dot, graphml, json")

    synth = sub.add_parser("synth", help="generate a synthetic dataset")
    synth.add_argument("--kind", required=True, choices=GENERATOR_KINDS)
    synth.add_argument("--out", required=True, metavar="DIR")
    synth.add_argument("--length", type=int, default=8192, help="return samples per symbol")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--symbols", type=int, default=2,
                       help="symbol count for white/delayed_copy/ar1 kinds")
    synth.add_argument("--delay", type=int, default=1, help="delay step, samples")
    synth.add_argument("--phi", type=float, default=0.0, help="AR(1) coefficient")
    synth.add_argument("--groups", type=int, default=3, help="factor market group count")
    synth.add_argument("--group-size", type=int, default=4)
    synth.add_argument("--loading", type=float, default=0.9)
    synth.add_argument("--lag", type=int, default=1, help="within-group delay step, samples")
    synth.add_argument("--noise", type=float, default=None,
                       help="idiosyncratic noise level (default sqrt(1-loading^2))")
    synth.add_argument("--sessions", type=int, default=1,
                       help="split output into this many trading sessions")
    synth.add_argument("--grid-step", type=float, default=120.0, metavar="SECONDS")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        raise UsageError(f"config file does not exist: {config_path}")
    values = parse_config_text(config_path.read_text(encoding="utf-8"), source=str(config_path))
    if args.metric is not None:
        values["metric"] = args.metric
    if args.segment_length is not None:
        values["segment_length"] = str(args.segment_length)
    if args.overlap is not None:
        values["overlap"] = str(args.overlap)
    if args.grid_step is not None:
        values["grid_step"] = str(args.grid_step)
    if args.out is not None:
        values["out"] = str(Path(args.out).absolute())
    if args.export:
        values["export"] = ",".join(args.export)
    if args.skip_bad_rows:
        values["skip_bad_rows"] = "true"
    config = build_pipeline_config(values, base_dir=config_path.parent)
    report = run_pipeline(config)

    print(f"analyzed {len(report.symbols)} symbols over {len(report.sessions_used)} sessions")
    if report.excluded_symbols:
        print(f"excluded symbols: {', '.join(sorted(report.excluded_symbols))}")
    if report.excluded_sessions:
        print(f"excluded sessions: {', '.join(str(s) for s in sorted(report.excluded_sessions))}")
    if report.bad_rows:
        print(f"skipped {len(report.bad_rows)} malformed price rows")
    for kind, scores in report.scores.items():
        print(
            f"{kind}: adjacency(sector)={scores['adjacency']['sector']} "
            f"subtree(sector)={scores['subtree']['sector']}"
        )
    print(f"wrote {len(report.outputs)} files under {config.out_dir}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.symbols < 1:
        raise UsageError(f"--symbols must be >= 1, got {args.symbols}")
    if args.sessions < 1:
        raise UsageError(f"--sessions must be >= 1, got {args.sessions}")
    if args.length % args.sessions != 0:
        raise UsageError(
            f"--length {args.length} does not split into {args.sessions} equal sessions"
        )
    try:
        series, labels, manifest = _generate(args)
    except ValidationError as e:
        raise UsageError(str(e)) from e
    manifest.update(
        {
            "command": "synth",
            "kind": args.kind,
            "seed": args.seed,
            "length": args.length,
        }
    )
    paths = write_dataset(
        args.out, series, labels, sessions=args.sessions,
        grid_step=args.grid_step, manifest=manifest,
    )
    for name in sorted(paths):
        print(f"wrote {paths[name]}")
    return 0


def _generate(args: argparse.Namespace) -> tuple[dict, SectorLabeling, dict]:
    if args.kind == "factor_market":
        spec = GeneratorSpec(
            kind="factor_market",
            length=args.length,
            seed=args.seed,
            phi=args.phi,
            n_groups=args.groups,
            group_size=args.group_size,
            loading=args.loading,
            lag=args.lag,
            noise=args.noise,
        )
        market = factor_market(spec)
        return dict(market.series), market.labels, spec_manifest(spec)

    series = {}
    labels = {}
    if args.kind == "delayed_copy":
        base_spec = GeneratorSpec(kind="white", length=args.length, seed=args.seed)
        base = white_noise(base_spec)
        for k in range(args.symbols):
            series[f"S{k}"] = delayed_copy(base, (k * args.delay) % args.length)
            labels[f"S{k}"] = ("Synthetic", "delayed_copy")
        manifest = {"delay": args.delay, "per_symbol_delay": "k * delay mod length"}
    else:  # white or ar1: symbol k seeded with seed + k
        for k in range(args.symbols):
            spec = GeneratorSpec(kind=args.kind, length=args.length, seed=args.seed + k, phi=args.phi)
            series[f"S{k}"] = white_noise(spec) if args.kind == "white" else ar1(spec)
            labels[f"S{k}"] = ("Synthetic", args.kind)
        manifest = {"per_symbol_seed": "seed + k"}
        if args.kind == "ar1":
            manifest["phi"] = args.phi
    return series, SectorLabeling(labels), manifest


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_synth(args)
    except CohtreeError as e:
        print(f"cohtree: error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
