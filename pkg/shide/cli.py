"""
Command-line front end for shide.

Commands:
    estimate  Fit SHIDE, KDE or multiplicative KDE to data and write x,density
    kde       Fit the additive Gaussian KDE (shortcut for estimate --method kde)
    sample    Draw data from a simulation model
    bench     Run the replicated MISE benchmark

Every output is a deterministic function of the flags, the input bytes and
--seed. Files are written atomically; nothing is written on failure.
"""

import os
import sys
import json
import logging
import argparse
from dataclasses import asdict
from typing import Callable, Optional, Sequence

import numpy as np

from .bandwidth import AmiseBandwidth, BandwidthRule, FixedBandwidth, PercentileBandwidth
from .baseline import additive_kde, multiplicative_kde, silverman_bw, sj_bw
from .bench import (
    DATA_STREAM,
    METHOD_IDS,
    MODEL_IDS,
    BenchSettings,
    get_model,
    model_sample,
    replication_seed,
    run_benchmark,
)
from .config import (
    BIN_RULES,
    KDE_REFERENCES,
    PILOT_LOCATIONS,
    PSI_METHODS,
    ROUGHNESS_METHODS,
    WORKING_SCALES,
    config,
    load_overrides,
)
from .estimator import ShideConfig, SupportSpec, shide_estimate
from .utils import format_number, read_data, render_csv, write_atomic

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64 - 1

# Fraction of the pseudo-data window added on each side of the SHIDE output grid
SHIDE_GRID_PAD = 0.1
KDE_GRID_PAD = 3.0


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return seed


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def _split_list(value, cast: Callable = str) -> list:
    """Comma-separated string (or a YAML list) to a list."""
    items = value if isinstance(value, (list, tuple)) else str(value).split(",")
    return [cast(str(item).strip()) for item in items if str(item).strip()]


def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--input", default="-",
                        help="Input file with one value per line, '-' for stdin (default: -)")
    parent.add_argument("--output", default=None,
                        help="Output CSV path (default: stdout; required for bench)")
    parent.add_argument("--seed", type=_seed, default=config.bench.seed,
                        help=f"Unsigned 64-bit seed (default: {config.bench.seed})")
    parent.add_argument("--grid", type=_positive_int, default=config.estimator.grid_points,
                        help=f"Evaluation grid points (default: {config.estimator.grid_points})")
    parent.add_argument("--config", default=None,
                        help="YAML file of option defaults, keys are option names")
    parent.add_argument("--log-level", default=config.logging.log_level,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help=f"Logging level (default: {config.logging.log_level})")
    return parent


def _add_shide_options(parser: argparse.ArgumentParser) -> None:
    est = config.estimator
    parser.add_argument("--k", type=int, default=est.k, help=f"Kernel order (default: {est.k})")
    parser.add_argument("--m", type=_positive_int, default=est.m,
                        help=f"Pseudo-replicates per observation (default: {est.m})")
    parser.add_argument("--c", type=float, default=est.c, help=f"Coupling constant (default: {est.c:g})")
    parser.add_argument("--alpha", type=float, default=est.alpha,
                        help=f"Spacing quantile for the percentile rule (default: {est.alpha:g})")
    parser.add_argument("--roughness", choices=ROUGHNESS_METHODS, default=est.roughness_method,
                        help=f"Kernel roughness R(K) (default: {est.roughness_method})")
    parser.add_argument("--working-scale", choices=WORKING_SCALES, default=est.working_scale,
                        help=f"Scale the histogram is built on (default: {est.working_scale})")
    parser.add_argument("--psi", choices=PSI_METHODS, default=est.psi_method,
                        help=f"Pilot for the curvature functional (default: {est.psi_method})")
    parser.add_argument("--pilot-location", choices=PILOT_LOCATIONS, default=est.pilot_location,
                        help=f"Pilot density location for --bandwidth perc (default: {est.pilot_location})")
    parser.add_argument("--bin-rule", choices=BIN_RULES, default=est.bin_rule,
                        help=f"Histogram bin width rule (default: {est.bin_rule})")


def _add_window_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid-min", type=float, default=None,
                        help="Left end of the output grid (default: data-driven)")
    parser.add_argument("--grid-max", type=float, default=None,
                        help="Right end of the output grid (default: data-driven)")


def build_parser() -> argparse.ArgumentParser:
    """Parser for all commands."""
    parent = _common_parent()
    parser = argparse.ArgumentParser(
        prog="shide",
        description="SHIDE density estimation, KDE baselines and the MISE benchmark",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # SHIDE with the calibrated percentile bandwidth on positive data
  shide estimate --input data.txt --bandwidth perc --lower 0 --seed 7

  # Sheather-Jones KDE
  shide kde --input data.txt --bw sj --output kde.csv

  # Draw model V data
  shide sample --model V --n 100 --seed 1

  # Desk-scale benchmark on 4 workers
  shide bench --models I,IV --n 50,500 --reps 100 --seed 42 --jobs 4 --output bench.csv
        """
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    estimate = commands.add_parser("estimate", parents=[parent], help="Fit a density estimate")
    estimate.add_argument("--method", choices=["shide", "kde", "mkde"], default="shide",
                          help="Estimator (default: shide)")
    estimate.add_argument("--bandwidth", default="opt",
                          help="SHIDE bandwidth: opt, perc, perc-raw or a number (default: opt)")
    estimate.add_argument("--bw", default="sj", help="KDE bandwidth: sj, silverman or a number (default: sj)")
    estimate.add_argument("--mkde-kernel", choices=["half_normal", "gaussian"], default="half_normal",
                          help="Multiplicative KDE kernel (default: half_normal)")
    estimate.add_argument("--lower", type=float, default=None, help="Lower support bound (default: none)")
    estimate.add_argument("--upper", type=float, default=None, help="Upper support bound (default: none)")
    estimate.add_argument("--normalize", action="store_true",
                          help="Rescale SHIDE to integrate to 1 (default: off)")
    _add_shide_options(estimate)
    _add_window_options(estimate)
    estimate.set_defaults(handler=cmd_estimate)

    kde = commands.add_parser("kde", parents=[parent], help="Fit the additive Gaussian KDE")
    kde.add_argument("--bw", default="sj", help="Bandwidth: sj, silverman or a number (default: sj)")
    _add_window_options(kde)
    kde.set_defaults(handler=cmd_kde, method="kde")

    sample = commands.add_parser("sample", parents=[parent], help="Draw data from a simulation model")
    sample.add_argument("--model", required=True, help=f"Model id, one of {', '.join(MODEL_IDS)}")
    sample.add_argument("--n", type=int, required=True, help="Sample size")
    sample.add_argument("--model5-sigma", type=float, default=config.bench.model5_sigma,
                        help=f"Model V standard deviation before truncation (default: {config.bench.model5_sigma:g})")
    sample.set_defaults(handler=cmd_sample)

    bench = commands.add_parser("bench", parents=[parent], help="Run the replicated MISE benchmark")
    bench.add_argument("--models", default=",".join(MODEL_IDS),
                       help=f"Comma-separated model ids (default: {','.join(MODEL_IDS)})")
    bench.add_argument("--n", default="50,500", help="Comma-separated sample sizes (default: 50,500)")
    bench.add_argument("--reps", type=_positive_int, default=config.bench.reps,
                       help=f"Replications per cell (default: {config.bench.reps})")
    bench.add_argument("--methods", default=",".join(METHOD_IDS),
                       help=f"Comma-separated methods (default: {','.join(METHOD_IDS)})")
    bench.add_argument("--jobs", type=_positive_int, default=config.bench.jobs,
                       help=f"Worker processes (default: {config.bench.jobs})")
    bench.add_argument("--model5-sigma", type=float, default=config.bench.model5_sigma,
                       help=f"Model V standard deviation before truncation (default: {config.bench.model5_sigma:g})")
    bench.add_argument("--kde-reference", choices=KDE_REFERENCES, default=config.bench.kde_reference,
                       help=f"KDE_SJ scoring: R-style binned bw.SJ and density(), or exact (default: {config.bench.kde_reference})")
    bench.add_argument("--summary", default=None,
                       help="Summary CSV path (default: <output stem>_summary.csv)")
    _add_shide_options(bench)
    bench.set_defaults(handler=cmd_bench)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, args: argparse.Namespace,
                       argv: Optional[Sequence[str]]) -> argparse.Namespace:
    """Re-parse with YAML values as defaults so explicit flags still win."""
    overrides = load_overrides(args.config, allowed=set(vars(args)) - {"handler", "command", "config"})
    subparsers = next(action for action in parser._actions if isinstance(action, argparse._SubParsersAction))
    subparsers.choices[args.command].set_defaults(**overrides)
    return parser.parse_args(argv)


def _shide_rule(args: argparse.Namespace) -> BandwidthRule:
    choice = str(args.bandwidth).strip().lower()
    if choice == "opt":
        return AmiseBandwidth(c=args.c, psi_method=args.psi, roughness_method=args.roughness)
    if choice in ("perc", "perc-raw"):
        return PercentileBandwidth(alpha=args.alpha, calibrated=choice == "perc", c=args.c,
                                   psi_method=args.psi, roughness_method=args.roughness,
                                   pilot_location=args.pilot_location)
    try:
        return FixedBandwidth(float(choice))
    except ValueError:
        raise ValueError(f"--bandwidth must be opt, perc, perc-raw or a positive number, got {args.bandwidth!r}")


def _kde_bandwidth(spec, data: np.ndarray) -> tuple[float, str]:
    choice = str(spec).strip().lower()
    if choice == "sj":
        return sj_bw(data), "SJ"
    if choice == "silverman":
        return silverman_bw(data), "silverman"
    try:
        h = float(choice)
    except ValueError:
        raise ValueError(f"--bw must be sj, silverman or a positive number, got {spec!r}")
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"--bw must be positive, got {spec!r}")
    return h, "fixed"


def _output_grid(args: argparse.Namespace, lo: float, hi: float) -> np.ndarray:
    lo = lo if args.grid_min is None else args.grid_min
    hi = hi if args.grid_max is None else args.grid_max
    if not hi > lo:
        raise ValueError(f"Empty output grid [{lo:g}, {hi:g}]")
    return np.linspace(lo, hi, args.grid)


def _write_density(args: argparse.Namespace, grid: np.ndarray, density: np.ndarray) -> None:
    write_atomic(args.output, render_csv(("x", "density"), zip(grid, density)))


def _report(**fields) -> None:
    text = " ".join(f"{key}={value:.6g}" if isinstance(value, float) else f"{key}={value}"
                    for key, value in fields.items())
    print(text, file=sys.stderr)


def _fit_kde(args: argparse.Namespace, data: np.ndarray, multiplicative: bool) -> None:
    h, selector = _kde_bandwidth(args.bw, data)
    if multiplicative:
        estimate = multiplicative_kde(data, h, kernel=args.mkde_kernel)
        lo, hi = float(data.min()), float(data.max())
        margin = SHIDE_GRID_PAD * (hi - lo)
        grid = _output_grid(args, lo - margin, hi + margin)
    else:
        estimate = additive_kde(data, h)
        grid = _output_grid(args, float(data.min()) - KDE_GRID_PAD * h, float(data.max()) + KDE_GRID_PAD * h)

    _write_density(args, grid, estimate.evaluate(grid))
    _report(method="mkde" if multiplicative else "kde", selector=selector, h=h, seed=args.seed)


def cmd_estimate(args: argparse.Namespace) -> None:
    """Fit the requested estimator and write x,density."""
    if args.method == "shide":
        shide_config = ShideConfig(
            k=args.k, m=args.m, bandwidth=_shide_rule(args),
            support=SupportSpec.from_bounds(args.lower, args.upper), seed=args.seed,
            normalize=args.normalize, grid_points=args.grid, working_scale=args.working_scale,
            bin_rule=args.bin_rule,
        )
        data = read_data(args.input)
        estimate = shide_estimate(data, shide_config)
        window = estimate.grid(2, pad=SHIDE_GRID_PAD)
        grid = _output_grid(args, float(window[0]), float(window[-1]))
        _write_density(args, grid, estimate.evaluate(grid))
        _report(method="shide", selector=estimate.selector, h=estimate.h_used, theta=estimate.theta_used,
                B=estimate.bins, seed=args.seed)
        return

    data = read_data(args.input)
    _fit_kde(args, data, multiplicative=args.method == "mkde")


def cmd_kde(args: argparse.Namespace) -> None:
    """Additive Gaussian KDE."""
    _fit_kde(args, read_data(args.input), multiplicative=False)


def cmd_sample(args: argparse.Namespace) -> None:
    """Draw replication 0 of the benchmark data stream for (seed, model, n)."""
    model = get_model(args.model, args.model5_sigma)
    if args.n < 1:
        raise ValueError(f"--n must be at least 1, got {args.n}")

    rng = np.random.default_rng(replication_seed(args.seed, model.id, args.n, 0, DATA_STREAM))
    values = model_sample(model, args.n, rng)
    write_atomic(args.output, "".join(f"{format_number(value)}\n" for value in values))
    logger.info(f"✓ Drew {args.n} values from model {model.id} ({model.description})")


def _summary_path(output: str, summary: Optional[str]) -> str:
    if summary:
        return summary
    stem, _ = os.path.splitext(output)
    return f"{stem}_summary.csv"


def cmd_bench(args: argparse.Namespace) -> None:
    """Run the benchmark and write the detail and summary CSVs."""
    if args.output in (None, "-"):
        raise ValueError("bench needs --output PATH (it writes a detail and a summary CSV)")

    models = _split_list(args.models)
    sizes = _split_list(args.n, int)
    methods = _split_list(args.methods)
    for model_id in models:
        get_model(model_id, args.model5_sigma)

    settings = BenchSettings(
        k=args.k, m=args.m, c=args.c, alpha=args.alpha, roughness_method=args.roughness,
        working_scale=args.working_scale, psi_method=args.psi, pilot_location=args.pilot_location,
        bin_rule=args.bin_rule, model5_sigma=args.model5_sigma, grid_points=args.grid,
        window_pad=config.bench.window_pad, kde_reference=args.kde_reference,
    )
    # Reject bad estimator settings before any replication runs
    ShideConfig(k=settings.k, m=settings.m, grid_points=settings.grid_points,
                bandwidth=PercentileBandwidth(alpha=settings.alpha, c=settings.c),
                working_scale=settings.working_scale, bin_rule=settings.bin_rule)

    records = run_benchmark(models, sizes, args.reps, args.seed, methods, settings, jobs=args.jobs)
    fingerprint = records[0].fingerprint
    comments = [
        f"fingerprint sha256={fingerprint}",
        "config " + json.dumps({"reps": args.reps, "seed": args.seed, **asdict(settings)}, sort_keys=True),
    ]

    detail_rows = [
        (record.model, record.n, *record.columns, rep, value)
        for record in records
        for rep, value in enumerate(record.replication_mises)
    ]
    summary_rows = [(record.model, record.n, *record.columns, record.median, record.mad) for record in records]

    summary_path = _summary_path(args.output, args.summary)
    write_atomic(args.output, render_csv(("model", "n", "method", "selector", "rep", "mise"), detail_rows, comments))
    write_atomic(summary_path, render_csv(("model", "n", "method", "selector", "median", "mad"), summary_rows, comments))
    _report(method="bench", cells=len(records), rows=len(detail_rows), seed=args.seed)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper()),
        format=config.logging.log_format,
        stream=sys.stderr
    )

    errors = config.validate()
    if errors:
        for error in errors:
            logger.error(f"✗ Configuration error: {error}")
        return 1

    try:
        if args.config:
            args = _apply_config_file(parser, args, argv)
            logging.getLogger().setLevel(getattr(logging, str(args.log_level).upper()))
        args.handler(args)
    except (ValueError, OSError) as e:
        logger.error(f"✗ {args.command} failed: {e}")
        return 1

    return 0


if __name__ == "__main__":
    sys.exit(main())
