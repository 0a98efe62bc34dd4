"""Command-line front end for simulations, predictions, and sweeps.

Exit codes: 0 on success, 2 for configuration problems (including a
missing or malformed config file), 3 for I/O failures.  Summary output
goes to standard output as ``key=value`` tokens; optional plot data is
written as two-column whitespace-delimited ``.dat`` files that any
plotting tool can read.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import (
    EstimationError,
    NonConvergenceError,
    estimate_target_moments,
    mean_trajectory,
    positive_update_probability,
    resting_variance,
    steps_to_mean_convergence,
    steps_to_variance_convergence,
    variance_trajectory,
)
from .config import ConfigError, load_config
from .experiment import (
    _PREDICTION_STREAM_BASE,
    ExperimentConfig,
    compare_models,
    mix_seed,
    record_times,
    run_experiment,
    sweep,
    validate_predictions,
)


def _format(value: float) -> str:
    return f"{float(value):.9g}"


def _parse_float_list(raw: str) -> list[float]:
    values = []
    for piece in raw.split(","):
        piece = piece.strip()
        if not piece:
            continue
        try:
            values.append(float(piece))
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"not a number: {piece!r}"
            ) from None
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelgames",
        description=(
            "Simulate populations of agents negotiating dimension weights "
            "through assertion games, and check the runs against "
            "closed-form predictions."
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", required=True, help="path to a key=value config file"
    )
    common.add_argument(
        "--seed", type=int, default=None, help="override the master seed"
    )
    common.add_argument(
        "--out", default=None, help="directory for CSV and plot-data output"
    )
    common.add_argument(
        "--emit-plot-data",
        action="store_true",
        help="write two-column .dat series next to the CSVs",
    )
    common.add_argument(
        "--workers", type=int, default=1, help="concurrent run workers"
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser(
        "simulate", parents=[common], help="run the configured experiment"
    )
    p_sim.set_defaults(handler=_cmd_simulate)

    p_pred = sub.add_parser(
        "predict",
        parents=[common],
        help="print closed-form predictions without simulating",
    )
    p_pred.add_argument(
        "--tol",
        type=float,
        default=0.01,
        help="tolerance for convergence-step counts",
    )
    p_pred.add_argument(
        "--samples",
        type=int,
        default=1_000_000,
        help="Monte Carlo sample count for target moments",
    )
    p_pred.set_defaults(handler=_cmd_predict)

    p_sweep = sub.add_parser(
        "sweep", parents=[common], help="re-run the experiment per value"
    )
    p_sweep.add_argument(
        "--param",
        choices=("w", "h"),
        required=True,
        help="which parameter to sweep",
    )
    p_sweep.add_argument(
        "--values",
        type=_parse_float_list,
        required=True,
        help="comma-separated parameter values",
    )
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_cmp = sub.add_parser(
        "compare",
        parents=[common],
        help="run both updating rules across reliabilities",
    )
    p_cmp.add_argument(
        "--w-values",
        type=_parse_float_list,
        required=True,
        help="comma-separated reliability values",
    )
    p_cmp.set_defaults(handler=_cmd_compare)

    p_val = sub.add_parser(
        "validate",
        parents=[common],
        help="compare simulated curves with predictions per update rate",
    )
    p_val.add_argument(
        "--h-values",
        type=_parse_float_list,
        default=[1e-2, 1e-3],
        help="comma-separated update rates",
    )
    p_val.add_argument(
        "--samples",
        type=int,
        default=1_000_000,
        help="Monte Carlo sample count for target moments",
    )
    p_val.set_defaults(handler=_cmd_validate)
    return parser


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 1 << 64:
            raise ConfigError("--seed must fit in 64 bits")
        config = replace(config, master_seed=args.seed)
    if args.out is not None:
        config = replace(config, outputs=args.out)
    return config


def _plot_dir(args) -> Path:
    return Path(args.out) if args.out is not None else Path(".")


def _emit_series(directory: Path, experiment: str, curve: str, xs, ys) -> None:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size == 0:
        print(
            f"warning: no data for {experiment}_{curve}, skipping",
            file=sys.stderr,
        )
        return
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"{_format(x)} {_format(y)}" for x, y in zip(xs, ys)]
    path = directory / f"{experiment}_{curve}.dat"
    path.write_text("\n".join(lines) + "\n")


def _start_moments(config: ExperimentConfig) -> tuple[float, float]:
    """Mean and cross-agent variance of the initial weights.

    Uniform initialisation has mean one half and variance one twelfth;
    a fixed initial weight has no spread.
    """
    init = config.game.weight_init
    if init is None:
        return 0.5, 1.0 / 12.0
    if isinstance(init, tuple):
        arr = np.asarray(init, dtype=np.float64)
        return float(arr.mean()), float(arr.var(ddof=1))
    return float(init), 0.0


def _cmd_simulate(args) -> int:
    config = _load(args)
    result = run_experiment(config, workers=args.workers)
    aggregate = result.aggregate
    print(f"final_mean_lambda={_format(aggregate.mean_of_means[-1])}")
    print(f"final_sd_lambda={_format(aggregate.mean_sd[-1])}")
    if args.emit_plot_data:
        directory = _plot_dir(args)
        _emit_series(
            directory, "simulate", "mean", aggregate.times,
            aggregate.mean_of_means,
        )
        _emit_series(
            directory, "simulate", "sd", aggregate.times, aggregate.mean_sd
        )
    return 0


def _cmd_predict(args) -> int:
    config = _load(args)
    game = config.game
    try:
        moments = estimate_target_moments(
            config.env,
            reliability=game.reliability,
            model=game.model,
            n_samples=args.samples,
            rng=np.random.default_rng(
                mix_seed(config.master_seed, _PREDICTION_STREAM_BASE)
            ),
            labels=game.labels,
        )
    except (EstimationError, NonConvergenceError) as err:
        print(f"prediction failed: {err}", file=sys.stderr)
        return 1
    rest_var = resting_variance(game.rate, moments.variance)
    start_mean, start_var = _start_moments(config)
    step_mean = steps_to_mean_convergence(
        start_mean, moments.mean, game.rate, args.tol
    )
    step_var = steps_to_variance_convergence(
        start_var, moments.variance, game.rate, args.tol
    )
    per_timestep = game.n_agents - 1

    print(f"p_plus={_format(positive_update_probability(config.env))}")
    print(f"target_mean={_format(moments.mean)}")
    print(f"target_variance={_format(moments.variance)}")
    print(f"resting_mean={_format(moments.mean)}")
    print(f"resting_variance={_format(rest_var)}")
    print(f"tol={_format(args.tol)}")
    print(f"mean_convergence_updates={step_mean}")
    print(f"mean_convergence_timesteps={math.ceil(step_mean / per_timestep)}")
    print(f"variance_convergence_updates={step_var}")
    print(
        f"variance_convergence_timesteps={math.ceil(step_var / per_timestep)}"
    )
    if args.emit_plot_data:
        times = record_times(game.timesteps, config.record_every)
        steps = times.astype(np.float64) * per_timestep
        directory = _plot_dir(args)
        _emit_series(
            directory, "predict", "mean", times,
            mean_trajectory(start_mean, moments.mean, game.rate, steps),
        )
        _emit_series(
            directory, "predict", "variance", times,
            variance_trajectory(start_var, moments.variance, game.rate, steps),
        )
    return 0


def _cmd_sweep(args) -> int:
    config = _load(args)
    for value in args.values:
        if args.param == "w" and not 0.0 <= value <= 1.0:
            raise ConfigError(f"swept w value {value:g} outside [0, 1]")
        if args.param == "h" and not 0.0 < value < 1.0:
            raise ConfigError(f"swept h value {value:g} outside (0, 1)")
    points = sweep(config, args.param, args.values, workers=args.workers)
    for point in points:
        print(
            f"{args.param}={point.value:g} "
            f"final_mean_lambda={_format(point.final_mean)} "
            f"final_sd_lambda={_format(point.final_sd)}"
        )
    if args.emit_plot_data:
        directory = _plot_dir(args)
        values = [p.value for p in points]
        _emit_series(
            directory, "sweep", "mean", values, [p.final_mean for p in points]
        )
        _emit_series(
            directory, "sweep", "sd", values, [p.final_sd for p in points]
        )
    return 0


def _cmd_compare(args) -> int:
    config = _load(args)
    for value in args.w_values:
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"reliability value {value:g} outside [0, 1]")
    rows = compare_models(config, args.w_values, workers=args.workers)
    for row in rows:
        print(
            f"w={row.reliability:g} "
            f"model1_mean={_format(row.model1_mean)} "
            f"model1_sd={_format(row.model1_sd)} "
            f"model2_mean={_format(row.model2_mean)} "
            f"model2_sd={_format(row.model2_sd)}"
        )
    if args.emit_plot_data:
        directory = _plot_dir(args)
        ws = [row.reliability for row in rows]
        for model in (1, 2):
            _emit_series(
                directory, "compare", f"model{model}_mean", ws,
                [getattr(row, f"model{model}_mean") for row in rows],
            )
            _emit_series(
                directory, "compare", f"model{model}_sd", ws,
                [getattr(row, f"model{model}_sd") for row in rows],
            )
    return 0


def _cmd_validate(args) -> int:
    config = _load(args)
    for value in args.h_values:
        if not 0.0 < value < 1.0:
            raise ConfigError(f"update rate {value:g} outside (0, 1)")
    if config.game.model != 2:
        raise ConfigError("validate requires model = 2 in the config")
    if config.game.schedule != "ordered":
        raise ConfigError("validate requires schedule = ordered in the config")
    rows = validate_predictions(
        config, args.h_values, n_samples=args.samples, workers=args.workers
    )
    for row in rows:
        print(
            f"h={row.rate:g} "
            f"sup_mean_deviation={_format(row.sup_mean_deviation)} "
            f"sup_variance_deviation={_format(row.sup_variance_deviation)}"
        )
    if args.emit_plot_data:
        directory = _plot_dir(args)
        for row in rows:
            tag = f"h{row.rate:g}"
            _emit_series(
                directory, "validate", f"{tag}_sim_mean", row.times,
                row.empirical_mean,
            )
            _emit_series(
                directory, "validate", f"{tag}_pred_mean", row.times,
                row.predicted_mean,
            )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
