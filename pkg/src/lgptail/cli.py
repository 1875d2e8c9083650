"""Command-line interface: ``lgptail <command> [options]``.

Exit code 0 means success. Input or configuration errors exit with 2; numerical failures exit with 3.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .density import make_grid
from .gpd import Family, SyntheticFamily
from .io import (
    InputError,
    RunConfig,
    build_manifest,
    environment,
    load_draws,
    preprocess,
    read_config_file,
    read_values,
    save_draws,
    write_records,
)
from .lowrank import build_lambda_grid, cached_lambda_grid, make_knots
from .model import SemiparametricModel
from .pot import default_threshold_grid, fit_pot, pot_tail_quantile, pot_xi_curve
from .priors import PriorConfig
from .sampler import SamplerConfig, batch_means_se, run_chain
from .simstudy import ExperimentSpec, run_experiment, write_manifest, write_table
from .summaries import DEFAULT_PROBS, quantile_report, return_period, xi_draws, xi_summary

logger = logging.getLogger("lgptail")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

# flag dest -> RunConfig flat key
_RUN_FLAGS = [
    "grid_size", "n_knots", "alpha_min", "a_kappa", "b_kappa", "a_lambda", "b_lambda", "n_iter", "burn_in", "thin",
    "target_accept", "truncate_below", "jitter_half_width", "support_shift", "seed", "input", "output",
]


def _add_run_options(p: argparse.ArgumentParser, with_model: bool = True) -> None:
    p.add_argument("--config", help="flat key=value file, or a JSON manifest from an earlier run")
    p.add_argument("--input", help="CSV of nonnegative values (optional header, optional second column)")
    p.add_argument("--output", help="output file")
    p.add_argument("--seed", type=int)
    g = p.add_argument_group("preprocessing")
    g.add_argument("--truncate-below", type=float, help="drop records below this value")
    g.add_argument("--jitter-half-width", type=float, help="half width of the uniform jitter")
    g.add_argument("--support-shift", type=float, help="known lower support bound subtracted from the data")
    g = p.add_argument_group("sampler")
    g.add_argument("--n-iter", type=int)
    g.add_argument("--burn-in", type=int)
    g.add_argument("--thin", type=int)
    g.add_argument("--target-accept", type=float)
    g = p.add_argument_group("prior")
    g.add_argument("--alpha-min", type=float)
    if with_model:
        g.add_argument("--a-kappa", type=float)
        g.add_argument("--b-kappa", type=float)
        g.add_argument("--a-lambda", type=float)
        g.add_argument("--b-lambda", type=float)
        g = p.add_argument_group("model")
        g.add_argument("--grid-size", type=int, help="grid points L (default 101)")
        g.add_argument("--n-knots", type=int, help="knots m (default 11)")


def _run_config(args) -> RunConfig:
    """Defaults, then the config file, then flags (flags win)."""
    values: dict = {}
    if args.config:
        if args.config.endswith(".json"):
            try:
                manifest = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read manifest {args.config}: {exc}") from exc
            values = RunConfig.from_dict(manifest["config"]).to_flat()
        else:
            values = read_config_file(args.config)
    for key in _RUN_FLAGS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    try:
        return RunConfig.from_flat(values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"inconsistent configuration: {exc}") from exc


def _load_dataset(config: RunConfig):
    if not config.input:
        raise InputError("no input file given (--input or 'input' in the config)")
    raw, _ = read_values(config.input)
    return preprocess(raw, config.truncate_below, config.jitter_half_width, config.support_shift, config.seed)


def _lambda_grid(config: RunConfig, cache_dir):
    knots, grid = make_knots(config.n_knots), make_grid(config.grid_size)
    if cache_dir:
        return cached_lambda_grid(cache_dir, knots, grid, config.prior.a_lambda, config.prior.b_lambda)
    return build_lambda_grid(knots, grid, config.prior.a_lambda, config.prior.b_lambda)


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_fit(args) -> int:
    config = _run_config(args)
    data = _load_dataset(config)
    model = SemiparametricModel(data, config.prior, lambda_grid=_lambda_grid(config, args.lambda_cache))
    draws = run_chain(
        _kernels.semi_log_posterior,
        model.kernel_args(),
        model.initial_state().to_vector(),
        config.sampler,
        names=model.names,
        block_names=["omega", "theta", "joint"],
        rng=np.random.default_rng(config.seed),
    )
    xi = xi_summary(model, draws.samples)
    extra = {"command": "fit", "clamped": model.clamp_count(draws.samples)}
    manifest = build_manifest(config, data, draws, extra)
    out = Path(config.output or "draws.csv")
    save_draws(out, draws, manifest)
    _print_json({
        "n": data.n,
        "original_count": data.original_count,
        "draws": len(draws),
        "acceptance_post_burn": dict(zip(draws.block_names, draws.acceptance_post_burn.round(4).tolist())),
        "xi": xi.to_dict(),
        "xi_mcse": batch_means_se(xi_draws(model, draws.samples)),
        "output": str(out),
    })
    return EXIT_OK


def cmd_fit_pot(args) -> int:
    config = _run_config(args)
    data = _load_dataset(config)
    y = data.y
    if args.threshold is not None:
        threshold = args.threshold
    else:
        threshold = float(np.quantile(y, args.threshold_quantile))
    fit = fit_pot(y, threshold, config.prior, config.sampler, args.min_exceedances,
                  rng=np.random.default_rng(config.seed))
    probs = list(args.probs)
    scaled = [p / data.inclusion_fraction for p in probs]
    report = {
        "command": "fit-pot",
        "config": config.to_dict(),
        "threshold": threshold,
        "exceedances": fit.k,
        "xi": fit.xi_summary().to_dict(),
        "quantiles": [
            {"p": p, **iv.to_dict()} for p, iv in zip(probs, pot_tail_quantile(fit, scaled))
        ],
        "acceptance_post_burn": fit.draws.acceptance_post_burn.tolist(),
        "environment": environment(),
    }
    if config.output:
        Path(config.output).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _print_json({k: report[k] for k in ("threshold", "exceedances", "xi", "quantiles")})
    return EXIT_OK


def cmd_simulate(args) -> int:
    family = SyntheticFamily(args.family, 1.0 / args.xi)
    y = family.sample(args.n, np.random.default_rng(args.seed))
    header = f"# family={family.kind.value} xi={args.xi!r} n={args.n} seed={args.seed} version={__version__}\n"
    text = header + "value\n" + "".join(f"{v!r}\n" for v in y.tolist())
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_study(args) -> int:
    specs, rows = [], []
    for family in args.family:
        for xi in args.xi:
            for method in args.method:
                spec = ExperimentSpec(family=family, xi_true=xi, n=args.n, replicates=args.replicates,
                                      probs=tuple(args.probs), method=method, seed=args.seed, n_iter=args.n_iter,
                                      thin=args.thin, threshold_quantile=args.threshold_quantile)
                if args.replicates >= 100 and args.n_iter >= 50_000:
                    logger.warning("full-scale run: %d replicates x %d iterations may take many hours",
                                   args.replicates, args.n_iter)
                t0 = time.perf_counter()
                row = run_experiment(spec, n_jobs=args.jobs)
                logger.info("%s xi=%g %s done in %.1fs", family, xi, method, time.perf_counter() - t0)
                specs.append(spec)
                rows.append(row)
                print(json.dumps(row.as_record(spec.probs), sort_keys=True))
    out = Path(args.output)
    write_table(rows, tuple(args.probs), out)
    write_manifest(specs, out.with_name(out.name + ".json"), {"command": "study", "environment": environment()})
    return EXIT_OK


def cmd_summarize(args) -> int:
    loaded = load_draws(args.draws)
    config = loaded.config
    data = loaded.dataset()
    model = SemiparametricModel(data, config.prior, lambda_grid=_lambda_grid(config, args.lambda_cache))
    states = loaded.states
    if states.shape[1] != model.dim:
        raise InputError(f"draws have {states.shape[1]} state columns; the configuration implies {model.dim}")
    records = []
    xi = xi_summary(model, states)
    records.append({"quantity": "xi", "argument": None, "estimate": xi.estimate, "lower95": xi.lower95,
                    "upper95": xi.upper95})
    for q in quantile_report(model, states, args.probs, data.inclusion_fraction):
        records.append({"quantity": "tail_quantile", "argument": q.p, "estimate": q.estimate, "lower95": q.lower95,
                        "upper95": q.upper95})
    for level in args.levels or []:
        rp = return_period(model, states, level, args.records_per_year, data.inclusion_fraction)
        records.append({"quantity": "return_period_years", "argument": level, "estimate": rp.estimate,
                        "lower95": rp.lower95, "upper95": rp.upper95})
    if args.output:
        write_records(records, args.output)
    for rec in records:
        arg = "" if rec["argument"] is None else f"{rec['argument']:g}"
        print(f"{rec['quantity']:<20} {arg:>8}  {rec['estimate']:.5g}  [{rec['lower95']:.5g}, {rec['upper95']:.5g}]")
    return EXIT_OK


def cmd_xi_curve(args) -> int:
    config = _run_config(args)
    data = _load_dataset(config)
    thresholds = default_threshold_grid(args.start, args.stop, args.step)
    points = pot_xi_curve(data.y, thresholds, config.prior, config.sampler, args.min_exceedances,
                          seed=config.seed, n_jobs=args.jobs)
    records = [{"threshold": p.threshold, "exceedances": p.k, "xi": p.estimate, "lower95": p.lower95,
                "upper95": p.upper95} for p in points]
    write_records(records, config.output or "xi_curve.csv")
    gaps = sum(p.is_gap for p in points)
    print(f"{len(points)} thresholds, {gaps} gaps (fewer than {args.min_exceedances} exceedances)")
    return EXIT_OK


def _time_call(fn, repeats: int) -> float:
    fn()
    best = np.inf
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def bench_likelihood(n: int, m: int = 11, L: int = 101, repeats: int = 200, seed: int = 0) -> float:
    """Seconds per compiled log-posterior evaluation at size ``(n, m, L)``."""
    rng = np.random.default_rng(seed)
    y = SyntheticFamily("gpd", 4.0).sample(n, rng)
    model = SemiparametricModel(y, PriorConfig(), grid_size=L, n_knots=m)
    args = model.kernel_args()
    x = model.initial_state().to_vector()
    x[2:] = rng.normal(scale=0.3, size=m)
    return _time_call(lambda: _kernels.semi_log_posterior(x, args), repeats)


def bench_chain(n: int, n_iter: int = 5000, seed: int = 0, lambda_grid=None) -> float:
    rng = np.random.default_rng(seed)
    y = SyntheticFamily("gpd", 4.0).sample(n, rng)
    model = SemiparametricModel(y, PriorConfig(), lambda_grid=lambda_grid)
    config = SamplerConfig(n_iter=n_iter, seed=seed)
    t0 = time.perf_counter()
    run_chain(_kernels.semi_log_posterior, model.kernel_args(), model.initial_state().to_vector(), config)
    return time.perf_counter() - t0


def cmd_bench(args) -> int:
    report = {"likelihood": [], "doubling": {}, "chains": [], "environment": environment()}
    base = dict(n=args.base_n, m=11, L=101)
    t_base = bench_likelihood(base["n"], base["m"], base["L"], args.repeats, args.seed)
    report["likelihood"].append({**base, "seconds": t_base})
    for key in ("n", "m", "L"):
        size = dict(base)
        size[key] *= 2
        t = bench_likelihood(size["n"], size["m"], size["L"], args.repeats, args.seed)
        report["likelihood"].append({**size, "seconds": t})
        report["doubling"][key] = t / t_base
    lgrid = build_lambda_grid(make_knots(11), make_grid(101))
    bench_chain(min(args.chain_n), 200, args.seed, lgrid)  # warm the compiled sampler
    for n in args.chain_n:
        report["chains"].append({"n": n, "iterations": args.chain_iter,
                                 "seconds": bench_chain(n, args.chain_iter, args.seed, lgrid)})
    longest = report["chains"][-1]["seconds"]
    for row in report["chains"]:
        row["ratio_to_largest"] = row["seconds"] / longest
    if args.output:
        Path(args.output).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for k, v in report["doubling"].items():
        print(f"doubling {k}: {v:.2f}x")
    for row in report["chains"]:
        print(f"chain n={row['n']}: {row['seconds']:.2f}s ({row['ratio_to_largest']:.2f}x)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lgptail", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the semiparametric model and persist posterior draws")
    _add_run_options(p)
    p.add_argument("--lambda-cache", help="directory caching the discretized lambda prior")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("fit-pot", help="Bayesian GPD fit to excesses over a threshold")
    _add_run_options(p, with_model=False)
    p.add_argument("--threshold", type=float, help="threshold (default: empirical --threshold-quantile)")
    p.add_argument("--threshold-quantile", type=float, default=0.9)
    p.add_argument("--min-exceedances", type=int, default=30)
    p.add_argument("--probs", type=float, nargs="+", default=list(DEFAULT_PROBS))
    p.set_defaults(func=cmd_fit_pot)

    p = sub.add_parser("simulate", help="draw a synthetic sample")
    p.add_argument("--family", choices=[f.value for f in Family], default="gpd")
    p.add_argument("--xi", type=float, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="simulation study writing per-setting accuracy metrics as CSV")
    p.add_argument("--family", nargs="+", default=["gpd"], choices=[f.value for f in Family])
    p.add_argument("--xi", type=float, nargs="+", default=[0.5])
    p.add_argument("--method", nargs="+", default=["semi", "thresh"], choices=["semi", "thresh"])
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--n-iter", type=int, default=20_000)
    p.add_argument("--thin", type=int, default=10)
    p.add_argument("--threshold-quantile", type=float, default=0.9)
    p.add_argument("--probs", type=float, nargs="+", default=list(DEFAULT_PROBS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--output", default="study.csv")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("summarize", help="tail quantiles and return periods from a draws file")
    p.add_argument("--draws", required=True)
    p.add_argument("--probs", type=float, nargs="+", default=list(DEFAULT_PROBS))
    p.add_argument("--levels", type=float, nargs="*")
    p.add_argument("--records-per-year", type=float, default=365.25)
    p.add_argument("--lambda-cache")
    p.add_argument("--output", help=".csv or .json report")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("xi-curve", help="POT xi estimates across a threshold grid")
    _add_run_options(p, with_model=False)
    p.add_argument("--start", type=float, default=0.005)
    p.add_argument("--stop", type=float, default=3.0)
    p.add_argument("--step", type=float, default=0.025)
    p.add_argument("--min-exceedances", type=int, default=30)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_xi_curve)

    p = sub.add_parser("bench", help="time likelihood evaluations and chains")
    p.add_argument("--base-n", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=200)
    p.add_argument("--chain-n", type=int, nargs="+", default=[1061, 3645, 6180])
    p.add_argument("--chain-iter", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
