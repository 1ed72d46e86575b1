"""Command-line interface.

Subcommands:
    run        execute one experiment config (JSON file)
    sweep      cross product of one config axis against a seed list
    estimate   run a config, collect smoothness samples, fit (L0, L1)
    lowerbound print the hard-construction thresholds and run the
               GD-vs-sign-method demonstration
    check      run the invariant suite and print a pass/fail table

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

from .core import OptLabError
from .harness import (
    parse_config,
    resolve_output_dir,
    run_experiment,
    run_invariant_suite,
    run_sweep,
)
from .optimizers import HyperParams, NonFiniteIterate, run_optimizer
from .problems import LowerBoundSpec, make_lower_bound_case1, make_lower_bound_case2
from .smoothness import SmoothnessSample, fit_l0l1
from .theory import check_gd_divergence, gd_lower_bound_iterations

__all__ = ["cli_main", "main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optlab",
        description="Deterministic experiment harness for sign-based optimizers "
        "on (L0, L1)-smooth test problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one experiment config")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--output-dir", help="override the config's output directory")

    p_sweep = sub.add_parser("sweep", help="sweep one config axis against seeds")
    p_sweep.add_argument("config", help="path to the base JSON config")
    p_sweep.add_argument(
        "--axis", required=True, help="config field path, e.g. optimizer.eta or T"
    )
    p_sweep.add_argument(
        "--values", required=True, help="JSON array of axis values, e.g. [0.1,0.01]"
    )
    p_sweep.add_argument(
        "--seeds", required=True, help="JSON array of integer seeds, e.g. [1,2,3]"
    )
    p_sweep.add_argument("--output-dir", help="override the config's output directory")

    p_est = sub.add_parser(
        "estimate", help="run a config and fit (L0, L1) from trajectory samples"
    )
    p_est.add_argument("config", help="path to a JSON experiment config")
    p_est.add_argument("--output-dir", help="override the config's output directory")

    p_lb = sub.add_parser(
        "lowerbound", help="hard-construction thresholds and divergence demo"
    )
    p_lb.add_argument("--L0", type=float, required=True)
    p_lb.add_argument("--L1", type=float, required=True)
    p_lb.add_argument("--M", type=float, required=True)
    p_lb.add_argument("--eps", type=float, required=True)
    p_lb.add_argument("--x0", type=float, default=None, help="start point override")
    p_lb.add_argument(
        "--gap",
        type=float,
        default=None,
        help="f(x0) - f_star for the iteration bound (default: from the "
        "second construction's start point)",
    )
    p_lb.add_argument(
        "--eta-gd",
        type=float,
        default=None,
        help="GD step size for the divergence certificate (default 1.1 * eta_star)",
    )
    p_lb.add_argument(
        "--eta-alg1", type=float, default=0.01, help="sign-method step size"
    )
    p_lb.add_argument(
        "--steps", type=int, default=100, help="steps the certificate must cover"
    )
    p_lb.add_argument(
        "--budget", type=int, default=400, help="step budget for the sign method"
    )

    sub.add_parser("check", help="run the invariant suite")
    return parser


def _parse_json_list(text: str, flag: str) -> list:
    try:
        values = json.loads(text)
    except json.JSONDecodeError as e:
        raise OptLabError(f"{flag} must be a JSON array: {e}") from None
    if not isinstance(values, list):
        raise OptLabError(f"{flag} must be a JSON array, got {values!r}")
    return values


def _load_config(path: str, output_dir):
    text = Path(path).read_text()
    config = parse_config(text)
    if output_dir is not None:
        config.output_dir = output_dir
    return config


def _cmd_run(args) -> int:
    config = _load_config(args.config, args.output_dir)
    summary = run_experiment(config)
    print(f"run {config.name}: T={config.T} seed={config.seed}")
    print(f"  min grad_l1 = {summary.min_grad_l1:.17g} at t = {summary.argmin_t}")
    print(f"  final f     = {summary.final_f:.17g}")
    print(f"  diverged    = {str(summary.diverged).lower()}")
    print(f"  trajectory  -> {summary.trajectory_path}")
    if summary.smoothness_path:
        print(f"  smoothness  -> {summary.smoothness_path}")
    print(f"  summary     -> {summary.summary_path}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args.config, args.output_dir)
    values = _parse_json_list(args.values, "--values")
    seeds = _parse_json_list(args.seeds, "--seeds")
    for s in seeds:
        if not isinstance(s, int) or isinstance(s, bool):
            raise OptLabError(f"--seeds must contain integers, got {s!r}")
    summaries = run_sweep(config, args.axis, values, seeds)
    out_dir = resolve_output_dir(config)
    print(f"sweep {config.name}: axis {args.axis}, {len(summaries)} cells")
    for summary in summaries:
        echo = summary.config_echo
        print(
            f"  {echo['name']}: min grad_l1 = {summary.min_grad_l1:.6g} "
            f"at t = {summary.argmin_t}, diverged = {str(summary.diverged).lower()}"
        )
    print(f"  table -> {out_dir / (config.name + '_sweep.csv')}")
    return 0


def _read_smoothness_csv(path: Path) -> list:
    samples = []
    lines = path.read_text().splitlines()
    for line in lines[1:]:
        t_str, j_str, gm, ll = line.split(",")
        samples.append(
            SmoothnessSample(
                grad_magnitude=float(gm),
                local_lipschitz=float(ll),
                t=int(t_str),
                j=int(j_str),
            )
        )
    return samples


def _cmd_estimate(args) -> int:
    config = _load_config(args.config, args.output_dir)
    if config.smoothness_stride is None:
        config.smoothness_stride = 1
    summary = run_experiment(config)
    if summary.smoothness_path is None:
        raise OptLabError(
            "run produced no smoothness samples (diverged before the second step?)"
        )
    samples = _read_smoothness_csv(Path(summary.smoothness_path))
    fit = fit_l0l1(samples)
    fit_path = resolve_output_dir(config) / f"{config.name}_fit.json"
    fit_path.write_text(json.dumps(asdict(fit), indent=2, sort_keys=True) + "\n")
    print(f"estimate {config.name}: {fit.n_samples} samples")
    print(f"  L0_hat       = {fit.L0_hat:.17g}")
    print(f"  L1_hat       = {fit.L1_hat:.17g}")
    print(f"  residual_rms = {fit.residual_rms:.17g}")
    print(f"  samples      -> {summary.smoothness_path}")
    print(f"  fit          -> {fit_path}")
    return 0


def _cmd_lowerbound(args) -> int:
    spec = LowerBoundSpec(L0=args.L0, L1=args.L1, M=args.M, eps=args.eps, x0=args.x0)
    case1 = make_lower_bound_case1(spec)
    eta_star = case1.metadata["eta_star"]
    print(f"eta_star = {eta_star:.17g}")

    if args.gap is not None:
        gap = args.gap
    else:
        case2 = make_lower_bound_case2(spec)
        x0_2 = case2.metadata["x0"]
        gap = case2.value([x0_2]) - case2.f_star
        print(f"gap f(x0) - f_star = {gap:.17g} (second construction, x0 = {x0_2:g})")
    bound = gd_lower_bound_iterations(spec, gap)
    print(f"GD iteration lower bound (gap {gap:g}) = {bound:.17g}")

    eta_gd = args.eta_gd if args.eta_gd is not None else 1.1 * eta_star
    report = check_gd_divergence(spec, eta_gd, steps=args.steps)
    if report.certified:
        print(
            f"GD at eta = {eta_gd:.6g}: certified sign-alternating divergence "
            f"for {report.steps_checked} steps"
        )
    else:
        print(
            f"GD at eta = {eta_gd:.6g}: divergence NOT certified "
            f"(failed at step {report.failed_at})"
        )

    hp = HyperParams(method="generalized_signsgd", eta=args.eta_alg1, beta1=0.9, beta2=0.0)
    x0 = case1.metadata["x0"]
    try:
        trajectory = run_optimizer(
            case1, [x0], hp, args.budget, seed=0, noise_on=False
        )
        records = trajectory.records
    except NonFiniteIterate as e:
        records = e.records
    hit = next((rec.t for rec in records if rec.grad_l1 <= args.eps), None)
    if hit is not None:
        print(
            f"sign method at eta = {args.eta_alg1:g}: |f'| <= {args.eps:g} "
            f"reached at step {hit} (budget {args.budget})"
        )
    else:
        print(
            f"sign method at eta = {args.eta_alg1:g}: |f'| <= {args.eps:g} "
            f"not reached within {args.budget} steps"
        )
    return 0


def _cmd_check() -> int:
    results = run_invariant_suite()
    width = max(len(name) for name, _, _ in results)
    failures = 0
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        print(f"{name:<{width}}  {status}  {detail}")
        if not passed:
            failures += 1
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 0 if failures == 0 else 1


def cli_main(argv) -> int:
    """Parse argv and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "lowerbound":
            return _cmd_lowerbound(args)
        if args.command == "check":
            return _cmd_check()
        parser.error(f"unknown command {args.command!r}")
    except OptLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
