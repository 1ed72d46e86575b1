"""Experiment harness: config parsing, single runs, sweeps, invariant suite.

Configs are JSON, one experiment per file. A run writes
``{name}_trajectory.csv`` (and, with ``smoothness_stride`` set,
``{name}_smoothness.csv``) plus ``{name}_summary.json`` into the resolved
output directory: the config's ``output_dir`` if given, else the
OPTLAB_OUTPUT_DIR environment variable, else the working directory.

Determinism contract: for a fixed config the trajectory and smoothness CSV
bytes, and every summary field except wallclock_seconds, are identical
across runs and machines with the same float64 arithmetic. Floats are
serialized with 17 significant digits so values round-trip exactly.
"""

import copy
import json
import math
import os
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .core import OptLabError, Rng, norm, param_vector
from .optimizers import (
    METHODS,
    HyperParams,
    NonFiniteIterate,
    Trajectory,
    apply_step,
    init_state,
    run_optimizer,
)
from .problems import (
    LowerBoundSpec,
    NoiseSpec,
    Problem,
    SmoothnessSpec,
    finite_difference_gradient,
    make_exp_separable,
    make_lower_bound_case1,
    make_lower_bound_case2,
    make_quadratic,
)
from .smoothness import (
    NoCoordinateMoved,
    estimate_coordinate_smoothness,
    fit_l0l1,
)
from .theory import (
    check_descent_lemma,
    check_gd_divergence,
    check_second_order,
    check_update_bound,
    theoretical_hyperparams,
)

__all__ = [
    "ParseError",
    "MissingField",
    "ConflictingFields",
    "BadAxis",
    "ExperimentConfig",
    "SummaryRecord",
    "parse_config",
    "build_problem",
    "resolve_output_dir",
    "run_experiment",
    "run_sweep",
    "run_invariant_suite",
]

DIVERGENCE_F_LIMIT = 1e12

PROBLEM_KINDS = (
    "quadratic",
    "exp_separable",
    "lower_bound_case1",
    "lower_bound_case2",
)

_TOP_KEYS = {
    "name",
    "problem",
    "optimizer",
    "T",
    "seed",
    "x1",
    "noise_on",
    "log_stride",
    "smoothness_stride",
    "output_dir",
    "theory_mode",
    "Delta",
}

_OPTIMIZER_KEYS = {
    "method",
    "eta",
    "beta1",
    "beta2",
    "clip_gamma",
    "clip_nu",
    "adam_eps",
    "bias_correction",
    "second_moment_source",
}

_PROBLEM_KEYS = {
    "quadratic": {"kind", "c", "sigma"},
    "exp_separable": {"kind", "a", "sigma"},
    "lower_bound_case1": {"kind", "L0", "L1", "M", "eps", "x0"},
    "lower_bound_case2": {"kind", "L0", "L1", "M", "eps", "x0"},
}


class ParseError(OptLabError):
    """The config document is malformed (syntax, type, or unknown key)."""


class MissingField(OptLabError):
    """A required config field is absent."""

    def __init__(self, field_name: str):
        super().__init__(f"missing required field {field_name!r}")
        self.field_name = field_name


class ConflictingFields(OptLabError):
    """Mutually exclusive config fields were both given."""


class BadAxis(OptLabError):
    """The sweep axis path is unknown, non-scalar, or has no values."""


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description.

    ``problem_params`` holds the kind-specific keys exactly as given
    (coefficient lists, noise sigma, hard-construction constants). With
    ``theory_mode`` on, ``optimizer.eta`` and ``optimizer.beta1`` are
    derived from (Delta, T, problem constants) and re-derived by
    run_experiment whenever a sweep changes one of those inputs.
    """

    name: str
    problem_kind: str
    problem_params: dict
    optimizer: HyperParams
    T: int
    seed: int
    x1: Optional[list]
    noise_on: bool = True
    log_stride: int = 1
    smoothness_stride: Optional[int] = None
    output_dir: Optional[str] = None
    theory_mode: bool = False
    Delta: Optional[float] = None


@dataclass
class SummaryRecord:
    """Per-run result row.

    min_grad_l1 is the minimum of grad_l1 over logged steps with a finite
    value, and argmin_t the step attaining it (-1 when no step qualifies).
    """

    min_grad_l1: float
    argmin_t: int
    final_f: float
    diverged: bool
    wallclock_seconds: float
    config_echo: dict
    invariant_report: dict
    trajectory_path: Optional[str] = None
    summary_path: Optional[str] = None
    smoothness_path: Optional[str] = None


# --- config parsing -----------------------------------------------------------


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise ParseError(msg)


def _as_bool(obj: dict, key: str, default: bool) -> bool:
    v = obj.get(key, default)
    _expect(isinstance(v, bool), f"field {key!r} must be a boolean, got {v!r}")
    return v


def _as_int(obj: dict, key: str, default=None, minimum=None):
    v = obj.get(key, default)
    if v is None:
        return None
    _expect(isinstance(v, int) and not isinstance(v, bool), f"field {key!r} must be an integer, got {v!r}")
    if minimum is not None:
        _expect(v >= minimum, f"field {key!r} must be >= {minimum}, got {v}")
    return v

def _as_number(obj: dict, key: str, default=None):
    v = obj.get(key, default)
    if v is None:
        return None
    _expect(
        isinstance(v, (int, float)) and not isinstance(v, bool),
        f"field {key!r} must be a number, got {v!r}",
    )
    return float(v)


def _as_number_list(obj: dict, key: str):
    v = obj.get(key)
    if v is None:
        return None
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return [float(v)]
    _expect(isinstance(v, list) and len(v) > 0, f"field {key!r} must be a nonempty list of numbers")
    for item in v:
        _expect(
            isinstance(item, (int, float)) and not isinstance(item, bool),
            f"field {key!r} must contain numbers only, got {item!r}",
        )
    return [float(item) for item in v]


def parse_config(text: str) -> ExperimentConfig:
    """Parse a JSON experiment document and apply the documented defaults.

    Defaults: beta1 = 0.9; adam gets eta = 0.0009 and beta2 = 0.999 when
    omitted; every other method requires an explicit eta unless theory_mode
    derives it. noise_on defaults to on, log_stride to 1, seed to 0. Unknown
    keys are rejected rather than ignored. theory_mode requires Delta and
    forbids explicit eta/beta1 (ConflictingFields).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    _expect(isinstance(doc, dict), "top level must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    _expect(not unknown, f"unknown top-level field(s): {sorted(unknown)}")

    name = doc.get("name", "experiment")
    _expect(isinstance(name, str) and name != "", "field 'name' must be a nonempty string")

    if "T" not in doc:
        raise MissingField("T")
    T = _as_int(doc, "T", minimum=1)
    seed = _as_int(doc, "seed", default=0)
    noise_on = _as_bool(doc, "noise_on", True)
    log_stride = _as_int(doc, "log_stride", default=1, minimum=1)
    smoothness_stride = _as_int(doc, "smoothness_stride", default=None, minimum=1)
    theory_mode = _as_bool(doc, "theory_mode", False)
    output_dir = doc.get("output_dir")
    if output_dir is not None:
        _expect(isinstance(output_dir, str), "field 'output_dir' must be a string")

    Delta = _as_number(doc, "Delta")
    if theory_mode:
        if Delta is None:
            raise MissingField("Delta")
        _expect(Delta > 0, f"field 'Delta' must be positive, got {Delta}")
    else:
        _expect(Delta is None, "field 'Delta' is only meaningful with theory_mode")

    # -- problem ---------------------------------------------------------
    if "problem" not in doc:
        raise MissingField("problem")
    prob = doc["problem"]
    _expect(isinstance(prob, dict), "field 'problem' must be an object")
    kind = prob.get("kind")
    if kind is None:
        raise MissingField("problem.kind")
    _expect(kind in PROBLEM_KINDS, f"unknown problem kind {kind!r}, expected one of {PROBLEM_KINDS}")
    unknown = set(prob) - _PROBLEM_KEYS[kind]
    _expect(not unknown, f"unknown field(s) for problem kind {kind!r}: {sorted(unknown)}")

    params: dict = {}
    if kind in ("quadratic", "exp_separable"):
        coef_key = "c" if kind == "quadratic" else "a"
        coef = _as_number_list(prob, coef_key)
        if coef is None:
            raise MissingField(f"problem.{coef_key}")
        sigma = _as_number_list(prob, "sigma")
        if sigma is None:
            sigma = [0.0] * len(coef)
        _expect(
            len(sigma) == len(coef),
            f"problem.sigma length {len(sigma)} must match problem.{coef_key} length {len(coef)}",
        )
        params = {coef_key: coef, "sigma": sigma}
    else:
        for req in ("L0", "L1", "M", "eps"):
            if req not in prob:
                raise MissingField(f"problem.{req}")
            params[req] = _as_number(prob, req)
        params["x0"] = _as_number(prob, "x0")

    # -- optimizer -------------------------------------------------------
    if "optimizer" not in doc:
        raise MissingField("optimizer")
    opt = doc["optimizer"]
    _expect(isinstance(opt, dict), "field 'optimizer' must be an object")
    unknown = set(opt) - _OPTIMIZER_KEYS
    _expect(not unknown, f"unknown optimizer field(s): {sorted(unknown)}")
    method = opt.get("method")
    if method is None:
        raise MissingField("optimizer.method")
    _expect(method in METHODS, f"unknown method {method!r}, expected one of {METHODS}")

    eta = _as_number(opt, "eta")
    beta1 = _as_number(opt, "beta1")
    if theory_mode:
        if eta is not None:
            raise ConflictingFields("theory_mode derives eta; remove optimizer.eta")
        if beta1 is not None:
            raise ConflictingFields("theory_mode derives beta1; remove optimizer.beta1")
    else:
        if eta is None:
            if method == "adam":
                eta = 0.0009
            else:
                raise MissingField("optimizer.eta")
        if beta1 is None:
            beta1 = 0.9

    beta2 = _as_number(opt, "beta2")
    if beta2 is None:
        beta2 = 0.999 if method == "adam" else 0.0

    kwargs = dict(
        method=method,
        beta2=beta2,
        clip_gamma=_as_number(opt, "clip_gamma"),
        adam_eps=_as_number(opt, "adam_eps", default=1e-8),
        bias_correction=_as_bool(opt, "bias_correction", True),
        second_moment_source=opt.get("second_moment_source", "momentum"),
    )
    clip_nu = _as_int(opt, "clip_nu", default=1)
    kwargs["clip_nu"] = clip_nu
    try:
        if theory_mode:
            hp = HyperParams(eta=1.0, beta1=0.0, **kwargs)
        else:
            hp = HyperParams(eta=eta, beta1=beta1, **kwargs)
    except ValueError as e:
        raise ParseError(str(e)) from None

    # -- start point -------------------------------------------------------
    x1 = _as_number_list(doc, "x1")
    if x1 is None and kind in ("quadratic", "exp_separable"):
        raise MissingField("x1")

    config = ExperimentConfig(
        name=name,
        problem_kind=kind,
        problem_params=params,
        optimizer=hp,
        T=T,
        seed=seed,
        x1=x1,
        noise_on=noise_on,
        log_stride=log_stride,
        smoothness_stride=smoothness_stride,
        output_dir=output_dir,
        theory_mode=theory_mode,
        Delta=Delta,
    )
    if theory_mode:
        # Resolve once so the parsed config is complete; run_experiment
        # re-derives from the then-current (Delta, T, problem) anyway.
        problem = build_problem(kind, params)
        config.optimizer = _resolved_hyperparams(config, problem)
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig) -> None:
    """Cross-field checks shared by parse_config and run_sweep cells."""
    if config.T < 1:
        raise ParseError(f"T must be >= 1, got {config.T}")
    if config.log_stride < 1:
        raise ParseError(f"log_stride must be >= 1, got {config.log_stride}")
    if config.smoothness_stride is not None and config.smoothness_stride < 1:
        raise ParseError(f"smoothness_stride must be >= 1, got {config.smoothness_stride}")
    if config.problem_kind not in PROBLEM_KINDS:
        raise ParseError(f"unknown problem kind {config.problem_kind!r}")
    if config.theory_mode and (config.Delta is None or config.Delta <= 0):
        raise ParseError(f"theory_mode requires positive Delta, got {config.Delta}")


def build_problem(kind: str, params: dict) -> Problem:
    """Construct the packaged problem named by ``kind``."""
    if kind == "quadratic":
        return make_quadratic(params["c"], params["sigma"])
    if kind == "exp_separable":
        return make_exp_separable(params["a"], params["sigma"])
    if kind in ("lower_bound_case1", "lower_bound_case2"):
        spec = LowerBoundSpec(
            L0=params["L0"],
            L1=params["L1"],
            M=params["M"],
            eps=params["eps"],
            x0=params.get("x0"),
        )
        if kind == "lower_bound_case1":
            return make_lower_bound_case1(spec)
        return make_lower_bound_case2(spec)
    raise ParseError(f"unknown problem kind {kind!r}")


def resolve_output_dir(config: ExperimentConfig) -> Path:
    """config.output_dir, else $OPTLAB_OUTPUT_DIR, else the working directory."""
    if config.output_dir is not None:
        return Path(config.output_dir)
    env = os.environ.get("OPTLAB_OUTPUT_DIR")
    if env:
        return Path(env)
    return Path.cwd()


# --- single runs --------------------------------------------------------------


def _resolved_hyperparams(config: ExperimentConfig, problem: Problem) -> HyperParams:
    if not config.theory_mode:
        return config.optimizer
    schedule = theoretical_hyperparams(
        Delta=config.Delta,
        smoothness=problem.smoothness,
        noise=problem.noise,
        T=config.T,
        beta2=config.optimizer.beta2,
    )
    return replace(config.optimizer, eta=schedule.eta, beta1=schedule.beta1)


def _start_point(config: ExperimentConfig, problem: Problem) -> np.ndarray:
    if config.x1 is not None:
        return param_vector(config.x1)
    return np.array([problem.metadata["x0"]])


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _jsonify(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonify(obj.item())
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def _config_echo(config: ExperimentConfig, hp: HyperParams) -> dict:
    echo = {
        "name": config.name,
        "problem": {"kind": config.problem_kind, **config.problem_params},
        "optimizer": asdict(hp),
        "T": config.T,
        "seed": config.seed,
        "x1": config.x1,
        "noise_on": config.noise_on,
        "log_stride": config.log_stride,
        "smoothness_stride": config.smoothness_stride,
        "output_dir": config.output_dir,
        "theory_mode": config.theory_mode,
        "Delta": config.Delta,
    }
    return _jsonify(echo)


def _write_trajectory_csv(path: Path, trajectory: Trajectory, dimension: int) -> None:
    with_snapshot = bool(trajectory.records) and trajectory.records[0].x_snapshot is not None
    cols = ["t", "f_value", "grad_l1", "grad_l2", "update_linf"]
    if with_snapshot:
        cols += [f"x_{j}" for j in range(min(dimension, 4))]
    lines = [",".join(cols)]
    for rec in trajectory.records:
        row = [
            str(rec.t),
            _fmt(rec.f_value),
            _fmt(rec.grad_l1),
            _fmt(rec.grad_l2),
            _fmt(rec.update_linf),
        ]
        if with_snapshot:
            row += [_fmt(v) for v in rec.x_snapshot]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def _write_smoothness_csv(path: Path, problem: Problem, iterates: list, stride: int) -> int:
    """Coordinate smoothness samples from iterate pairs (x_t, x_{t+1}) taken
    every ``stride`` steps; returns the number of rows written."""
    lines = ["t,j,grad_magnitude,local_lipschitz"]
    n = 0
    for i in range(0, len(iterates) - 1, stride):
        try:
            samples = estimate_coordinate_smoothness(
                problem, iterates[i], iterates[i + 1], t=i + 1
            )
        except NoCoordinateMoved:
            continue
        for s in samples:
            lines.append(f"{s.t},{s.j},{_fmt(s.grad_magnitude)},{_fmt(s.local_lipschitz)}")
            n += 1
    path.write_text("\n".join(lines) + "\n")
    return n


def _trajectory_invariants(trajectory: Trajectory, hp: HyperParams) -> dict:
    report: dict = {}
    ts = [rec.t for rec in trajectory.records]
    report["steps_strictly_increasing"] = {
        "pass": all(a < b for a, b in zip(ts, ts[1:])),
        "max_violation": 0.0,
    }
    worst = 0.0
    for rec in trajectory.records:
        if math.isfinite(rec.grad_l1) and math.isfinite(rec.grad_l2):
            worst = max(worst, (rec.grad_l2 - rec.grad_l1) / max(1.0, rec.grad_l1))
    report["grad_l2_le_grad_l1"] = {"pass": worst <= 1e-12, "max_violation": worst}
    if hp.method == "generalized_signsgd" and hp.second_moment_source == "momentum":
        ratio = check_update_bound(trajectory, hp)
        report["update_bound"] = {
            "pass": ratio <= 1.0 + 1e-12,
            "max_violation": max(0.0, ratio - 1.0),
        }
    return report


def run_experiment(config: ExperimentConfig) -> SummaryRecord:
    """Execute one config; write trajectory CSV (+ optional smoothness CSV)
    and summary JSON; return the summary.

    A run is marked diverged when it hits a non-finite iterate/gradient or
    when the final |f| exceeds 1e12. Diverged runs still produce all output
    files from the records accumulated before the failure.
    """
    validate_config(config)
    t_start = time.perf_counter()
    problem = build_problem(config.problem_kind, config.problem_params)
    hp = _resolved_hyperparams(config, problem)
    x1 = _start_point(config, problem)
    keep = config.smoothness_stride is not None

    diverged = False
    try:
        trajectory = run_optimizer(
            problem,
            x1,
            hp,
            config.T,
            config.seed,
            config.noise_on,
            log_stride=config.log_stride,
            keep_iterates=keep,
        )
    except NonFiniteIterate as e:
        diverged = True
        trajectory = Trajectory(
            records=e.records,
            method=hp.method,
            second_moment_source=hp.second_moment_source,
        )

    out_dir = resolve_output_dir(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj_path = out_dir / f"{config.name}_trajectory.csv"
    _write_trajectory_csv(traj_path, trajectory, problem.dimension)

    smooth_path = None
    if keep and trajectory.iterates is not None and len(trajectory.iterates) > 1:
        smooth_path = out_dir / f"{config.name}_smoothness.csv"
        _write_smoothness_csv(smooth_path, problem, trajectory.iterates, config.smoothness_stride)

    min_grad = math.inf
    argmin_t = -1
    for rec in trajectory.records:
        if math.isfinite(rec.grad_l1) and rec.grad_l1 < min_grad:
            min_grad = rec.grad_l1
            argmin_t = rec.t
    if trajectory.final_state is not None:
        final_f = problem.value(trajectory.final_state.x)
    elif trajectory.records:
        final_f = trajectory.records[-1].f_value
    else:
        final_f = math.nan
    if not math.isfinite(final_f) or abs(final_f) > DIVERGENCE_F_LIMIT:
        diverged = True

    summary = SummaryRecord(
        min_grad_l1=min_grad,
        argmin_t=argmin_t,
        final_f=final_f,
        diverged=diverged,
        wallclock_seconds=time.perf_counter() - t_start,
        config_echo=_config_echo(config, hp),
        invariant_report=_trajectory_invariants(trajectory, hp),
        trajectory_path=str(traj_path),
        summary_path=str(out_dir / f"{config.name}_summary.json"),
        smoothness_path=str(smooth_path) if smooth_path else None,
    )
    payload = {
        "min_grad_l1": _jsonify(summary.min_grad_l1),
        "argmin_t": summary.argmin_t,
        "final_f": _jsonify(summary.final_f),
        "diverged": summary.diverged,
        "wallclock_seconds": summary.wallclock_seconds,
        "config_echo": summary.config_echo,
        "invariant_report": _jsonify(summary.invariant_report),
    }
    Path(summary.summary_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return summary


# --- sweeps -------------------------------------------------------------------

_SWEEPABLE_TOP = {"T", "seed", "noise_on", "log_stride", "Delta"}


def _set_axis(config: ExperimentConfig, axis: str, value) -> None:
    parts = axis.split(".")
    if len(parts) == 1:
        if parts[0] not in _SWEEPABLE_TOP:
            raise BadAxis(f"cannot sweep over {axis!r}")
        setattr(config, parts[0], value)
        return
    if len(parts) != 2:
        raise BadAxis(f"axis {axis!r} must be 'field' or 'section.field'")
    section, leaf = parts
    if section == "optimizer":
        if leaf not in {f.name for f in HyperParams.__dataclass_fields__.values()}:
            raise BadAxis(f"unknown optimizer field {leaf!r}")
        if config.theory_mode and leaf in ("eta", "beta1"):
            raise BadAxis(f"theory_mode derives optimizer.{leaf}; sweep T or Delta instead")
        try:
            config.optimizer = replace(config.optimizer, **{leaf: value})
        except ValueError as e:
            raise BadAxis(f"value {value!r} rejected for optimizer.{leaf}: {e}") from None
        return
    if section == "problem":
        if leaf not in config.problem_params:
            raise BadAxis(f"unknown problem field {leaf!r} for kind {config.problem_kind!r}")
        current = config.problem_params[leaf]
        if isinstance(current, list) and not isinstance(value, list):
            raise BadAxis(f"problem.{leaf} is a vector; sweep values must be lists")
        config.problem_params[leaf] = value
        return
    raise BadAxis(f"unknown config section {section!r}")


def _axis_tag(value) -> str:
    if isinstance(value, list):
        return "_".join(f"{v:g}" for v in value)
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def run_sweep(base: ExperimentConfig, axis: str, values: list, seeds: list) -> list:
    """Run the cross product of ``values`` x ``seeds`` over one config axis.

    Each cell deep-copies the base config, applies the axis value and seed,
    and gets the name ``{base}__{axis}={value}__seed={seed}``, so cell
    outputs are the same whether the cell runs alone or inside the sweep.
    Writes ``{base}_sweep.csv`` with one row per cell and returns the
    SummaryRecords in row order.
    """
    if not values:
        raise BadAxis("sweep needs at least one axis value")
    if not seeds:
        raise BadAxis("sweep needs at least one seed")
    axis_label = axis.replace(".", "_")
    summaries = []
    rows = []
    for value in values:
        for seed in seeds:
            cell = copy.deepcopy(base)
            _set_axis(cell, axis, value)
            cell.seed = seed
            cell.name = f"{base.name}__{axis_label}={_axis_tag(value)}__seed={seed}"
            validate_config(cell)
            summary = run_experiment(cell)
            summaries.append(summary)
            rows.append(
                (
                    _axis_tag(value),
                    seed,
                    summary.min_grad_l1,
                    summary.argmin_t,
                    summary.final_f,
                    summary.diverged,
                )
            )
    out_dir = resolve_output_dir(base)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"{axis},seed,min_grad_l1,argmin_t,final_f,diverged"]
    for tag, seed, mg, am, ff, dv in rows:
        lines.append(f"{tag},{seed},{_fmt(mg)},{am},{_fmt(ff)},{str(dv).lower()}")
    (out_dir / f"{base.name}_sweep.csv").write_text("\n".join(lines) + "\n")
    return summaries


# --- invariant suite ----------------------------------------------------------


def _suite_signum_steps() -> tuple:
    problem = make_quadratic(np.ones(10), np.ones(10))
    hp = HyperParams(method="generalized_signsgd", eta=0.01, beta1=0.9, beta2=0.0)
    state = init_state(np.ones(10))
    rng = Rng(7)
    bad = 0
    for _ in range(200):
        g = problem.gradient(state.x) + problem.noise.sigma * (2.0 * rng.uniforms(10) - 1.0)
        state, update = apply_step(state, g, hp)
        for u in update:
            if u != 0.0 and abs(u) != hp.eta:
                bad += 1
    return bad == 0, f"{bad} non-sign coordinate steps in 200 iterations"


def _suite_update_ratio() -> tuple:
    rng = Rng(11)
    worst = 0.0
    for _ in range(50):
        beta1 = 0.05 + 0.9 * rng.next_uniform()
        beta2 = (beta1 ** 2) * rng.next_uniform() * 0.999
        hp = HyperParams(method="generalized_signsgd", eta=1.0, beta1=beta1, beta2=beta2)
        state = init_state(np.zeros(4))
        bound = 1.0 / math.sqrt(1.0 - beta2)
        for _ in range(100):
            g = 2.0 * rng.uniforms(4) - 1.0
            state, update = apply_step(state, g, hp)
            worst = max(worst, float(np.max(np.abs(update))) / hp.eta - bound)
    return worst <= 1e-12, f"max |update|/eta excess over 1/sqrt(1-beta2): {worst:.3e}"


def _suite_descent_lemma() -> tuple:
    rng = Rng(23)
    worst = 0.0
    fails = 0
    problems = [
        make_exp_separable(np.array([1.0, 2.0]), np.zeros(2)),
        make_quadratic(np.array([1.0, 4.0]), np.zeros(2)),
    ]
    for problem in problems:
        radius = 1.0
        l1_max = norm(problem.smoothness.L1, math.inf)
        if l1_max > 0:
            radius = 1.0 / l1_max
        for _ in range(100):
            x = 2.0 * rng.uniforms(2) - 1.0
            direction = 2.0 * rng.uniforms(2) - 1.0
            nd = math.sqrt(float(np.dot(direction, direction)))
            if nd == 0.0:
                continue
            # Shrink slightly so rounding cannot push the pair past the radius.
            y = x + direction / nd * radius * 0.99 * rng.next_uniform()
            report = check_descent_lemma(problem, x, y)
            if not report.satisfied:
                fails += 1
                worst = max(worst, -report.margin)
    return fails == 0, f"{fails} violated pairs, worst overshoot {worst:.3e}"


def _suite_second_order() -> tuple:
    grid = np.linspace(-10.0, 10.0, 2001)
    spec = LowerBoundSpec(L0=1.0, L1=1.0, M=math.exp(2.0), eps=0.1)
    v1 = check_second_order(make_lower_bound_case1(spec), grid)
    v2 = check_second_order(make_lower_bound_case2(spec), grid)
    worst = max(v1, v2)
    return worst <= 1e-9, f"max |f''| - (L0 + L1 |f'|) over grid: {worst:.3e}"


def _suite_gd_divergence() -> tuple:
    spec = LowerBoundSpec(L0=1.0, L1=1.0, M=math.exp(2.0), eps=0.1, x0=3.0)
    above = check_gd_divergence(spec, eta=0.9, steps=100)
    below = check_gd_divergence(spec, eta=0.5, steps=100)
    ok = above.certified and not below.certified
    return ok, (
        f"eta=0.9 certified={above.certified} ({above.steps_checked} steps), "
        f"eta=0.5 certified={below.certified}"
    )


def _suite_schedule() -> tuple:
    sched = theoretical_hyperparams(
        Delta=1.0,
        smoothness=SmoothnessSpec(L0=np.array([1.0]), L1=np.array([0.0])),
        noise=NoiseSpec(sigma=np.array([10.0])),
        T=100,
        beta2=0.0,
    )
    ok = sched.alpha == 0.01 and sched.beta1 == 0.99 and sched.eta == 0.01
    return ok, f"alpha={sched.alpha!r} beta1={sched.beta1!r} eta={sched.eta!r}"


def _suite_rng_reference() -> tuple:
    rng = Rng(0)
    raws = [rng.next_raw() for _ in range(4)]
    expected = [
        0xE220A8397B1DCDAF,
        0x6E789E6AA1B965F4,
        0x06C45D188009454F,
        0xF88BB8A8724C81EC,
    ]
    vec = Rng(0).uniforms(4)
    scalar = np.array([r * 2.0 ** -53 for r in (raw >> 11 for raw in raws)])
    ok = raws == expected and np.array_equal(vec, scalar)
    return ok, f"first raw outputs {'match' if ok else 'differ from'} the reference stream"


def _suite_gradient_consistency() -> tuple:
    spec = LowerBoundSpec(L0=1.0, L1=1.0, M=math.exp(2.0), eps=0.1)
    problems = [
        make_quadratic(np.array([1.0, 4.0, 0.5]), np.zeros(3)),
        make_exp_separable(np.array([1.0, 2.0]), np.zeros(2)),
        make_lower_bound_case1(spec),
        make_lower_bound_case2(spec),
    ]
    rng = Rng(31)
    worst = 0.0
    for problem in problems:
        for _ in range(20):
            x = 4.0 * rng.uniforms(problem.dimension) - 2.0
            g = problem.gradient(x)
            fd = finite_difference_gradient(problem, x, h=1e-6)
            scale = np.maximum(np.abs(g), 1.0)
            worst = max(worst, float(np.max(np.abs(fd - g) / scale)))
    return worst <= 1e-5, f"max relative FD-vs-analytic error: {worst:.3e}"


def _suite_determinism(tmp_dir: Optional[str]) -> tuple:
    import tempfile

    cfg_text = json.dumps(
        {
            "name": "suite_det",
            "problem": {"kind": "quadratic", "c": [1.0, 2.0], "sigma": [1.0, 1.0]},
            "optimizer": {"method": "generalized_signsgd", "eta": 0.05},
            "T": 50,
            "seed": 12345,
            "x1": [1.0, -1.0],
        }
    )
    with tempfile.TemporaryDirectory(dir=tmp_dir) as td:
        config = parse_config(cfg_text)
        config.output_dir = td
        run_experiment(config)
        first = (Path(td) / "suite_det_trajectory.csv").read_bytes()
        run_experiment(config)
        second = (Path(td) / "suite_det_trajectory.csv").read_bytes()
    ok = first == second
    return ok, "repeated run produced identical CSV bytes" if ok else "CSV bytes differ"


def _suite_estimation() -> tuple:
    problem = make_exp_separable(np.array([2.0]), np.zeros(1))
    hp = HyperParams(method="generalized_signsgd", eta=0.01, beta1=0.9, beta2=0.0)
    trajectory = run_optimizer(problem, np.array([1.0]), hp, 250, seed=0, noise_on=False, keep_iterates=True)
    samples = []
    for i in range(len(trajectory.iterates) - 1):
        try:
            samples.extend(
                estimate_coordinate_smoothness(
                    problem, trajectory.iterates[i], trajectory.iterates[i + 1], t=i + 1
                )
            )
        except NoCoordinateMoved:
            continue
    fit = fit_l0l1(samples)
    ok = 1.9 <= fit.L1_hat <= 2.1 and abs(fit.L0_hat) <= 0.1
    return ok, f"L0_hat={fit.L0_hat:.4f} L1_hat={fit.L1_hat:.4f} from {fit.n_samples} samples"


def run_invariant_suite(tmp_dir: Optional[str] = None) -> list:
    """Run the fast invariant battery; returns [(name, passed, detail)].

    Covers: exact sign steps at beta2 = 0, the hard update-magnitude bound,
    the descent inequality, second-order certification of both hard
    constructions, the GD divergence certificate (sharp in eta), schedule
    identities, the reference RNG stream, gradient-oracle agreement,
    run determinism, and smoothness-estimation fidelity.
    """
    checks = [
        ("signum_exact_steps", _suite_signum_steps),
        ("update_magnitude_bound", _suite_update_ratio),
        ("descent_lemma", _suite_descent_lemma),
        ("second_order_certification", _suite_second_order),
        ("gd_divergence_certificate", _suite_gd_divergence),
        ("schedule_identities", _suite_schedule),
        ("rng_reference_stream", _suite_rng_reference),
        ("gradient_oracle_consistency", _suite_gradient_consistency),
        ("run_determinism", lambda: _suite_determinism(tmp_dir)),
        ("smoothness_estimation", _suite_estimation),
    ]
    results = []
    for name, fn in checks:
        try:
            passed, detail = fn()
        except OptLabError as e:
            passed, detail = False, f"raised {type(e).__name__}: {e}"
        results.append((name, passed, detail))
    return results
