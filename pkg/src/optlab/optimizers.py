"""Step functions and state management for the optimizer comparison set.

All methods share the EMA momentum m' = beta1 * m + (1 - beta1) * g and act
element-wise on dense float64 vectors:

- generalized_signsgd: second moment v' built from m'^2 (or g^2 when
  ``second_moment_source`` is "gradient"), update -eta * m'/sqrt(v'). With
  beta2 = 0 this reduces to stepping by the sign of the momentum, each
  nonzero coordinate moving exactly eta.
- adam: v' from g^2, optional bias correction, denominator guard adam_eps.
- sgd_momentum / sgd_momentum_normalized / sgd_clip: plain, l2-normalized,
  and norm-clipped directions, with clip_nu selecting whether the clipped
  direction is the raw gradient (0) or the momentum (1).

Step functions are pure: state in, state out. ``run_optimizer`` drives T
steps against a problem's (seeded) stochastic gradient oracle and records
per-step diagnostics deterministically.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    LengthMismatch,
    NonFinite,
    OptLabError,
    Rng,
    param_vector,
)
from .problems import Problem

__all__ = [
    "METHODS",
    "MissingClipGamma",
    "NonFiniteIterate",
    "HyperParams",
    "OptimizerState",
    "TrajectoryRecord",
    "Trajectory",
    "init_state",
    "apply_step",
    "step_generalized_signsgd",
    "step_adam",
    "step_sgd_family",
    "run_optimizer",
]

METHODS = (
    "generalized_signsgd",
    "adam",
    "sgd_momentum",
    "sgd_momentum_normalized",
    "sgd_clip",
)

SGD_FAMILY = ("sgd_momentum", "sgd_momentum_normalized", "sgd_clip")


class MissingClipGamma(OptLabError):
    """sgd_clip requires a clipping threshold clip_gamma."""


class NonFiniteIterate(OptLabError):
    """An optimizer run produced a non-finite iterate or gradient.

    Carries the 1-based step index and the trajectory records accumulated
    up to and including the failing step.
    """

    def __init__(self, step: int, records):
        super().__init__(f"non-finite iterate at step {step}")
        self.step = step
        self.records = records


@dataclass
class HyperParams:
    """Optimizer configuration.

    eta > 0, 0 <= beta1 < 1, 0 <= beta2 < 1. clip_gamma and clip_nu apply
    to sgd_clip only (nu defaults to 1: clip the momentum direction);
    adam_eps and bias_correction to adam only; second_moment_source to
    generalized_signsgd only.
    """

    method: str
    eta: float
    beta1: float = 0.9
    beta2: float = 0.0
    clip_gamma: Optional[float] = None
    clip_nu: int = 1
    adam_eps: float = 1e-8
    bias_correction: bool = True
    second_moment_source: str = "momentum"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not 0.0 <= self.beta1 < 1.0:
            raise ValueError(f"beta1 must lie in [0, 1), got {self.beta1}")
        if not 0.0 <= self.beta2 < 1.0:
            raise ValueError(f"beta2 must lie in [0, 1), got {self.beta2}")
        if self.clip_gamma is not None and not self.clip_gamma > 0:
            raise ValueError(f"clip_gamma must be positive, got {self.clip_gamma}")
        if self.clip_nu not in (0, 1):
            raise ValueError(f"clip_nu must be 0 or 1, got {self.clip_nu}")
        if self.adam_eps < 0:
            raise ValueError(f"adam_eps must be nonnegative, got {self.adam_eps}")
        if self.second_moment_source not in ("momentum", "gradient"):
            raise ValueError(
                f"second_moment_source must be 'momentum' or 'gradient', "
                f"got {self.second_moment_source!r}"
            )


@dataclass
class OptimizerState:
    """Iterate x, first moment m, second moment v, and step counter t.

    Fresh states have m = v = 0 and t = 0; the first step produces t = 1.
    v entries are always nonnegative.
    """

    x: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int


@dataclass
class TrajectoryRecord:
    """Per-step log row.

    f_value and the gradient norms are evaluated at the pre-step iterate
    x_t with the exact (noise-free) gradient; update_linf is the largest
    coordinate magnitude of the applied update eta * u_t.
    """

    t: int
    f_value: float
    grad_l1: float
    grad_l2: float
    update_linf: float
    x_snapshot: Optional[tuple] = None


@dataclass
class Trajectory:
    """Records plus run metadata; indexable like a sequence of records."""

    records: list
    method: str
    second_moment_source: str
    final_state: Optional[OptimizerState] = None
    iterates: Optional[list] = None

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self):
        return iter(self.records)


def init_state(x1) -> OptimizerState:
    """Fresh state at iterate x1 with zero moments."""
    x = param_vector(x1)
    return OptimizerState(x=x, m=np.zeros_like(x), v=np.zeros_like(x), t=0)


def _validated(state: OptimizerState, g) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.shape != state.x.shape:
        raise LengthMismatch(f"gradient length {g.shape} does not match iterate {state.x.shape}")
    if not np.isfinite(g).all():
        raise NonFinite("gradient contains NaN/Inf")
    return g


def apply_step(state: OptimizerState, g, hp: HyperParams):
    """One step of hp.method; returns (new_state, update) with x' = x - update.

    Exposing the update vector (rather than re-differencing iterates) keeps
    diagnostics free of the rounding introduced by the final subtraction.
    """
    g = _validated(state, g)
    m_new = hp.beta1 * state.m + (1.0 - hp.beta1) * g

    if hp.method == "generalized_signsgd":
        if hp.second_moment_source == "momentum":
            v_new = hp.beta2 * state.v + (1.0 - hp.beta2) * m_new * m_new
        else:
            v_new = hp.beta2 * state.v + (1.0 - hp.beta2) * g * g
        with np.errstate(divide="ignore", invalid="ignore"):
            u = m_new / np.sqrt(v_new)
        # 0/0 convention: a zero second moment means no movement.
        u = np.where(v_new == 0.0, 0.0, u)
        update = hp.eta * u
    elif hp.method == "adam":
        v_new = hp.beta2 * state.v + (1.0 - hp.beta2) * g * g
        t_new = state.t + 1
        if hp.bias_correction:
            m_hat = m_new / (1.0 - hp.beta1 ** t_new)
            v_hat = v_new / (1.0 - hp.beta2 ** t_new)
        else:
            m_hat = m_new
            v_hat = v_new
        den = np.sqrt(v_hat) + hp.adam_eps
        with np.errstate(divide="ignore", invalid="ignore"):
            u = m_hat / den
        u = np.where(den == 0.0, 0.0, u)
        update = hp.eta * u
    elif hp.method in SGD_FAMILY:
        v_new = state.v
        if hp.method == "sgd_momentum":
            u = m_new
        elif hp.method == "sgd_momentum_normalized":
            nm = math.sqrt(float(np.dot(m_new, m_new)))
            u = m_new / nm if nm > 0.0 else np.zeros_like(m_new)
        else:
            if hp.clip_gamma is None:
                raise MissingClipGamma("sgd_clip requires clip_gamma")
            nu = hp.clip_nu
            w = (1.0 - nu) * g + nu * m_new
            nw = math.sqrt(float(np.dot(w, w)))
            u = w * min(1.0, hp.clip_gamma / nw) if nw > 0.0 else np.zeros_like(w)
        update = hp.eta * u
    else:
        raise ValueError(f"unknown method {hp.method!r}")

    new_state = OptimizerState(x=state.x - update, m=m_new, v=v_new, t=state.t + 1)
    return new_state, update


def step_generalized_signsgd(state: OptimizerState, g, hp: HyperParams) -> OptimizerState:
    """m' = b1 m + (1-b1) g; v' = b2 v + (1-b2) m'^2; x' = x - eta m'/sqrt(v')."""
    if hp.method != "generalized_signsgd":
        raise ValueError(f"expected method 'generalized_signsgd', got {hp.method!r}")
    return apply_step(state, g, hp)[0]


def step_adam(state: OptimizerState, g, hp: HyperParams) -> OptimizerState:
    """Adam step with optional bias correction and denominator guard."""
    if hp.method != "adam":
        raise ValueError(f"expected method 'adam', got {hp.method!r}")
    return apply_step(state, g, hp)[0]


def step_sgd_family(state: OptimizerState, g, hp: HyperParams) -> OptimizerState:
    """Momentum SGD with a plain, normalized, or norm-clipped direction."""
    if hp.method not in SGD_FAMILY:
        raise ValueError(f"expected one of {SGD_FAMILY}, got {hp.method!r}")
    return apply_step(state, g, hp)[0]


def run_optimizer(
    problem: Problem,
    x1,
    hp: HyperParams,
    T: int,
    seed: int,
    noise_on: bool,
    log_stride: int = 1,
    snapshot: Optional[bool] = None,
    keep_iterates: bool = False,
) -> Trajectory:
    """Run T steps of hp.method on ``problem`` from x1.

    With noise_on, each step draws the stochastic gradient by consuming
    exactly d uniforms from a SplitMix64 stream seeded with ``seed``, so the
    whole run is a pure function of its arguments. Steps t = 1, 1 +
    log_stride, ... are logged; iterate snapshots are kept when d <= 4 (or
    per the ``snapshot`` override) and truncated to the first 4 coordinates.

    Raises NonFiniteIterate (carrying the records so far) as soon as an
    iterate or its gradient stops being finite.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if log_stride < 1:
        raise ValueError(f"log_stride must be >= 1, got {log_stride}")
    state = init_state(x1)
    if len(state.x) != problem.dimension:
        raise LengthMismatch(
            f"x1 has length {len(state.x)}, problem dimension is {problem.dimension}"
        )
    rng = Rng(seed)
    sigma = problem.noise.sigma
    take_snapshot = (problem.dimension <= 4) if snapshot is None else snapshot
    records: list = []
    iterates = [state.x.copy()] if keep_iterates else None

    for t in range(1, T + 1):
        x = state.x
        g_exact = problem.gradient(x)
        if noise_on:
            u = rng.uniforms(problem.dimension)
            g = g_exact + sigma * (2.0 * u - 1.0)
        else:
            g = g_exact
        logged = (t - 1) % log_stride == 0
        grad_finite = bool(np.isfinite(g).all())
        if not grad_finite:
            if logged:
                ag = np.abs(g_exact)
                records.append(
                    TrajectoryRecord(
                        t=t,
                        f_value=problem.value(x),
                        grad_l1=float(np.sum(ag)),
                        grad_l2=float(np.sqrt(np.sum(ag * ag))),
                        update_linf=math.inf,
                        x_snapshot=tuple(x[:4]) if take_snapshot else None,
                    )
                )
            raise NonFiniteIterate(t, records)
        new_state, update = apply_step(state, g, hp)
        if logged:
            ag = np.abs(g_exact)
            records.append(
                TrajectoryRecord(
                    t=t,
                    f_value=problem.value(x),
                    grad_l1=float(np.sum(ag)),
                    grad_l2=float(np.sqrt(np.sum(ag * ag))),
                    update_linf=float(np.max(np.abs(update))),
                    x_snapshot=tuple(x[:4]) if take_snapshot else None,
                )
            )
        if not np.isfinite(new_state.x).all():
            raise NonFiniteIterate(t, records)
        state = new_state
        if keep_iterates:
            iterates.append(state.x.copy())

    return Trajectory(
        records=records,
        method=hp.method,
        second_moment_source=hp.second_moment_source,
        final_state=state,
        iterates=iterates,
    )
