"""Hyperparameter schedule, derived stability constants, and runtime checkers.

The schedule balances the noise and curvature scales of a problem against
the step budget T: with the momentum parameter beta1 = 1 - alpha and

    alpha = min(sqrt(||L0||_1 * Delta) / (||sigma||_1 * sqrt(T)), 1),
    eta   = sqrt(Delta * alpha) / (sqrt(||L0||_1) * sqrt(T)),

the sign-based method's smallest observed gradient l1-norm decays with T.
The derived constants (tau_bar, E, B, C, D, A) quantify how long moment
estimates stay trustworthy and how much curvature growth the update absorbs;
they are reported for diagnostics.

The checkers certify, numerically, the structural facts the library relies
on: the one-step descent inequality, the hard bound |update| <= eta /
sqrt(1 - beta2), the pointwise |f''| <= L0 + L1 |f'| relation for 1-d
problems, and the sign-alternating divergence of fixed-step gradient descent
on the first hard construction once eta exceeds its threshold. The
divergence run is tracked in an iterated-exponential representation because
the iterates outgrow float64 within a handful of steps.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import OptLabError, norm, param_vector
from .optimizers import HyperParams, Trajectory
from .problems import LowerBoundSpec, NoiseSpec, Problem, SmoothnessSpec, SpecViolation

__all__ = [
    "InvalidBeta2",
    "InvalidRegime",
    "RadiusExceeded",
    "NoSecondDerivative",
    "WrongMethod",
    "TheorySchedule",
    "TheoryConstants",
    "DescentReport",
    "DivergenceReport",
    "theoretical_hyperparams",
    "compute_theory_constants",
    "momentum_gap",
    "gd_lower_bound_iterations",
    "check_descent_lemma",
    "check_update_bound",
    "check_second_order",
    "check_gd_divergence",
]


class InvalidBeta2(OptLabError):
    """The schedule requires sqrt(beta2) < beta1 (or beta1 = beta2 = 0)."""


class InvalidRegime(OptLabError):
    """Constants are defined only for eta > 0, beta1 > 0, sqrt(beta2) < beta1."""


class RadiusExceeded(OptLabError):
    """The probe pair is farther apart than the trust radius 1/max(L1)."""


class NoSecondDerivative(OptLabError):
    """The problem has no second-derivative oracle."""


class WrongMethod(OptLabError):
    """The trajectory was not produced by the method this check certifies."""


@dataclass(frozen=True)
class TheorySchedule:
    """Resolved schedule: beta1 = 1 - alpha and the step size eta for T steps.

    T_condition_met reports whether T clears the curvature/noise burn-in
    threshold under which the derived constant D stays >= 1/2.
    """

    alpha: float
    beta1: float
    eta: float
    T: int
    T_condition_met: bool
    Delta: float
    rho: float
    beta2: float


@dataclass(frozen=True)
class TheoryConstants:
    """Derived stability constants for a configuration.

    tau_bar is the number of steps an update can take before curvature drift
    matters (math.inf when max(L1) = 0); E, B, C are per-coordinate vectors;
    D and A are scalars. epsilon_t, the momentum tracking error m_t -
    grad F(x_t), is a per-trajectory diagnostic filled in by ``momentum_gap``
    when wanted.
    """

    tau_bar: float
    E: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    A: float
    rho: float
    M: np.ndarray
    epsilon_t: Optional[np.ndarray] = None


@dataclass(frozen=True)
class DescentReport:
    """Both sides of the one-step descent inequality at a probe pair."""

    lhs: float
    rhs: float
    satisfied: bool
    margin: float


@dataclass(frozen=True)
class DivergenceReport:
    """Outcome of the sign-alternation divergence certificate.

    trail holds (sign, level, magnitude) per step, where the iterate
    magnitude is exp applied ``level`` times to ``magnitude``.
    """

    certified: bool
    steps_checked: int
    failed_at: Optional[int]
    trail: list


def theoretical_hyperparams(
    Delta: float,
    smoothness: SmoothnessSpec,
    noise: NoiseSpec,
    T: int,
    beta2: float,
    delta_prob: float = 0.01,
    d: Optional[int] = None,
) -> TheorySchedule:
    """Resolve (alpha, beta1, eta) for a step budget T.

    delta_prob (the failure probability of the guarantee the schedule was
    derived for) does not enter any of the returned quantities; it is kept
    in the signature for interface completeness.
    """
    if Delta <= 0:
        raise ValueError(f"Delta must be positive, got {Delta}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not 0.0 <= beta2 < 1.0:
        raise ValueError(f"beta2 must lie in [0, 1), got {beta2}")
    l0_sum = norm(smoothness.L0, 1)
    if l0_sum <= 0:
        raise ValueError("sum of L0 must be positive")
    if d is None:
        d = len(smoothness.L0)
    sigma_sum = norm(noise.sigma, 1)
    sqrt_t = math.sqrt(T)

    noise_scale = sigma_sum * sqrt_t
    if noise_scale > 0:
        alpha = min(math.sqrt(l0_sum * Delta) / noise_scale, 1.0)
    else:
        alpha = 1.0
    beta1 = 1.0 - alpha
    eta = math.sqrt(Delta * alpha) / (math.sqrt(l0_sum) * sqrt_t)

    if beta1 == 0.0:
        # The schedule degenerates to pure sign steps; the variance recursion
        # only collapses consistently with beta2 = 0.
        if beta2 != 0.0:
            raise InvalidBeta2(f"alpha = 1 requires beta2 = 0, got {beta2}")
        rho = 1.0
    else:
        if math.sqrt(beta2) >= beta1:
            raise InvalidBeta2(
                f"need sqrt(beta2) < beta1, got sqrt({beta2}) = "
                f"{math.sqrt(beta2)} >= {beta1}"
            )
        rho = 1.0 - math.sqrt(beta2) / beta1

    l1_max = norm(smoothness.L1, math.inf)
    if l1_max == 0.0:
        t_condition_met = True
    else:
        term1 = 100.0 * d * Delta * l1_max ** 2 / ((1.0 - beta2) * rho ** 2 * l0_sum)
        term2 = (
            10000.0
            * d ** 2
            * Delta
            * sigma_sum ** 2
            * l1_max ** 4
            / ((1.0 - beta2) ** 2 * rho ** 4 * l0_sum ** 3)
        )
        t_condition_met = T >= max(term1, term2)

    return TheorySchedule(
        alpha=alpha,
        beta1=beta1,
        eta=eta,
        T=T,
        T_condition_met=t_condition_met,
        Delta=Delta,
        rho=rho,
        beta2=beta2,
    )


def compute_theory_constants(
    hp: HyperParams,
    smoothness: SmoothnessSpec,
    noise: NoiseSpec,
    M,
    delta_prob: float,
    d: Optional[int] = None,
) -> TheoryConstants:
    """Derived constants (tau_bar, E, B, C, D, A) for a configuration.

    M is the per-coordinate bound on gradient magnitudes over the sub-level
    set of the start point; it only enters B through an exponentially
    decaying term. Requires eta > 0, beta1 > 0, and sqrt(beta2) < beta1.
    """
    if not (hp.eta > 0 and hp.beta1 > 0):
        raise InvalidRegime(f"need eta > 0 and beta1 > 0, got {hp.eta}, {hp.beta1}")
    if math.sqrt(hp.beta2) >= hp.beta1:
        raise InvalidRegime(
            f"need sqrt(beta2) < beta1, got sqrt({hp.beta2}) >= {hp.beta1}"
        )
    if not 0.0 < delta_prob <= 1.0:
        raise ValueError(f"delta_prob must lie in (0, 1], got {delta_prob}")
    M = param_vector(M)
    sigma = noise.sigma
    if d is None:
        d = len(smoothness.L0)
    sqrt_d = math.sqrt(d)
    one_minus_b1 = 1.0 - hp.beta1
    sqrt_1mb2 = math.sqrt(1.0 - hp.beta2)
    l1_max = norm(smoothness.L1, math.inf)

    tau_bar = sqrt_1mb2 / (hp.eta * sqrt_d * l1_max) if l1_max > 0 else math.inf

    log_term = max(1.0, math.log(1.0 / delta_prob))
    E = 6.0 * sigma * log_term + (6.0 / math.sqrt(1.0 - hp.beta1 ** 2)) * np.sqrt(
        sigma ** 2 * log_term
    )
    decay = hp.beta1 ** tau_bar if tau_bar != math.inf else 0.0
    B = (
        hp.eta * smoothness.L0 / (sqrt_1mb2 * one_minus_b1)
        + decay * (M + sigma)
        + one_minus_b1 * E
    )
    C = 1.0 + hp.eta * sqrt_d * smoothness.L1 / (one_minus_b1 * sqrt_1mb2)
    D = 1.0 - 2.0 * hp.eta * sqrt_d * l1_max / (sqrt_1mb2 * one_minus_b1)
    rho = 1.0 - math.sqrt(hp.beta2) / hp.beta1
    A = rho / (10.0 * sqrt_1mb2)
    return TheoryConstants(
        tau_bar=tau_bar, E=E, B=B, C=C, D=D, A=A, rho=rho, M=M, epsilon_t=None
    )


def momentum_gap(problem: Problem, state) -> np.ndarray:
    """Momentum tracking error m - grad F(x) at a state (diagnostic)."""
    return state.m - problem.gradient(state.x)


def gd_lower_bound_iterations(spec: LowerBoundSpec, f0_minus_fstar: float) -> float:
    """Iterations fixed-step gradient descent needs on the second hard
    construction before it can certify |f'| <= eps:

        M * L1 * (gap - 15 eps^2 / (16 L0)) / (2 eps^2 (ln(M L1 / L0) + 1)).

    gap = f(x0) - f_star must be at least 15 eps^2/(16 L0); equality gives 0.
    """
    threshold = 15.0 * spec.eps ** 2 / (16.0 * spec.L0)
    if f0_minus_fstar < threshold:
        raise SpecViolation(
            f"f0 - f_star = {f0_minus_fstar} must be >= 15 eps^2/(16 L0) = {threshold}"
        )
    return (
        spec.M
        * spec.L1
        * (f0_minus_fstar - threshold)
        / (2.0 * spec.eps ** 2 * (math.log(spec.M * spec.L1 / spec.L0) + 1.0))
    )


def check_descent_lemma(problem: Problem, x, y) -> DescentReport:
    """Evaluate both sides of the one-step descent inequality at (x, y):

        F(y) <= F(x) + <grad F(x), y - x>
                + sum_j (L0_j/sqrt(d) + L1_j |d_j F(x)|) ||y - x||_2 |y_j - x_j| / 2

    using the problem's declared constants. The pair must lie within the
    trust radius ||x - y||_2 <= 1/max(L1). A satisfied verdict certifies the
    declared constants (which may be conservative), not the tightest ones.
    """
    x = param_vector(x)
    y = param_vector(y)
    diff = y - x
    dist = math.sqrt(float(np.dot(diff, diff)))
    l1_max = norm(problem.smoothness.L1, math.inf)
    if l1_max > 0 and dist > 1.0 / l1_max:
        raise RadiusExceeded(f"||x - y|| = {dist} exceeds trust radius {1.0 / l1_max}")
    gx = problem.gradient(x)
    lhs = problem.value(y)
    penalty = (
        float(
            np.sum(
                (problem.smoothness.L0 / math.sqrt(problem.dimension)
                 + problem.smoothness.L1 * np.abs(gx))
                * np.abs(diff)
            )
        )
        * dist
        / 2.0
    )
    rhs = problem.value(x) + float(np.dot(gx, diff)) + penalty
    return DescentReport(lhs=lhs, rhs=rhs, satisfied=lhs <= rhs + 1e-9, margin=rhs - lhs)


def check_update_bound(trajectory: Trajectory, hp: HyperParams) -> float:
    """Max observed |update|_inf * sqrt(1 - beta2) / eta over a trajectory.

    A value <= 1 + 1e-12 certifies the hard per-coordinate update bound
    eta / sqrt(1 - beta2) of the momentum-sourced sign method. Only
    trajectories produced by generalized_signsgd with
    second_moment_source = "momentum" qualify.
    """
    if (
        hp.method != "generalized_signsgd"
        or hp.second_moment_source != "momentum"
        or trajectory.method != "generalized_signsgd"
        or trajectory.second_moment_source != "momentum"
    ):
        raise WrongMethod(
            "update bound applies to generalized_signsgd trajectories with "
            "momentum-sourced second moment"
        )
    scale = math.sqrt(1.0 - hp.beta2) / hp.eta
    worst = 0.0
    for rec in trajectory.records:
        worst = max(worst, rec.update_linf * scale)
    return worst


def check_second_order(problem: Problem, grid: Sequence[float]) -> float:
    """Max over the grid of |f''(x)| - (L0 + L1 |f'(x)|) for a 1-d problem.

    A result <= 1e-9 certifies the declared constants on the grid.
    """
    if problem.second_derivative is None:
        raise NoSecondDerivative(f"problem {problem.name!r} has no second-derivative oracle")
    L0 = float(problem.smoothness.L0[0])
    L1 = float(problem.smoothness.L1[0])
    worst = -math.inf
    for x in grid:
        x = float(x)
        fpp = abs(problem.second_derivative(x))
        fp = abs(float(problem.gradient(np.array([x]))[0]))
        worst = max(worst, fpp - (L0 + L1 * fp))
    return worst


# --- sign-alternation divergence certificate ---------------------------------
#
# On the first hard construction, once eta exceeds eta_star the iterate
# magnitudes grow roughly like X -> A e^{B X} with A = eta L0/(L1 e), B = L1,
# i.e. as a tower of exponentials: float64 overflows by the fourth step. The
# magnitudes are therefore tracked as (level, r) meaning exp applied `level`
# times to r, normalized so either level = 0, or r in (709, e^709]. Additive
# corrections fall below float64 resolution one level up, which is when the
# code drops them.

_R_TOP = 709.0
_EXP_TOP = math.exp(709.0)


def _canon(level: int, r: float) -> tuple:
    while r > _EXP_TOP:
        r = math.log(r)
        level += 1
    while level >= 1 and r <= _R_TOP:
        r = math.exp(r)
        level -= 1
    return level, r


def _greater(a: tuple, b: tuple) -> bool:
    if a[0] != b[0]:
        return a[0] > b[0]
    return a[1] > b[1]


def _magnitude_step(level: int, r: float, A: float, B: float) -> tuple:
    """One magnitude step X -> A e^{B X} - X; None when the result is <= 0."""
    ln_a = math.log(A)
    if level == 0:
        t_ln = ln_a + B * r
        if t_ln <= _R_TOP:
            nxt = math.exp(t_ln) - r
            if nxt <= 0.0:
                return None
            return _canon(0, nxt)
        # X / (A e^{B X}) = exp(ln r - t_ln); keep the correction while it
        # is representable, drop it once it underflows.
        corr = 0.0
        if r > 0.0 and not math.isinf(t_ln):
            expo = math.log(r) - t_ln
            if expo > -745.0:
                corr = math.log1p(-math.exp(expo))
        if math.isinf(t_ln):
            # ln(ln X_next) = ln(B r) + log1p(ln A / (B r))
            return _canon(2, math.log(B) + math.log(r) + math.log1p(ln_a / (B * r)))
        return _canon(1, t_ln + corr)
    if level == 1:
        # ln(ln X_next) = r + ln B + log1p(ln A/(B e^r)); e^r >= e^709 makes
        # the last term vanish at float64 resolution.
        return _canon(2, r + math.log(B))
    # Deeper levels: every additive correction (ln A, ln B, the subtraction
    # of X) is below float64 resolution of the level-(k-1) magnitude.
    return level + 1, r


def check_gd_divergence(
    spec: LowerBoundSpec, eta: float, steps: int = 100
) -> DivergenceReport:
    """Certify |x_{t+1}| > |x_t| with alternating signs for ``steps`` steps
    of fixed-step gradient descent on the first hard construction.

    Each step verifies that the iterate sits in an exponential tail and that
    the next magnitude strictly grows (which also forces the sign flip,
    since the step overshoots zero). The certificate fails, with the failing
    step index, for any eta below the construction's threshold.
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    A = eta * spec.L0 / (spec.L1 * math.e)
    B = spec.L1
    log_ratio = math.log(spec.M * spec.L1 / spec.L0)
    x0 = spec.x0 if spec.x0 is not None else (log_ratio + 1.0) / spec.L1
    sign = math.copysign(1.0, x0)
    mag = _canon(0, abs(x0))
    trail = [(sign, mag[0], mag[1])]
    for t in range(1, steps + 1):
        in_tail = mag[0] >= 1 or mag[1] > 1.0 / spec.L1
        if not in_tail:
            return DivergenceReport(certified=False, steps_checked=t - 1, failed_at=t, trail=trail)
        nxt = _magnitude_step(mag[0], mag[1], A, B)
        if nxt is None or not _greater(nxt, mag):
            return DivergenceReport(certified=False, steps_checked=t - 1, failed_at=t, trail=trail)
        sign = -sign
        mag = nxt
        trail.append((sign, mag[0], mag[1]))
    return DivergenceReport(certified=True, steps_checked=steps, failed_at=None, trail=trail)
