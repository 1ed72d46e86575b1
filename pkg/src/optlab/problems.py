"""Analytic test objectives with exact gradients and declared smoothness.

Every problem carries per-coordinate curvature constants (L0, L1) such that
coordinate partial derivatives satisfy, within a trust radius of 1/max(L1),

    |d_j F(y) - d_j F(x)| <= (L0_j / sqrt(d) + L1_j * |d_j F(x)|) * ||y - x||_2,

a bounded-noise model sigma for the stochastic gradient oracle, and a lower
bound f_star on the objective. Two piecewise 1-d constructions are included
on which fixed-step gradient descent provably blows up above an explicit
step-size threshold while remaining perfectly well-behaved below it.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import OptLabError, Rng, param_vector

__all__ = [
    "NonPositiveCurvature",
    "SpecViolation",
    "SmoothnessSpec",
    "NoiseSpec",
    "Problem",
    "LowerBoundSpec",
    "make_quadratic",
    "make_exp_separable",
    "make_lower_bound_case1",
    "make_lower_bound_case2",
    "sample_stochastic_gradient",
    "finite_difference_gradient",
]

LN2 = math.log(2.0)


class NonPositiveCurvature(OptLabError):
    """Quadratic curvature coefficients must all be positive."""


class SpecViolation(OptLabError):
    """A lower-bound construction parameter violates its constraints."""


@dataclass(eq=False)
class SmoothnessSpec:
    """Per-coordinate curvature constants L0_j >= 0 and L1_j >= 0."""

    L0: np.ndarray
    L1: np.ndarray

    def __post_init__(self):
        self.L0 = param_vector(self.L0)
        self.L1 = param_vector(self.L1)
        if len(self.L0) != len(self.L1):
            raise ValueError("L0 and L1 must have equal length")
        if np.any(self.L0 < 0) or np.any(self.L1 < 0):
            raise ValueError("smoothness constants must be nonnegative")


@dataclass(eq=False)
class NoiseSpec:
    """Per-coordinate almost-sure noise bounds sigma_j >= 0."""

    sigma: np.ndarray

    def __post_init__(self):
        self.sigma = param_vector(self.sigma)
        if np.any(self.sigma < 0):
            raise ValueError("noise bounds must be nonnegative")


@dataclass(eq=False)
class Problem:
    """An objective with exact value/gradient oracles and declared metadata.

    ``second_derivative`` is a scalar oracle, present only for d = 1.
    ``metadata`` holds construction-specific extras (e.g. the divergence
    step-size threshold ``eta_star`` of the first lower-bound function).
    """

    dimension: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    smoothness: SmoothnessSpec
    noise: NoiseSpec
    f_star: float
    second_derivative: Optional[Callable[[float], float]] = None
    name: str = ""
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LowerBoundSpec:
    """Parameters of the 1-d hard constructions.

    M bounds the gradient magnitudes the construction exposes and must
    satisfy M >= max(L0/L1, eps); x0 is the starting point (None selects the
    construction-specific default).
    """

    L0: float
    L1: float
    M: float
    eps: float
    x0: Optional[float] = None

    def __post_init__(self):
        if self.L0 <= 0 or self.L1 <= 0:
            raise SpecViolation(f"L0 and L1 must be positive, got {self.L0}, {self.L1}")
        if self.eps <= 0:
            raise SpecViolation(f"eps must be positive, got {self.eps}")
        if self.M < max(self.L0 / self.L1, self.eps):
            raise SpecViolation(
                f"M={self.M} must be >= max(L0/L1, eps)={max(self.L0 / self.L1, self.eps)}"
            )


def make_quadratic(c, sigma) -> Problem:
    """Separable quadratic F(x) = 0.5 * sum_j c_j x_j^2 with c_j > 0.

    Declared constants: L0_j = sqrt(d) * c_j and L1_j = 0 (the sqrt(d)
    factor cancels the 1/sqrt(d) normalization in the coordinate-wise
    smoothness condition); f_star = 0.
    """
    c = param_vector(c)
    if np.any(c <= 0):
        raise NonPositiveCurvature("all curvature coefficients must be positive")
    noise = sigma if isinstance(sigma, NoiseSpec) else NoiseSpec(sigma)
    d = len(c)
    if len(noise.sigma) != d:
        raise ValueError("sigma length must match c")
    smooth = SmoothnessSpec(L0=math.sqrt(d) * c, L1=np.zeros(d))

    def value(x):
        return 0.5 * float(np.dot(c * x, x))

    def gradient(x):
        return c * x

    second = (lambda x: float(c[0])) if d == 1 else None
    return Problem(
        dimension=d,
        value=value,
        gradient=gradient,
        smoothness=smooth,
        noise=noise,
        f_star=0.0,
        second_derivative=second,
        name="quadratic",
        metadata={"c": c},
    )


def make_exp_separable(a, sigma) -> Problem:
    """Separable exponential F(x) = sum_j exp(a_j x_j) with a_j > 0.

    The pointwise relation here is |f''| = a_j * |f'| per coordinate, so the
    curvature grows without bound with the gradient. The declared constant is
    L1_j = a_j / ln 2 rather than a_j: the finite-displacement condition
    needs (e^{a h} - 1)/h <= L1_j over the whole trust radius h <= 1/L1_j,
    and a_j / ln 2 is the smallest constant that closes that loop (equality
    holds exactly at the radius boundary a h = ln 2). L0_j is a tiny
    positive floor so the schedule formulas that divide by sum(L0) stay
    well-defined.
    """
    a = param_vector(a)
    if np.any(a <= 0):
        raise ValueError("all exponential rates must be positive")
    noise = sigma if isinstance(sigma, NoiseSpec) else NoiseSpec(sigma)
    d = len(a)
    if len(noise.sigma) != d:
        raise ValueError("sigma length must match a")
    smooth = SmoothnessSpec(L0=np.full(d, 1e-12), L1=a / LN2)

    def value(x):
        with np.errstate(over="ignore"):
            return float(np.sum(np.exp(a * x)))

    def gradient(x):
        with np.errstate(over="ignore"):
            return a * np.exp(a * x)

    second = (lambda x: float(a[0] ** 2 * np.exp(a[0] * x))) if d == 1 else None
    return Problem(
        dimension=d,
        value=value,
        gradient=gradient,
        smoothness=smooth,
        noise=noise,
        f_star=0.0,
        second_derivative=second,
        name="exp_separable",
        metadata={"a": a},
    )


def make_lower_bound_case1(spec: LowerBoundSpec) -> Problem:
    """Quadratic center with exponential tails; d = 1.

        f(x) = L0 exp(-L1 x - 1) / L1^2   for x < -1/L1
        f(x) = L0 x^2 / 2 + L0/(2 L1^2)   for |x| <= 1/L1
        f(x) = L0 exp(L1 x - 1) / L1^2    for x > 1/L1

    The branches meet with matching value, slope, and curvature, and
    |f''| <= L0 + L1 |f'| everywhere. Fixed-step gradient descent started at
    x0 = (ln(M L1 / L0) + 1)/L1 (the default) diverges with sign-alternating,
    growing iterates for every step size above

        eta_star = (2 / (M L1)) * (ln(M L1 / L0) + 1),

    recorded in ``metadata``. f_star = L0/(2 L1^2), attained at 0.
    """
    L0, L1 = spec.L0, spec.L1
    b = 1.0 / L1
    log_ratio = math.log(spec.M * L1 / L0)
    x0 = spec.x0 if spec.x0 is not None else (log_ratio + 1.0) / L1
    eta_star = (2.0 / (spec.M * L1)) * (log_ratio + 1.0)

    def f(x: float) -> float:
        with np.errstate(over="ignore"):
            if x < -b:
                return float(L0 * np.exp(-L1 * x - 1.0) / L1 ** 2)
            if x > b:
                return float(L0 * np.exp(L1 * x - 1.0) / L1 ** 2)
            return L0 * x * x / 2.0 + L0 / (2.0 * L1 ** 2)

    def fp(x: float) -> float:
        with np.errstate(over="ignore"):
            if x < -b:
                return float(-L0 * np.exp(-L1 * x - 1.0) / L1)
            if x > b:
                return float(L0 * np.exp(L1 * x - 1.0) / L1)
            return L0 * x

    def fpp(x: float) -> float:
        with np.errstate(over="ignore"):
            if x < -b:
                return float(L0 * np.exp(-L1 * x - 1.0))
            if x > b:
                return float(L0 * np.exp(L1 * x - 1.0))
            return L0

    return Problem(
        dimension=1,
        value=lambda x: f(float(x[0])),
        gradient=lambda x: np.array([fp(float(x[0]))]),
        smoothness=SmoothnessSpec(L0=np.array([L0]), L1=np.array([L1])),
        noise=NoiseSpec(sigma=np.zeros(1)),
        f_star=L0 / (2.0 * L1 ** 2),
        second_derivative=fpp,
        name="lower_bound_case1",
        metadata={"spec": spec, "x0": x0, "eta_star": eta_star, "branch": b},
    )


def make_lower_bound_case2(spec: LowerBoundSpec) -> Problem:
    """Quartic-corrected center with linear tails; d = 1.

        f(x) = -eps x                                          for x < -b
        f(x) = L0 x^2/2 - L0^3 x^4/(27 eps^2) + 9 eps^2/(16 L0) for |x| <= b
        f(x) = eps x                                           for x > b

    with b = 3 eps / (2 L0). The function is twice differentiable at the
    branch points (f'' vanishes there), satisfies |f''| <= L0 everywhere and
    |f'| <= eps, and has f_star = 9 eps^2/(16 L0) at 0. Any x0 >= b is a
    valid start; the default is b + 1.
    """
    L0, eps = spec.L0, spec.eps
    b = 3.0 * eps / (2.0 * L0)
    x0 = spec.x0 if spec.x0 is not None else b + 1.0
    f_star = 9.0 * eps ** 2 / (16.0 * L0)

    def f(x: float) -> float:
        if x < -b:
            return -eps * x
        if x > b:
            return eps * x
        return L0 * x * x / 2.0 - L0 ** 3 * x ** 4 / (27.0 * eps ** 2) + f_star

    def fp(x: float) -> float:
        if x < -b:
            return -eps
        if x > b:
            return eps
        return L0 * x - 4.0 * L0 ** 3 * x ** 3 / (27.0 * eps ** 2)

    def fpp(x: float) -> float:
        if x < -b or x > b:
            return 0.0
        return L0 - 4.0 * L0 ** 3 * x * x / (9.0 * eps ** 2)

    return Problem(
        dimension=1,
        value=lambda x: f(float(x[0])),
        gradient=lambda x: np.array([fp(float(x[0]))]),
        smoothness=SmoothnessSpec(L0=np.array([L0]), L1=np.array([0.0])),
        noise=NoiseSpec(sigma=np.zeros(1)),
        f_star=f_star,
        second_derivative=fpp,
        name="lower_bound_case2",
        metadata={"spec": spec, "x0": x0, "branch": b, "grad_max": eps},
    )


def sample_stochastic_gradient(problem: Problem, x: np.ndarray, rng: Rng) -> np.ndarray:
    """Exact gradient plus independent uniform noise on [-sigma_j, sigma_j].

    Consumes exactly d uniforms from ``rng`` in coordinate order, so runs
    can be reproduced draw-for-draw from the seed.
    """
    g = problem.gradient(x)
    u = rng.uniforms(problem.dimension)
    return g + problem.noise.sigma * (2.0 * u - 1.0)


def finite_difference_gradient(problem: Problem, x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient, one coordinate at a time."""
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(problem.dimension)
    for j in range(problem.dimension):
        xp = x.copy()
        xm = x.copy()
        xp[j] = x[j] + h
        xm[j] = x[j] - h
        # Centered differences:
        out[j] = (problem.value(xp) - problem.value(xm)) / (2.0 * h)
    return out
