"""Local gradient-Lipschitz estimation along a trajectory segment.

The global estimator probes the segment x_t -> x_next at fractional
locations gamma and reports the steepest observed gradient change per unit
distance; the coordinate estimator reports, per moved coordinate, the
partial-derivative change over the coordinate displacement. Regressing the
estimates on the gradient magnitudes with ordinary least squares extracts an
empirical (intercept, slope) = (L0_hat, L1_hat) curvature model.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import OptLabError
from .problems import Problem

__all__ = [
    "ZeroDisplacement",
    "NoCoordinateMoved",
    "DegenerateDesign",
    "SmoothnessSample",
    "L0L1Fit",
    "DEFAULT_LOCATIONS",
    "estimate_global_smoothness",
    "estimate_coordinate_smoothness",
    "fit_l0l1",
]

DEFAULT_LOCATIONS = (1 / 6, 2 / 6, 3 / 6, 4 / 6, 5 / 6)


class ZeroDisplacement(OptLabError):
    """The two probe points coincide."""


class NoCoordinateMoved(OptLabError):
    """No coordinate differs between the two probe points."""


class DegenerateDesign(OptLabError):
    """The regression needs >= 2 samples with distinct gradient magnitudes."""


@dataclass(frozen=True)
class SmoothnessSample:
    """One (gradient magnitude, local Lipschitz estimate) pair.

    j is the coordinate index for coordinate-wise samples and None for
    global (whole-gradient) samples.
    """

    grad_magnitude: float
    local_lipschitz: float
    t: int = 0
    j: Optional[int] = None


@dataclass(frozen=True)
class L0L1Fit:
    """OLS line local_lipschitz ~ L0_hat + L1_hat * grad_magnitude."""

    L0_hat: float
    L1_hat: float
    residual_rms: float
    n_samples: int


def estimate_global_smoothness(
    problem: Problem,
    x_t: np.ndarray,
    x_next: np.ndarray,
    locations: Sequence[float] = DEFAULT_LOCATIONS,
    t: int = 0,
) -> SmoothnessSample:
    """Steepest gradient change per unit distance along x_t -> x_next.

    L_hat = max over gamma in ``locations`` of
    ||grad F(x_t + gamma d) - grad F(x_t)||_2 / ||gamma d||_2 with
    d = x_next - x_t; grad_magnitude is ||grad F(x_t)||_2.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    x_next = np.asarray(x_next, dtype=np.float64)
    d = x_next - x_t
    d_norm = math.sqrt(float(np.dot(d, d)))
    if d_norm == 0.0:
        raise ZeroDisplacement("x_next equals x_t")
    if len(locations) == 0:
        raise ValueError("locations must be nonempty")
    g0 = problem.gradient(x_t)
    best = 0.0
    for gamma in locations:
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"locations must lie in (0, 1], got {gamma}")
        dg = problem.gradient(x_t + gamma * d) - g0
        best = max(best, math.sqrt(float(np.dot(dg, dg))) / (gamma * d_norm))
    return SmoothnessSample(
        grad_magnitude=math.sqrt(float(np.dot(g0, g0))),
        local_lipschitz=best,
        t=t,
        j=None,
    )


def estimate_coordinate_smoothness(
    problem: Problem,
    x_t: np.ndarray,
    x_next: np.ndarray,
    t: int = 0,
) -> list:
    """Per-coordinate |partial change| / |coordinate displacement|.

    Returns one sample per coordinate with x_next[j] != x_t[j], pairing the
    estimate with min(|d_j F(x_t)|, |d_j F(x_next)|). The estimate is
    symmetric in the two points. Coordinates that did not move are omitted.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    x_next = np.asarray(x_next, dtype=np.float64)
    moved = x_next != x_t
    if not moved.any():
        raise NoCoordinateMoved("x_next equals x_t in every coordinate")
    g0 = problem.gradient(x_t)
    g1 = problem.gradient(x_next)
    samples = []
    for j in np.flatnonzero(moved):
        j = int(j)
        samples.append(
            SmoothnessSample(
                grad_magnitude=min(abs(float(g0[j])), abs(float(g1[j]))),
                local_lipschitz=abs(float(g1[j]) - float(g0[j])) / abs(float(x_next[j] - x_t[j])),
                t=t,
                j=j,
            )
        )
    return samples


def fit_l0l1(samples: Sequence[SmoothnessSample]) -> L0L1Fit:
    """Ordinary least squares of local_lipschitz on grad_magnitude."""
    if len(samples) < 2:
        raise DegenerateDesign(f"need >= 2 samples, got {len(samples)}")
    x = np.array([s.grad_magnitude for s in samples])
    y = np.array([s.local_lipschitz for s in samples])
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    if sxx == 0.0:
        raise DegenerateDesign("all gradient magnitudes are equal")
    slope = float(np.dot(xc, y - y.mean())) / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    resid = y - (intercept + slope * x)
    return L0L1Fit(
        L0_hat=intercept,
        L1_hat=slope,
        residual_rms=math.sqrt(float(np.mean(resid * resid))),
        n_samples=len(samples),
    )
