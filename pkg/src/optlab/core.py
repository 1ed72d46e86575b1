"""Shared numeric primitives.

Dense float64 parameter vectors with validation, the three vector norms used
throughout the library, and a portable SplitMix64 pseudo-random generator
whose output stream is identical on every platform for a given seed.
"""

import math

import numpy as np

__all__ = [
    "OptLabError",
    "EmptyVector",
    "NonFinite",
    "LengthMismatch",
    "ParamVector",
    "param_vector",
    "check_same_length",
    "norm",
    "Rng",
]


class OptLabError(Exception):
    """Base class for all library errors."""


class EmptyVector(OptLabError):
    """A parameter vector must have at least one coordinate."""


class NonFinite(OptLabError):
    """A value that must be finite contained NaN or Inf."""


class LengthMismatch(OptLabError):
    """Vectors in an element-wise operation have different lengths."""


# Parameter vectors are plain 1-d float64 arrays; the alias documents intent.
ParamVector = np.ndarray


def param_vector(values) -> np.ndarray:
    """Copy ``values`` into a validated 1-d float64 vector.

    Raises EmptyVector for length 0 and NonFinite if any entry is NaN/Inf.
    """
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptyVector("parameter vector must have length >= 1")
    if not np.isfinite(arr).all():
        raise NonFinite("parameter vector entries must be finite")
    return arr


def check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if len(a) != len(b):
        raise LengthMismatch(f"vector lengths differ: {len(a)} vs {len(b)}")


def norm(v: np.ndarray, p) -> float:
    """The l1, l2, or max norm of ``v`` (p is 1, 2, or math.inf / "inf")."""
    v = np.asarray(v, dtype=np.float64)
    if p == 1:
        return float(np.sum(np.abs(v)))
    if p == 2:
        return float(math.sqrt(float(np.dot(v, v))))
    if p == math.inf or p == "inf":
        return float(np.max(np.abs(v)))
    raise ValueError(f"unsupported norm order: {p!r}")


_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class Rng:
    """SplitMix64 generator.

    The state advances by a fixed odd constant each draw and the output is a
    bit-mixing finalizer of the new state, so the k-th output is a pure
    function of seed + k * gamma. ``uniforms`` exploits that to produce a
    whole batch with vectorized uint64 arithmetic; the batch stream is
    identical to repeated ``next_uniform`` calls.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_raw(self) -> int:
        """Next raw 64-bit output."""
        self.state = (self.state + _GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_uniform(self) -> float:
        """Uniform draw in [0, 1) using the top 53 bits."""
        return (self.next_raw() >> 11) * 2.0 ** -53

    def uniforms(self, n: int) -> np.ndarray:
        """n uniform draws in [0, 1), advancing the state n times."""
        if n < 0:
            raise ValueError(f"n must be nonnegative, got {n}")
        if n == 0:
            return np.empty(0, dtype=np.float64)
        # uint64 array arithmetic wraps modulo 2^64, matching next_raw.
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        z = np.uint64(self.state) + steps
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GAMMA) & _MASK64
        return (z >> np.uint64(11)) * 2.0 ** -53
