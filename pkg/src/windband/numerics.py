"""Deterministic numeric kernel: dense linear algebra, seeded Gaussian
streams, activations, and Gaussian / scale-mixture log-densities.

All floating point work is double precision. Random draws come from keyed
Philox streams (counter-based, 4x64, 10 rounds) with normals produced by
numpy's ziggurat transform, so a given ``(seed, stream_id)`` pair replays
the same sequence on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPriorError, NonPositiveSigmaError, ShapeMismatchError

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def sigmoid(x):
    """Logistic function, computed as 0.5*(1 + tanh(x/2)).

    The tanh form is overflow-free and keeps sigmoid(x) + sigmoid(-x) == 1
    exactly, which the gate algebra tests rely on.
    """
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def softplus(x):
    """ln(1 + e^x), stable for large |x|."""
    return np.logaddexp(0.0, np.asarray(x, dtype=float))


def softplus_inverse(y: float) -> float:
    """Return r with softplus(r) as close to y as the float grid allows.

    Nudges the analytic ln(e^y - 1) by a few ulps so that round-tripping
    through softplus reproduces y bit-exactly whenever a preimage exists.
    """
    if y <= 0:
        raise NonPositiveSigmaError(f"softplus output must be positive, got {y}")
    r = math.log(math.expm1(y))
    for candidate in _ulp_fan(r, 4):
        if float(softplus(candidate)) == y:
            return candidate
    return r


def _ulp_fan(x: float, k: int):
    yield x
    up = down = x
    for _ in range(k):
        up = math.nextafter(up, math.inf)
        down = math.nextafter(down, -math.inf)
        yield up
        yield down


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense matrix product with explicit shape checking."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatchError(f"matmul needs 2-D operands, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def gaussian_logpdf(x, mu, sigma):
    """Log density of N(mu, sigma^2) at x; broadcasts over arrays."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0.0):
        raise NonPositiveSigmaError("sigma must be strictly positive")
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    z = (x - mu) / sigma
    return -HALF_LOG_2PI - np.log(sigma) - 0.5 * z * z


@dataclass(frozen=True)
class MixturePrior:
    """Two-component zero-mean Gaussian scale mixture over weights.

    pi is the weight on the sigma1 component; pi=1 degenerates to a single
    Gaussian of scale sigma1.
    """

    pi: float = 1.0
    sigma1: float = 1.0
    sigma2: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.pi <= 1.0):
            raise InvalidPriorError(f"pi must lie in [0, 1], got {self.pi}")
        if self.sigma1 <= 0.0 or self.sigma2 <= 0.0:
            raise InvalidPriorError("sigma1 and sigma2 must be strictly positive")


def mixture_logpdf(x, prior: MixturePrior):
    """Log density of the two-component mixture, log-sum-exp stabilized."""
    if prior.pi == 1.0:
        return gaussian_logpdf(x, 0.0, prior.sigma1)
    if prior.pi == 0.0:
        return gaussian_logpdf(x, 0.0, prior.sigma2)
    a = math.log(prior.pi) + gaussian_logpdf(x, 0.0, prior.sigma1)
    b = math.log1p(-prior.pi) + gaussian_logpdf(x, 0.0, prior.sigma2)
    return np.logaddexp(a, b)


def mixture_logpdf_grad(x, prior: MixturePrior):
    """d/dx of mixture_logpdf, via component responsibilities."""
    x = np.asarray(x, dtype=float)
    v1 = prior.sigma1 * prior.sigma1
    v2 = prior.sigma2 * prior.sigma2
    if prior.pi == 1.0:
        return -x / v1
    if prior.pi == 0.0:
        return -x / v2
    a = math.log(prior.pi) + gaussian_logpdf(x, 0.0, prior.sigma1)
    b = math.log1p(-prior.pi) + gaussian_logpdf(x, 0.0, prior.sigma2)
    lse = np.logaddexp(a, b)
    r1 = np.exp(a - lse)
    r2 = np.exp(b - lse)
    return -x * (r1 / v1 + r2 / v2)


@dataclass
class RngStream:
    """Keyed, replayable Gaussian/permutation source.

    The (seed, stream_id) pair keys an independent Philox counter stream.
    A stream is single-owner: consumers that need independent randomness
    take distinct stream_ids instead of sharing one instance.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        key = np.array([self.seed % 2**64, self.stream_id % 2**64], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def standard_normal(self, n: int) -> np.ndarray:
        return self._gen.standard_normal(int(n))

    def normal_like(self, a: np.ndarray) -> np.ndarray:
        return self._gen.standard_normal(a.shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(int(n))


def sample_standard_normal(rng: RngStream, n: int) -> np.ndarray:
    """n i.i.d. standard normal draws from the given stream."""
    return rng.standard_normal(n)
