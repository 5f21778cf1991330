"""Isotropic subgaussian ensembles and a reproducible random stream.

Every draw is a pure function of an :class:`RngState`.  The bit source is
Philox-4x64 (counter based, platform independent) keyed by the 64-bit seed
and the 64-bit stream counter; doubles are taken from the top 53 bits of
each raw word and Gaussian variates come from Box-Muller on those doubles.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
UNIT_TOL = 1e-9


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RngState:
    """A (seed, stream) pair naming one independent random stream."""

    seed: int
    counter: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= MASK64 and 0 <= self.counter <= MASK64):
            raise ValueError("seed and counter must be unsigned 64-bit integers")

    def split(self, index: int) -> "RngState":
        """Child stream number ``index``; distinct indices give disjoint streams."""
        return RngState(self.seed, _splitmix64(self.counter ^ _splitmix64(index + 1)))

    def raw(self, size: int) -> np.ndarray:
        bitgen = np.random.Philox(key=self.seed | (self.counter << 64))
        return bitgen.random_raw(size)

    def uniform(self, size) -> np.ndarray:
        """Doubles in [0, 1) with 53 random bits each."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape))
        return ((self.raw(count) >> np.uint64(11)) * 2.0**-53).reshape(shape)

    def normal(self, size) -> np.ndarray:
        """Standard normals by the Box-Muller transform."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape))
        half = (count + 1) // 2
        u = self.uniform(2 * half)
        radius = np.sqrt(-2.0 * np.log1p(-u[:half]))  # 1 - u lies in (0, 1]
        angle = 2.0 * np.pi * u[half:]
        z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
        return z[:count].reshape(shape)

    def signs(self, size) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape))
        bits = (self.raw(count) >> np.uint64(63)).astype(np.float64)
        return (2.0 * bits - 1.0).reshape(shape)


class Kind(enum.Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIFORM = "uniform"


# psi_2 constants: Rademacher solves E exp(1/u^2) = 2, the Gaussian solves
# (1 - 2/u^2)^(-1/2) = 2, the uniform one solves E exp(3 U^2 / u^2) = 2.
_ALPHA = {
    Kind.GAUSSIAN: math.sqrt(8.0 / 3.0),
    Kind.RADEMACHER: 1.0 / math.sqrt(math.log(2.0)),
}


@dataclass(frozen=True)
class Ensemble:
    """An isotropic psi_2 measure with i.i.d. coordinates."""

    kind: Kind
    alpha: float

    @classmethod
    def of(cls, kind) -> "Ensemble":
        kind = Kind(kind)
        if kind is Kind.UNIFORM:
            alpha = _uniform_alpha()
        else:
            alpha = _ALPHA[kind]
        return cls(kind, alpha)

    def draw(self, shape, rng: RngState) -> np.ndarray:
        if self.kind is Kind.GAUSSIAN:
            return rng.normal(shape)
        if self.kind is Kind.RADEMACHER:
            return rng.signs(shape)
        return math.sqrt(3.0) * (2.0 * rng.uniform(shape) - 1.0)


def _uniform_alpha() -> float:
    # E exp(3 U^2 / u^2) for U ~ U[-1, 1] is the integral of exp(a s^2) over
    # [0, 1] with a = 3/u^2; solve = 2 by bisection on u.
    def mgf(u):
        a = 3.0 / u**2
        s = np.linspace(0.0, 1.0, 20001)
        return np.trapezoid(np.exp(a * s * s), s)

    lo, hi = 1.0, 3.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mgf(mid) > 2.0:
            lo = mid
        else:
            hi = mid
    return hi


GAUSSIAN = Ensemble.of(Kind.GAUSSIAN)
RADEMACHER = Ensemble.of(Kind.RADEMACHER)
UNIFORM = Ensemble.of(Kind.UNIFORM)


def sample_matrix(ensemble: Ensemble, k: int, n: int, rng: RngState) -> np.ndarray:
    """k x n matrix whose rows are independent draws from ``ensemble``."""
    if k < 1 or n < 1:
        raise ValueError(f"matrix dimensions must be positive, got {k}x{n}")
    return ensemble.draw((k, n), rng)


@dataclass
class MomentReport:
    moments: np.ndarray
    std_errs: np.ndarray
    num_samples: int


def isotropy_check(ensemble: Ensemble, n: int, num_samples: int, directions,
                   rng: RngState) -> MomentReport:
    """Empirical E<X, y>^2 and its standard error for each unit direction y."""
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if dirs.shape[1] != n:
        raise ValueError(f"directions must have length {n}")
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise ValueError("directions must have unit Euclidean norm")
    X = sample_matrix(ensemble, num_samples, n, rng)
    sq = (X @ dirs.T) ** 2
    se = sq.std(axis=0, ddof=1) / math.sqrt(num_samples) if num_samples > 1 \
        else np.zeros(len(dirs))
    return MomentReport(sq.mean(axis=0), se, num_samples)


def psi2_estimate(samples) -> float:
    """Root in u of mean(exp(Y^2/u^2)) = 2.

    Bisection over [max|Y|/10, 10 max|Y|].  Returns 0 for all-zero data and
    ``inf`` when the empirical mean still exceeds 2 at the upper bracket.
    """
    y = np.asarray(samples, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("psi2_estimate needs at least one sample")
    top = float(np.max(np.abs(y)))
    if top == 0.0:
        return 0.0
    y2 = (y / top) ** 2  # rescaled so exponents stay bounded by 100

    def excess(u):  # u in units of max|Y|
        return np.mean(np.exp(y2 / (u * u))) - 2.0

    lo, hi = 0.1, 10.0
    if excess(hi) > 0:
        return math.inf
    if excess(lo) <= 0:
        return lo * top
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return hi * top
