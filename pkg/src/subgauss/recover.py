"""Exact sparse recovery by basis pursuit and approximate reconstruction."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .ensembles import RngState
from .geometry import SetDescriptor, SetKind, r_star
from .linalg import apply, power_iteration_top, project_l1_ball
from .lp import LPError, basis_pursuit

SUCCESS_TOL = 1e-6


@dataclass(frozen=True)
class SparseVector:
    n: int
    support: tuple
    values: tuple

    def __post_init__(self):
        if len(self.support) != len(self.values):
            raise ValueError("support and values differ in length")
        if list(self.support) != sorted(set(self.support)):
            raise ValueError("support must be sorted and distinct")
        if self.support and not 0 <= self.support[0] <= self.support[-1] < self.n:
            raise ValueError("support index out of range")
        if any(v == 0 for v in self.values):
            raise ValueError("stored values must be nonzero")

    @classmethod
    def from_dense(cls, z) -> "SparseVector":
        z = np.asarray(z, dtype=float)
        idx = np.flatnonzero(z)
        return cls(z.size, tuple(int(i) for i in idx), tuple(float(v) for v in z[idx]))

    @classmethod
    def random(cls, n: int, m: int, rng: RngState, signs_only: bool = True) -> "SparseVector":
        """m-sparse vector on a uniformly random support, +-1 or Gaussian values."""
        support = np.sort(np.argsort(rng.split(0).uniform(n))[:m])
        if signs_only:
            vals = rng.split(1).signs(m)
        else:
            vals = rng.split(1).normal(m)
        return cls(n, tuple(int(i) for i in support), tuple(float(v) for v in vals))

    def dense(self) -> np.ndarray:
        z = np.zeros(self.n)
        z[list(self.support)] = self.values
        return z

    def signs(self) -> tuple[list, list]:
        plus = [i for i, v in zip(self.support, self.values) if v > 0]
        minus = [i for i, v in zip(self.support, self.values) if v < 0]
        return plus, minus


def random_l1_sphere_point(n: int, rng: RngState) -> np.ndarray:
    """Uniform point on the l1 unit sphere: Dirichlet(1,..,1) magnitudes, random signs."""
    e = -np.log1p(-rng.split(0).uniform(n))
    return rng.split(1).signs(n) * (e / e.sum())


def random_l1_vertex(n: int, rng: RngState) -> np.ndarray:
    """A uniformly chosen vertex +-e_i of the l1 ball."""
    t = np.zeros(n)
    i = min(int(rng.split(0).uniform(1)[0] * n), n - 1)
    t[i] = rng.split(1).signs(1)[0]
    return t


@dataclass
class RecoveryTrial:
    success: bool
    error: float       # l_inf distance to z
    residual: float    # l_inf of Gamma t - y
    wall_time: float
    diagnostic: str = ""


def exact_recover(gamma: np.ndarray, z: SparseVector) -> RecoveryTrial:
    """Run basis pursuit on y = Gamma z and compare with z."""
    start = time.perf_counter()
    zd = z.dense()
    y = apply(gamma, zd)
    try:
        t = basis_pursuit(gamma, y)
    except LPError as exc:
        return RecoveryTrial(False, math.inf, math.inf, time.perf_counter() - start, str(exc))
    err = float(np.max(np.abs(t - zd), initial=0.0))
    resid = float(np.max(np.abs(apply(gamma, t) - y), initial=0.0))
    ok = err <= SUCCESS_TOL * (1.0 + float(np.max(np.abs(zd), initial=0.0)))
    return RecoveryTrial(ok, err, resid, time.perf_counter() - start)


@dataclass
class Reconstruction:
    t: np.ndarray
    residual: float        # ((1/k) sum (<X_i, t> - y_i)^2)^(1/2)
    iterations: int
    objective_trace: np.ndarray


def _projector(T: SetDescriptor):
    if T.kind is SetKind.L1_BALL:
        return lambda v: project_l1_ball(v, T.param)
    if T.kind is SetKind.L2_BALL:
        def proj(v):
            norm = np.linalg.norm(v)
            return v if norm <= T.param else v * (T.param / norm)
        return proj
    raise ValueError(f"no exact projection onto a {T.kind.value} set")


def approx_reconstruct(gamma: np.ndarray, y: np.ndarray, T: SetDescriptor,
                       epsilon: float, max_iters: int = 10_000,
                       t0: np.ndarray | None = None) -> Reconstruction:
    """Projected gradient descent on t -> (1/k)|Gamma t - y|^2 over T.

    With L = lambda_max(Gamma^T Gamma)/k from 50 power iterations the step is
    1/L on half the objective, i.e. the reciprocal of the gradient's
    Lipschitz constant, so the objective never increases.  Stops once the
    root-mean-square residual is at most ``epsilon``.  Starts from ``t0``
    (projected onto T) or from the origin.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    proj = _projector(T)
    gamma = np.asarray(gamma, dtype=float)
    y = np.asarray(y, dtype=float)
    k, n = gamma.shape
    lip = power_iteration_top(gamma) / k
    t = np.zeros(n) if t0 is None else proj(np.asarray(t0, dtype=float).copy())
    r = gamma @ t - y
    trace = [float(r @ r) / k]
    it = 0
    while math.sqrt(trace[-1]) > epsilon and it < max_iters and lip > 0:
        grad = (2.0 / k) * (gamma.T @ r)
        t = proj(t - grad / (2.0 * lip))
        r = gamma @ t - y
        trace.append(float(r @ r) / k)
        it += 1
    return Reconstruction(t, math.sqrt(trace[-1]), it, np.array(trace))


@dataclass
class TheoremAAudit:
    observed_error: float
    bound_value: float
    satisfied: bool
    residual: float
    radius: float


def theorem_a_audit(gamma: np.ndarray, v: np.ndarray, T: SetDescriptor, epsilon: float,
                    theta: float, alpha: float, c_norm: float = 1.0,
                    rng: RngState | None = None, max_iters: int = 10_000,
                    radius: float | None = None, num_samples: int = 2000,
                    t0: np.ndarray | None = None) -> TheoremAAudit:
    """Reconstruct v from Gamma v over T and test |t - v| <= 2 residual + r*(theta, 2T).

    T must be symmetric and convex so that T - T sits inside 2T.  ``radius``
    short-circuits the Monte Carlo fixed point when it is already known.
    """
    if T.kind not in (SetKind.L1_BALL, SetKind.L2_BALL):
        raise ValueError("audit needs a symmetric convex projectable set")
    gamma = np.asarray(gamma, dtype=float)
    k = gamma.shape[0]
    rec = approx_reconstruct(gamma, apply(gamma, v), T, epsilon, max_iters, t0)
    if radius is None:
        radius = r_star(theta, T.scaled(2.0), k, alpha, c_norm, num_samples, rng).value
    err = float(np.linalg.norm(rec.t - v))
    bound = 2.0 * rec.residual + radius
    return TheoremAAudit(err, bound, err <= bound, rec.residual, radius)
