"""Empirical processes over linear functionals and isometry audits."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .ensembles import Ensemble, RngState, sample_matrix
from .geometry import SetDescriptor, SetKind
from .linalg import apply, gram_extreme_eigs

ENUMERATION_GUARD = 10**6


@dataclass
class FunctionalClass:
    """Points x in R^n, each standing for the functional f_x = <., x>."""

    points: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.normalized:
            norms = np.linalg.norm(self.points, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("normalized class needs unit vectors")

    @classmethod
    def canonical(cls, n: int) -> "FunctionalClass":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def second_moments(self) -> np.ndarray:
        """E f_x^2 = |x|^2 under an isotropic measure."""
        return np.sum(self.points**2, axis=1)


@dataclass
class ProcessReport:
    Z: np.ndarray        # (1/k) sum f^2(X_i) - E f^2, per point
    W: np.ndarray        # ((1/k) sum f^2(X_i))^(1/2), per point
    sup_abs_Z: float
    argmax: int
    k: int


def process_eval(cls: FunctionalClass, gamma: np.ndarray) -> ProcessReport:
    gamma = np.asarray(gamma, dtype=float)
    k, n = gamma.shape
    if n != cls.n:
        raise ValueError(f"class lives in R^{cls.n}, matrix has {n} columns")
    # one pairwise-summed product per point, so each Z_x is independent of
    # which other points share the class
    images = np.stack([apply(gamma, x) for x in cls.points])
    emp = np.add.reduce(images**2, axis=1) / k
    Z = emp - cls.second_moments()
    absZ = np.abs(Z)
    i = int(np.argmax(absZ))
    return ProcessReport(Z, np.sqrt(emp), float(absZ[i]), i, k)


@dataclass
class ScalingReport:
    k_grid: list
    mean_sup: np.ndarray
    std_err: np.ndarray
    slope: float
    slope_se: float


def loglog_slope(xs, ys) -> tuple[float, float]:
    """Least-squares slope of log y on log x with its standard error."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    if lx.size < 2:
        raise ValueError("need at least two points for a slope")
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    if lx.size > 2:
        resid = ly - A @ coef
        s2 = float(resid @ resid) / (lx.size - 2)
        se = math.sqrt(s2 / float(np.sum((lx - lx.mean()) ** 2)))
    else:
        se = 0.0
    return float(coef[0]), se


def sup_scaling_diag(cls: FunctionalClass, ensemble: Ensemble, k_grid, trials: int,
                     rng: RngState) -> ScalingReport:
    """Mean of sup |Z_f| over ``trials`` matrices at each k, and its log-log slope."""
    k_grid = [int(k) for k in k_grid]
    if any(b <= a for a, b in zip(k_grid, k_grid[1:])) or min(k_grid) < 4:
        raise ValueError("k grid must be strictly increasing with minimum >= 4")
    means, ses = [], []
    for ki, k in enumerate(k_grid):
        sups = np.array([
            process_eval(cls, sample_matrix(ensemble, k, cls.n, rng.split(ki).split(t))).sup_abs_Z
            for t in range(trials)
        ])
        means.append(sups.mean())
        ses.append(sups.std(ddof=1) / math.sqrt(trials) if trials > 1 else 0.0)
    means = np.array(means)
    slope, slope_se = loglog_slope(k_grid, means)
    return ScalingReport(k_grid, means, np.array(ses), slope, slope_se)


@dataclass
class AuditVerdict:
    holds: bool
    support: tuple | None = None     # first violating support
    eigenvalue: float | None = None  # its offending eigenvalue
    supports_checked: int = 0
    lam_min: float = math.inf        # extremes over all supports checked
    lam_max: float = -math.inf


def isometry_audit(gamma: np.ndarray, T: SetDescriptor, theta: float,
                   stop_at_first: bool = False) -> AuditVerdict:
    """Check (1-theta) <= |Gamma x|^2 / k <= (1+theta) on every m-sparse unit x.

    Exact: the Rayleigh quotient over unit vectors supported on S ranges over
    the spectrum of Gamma_S^T Gamma_S / k, so all C(n, m) supports are scanned.
    """
    if T.kind is not SetKind.SPARSE_CAP:
        raise ValueError("isometry audits run on sparse caps")
    gamma = np.asarray(gamma, dtype=float)
    k, n = gamma.shape
    m = int(T.param)
    if n != T.n:
        raise ValueError("set and matrix dimensions differ")
    if math.comb(n, m) > ENUMERATION_GUARD:
        raise ValueError(f"C({n}, {m}) supports exceed the enumeration guard")
    verdict = AuditVerdict(True)
    for support in itertools.combinations(range(n), m):
        lo, hi = gram_extreme_eigs(gamma, support)
        verdict.supports_checked += 1
        verdict.lam_min = min(verdict.lam_min, lo)
        verdict.lam_max = max(verdict.lam_max, hi)
        bad = lo if lo < 1 - theta else hi if hi > 1 + theta else None
        if bad is not None and verdict.holds:
            verdict.holds = False
            verdict.support = support
            verdict.eigenvalue = bad
            if stop_at_first:
                break
    return verdict
