"""Star-shaped index sets, Gaussian mean width and the fixed-point radius.

Support functions are evaluated exactly per set kind, batched over rows of a
Gaussian sample matrix.  The radius ``r_star`` uses common random numbers
across the radius grid so that the scanned ratio width/radius is exactly
nonincreasing and the first crossing can be located by bisection.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .ensembles import RngState

WIDTH_CHUNK = 8192
GRID_POINTS = 2048
GRID_MIN = 1e-6
BISECT_ITERS = 80


class SetKind(enum.Enum):
    L1_BALL = "l1"
    WEAK_LP = "weaklp"
    L2_BALL = "l2"
    SPARSE_CAP = "sparse"
    POINT_CLOUD = "cloud"


@dataclass(frozen=True)
class SetDescriptor:
    """A symmetric star-shaped set T in R^n.

    ``param`` is the radius for balls, p for the weak-l_p ball and m for the
    sparse cap.  A point cloud stands for the star hull of its points.
    """

    kind: SetKind
    n: int
    param: float = 1.0
    points: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("ambient dimension must be positive")
        if self.kind is SetKind.WEAK_LP and not 0 < self.param < 1:
            raise ValueError(f"weak-l_p ball needs 0 < p < 1, got {self.param}")
        if self.kind is SetKind.SPARSE_CAP and not 1 <= self.param <= self.n:
            raise ValueError(f"sparse cap needs 1 <= m <= n, got m={self.param}")
        if self.kind in (SetKind.L1_BALL, SetKind.L2_BALL) and self.param <= 0:
            raise ValueError("ball radius must be positive")
        if self.kind is SetKind.POINT_CLOUD:
            pts = np.atleast_2d(np.asarray(self.points, dtype=float))
            if pts.shape[1] != self.n:
                raise ValueError("point cloud dimension mismatch")
            object.__setattr__(self, "points", pts)

    @classmethod
    def l1(cls, n, radius=1.0):
        return cls(SetKind.L1_BALL, n, radius)

    @classmethod
    def l2(cls, n, radius=1.0):
        return cls(SetKind.L2_BALL, n, radius)

    @classmethod
    def weak_lp(cls, n, p):
        return cls(SetKind.WEAK_LP, n, p)

    @classmethod
    def sparse_cap(cls, n, m):
        return cls(SetKind.SPARSE_CAP, n, int(m))

    @classmethod
    def cloud(cls, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(SetKind.POINT_CLOUD, pts.shape[1], 1.0, pts)

    def scaled(self, factor: float) -> "SetDescriptor":
        """The set factor * T (balls and clouds only)."""
        if self.kind in (SetKind.L1_BALL, SetKind.L2_BALL):
            return SetDescriptor(self.kind, self.n, self.param * factor)
        if self.kind is SetKind.POINT_CLOUD:
            return SetDescriptor.cloud(self.points * factor)
        raise ValueError(f"cannot rescale a {self.kind.value} set")

    def weak_profile(self) -> np.ndarray:
        return np.arange(1, self.n + 1, dtype=float) ** (-1.0 / self.param)

    def diameter(self) -> float:
        """Largest Euclidean norm of a point of T."""
        if self.kind in (SetKind.L1_BALL, SetKind.L2_BALL):
            return float(self.param)
        if self.kind is SetKind.SPARSE_CAP:
            return 1.0
        if self.kind is SetKind.WEAK_LP:
            return float(np.linalg.norm(self.weak_profile()))
        return float(np.max(np.linalg.norm(self.points, axis=1)))


def parse_set(text: str, n: int) -> SetDescriptor:
    """``l1``, ``l1:R``, ``l2``, ``l2:R``, ``weaklp:P`` or ``sparse:M``."""
    name, _, arg = text.partition(":")
    if name == "l1":
        return SetDescriptor.l1(n, float(arg or 1.0))
    if name == "l2":
        return SetDescriptor.l2(n, float(arg or 1.0))
    if name == "weaklp":
        return SetDescriptor.weak_lp(n, float(arg))
    if name == "sparse":
        return SetDescriptor.sparse_cap(n, int(arg))
    raise ValueError(f"unknown set {text!r}")


def _check_dim(T: SetDescriptor, G: np.ndarray):
    if G.shape[-1] != T.n:
        raise ValueError(f"vector of length {G.shape[-1]} for a set in R^{T.n}")


def support_batch(T: SetDescriptor, G: np.ndarray) -> np.ndarray:
    """sup_{t in T} |<g, t>| for every row g of G."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    _check_dim(T, G)
    A = np.abs(G)
    if T.kind is SetKind.L1_BALL:
        return T.param * A.max(axis=1)
    if T.kind is SetKind.L2_BALL:
        return T.param * np.linalg.norm(G, axis=1)
    if T.kind is SetKind.SPARSE_CAP:
        m = int(T.param)
        top = -np.partition(-(G * G), m - 1, axis=1)[:, :m]
        return np.sqrt(top.sum(axis=1))
    if T.kind is SetKind.WEAK_LP:
        srt = -np.sort(-A, axis=1)
        return srt @ T.weak_profile()
    return np.abs(G @ T.points.T).max(axis=1)


def support_function(T: SetDescriptor, g) -> float:
    g = np.asarray(g, dtype=float)
    if g.ndim != 1:
        raise ValueError("support_function takes a single vector")
    return float(support_batch(T, g[None, :])[0])


def _l1_sphere_support(A: np.ndarray, radius: float, rho: float) -> np.ndarray:
    """sup of <a, t> over t in radius*B_1 with |t|_2 = rho, rows a >= 0."""
    l1 = A.sum(axis=1)
    l2 = np.linalg.norm(A, axis=1)
    out = rho * l2
    q = radius / rho
    with np.errstate(divide="ignore", invalid="ignore"):
        tight = l1 > q * l2
    if not np.any(tight):
        return out
    B = A[tight]
    # soft threshold tau with ||S_tau||_1 / ||S_tau||_2 = q; the ratio falls in tau
    lo = np.zeros(len(B))
    hi = B.max(axis=1)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        S = np.maximum(B - mid[:, None], 0.0)
        ratio = S.sum(axis=1) / np.maximum(np.linalg.norm(S, axis=1), 1e-300)
        above = ratio > q
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    S = np.maximum(B - lo[:, None], 0.0)
    out[tight] = rho * (B * S).sum(axis=1) / np.linalg.norm(S, axis=1)
    return out


def _box_sphere_support(srt: np.ndarray, caps: np.ndarray, rho: float) -> np.ndarray:
    """sup of <a, t> over 0 <= t <= caps with |t|_2 = rho; rows a sorted down."""
    # t_i = min(caps_i, mu * a_i) with mu fixed by |t|_2 = rho
    with np.errstate(divide="ignore"):
        ratio = np.where(srt > 0, caps / np.where(srt > 0, srt, 1.0), 0.0)
    lo = np.zeros(len(srt))
    hi = ratio.max(axis=1)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        t = np.minimum(caps, mid[:, None] * srt)
        short = np.einsum("ij,ij->i", t, t) < rho * rho
        lo = np.where(short, mid, lo)
        hi = np.where(short, hi, mid)
    t = np.minimum(caps, hi[:, None] * srt)
    norms = np.linalg.norm(t, axis=1)
    val = np.einsum("ij,ij->i", t, srt)
    return np.where(norms > 0, val * rho / np.maximum(norms, 1e-300), 0.0)


def sphere_support_batch(T: SetDescriptor, G: np.ndarray, rho: float) -> np.ndarray:
    """sup over T intersected with the sphere of radius rho; 0 when that is empty."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    _check_dim(T, G)
    if rho <= 0:
        raise ValueError("rho must be positive")
    if rho > T.diameter() * (1 + 1e-12):
        return np.zeros(len(G))
    A = np.abs(G)
    if T.kind is SetKind.L2_BALL:
        return rho * np.linalg.norm(G, axis=1)
    if T.kind is SetKind.SPARSE_CAP:
        return rho * support_batch(T, G)
    if T.kind is SetKind.L1_BALL:
        return _l1_sphere_support(A, T.param, rho)
    if T.kind is SetKind.WEAK_LP:
        srt = -np.sort(-A, axis=1)
        return _box_sphere_support(srt, T.weak_profile()[None, :], rho)
    norms = np.linalg.norm(T.points, axis=1)
    keep = norms >= rho
    dirs = T.points[keep] / norms[keep, None]
    return rho * np.abs(G @ dirs.T).max(axis=1)


@dataclass
class WidthEstimate:
    value: float
    std_err: float
    num_samples: int


def _gaussian_rows(rng: RngState, num_samples: int, n: int):
    for chunk, start in enumerate(range(0, num_samples, WIDTH_CHUNK)):
        rows = min(WIDTH_CHUNK, num_samples - start)
        yield rng.split(chunk).normal((rows, n))


def gaussian_width(T: SetDescriptor, num_samples: int, rng: RngState) -> WidthEstimate:
    """Monte Carlo estimate of E sup_{t in T} |<g, t>|."""
    if num_samples < 2:
        raise ValueError("need at least two samples for a standard error")
    vals = np.concatenate([support_batch(T, G) for G in _gaussian_rows(rng, num_samples, T.n)])
    return WidthEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(num_samples)),
                         num_samples)


def width_bound_um(m: int, n: int) -> float:
    """sqrt(log(5^m * C(n, m))), the net bound on the width of conv U_m."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    log_binom = math.lgamma(n + 1) - math.lgamma(m + 1) - math.lgamma(n - m + 1)
    return math.sqrt(m * math.log(5.0) + log_binom)


@dataclass
class RStar:
    value: float
    exhausted: bool  # no grid point satisfied the inequality
    grid_index: int


def r_star(theta: float, T: SetDescriptor, k: int, alpha: float, c_norm: float = 1.0,
           num_samples: int = 2000, rng: RngState | None = None,
           grid_points: int = GRID_POINTS) -> RStar:
    """Smallest grid radius rho with rho >= c alpha^2 width(T_rho) / (theta sqrt k).

    T_rho is T intersected with the sphere of radius rho and the width is a
    Monte Carlo estimate over a fixed Gaussian sample shared by all radii.
    The grid is geometric over [1e-6, diameter(T)].
    """
    if not 0 < theta:
        raise ValueError("theta must be positive")
    if k < 1 or alpha <= 0 or c_norm <= 0:
        raise ValueError("k, alpha and c_norm must be positive")
    rng = RngState(0) if rng is None else rng
    G = rng.normal((num_samples, T.n))
    grid = np.geomspace(GRID_MIN, max(T.diameter(), GRID_MIN), grid_points)
    level = theta * math.sqrt(k) / (c_norm * alpha * alpha)

    def holds(i):
        rho = grid[i]
        return sphere_support_batch(T, G, rho).mean() / rho <= level

    last = grid_points - 1
    if not holds(last):
        return RStar(float(grid[last]), True, last)
    if holds(0):
        return RStar(float(grid[0]), False, 0)
    lo, hi = 0, last  # holds(lo) false, holds(hi) true
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if holds(mid):
            hi = mid
        else:
            lo = mid
    return RStar(float(grid[hi]), False, hi)


def rstar_closed_form(theta: float, k: int, n: int, alpha: float, p: float | None = None) -> float:
    """Closed-form radius bound for B_1^n (p None) or the weak-l_p ball, constant 1.

    Returns ``inf`` when n alpha^4 / (theta^2 k) < 1 or the (1/p - 1)^-1 factor
    overflows.
    """
    if p is not None and not 0 < p < 1:
        raise ValueError(f"weak-l_p exponent must lie in (0, 1), got {p}")
    eff = theta * theta * k / alpha**4
    arg = n / eff
    if arg < 1:
        return math.inf
    base = math.log(arg) / eff
    if p is None:
        return math.sqrt(base)
    gap = 1.0 / p - 1.0
    if gap <= 0:
        return math.inf
    return base ** (1.0 / p - 0.5) / gap


@dataclass
class UmCertificate:
    """x = 2 * sum_j weights[j] * vectors[j] with each vector a unit m-sparse vector."""

    weights: np.ndarray
    vectors: np.ndarray
    m: int

    def residual(self, x) -> float:
        return float(np.max(np.abs(2.0 * self.weights @ self.vectors - np.asarray(x))))

    def max_support(self) -> int:
        return int((self.vectors != 0).sum(axis=1).max())

    def verify(self, x, weight_tol=1e-9, resid_tol=1e-8) -> bool:
        norms = np.linalg.norm(self.vectors, axis=1)
        return (self.max_support() <= self.m
                and bool(np.all(self.weights >= 0))
                and float(self.weights.sum()) <= 1.0 + weight_tol
                and bool(np.all(np.abs(norms - 1.0) <= 1e-9))
                and self.residual(x) <= resid_tol)


def _capped_simplex_pieces(z: np.ndarray):
    """Write z (0 <= z_i <= 1, sum z = q integer) as sum_l beta_l 1_{S_l}, |S_l| = q.

    Lay the z_i end to end on [0, q); for t in [0, 1) the points t, t+1, ...,
    t+q-1 fall in q distinct intervals.  Sets only change at the fractional
    parts of the interval endpoints.
    """
    ends = np.cumsum(z)
    starts = ends - z
    q = int(round(ends[-1]))
    cuts = np.unique(np.concatenate([[0.0, 1.0], np.mod(starts, 1.0)]))
    pieces = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 1e-15:
            continue
        pts = 0.5 * (a + b) + np.arange(q)
        idx = np.searchsorted(ends, pts, side="right")
        idx = idx[idx < len(z)]
        pieces.append((b - a, idx))
    return pieces


def decompose_into_um(x, m: int) -> UmCertificate:
    """Write a unit vector x with ||x||_1 <= 2 sqrt(m) as 2 * (combination of U_m).

    Uses the norm-optimal decomposition: keep the h largest coordinates in
    every piece and spread the remaining l1 mass over pieces that each take
    r + 1 = m - h further coordinates of equal size.  The split is chosen
    among admissible h to minimize the total weight, which then equals the
    gauge of conv U_m at x.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if m < 1:
        raise ValueError("m must be positive")
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise ValueError("x must be a unit vector")
    if np.abs(x).sum() > 2.0 * math.sqrt(m) + 1e-12:
        raise ValueError("x must satisfy ||x||_1 <= 2 sqrt(m)")
    nz = np.flatnonzero(x)
    if len(nz) <= m:
        return UmCertificate(np.array([0.5]), x[None, :].copy(), m)

    order = np.argsort(-np.abs(x), kind="stable")
    a = np.abs(x)[order]
    best = None
    for r in range(m):
        h = m - r - 1
        tail = a[h:].sum()
        if a[h] > tail / (r + 1) * (1 + 1e-12):
            continue  # tail entries must fit under the cap
        cost = math.sqrt(float(a[:h] @ a[:h]) + tail * tail / (r + 1))
        if best is None or cost < best[0]:
            best = (cost, h, r, tail)
    _, h, r, tail = best
    head = order[:h]
    rest = order[h:]
    z = a[h:] * (r + 1) / tail
    z = np.minimum(z, 1.0)
    z *= (r + 1) / z.sum()
    vectors, weights = [], []
    for beta, idx in _capped_simplex_pieces(z):
        v = np.zeros(n)
        v[head] = x[head]
        cols = rest[idx]
        v[cols] = np.sign(x[cols]) * tail / (r + 1)
        norm = np.linalg.norm(v)
        vectors.append(v / norm)
        weights.append(beta * norm / 2.0)
    return UmCertificate(np.array(weights), np.array(vectors), m)
