"""Faces and neighborliness of K+(Gamma) = conv(v_i) and K(Gamma) = conv(+-v_i).

The columns v_i = Gamma e_i are the vertices.  A query names signed vertices
(I+, I-); it is a face when some w has <w, v_i> = +1 on I+, -1 on I- and
stays strictly inside the slab (symmetric case) or half-space (K+ case) on
every other column, and the queried vertices are affinely independent so the
face is a simplex.  For K+ the columns are first centred at their mean, which
lies in the relative interior, so every proper face has a normalizable
supporting hyperplane.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .ensembles import RngState
from .lp import LinearProgram, Status, solve_lp

MARGIN_TOL = 1e-7
ORACLE_TOL = 1e-8
RANK_TOL = 1e-9
SCAN_GUARD = 10**6


@dataclass(frozen=True)
class FaceQuery:
    i_plus: tuple
    i_minus: tuple = ()
    symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "i_plus", tuple(sorted(int(i) for i in self.i_plus)))
        object.__setattr__(self, "i_minus", tuple(sorted(int(i) for i in self.i_minus)))
        if set(self.i_plus) & set(self.i_minus):
            raise ValueError("I+ and I- must be disjoint")
        if len(set(self.i_plus)) != len(self.i_plus) or len(set(self.i_minus)) != len(self.i_minus):
            raise ValueError("repeated vertex in query")
        if not self.symmetric and self.i_minus:
            raise ValueError("a query on K+ cannot have negative vertices")
        if not self.i_plus and not self.i_minus:
            raise ValueError("empty query")

    @property
    def indices(self) -> tuple:
        return tuple(sorted(self.i_plus + self.i_minus))

    def signs(self) -> dict:
        out = {i: 1.0 for i in self.i_plus}
        out.update({i: -1.0 for i in self.i_minus})
        return out

    def negated(self) -> "FaceQuery":
        return FaceQuery(self.i_minus, self.i_plus, True)

    def __len__(self):
        return len(self.i_plus) + len(self.i_minus)


@dataclass
class Certificate:
    w: np.ndarray
    margin: float

    def __bool__(self):
        return True


@dataclass
class NotAFace:
    reason: str
    degenerate: bool = False
    margin: float | None = None

    def __bool__(self):
        return False


def _vertices(gamma, symmetric):
    gamma = np.asarray(gamma, dtype=float)
    return gamma if symmetric else gamma - gamma.mean(axis=1, keepdims=True)


def _independent(cols: np.ndarray) -> bool:
    if cols.shape[1] > cols.shape[0]:
        return False
    sv = np.linalg.svd(cols, compute_uv=False)
    return bool(sv[-1] > RANK_TOL * max(1.0, sv[0]))


def _duplicated(gamma, query) -> bool:
    """Whether a queried column equals another column (or its negative, for K)."""
    idx = list(query.indices)
    for i in idx:
        col = gamma[:, i:i + 1]
        same = np.all(gamma == col, axis=0)
        if query.symmetric:
            same |= np.all(gamma == -col, axis=0)
        same[i] = False
        if same.any():
            return True
    return False


def _check_margin(V, query, w):
    """Margin of a candidate w, or None if its equalities fail."""
    idx = list(query.indices)
    sig = np.array([query.signs()[i] for i in idx])
    vals = V.T @ w
    if np.max(np.abs(vals[idx] - sig)) > 1e-8:
        return None
    rest = np.ones(V.shape[1], dtype=bool)
    rest[idx] = False
    if not np.any(rest):
        return 1.0
    off = np.abs(vals[rest]) if query.symmetric else vals[rest]
    return float(min(1.0, 1.0 - off.max()))


def _least_norm_certificate(V, query):
    idx = list(query.indices)
    sig = np.array([query.signs()[i] for i in idx])
    cols = V[:, idx]
    w, *_ = np.linalg.lstsq(cols.T, sig, rcond=None)
    return w, _check_margin(V, query, w)


def _lawson_certificate(V, query, iters=60):
    """Approximate the minimax w on the equality set by Lawson reweighting.

    Parametrize w = w0 + N z with N spanning the null space of the
    equalities, then reweight a least-squares fit of the off-query values
    toward their largest magnitudes.  Returns the first w whose margin is
    positive, or None.
    """
    idx = list(query.indices)
    sig = np.array([query.signs()[i] for i in idx])
    rest = np.ones(V.shape[1], dtype=bool)
    rest[idx] = False
    if not np.any(rest):
        return None
    cols = V[:, idx]
    w0, *_ = np.linalg.lstsq(cols.T, sig, rcond=None)
    u, sv, vt = np.linalg.svd(cols.T)
    null = vt[len(idx):].T
    if null.shape[1] == 0:
        return None
    A = V[:, rest].T @ null
    b = V[:, rest].T @ w0
    omega = np.full(A.shape[0], 1.0 / A.shape[0])
    for _ in range(iters):
        sw = np.sqrt(omega)
        z, *_ = np.linalg.lstsq(A * sw[:, None], -b * sw, rcond=None)
        w = w0 + null @ z
        margin = _check_margin(V, query, w)
        if margin is not None and margin > MARGIN_TOL:
            return w, margin
        r = np.abs(A @ z + b)
        omega = omega * r
        total = omega.sum()
        if not np.isfinite(total) or total <= 0:
            return None
        omega /= total
    return None


def face_certificate(gamma, query: FaceQuery, method: str = "lp"):
    """Certificate (w, margin) for the query, or NotAFace.

    ``method="lp"`` maximizes the margin s over w by linear programming;
    ``method="auto"`` first tries the least-norm solution of the equalities,
    then a reweighted least-squares refinement, and only solves the LP when
    neither has a positive margin.  Any returned certificate is verified.
    """
    V = _vertices(gamma, query.symmetric)
    k, n = V.shape
    idx = list(query.indices)
    if idx[-1] >= n:
        raise ValueError("query index out of range")
    if _duplicated(np.asarray(gamma, dtype=float), query):
        return NotAFace("a queried vertex is a repeated column", degenerate=True)
    if query.symmetric:
        simplex = _independent(V[:, idx])
    else:
        raw = np.asarray(gamma, dtype=float)[:, idx]
        simplex = _independent(np.vstack([raw, np.ones(len(idx))]))
    if not simplex:
        return NotAFace("queried vertices are not affinely independent", degenerate=True)
    if method == "auto":
        w, margin = _least_norm_certificate(V, query)
        if margin is not None and margin > MARGIN_TOL:
            return Certificate(w, margin)
        found = _lawson_certificate(V, query)
        if found is not None:
            return Certificate(*found)
    elif method != "lp":
        raise ValueError(f"unknown method {method!r}")

    signs = query.signs()
    rest = [j for j in range(n) if j not in signs]
    # variables (w_1..w_k, s); maximize s with 0 <= s <= 1
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_eq = np.column_stack([V[:, idx].T, np.zeros(len(idx))])
    b_eq = np.array([signs[i] for i in idx])
    rows = [np.append(V[:, j], 1.0) for j in rest]
    if query.symmetric:
        rows += [np.append(-V[:, j], 1.0) for j in rest]
    A_ub = np.array(rows) if rows else None
    b_ub = np.ones(len(rows)) if rows else None
    bounds = [(None, None)] * k + [(0.0, 1.0)]
    out = solve_lp(LinearProgram(c, A_eq, b_eq, A_ub, b_ub, bounds))
    if out.status is Status.INFEASIBLE:
        return NotAFace("no w meets the equalities inside the slab")
    if out.status is not Status.OPTIMAL:
        raise RuntimeError(f"face LP ended {out.status.value}")
    w = out.x[:k]
    margin = _check_margin(V, query, w)
    if margin is None:
        raise RuntimeError("face LP returned a point violating its equalities")
    if margin > MARGIN_TOL:
        return Certificate(w, margin)
    return NotAFace("best margin is not positive", degenerate=margin > -MARGIN_TOL, margin=margin)


def face_oracle(gamma, query: FaceQuery) -> bool:
    """Decide faceness through convex representations of the query centroid.

    The centroid p of the queried (signed) vertices lies in the relative
    interior of their hull.  That hull is a simplex face exactly when every
    way of writing p as a convex combination of polytope vertices puts all
    weight on the query and the weights are unique.
    """
    gamma = np.asarray(gamma, dtype=float)
    k, n = gamma.shape
    if query.symmetric:
        verts = np.hstack([gamma, -gamma])
        labels = [(j, 1.0) for j in range(n)] + [(j, -1.0) for j in range(n)]
    else:
        verts = gamma
        labels = [(j, 1.0) for j in range(n)]
    signs = query.signs()
    inq = np.array([signs.get(j) == s for j, s in labels])
    p = np.mean([signs[i] * gamma[:, i] for i in query.indices], axis=0)
    N = verts.shape[1]
    A_eq = np.vstack([verts, np.ones(N)])
    b_eq = np.append(p, 1.0)

    def extreme(cost):
        out = solve_lp(LinearProgram(cost, A_eq, b_eq))
        if out.status is not Status.OPTIMAL:
            raise RuntimeError(f"oracle LP ended {out.status.value}")
        return out.fun

    outside = -extreme(-(~inq).astype(float))
    if outside > ORACLE_TOL:
        return False
    for j in np.flatnonzero(inq):
        e = np.zeros(N)
        e[j] = 1.0
        if -extreme(-e) - extreme(e) > ORACLE_TOL:
            return False
    return True


@dataclass
class ScanVerdict:
    neighborly: bool
    counterexample: FaceQuery | None = None
    reason: str = ""
    queries_checked: int = 0
    degenerate: int = 0


def _count_queries(n, sizes, symmetric):
    return sum(math.comb(n, s) * (2**s if symmetric else 1) for s in sizes)


def _queries_of_size(n, s, symmetric):
    for support in itertools.combinations(range(n), s):
        if not symmetric:
            yield FaceQuery(support)
            continue
        # the verdict is invariant under flipping every sign, so fix the first
        for tail in itertools.product((1, -1), repeat=s - 1):
            pattern = (1,) + tail
            plus = [i for i, g in zip(support, pattern) if g > 0]
            minus = [i for i, g in zip(support, pattern) if g < 0]
            yield FaceQuery(plus, minus, True)


def neighborly_scan(gamma, m: int, symmetric: bool = False, num_queries: int | None = None,
                    rng: RngState | None = None, strict_lt: bool = False,
                    method: str = "auto") -> ScanVerdict:
    """Check that every query of at most m vertices (fewer than m with
    ``strict_lt``) is a face.

    Exhaustive unless ``num_queries`` is given; sampled mode draws queries of
    the largest size uniformly, since every subset of a simplex face is a
    face.  Stops at the first counterexample.
    """
    gamma = np.asarray(gamma, dtype=float)
    k, n = gamma.shape
    top = m - 1 if strict_lt else m
    if top < 1:
        return ScanVerdict(True)
    if top > n:
        raise ValueError("query size exceeds the number of vertices")
    verdict = ScanVerdict(True)

    def check(q):
        verdict.queries_checked += 1
        res = face_certificate(gamma, q, method)
        if not res:
            verdict.degenerate += int(res.degenerate)
            verdict.neighborly = False
            verdict.counterexample = q
            verdict.reason = res.reason
            return False
        return True

    if num_queries is None:
        if _count_queries(n, range(1, top + 1), symmetric) > SCAN_GUARD:
            raise ValueError("exhaustive scan exceeds the query guard; use sampling")
        for s in range(1, top + 1):
            for q in _queries_of_size(n, s, symmetric):
                if not check(q):
                    return verdict
        return verdict

    rng = RngState(0) if rng is None else rng
    for t in range(num_queries):
        sub = rng.split(t)
        support = np.sort(np.argsort(sub.split(0).uniform(n))[:top])
        if symmetric:
            pattern = sub.split(1).signs(top)
            q = FaceQuery(support[pattern > 0], support[pattern < 0], True)
        else:
            q = FaceQuery(support)
        if not check(q):
            return verdict
    return verdict
