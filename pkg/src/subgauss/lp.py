"""Two-phase dense simplex (Dantzig pricing, Bland fallback) and basis pursuit.

Problems are stated as

    minimize    c^T x
    subject to  A_eq x  = b_eq
                A_ub x <= b_ub
                lo <= x <= hi        (default 0 <= x < inf)

and reduced internally to the standard form ``A x = b, x >= 0, b >= 0``.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import apply

FEAS_TOL = 1e-8     # phase-1 optimum above this means infeasible
OPT_TOL = 1e-9      # reduced costs below -OPT_TOL are improving
PIVOT_TOL = 1e-9    # smallest admissible pivot magnitude
REFACTOR_EVERY = 100
MAX_PIVOTS = 200_000
DEGENERATE_STREAK = 20  # degenerate pivots in a row before Bland takes over
PERTURB = 1e-7          # relative lift of basic values during phase 2


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LPError(RuntimeError):
    """Raised when a problem cannot be solved as posed."""


@dataclass
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    bounds: list | None = None  # per-variable (lo, hi); None entries mean infinite

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_eq, self.b_eq = _check_block(self.A_eq, self.b_eq, n, "equality")
        self.A_ub, self.b_ub = _check_block(self.A_ub, self.b_ub, n, "inequality")
        if self.bounds is None:
            self.bounds = [(0.0, math.inf)] * n
        if len(self.bounds) != n:
            raise ValueError(f"expected {n} bounds, got {len(self.bounds)}")
        bounds = []
        for lo, hi in self.bounds:
            lo = -math.inf if lo is None else float(lo)
            hi = math.inf if hi is None else float(hi)
            if lo > hi:
                raise ValueError(f"empty bound interval [{lo}, {hi}]")
            bounds.append((lo, hi))
        self.bounds = bounds
        for arr in (self.c, self.A_eq, self.b_eq, self.A_ub, self.b_ub):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP coefficients must be finite")

    @property
    def num_vars(self) -> int:
        return self.c.size

    def to_text(self) -> str:
        """Plain-text dump for failure triage."""
        out = io.StringIO()
        out.write(f"vars {self.num_vars}\n")
        out.write("c " + " ".join(repr(float(v)) for v in self.c) + "\n")
        for name, A, b in (("eq", self.A_eq, self.b_eq), ("ub", self.A_ub, self.b_ub)):
            for row, rhs in zip(A, b):
                out.write(f"{name} " + " ".join(repr(float(v)) for v in row)
                          + f" | {float(rhs)!r}\n")
        for j, (lo, hi) in enumerate(self.bounds):
            out.write(f"bound {j} {lo!r} {hi!r}\n")
        return out.getvalue()


def _check_block(A, b, n, what):
    if A is None:
        if b is not None and np.size(b):
            raise ValueError(f"{what} right-hand side given without a matrix")
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[1] != n or A.shape[0] != b.size:
        raise ValueError(f"{what} block has shape {A.shape} with rhs {b.shape}; "
                         f"expected ({b.size}, {n})")
    return A, b


@dataclass
class LpOutcome:
    status: Status
    x: np.ndarray | None = None
    fun: float | None = None
    dual_bound: float | None = None
    ray: np.ndarray | None = None
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class _Standard:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    transform: np.ndarray  # x = transform @ x_std[:nstruct] + offset
    offset: np.ndarray
    obj_offset: float


def _standardize(lp: LinearProgram) -> _Standard:
    n = lp.num_vars
    cols = []   # columns of the transform, one per structural std variable
    offset = np.zeros(n)
    caps = []   # (std index, capacity) for doubly bounded variables
    for j, (lo, hi) in enumerate(lp.bounds):
        e = np.zeros(n)
        e[j] = 1.0
        if math.isfinite(lo):
            offset[j] = lo
            cols.append(e)
            if math.isfinite(hi):
                caps.append((len(cols) - 1, hi - lo))
        elif math.isfinite(hi):
            offset[j] = hi
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    T = np.array(cols).T if cols else np.zeros((n, 0))
    ns = T.shape[1]

    eq_A = lp.A_eq @ T
    eq_b = lp.b_eq - lp.A_eq @ offset
    ub_A = lp.A_ub @ T
    ub_b = lp.b_ub - lp.A_ub @ offset
    if caps:
        cap_A = np.zeros((len(caps), ns))
        for r, (idx, _) in enumerate(caps):
            cap_A[r, idx] = 1.0
        ub_A = np.vstack([ub_A, cap_A])
        ub_b = np.concatenate([ub_b, [cap for _, cap in caps]])

    m_eq, m_ub = eq_A.shape[0], ub_A.shape[0]
    A = np.zeros((m_eq + m_ub, ns + m_ub))
    A[:m_eq, :ns] = eq_A
    A[m_eq:, :ns] = ub_A
    A[m_eq:, ns:] = np.eye(m_ub)
    b = np.concatenate([eq_b, ub_b])
    c = np.concatenate([lp.c @ T, np.zeros(m_ub)])
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    return _Standard(A, b, c, T, offset, float(lp.c @ offset))


class _Tableau:
    """Dense tableau [B^-1 A | B^-1 b] with a basis list."""

    def __init__(self, A, b, basis, pricing="dantzig"):
        self.pricing = pricing
        self.A0 = A
        self.b0 = b
        self.basis = list(basis)
        self.pivots = 0
        self.refactor()

    def refactor(self):
        B = self.A0[:, self.basis]
        self.T = np.linalg.solve(B, np.column_stack([self.A0, self.b0]))

    def set_rhs(self, b):
        self.b0 = b
        self.refactor()

    def dual_repair(self, cost, tol):
        """Dual simplex pivots until every basic value is >= -tol.

        The basis must already be dual feasible.  Returns False if some row
        proves the problem infeasible.
        """
        while True:
            if self.pivots > MAX_PIVOTS:
                raise LPError("pivot limit exceeded")
            rhs = self.rhs
            row = int(np.argmin(rhs))
            if rhs[row] >= -tol:
                return True
            reduced = np.maximum(cost - cost[self.basis] @ self.T[:, :-1], 0.0)
            entries = self.T[row, :-1]
            cand = np.nonzero(entries < -PIVOT_TOL)[0]
            if cand.size == 0:
                return False
            col = int(cand[np.argmin(reduced[cand] / -entries[cand])])
            self.pivot(row, col)

    @property
    def rhs(self):
        return self.T[:, -1]

    def pivot(self, row, col):
        T = self.T
        T[row] /= T[row, col]
        colv = T[:, col].copy()
        colv[row] = 0.0
        T -= np.outer(colv, T[row])
        self.basis[row] = col
        self.pivots += 1
        if self.pivots % REFACTOR_EVERY == 0:
            self.refactor()

    def run(self, cost, allowed, floor=None):
        """Primal simplex on ``cost`` over columns marked ``allowed``.

        Pricing is Dantzig's most negative reduced cost until DEGENERATE_STREAK
        consecutive degenerate pivots, then Bland's smallest index until the
        objective moves again; no cycle can survive a Bland phase.  With
        ``pricing="bland"`` every pivot uses Bland's rule.

        Stops early once the objective is at or below ``floor``, a known
        lower bound.  Returns None at optimality or the entering column of an
        unbounded ray.
        """
        streak = 0
        while True:
            if self.pivots > MAX_PIVOTS:
                raise LPError("pivot limit exceeded")
            y_cost = cost[self.basis]
            if floor is not None and y_cost @ self.rhs <= floor:
                return None
            reduced = cost - y_cost @ self.T[:, :-1]
            cand = np.nonzero((reduced < -OPT_TOL) & allowed)[0]
            if cand.size == 0:
                return None
            if self.pricing == "bland" or streak >= DEGENERATE_STREAK:
                col = int(cand[0])
            else:
                col = int(cand[np.argmin(reduced[cand])])
            colv = self.T[:, col]
            pos = colv > PIVOT_TOL
            if not np.any(pos):
                return col
            ratios = np.full(colv.shape, np.inf)
            ratios[pos] = np.maximum(self.rhs[pos], 0.0) / colv[pos]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + 1e-12 * max(1.0, best))[0]
            row = int(min(ties, key=lambda r: self.basis[r]))
            streak = streak + 1 if best <= 1e-12 else 0
            self.pivot(row, col)


def _solve_standard(std: _Standard, pricing="dantzig"):
    A, b, c = std.A, std.b, std.c
    m, N = A.shape
    if m == 0:
        if np.any(c < -OPT_TOL):
            ray = np.zeros(N)
            ray[int(np.nonzero(c < -OPT_TOL)[0][0])] = 1.0
            return Status.UNBOUNDED, None, None, ray, 0
        return Status.OPTIMAL, np.zeros(N), np.zeros(0), None, 0

    # phase 1: artificials carry the initial basis
    A1 = np.hstack([A, np.eye(m)])
    tab = _Tableau(A1, b, range(N, N + m), pricing)
    cost1 = np.concatenate([np.zeros(N), np.ones(m)])
    scale = max(1.0, float(np.max(np.abs(b))))
    tab.run(cost1, np.ones(N + m, dtype=bool), floor=1e-3 * FEAS_TOL * scale)
    infeas = float(np.sum(np.maximum(tab.rhs[[i for i, j in enumerate(tab.basis) if j >= N]], 0.0)))
    if infeas > FEAS_TOL * scale:
        return Status.INFEASIBLE, None, None, None, tab.pivots

    # drive zero-level artificials out of the basis, dropping redundant rows
    keep = []
    for row in range(m):
        if tab.basis[row] < N:
            keep.append(row)
            continue
        entries = np.abs(tab.T[row, :N])
        nz = np.nonzero(entries > 1e-7)[0]
        if nz.size:
            tab.pivot(row, int(nz[0]))
            keep.append(row)
    basis = [tab.basis[r] for r in keep]
    A2 = A[keep]
    b2 = b[keep]
    tab2 = _Tableau(A2, b2, basis, pricing)
    tab2.pivots = tab.pivots
    # Lifting the basic values by a tiny positive amount keeps the start
    # basis feasible and splits the degenerate vertices that otherwise cost
    # thousands of zero-length pivots on basis pursuit instances.
    lift = PERTURB * (1.0 + np.abs(tab2.rhs)) * (0.5 + 0.5 * ((np.arange(len(keep)) * 0.6180339887498949) % 1.0))
    tab2.set_rhs(b2 + A2[:, tab2.basis] @ lift)
    allowed = np.ones(N, dtype=bool)
    enter = tab2.run(c, allowed)
    if enter is None:
        tab2.set_rhs(b2)
        if not tab2.dual_repair(c, 1e-12 * scale):
            return Status.INFEASIBLE, None, None, None, tab2.pivots
        enter = tab2.run(c, allowed)
    if enter is not None:
        ray = np.zeros(N)
        ray[enter] = 1.0
        ray[tab2.basis] = -tab2.T[:, enter]
        return Status.UNBOUNDED, None, None, ray, tab2.pivots

    B = A2[:, tab2.basis]
    xb = np.linalg.solve(B, b2)
    x = np.zeros(N)
    x[tab2.basis] = np.maximum(xb, 0.0)
    y_rows = np.linalg.solve(B.T, c[tab2.basis])
    y = np.zeros(m)
    y[keep] = y_rows
    return Status.OPTIMAL, x, y, None, tab2.pivots


def solve_lp(lp: LinearProgram, pricing: str = "dantzig") -> LpOutcome:
    """Solve ``lp``; Optimal, Infeasible or Unbounded.

    ``pricing`` is ``"dantzig"`` (with the Bland fallback) or ``"bland"``.
    """
    if pricing not in ("dantzig", "bland"):
        raise ValueError(f"unknown pricing rule {pricing!r}")
    std = _standardize(lp)
    status, xs, y, ray, pivots = _solve_standard(std, pricing)
    ns = std.transform.shape[1]
    if status is Status.INFEASIBLE:
        return LpOutcome(status, pivots=pivots)
    if status is Status.UNBOUNDED:
        return LpOutcome(status, ray=std.transform @ ray[:ns], pivots=pivots)
    x = std.transform @ xs[:ns] + std.offset
    fun = float(lp.c @ x)
    dual = float(std.b @ y) + std.obj_offset if y.size else std.obj_offset
    return LpOutcome(status, x, fun, dual, pivots=pivots)


def basis_pursuit(gamma: np.ndarray, y: np.ndarray) -> np.ndarray:
    """A minimizer of ||t||_1 subject to Gamma t = y.

    Split t = u - v with u, v >= 0 and minimize sum(u + v).  Raises
    :class:`LPError` when y is not in the range of Gamma.
    """
    gamma = np.asarray(gamma, dtype=float)
    y = np.asarray(y, dtype=float)
    k, n = gamma.shape
    if y.shape != (k,):
        raise ValueError(f"measurement vector has shape {y.shape}, expected ({k},)")
    std = _Standard(np.hstack([gamma, -gamma]), y.copy(), np.ones(2 * n),
                    np.eye(2 * n), np.zeros(2 * n), 0.0)
    flip = std.b < 0
    std.A[flip] *= -1.0
    std.b[flip] *= -1.0
    status, xs, _, _, _ = _solve_standard(std)
    if status is not Status.OPTIMAL:
        raise LPError(f"basis pursuit LP is {status.value}")
    t = xs[:n] - xs[n:]
    resid = float(np.max(np.abs(apply(gamma, t) - y))) if k else 0.0
    if resid > 1e-7 * (1.0 + float(np.max(np.abs(y), initial=0.0))):
        raise LPError(f"basis pursuit residual {resid:.3e} exceeds tolerance")
    return t
