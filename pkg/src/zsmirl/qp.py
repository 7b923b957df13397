"""Convex QP solver for min 0.5 (x-mu)' H (x-mu) subject to A x <= b.

H is supplied in operator form through a pair of callables (multiply by H,
solve with H); for the reward-recovery use H is the inverse of a regularized
covariance, so "solve with H" is a covariance multiply and both directions
are cheap. Two solve paths:

- an exact primal active-set method for small instances, warm-started at
  x = 0 (feasible whenever b >= 0, which holds for the homogeneous systems
  this package builds);
- an accelerated projected-gradient method (FISTA with adaptive restart) on
  the dual min_{lam>=0} 0.5 lam' A H^-1 A' lam - lam'(A mu - b), whose primal
  iterate x(lam) = mu - H^-1 A' lam keeps the dual KKT residual at roundoff
  by construction. This path touches the data only through products with A,
  A' and H^-1, so huge sparse systems never get materialized.

Both paths are deterministic functions of their inputs.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

ACTIVE_SET_MAX_VARS = 500
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 50_000
KKT_CHECK_EVERY = 25


class LinearMap:
    """Minimal matvec/rmatvec wrapper over ndarrays, sparse matrices or operators."""

    def __init__(self, shape, matvec, rmatvec, to_dense=None):
        self.shape = shape
        self.matvec = matvec
        self.rmatvec = rmatvec
        self._to_dense = to_dense

    def to_dense(self) -> np.ndarray:
        if self._to_dense is not None:
            return self._to_dense()
        m, n = self.shape
        cols = [self.matvec(np.eye(n)[:, j]) for j in range(n)]
        return np.stack(cols, axis=1)


def as_linear_map(a) -> LinearMap:
    if isinstance(a, LinearMap):
        return a
    if hasattr(a, "matvec") and hasattr(a, "rmatvec") and hasattr(a, "shape"):
        dense = getattr(a, "to_dense", None)
        return LinearMap(a.shape, a.matvec, a.rmatvec, dense)
    if sp.issparse(a):
        a = a.tocsr()
        return LinearMap(a.shape, lambda x: a @ x, lambda y: a.T @ y, a.toarray)
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError("constraint operator must be two-dimensional")
    return LinearMap(arr.shape, lambda x: arr @ x, lambda y: arr.T @ y, lambda: arr)


@dataclass(frozen=True)
class QpProblem:
    """Objective center mu, constraint operator A x <= b, and the H operator pair.

    h_mult(v) must return H v and h_solve(v) must return H^-1 v; H is the
    positive-definite quadratic form of the objective.
    """

    mu: np.ndarray
    a: object
    b: np.ndarray
    h_mult: Callable
    h_solve: Callable

    def __post_init__(self):
        mu = np.ascontiguousarray(self.mu, dtype=float)
        amap = as_linear_map(self.a)
        b = np.ascontiguousarray(self.b, dtype=float)
        if amap.shape[1] != mu.shape[0]:
            raise ValueError(f"constraint columns {amap.shape[1]} != len(mu) {mu.shape[0]}")
        if b.shape != (amap.shape[0],):
            raise ValueError(f"b must have length {amap.shape[0]}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "a", amap)
        object.__setattr__(self, "b", b)

    @property
    def n_vars(self) -> int:
        return self.mu.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.a.shape[0]

    def objective(self, x: np.ndarray) -> float:
        d = x - self.mu
        return 0.5 * float(d @ self.h_mult(d))


@dataclass(frozen=True)
class KktReport:
    """The three KKT residuals at (x, lambda), plus solver diagnostics."""

    primal_residual: float
    dual_residual: float
    complementarity: float
    multipliers: np.ndarray
    iterations: int
    converged: bool
    objective: float

    @property
    def max_residual(self) -> float:
        return max(self.primal_residual, self.dual_residual, self.complementarity)

    @property
    def n_active(self) -> int:
        lam = self.multipliers
        return int((lam > 1e-12 * max(1.0, lam.max(initial=0.0))).sum())


def check_kkt(problem: QpProblem, x: np.ndarray, lam: np.ndarray,
              iterations: int = 0, converged: bool = True) -> KktReport:
    """Exact KKT residuals: primal max(Ax-b,0), dual H(x-mu)+A'lam, complementarity."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (problem.n_constraints,):
        raise ValueError("multiplier length mismatch")
    slack = problem.a.matvec(x) - problem.b
    primal = float(np.maximum(slack, 0.0).max(initial=0.0))
    dual_vec = problem.h_mult(x - problem.mu) + problem.a.rmatvec(lam)
    dual = float(np.abs(dual_vec).max(initial=0.0))
    comp = float(np.abs(lam * slack).max(initial=0.0))
    return KktReport(primal_residual=primal, dual_residual=dual,
                     complementarity=comp, multipliers=lam,
                     iterations=iterations, converged=converged,
                     objective=problem.objective(x))


def _solve_active_set(problem: QpProblem, tol: float, max_iter: int):
    """Primal active-set method from the feasible start x = 0.

    Working-set systems are solved in the range space: with W active,
    lam_W solves (A_W H^-1 A_W') lam_W = A_W mu - b_W and
    x = mu - H^-1 A_W' lam_W. Blocking constraints and multiplier drops are
    tie-broken by lowest row index, so the path is deterministic.
    """
    A = problem.a.to_dense()
    m, n = A.shape
    mu, b = problem.mu, problem.b
    if m == 0:
        x = mu.copy()
        return x, check_kkt(problem, x, np.zeros(0), iterations=0, converged=True)
    x = np.zeros(n)
    if (A @ x - b).max() > 0:
        # x = 0 covers every homogeneous system; fall back to mu otherwise
        if (A @ mu - b).max() <= 0:
            x = mu.copy()
        else:
            raise ValueError("active-set path needs a feasible start (x = 0 or mu)")

    working: list[int] = []
    hinv_cols: list[np.ndarray] = []  # H^-1 a_w for each working row
    lam_full = np.zeros(m)
    step_tol = 1e-12

    for iteration in range(1, max_iter + 1):
        if working:
            Aw = A[working]
            Hw = np.stack(hinv_cols, axis=1)          # n x |W|
            Sw = Aw @ Hw                               # |W| x |W|
            rhs = Aw @ mu - b[working]
            try:
                lam_w = np.linalg.solve(Sw, rhs)
            except np.linalg.LinAlgError:
                lam_w = np.linalg.lstsq(Sw, rhs, rcond=None)[0]
            x_eqp = mu - Hw @ lam_w
        else:
            lam_w = np.zeros(0)
            x_eqp = mu.copy()

        p = x_eqp - x
        if np.abs(p).max(initial=0.0) <= step_tol * (1.0 + np.abs(x).max(initial=0.0)):
            if lam_w.size == 0 or lam_w.min() >= -tol:
                lam_full[:] = 0.0
                lam_full[working] = np.maximum(lam_w, 0.0)
                return x, check_kkt(problem, x, lam_full.copy(),
                                    iterations=iteration, converged=True)
            drop_pos = int(np.argmin(lam_w))  # most negative, lowest index on ties
            del working[drop_pos]
            del hinv_cols[drop_pos]
            continue

        Ap = A @ p
        slack = b - A @ x
        candidates = np.nonzero(Ap > 1e-13)[0]
        candidates = candidates[~np.isin(candidates, working)]
        alpha = 1.0
        blocking = -1
        if candidates.size:
            ratios = slack[candidates] / Ap[candidates]
            ratios = np.maximum(ratios, 0.0)
            best = ratios.min()
            if best < 1.0 - 1e-15:
                alpha = best
                ties = candidates[ratios <= best + 1e-12 * (1.0 + best)]
                blocking = int(ties.min())
        x = x + alpha * p
        if blocking >= 0:
            working.append(blocking)
            hinv_cols.append(problem.h_solve(A[blocking]))

    lam_full[:] = 0.0
    if working:
        lam_full[working] = np.maximum(lam_w, 0.0)
    return x, check_kkt(problem, x, lam_full.copy(), iterations=max_iter,
                        converged=False)


def _estimate_lipschitz(problem: QpProblem, iterations: int = 40) -> float:
    """Largest eigenvalue of A H^-1 A' by deterministic power iteration."""
    m = problem.n_constraints
    v = np.full(m, 1.0 / np.sqrt(m))
    lam_est = 1.0
    for _ in range(iterations):
        w = problem.a.matvec(problem.h_solve(problem.a.rmatvec(v)))
        norm = np.linalg.norm(w)
        if norm <= 1e-300:
            return 1.0
        lam_est = norm
        v = w / norm
    return lam_est * 1.05


def _solve_dual_fista(problem: QpProblem, tol: float, max_iter: int):
    """Accelerated projected gradient on the dual, with adaptive restart."""
    amap = problem.a
    mu, b = problem.mu, problem.b
    m = problem.n_constraints
    if m == 0:
        return mu.copy(), check_kkt(problem, mu, np.zeros(0), 0, True)

    amu_b = amap.matvec(mu) - b
    L = _estimate_lipschitz(problem)
    target = tol * (1.0 + np.abs(mu).max(initial=0.0))

    def primal(lam):
        return mu - problem.h_solve(amap.rmatvec(lam))

    lam = np.zeros(m)
    y = lam.copy()
    t = 1.0
    best = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad = amap.matvec(problem.h_solve(amap.rmatvec(y))) - amu_b
        lam_new = np.maximum(0.0, y - grad / L)
        if grad @ (lam_new - lam) > 0.0:
            # restart the momentum when it points against the gradient flow
            t = 1.0
            y = lam_new.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = lam_new + ((t - 1.0) / t_new) * (lam_new - lam)
            t = t_new
        lam = lam_new

        if iterations % KKT_CHECK_EVERY == 0 or iterations == max_iter:
            x = primal(lam)
            report = check_kkt(problem, x, lam, iterations=iterations,
                               converged=True)
            if best is None or report.max_residual < best[2]:
                best = (x, lam.copy(), report.max_residual)
            if report.max_residual <= target:
                return x, report

    x, lam_best, _ = best
    return x, check_kkt(problem, x, lam_best, iterations=iterations,
                        converged=False)


def solve_qp(problem: QpProblem, tol: float = DEFAULT_TOL,
             max_iter: int = DEFAULT_MAX_ITER, method: str = "auto"):
    """Solve the QP; returns (x, KktReport).

    method "auto" routes instances with at most ACTIVE_SET_MAX_VARS variables
    to the exact active-set path and everything larger to the first-order
    dual method. Non-convergence is reported through the flag on the report,
    with the best iterate returned.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method == "auto":
        method = "active-set" if problem.n_vars <= ACTIVE_SET_MAX_VARS else "first-order"
    if method == "active-set":
        x, report = _solve_active_set(problem, tol, max_iter=max(200, 4 * problem.n_constraints))
    elif method == "first-order":
        x, report = _solve_dual_fista(problem, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    return x, report
