"""Static M x M zero-sum matrix games: value and minimax strategies via LP.

The row player (player 1) maximizes p' A q, the column player minimizes it.
The workhorse is a dense primal simplex with Bland's rule run on the
normalized matrix (A - min)/(max - min) + 1, which makes the value positive
and the pivot path invariant under affine transforms c*A + d (c > 0). When
the optimal strategy set is not a singleton the returned strategies are the
lexicographically smallest optimal points, computed by a sequence of small
refinement LPs; the lex-min point of a polytope is unique, so the tie-break
is deterministic by construction.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

PIVOT_TOL = 1e-11
TIE_TOL = 1e-9
REFINE_SLACK = 1e-10
_MAX_PIVOTS_PER_DIM = 60


@dataclass(frozen=True)
class MatrixGameSolution:
    """Game value and a minimax bistrategy (p for the row player, q for the column)."""

    value: float
    p: np.ndarray
    q: np.ndarray


@dataclass(frozen=True)
class BistrategyReport:
    """Result of checking the minimax inequalities for a candidate (p, q, V).

    violations holds (player, action, amount) rows: player 1 entries are
    columns j with p'A e_j < V - tol, player 2 entries are rows i with
    e_i' A q > V + tol; amount is the (positive) violation magnitude.
    """

    ok: bool
    violations: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def _normalize(A: np.ndarray):
    """Map each matrix affinely onto [1, 2]; constant matrices are flagged."""
    lo = A.min(axis=(1, 2))
    hi = A.max(axis=(1, 2))
    span = hi - lo
    const = span <= 1e-13 * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    safe_span = np.where(const, 1.0, span)
    Abar = (A - lo[:, None, None]) / safe_span[:, None, None] + 1.0
    return Abar, lo, safe_span, const


def _simplex_batch(Abar: np.ndarray):
    """Solve max 1'u s.t. Abar u <= 1, u >= 0 for a batch of normalized matrices.

    Returns (u, w, tie, stuck) where u recovers the column strategy
    (q = u / 1'u), w holds the dual slack prices recovering the row strategy,
    tie flags instances whose optimal vertex may not be unique (zero reduced
    cost on a nonbasic column or a degenerate basic row) and stuck flags the
    rare instances whose pivoting broke down numerically (the LP itself is
    bounded, so the caller re-solves those through a slower robust path).
    """
    K, M, _ = Abar.shape
    T = np.zeros((K, M + 1, 2 * M + 1))
    T[:, :M, :M] = Abar
    T[:, :M, M:2 * M] = np.eye(M)
    T[:, :M, -1] = 1.0
    T[:, M, :M] = -1.0
    basis = np.tile(np.arange(M, 2 * M), (K, 1))
    stuck = np.zeros(K, dtype=bool)
    big = 10 * M

    for sweep in range(_MAX_PIVOTS_PER_DIM * M + 1):
        reduced = T[:, M, :2 * M]
        negative = reduced < -PIVOT_TOL
        active = negative.any(axis=1) & ~stuck
        if not active.any():
            break
        if sweep == _MAX_PIVOTS_PER_DIM * M:
            stuck |= active
            break
        idx = np.nonzero(active)[0]
        enter = np.argmax(negative[idx], axis=1)  # first negative column: Bland

        col = T[idx, :M, :][np.arange(len(idx)), :, enter]
        rhs = T[idx, :M, -1]
        positive = col > PIVOT_TOL
        # a bounded LP can only lose every pivot candidate to roundoff
        broken = ~positive.any(axis=1)
        if broken.any():
            stuck[idx[broken]] = True
            keep = ~broken
            idx, enter, col, rhs, positive = (idx[keep], enter[keep], col[keep],
                                              rhs[keep], positive[keep])
            if idx.size == 0:
                continue
        ratios = np.where(positive, rhs / np.where(positive, col, 1.0), np.inf)
        min_ratio = ratios.min(axis=1, keepdims=True)
        tie_rows = ratios <= min_ratio + 1e-12 * (1.0 + min_ratio)
        # Bland ties: leave the row whose basic variable has the smallest index
        cand = np.where(tie_rows, basis[idx], 10 * big)
        leave = np.argmin(cand, axis=1)

        pivval = T[idx, leave, enter]
        prow = T[idx, leave, :] / pivval[:, None]
        pcol = T[idx, :, enter].copy()
        T[idx] -= pcol[:, :, None] * prow[:, None, :]
        T[idx, leave, :] = prow
        basis[idx, leave] = enter

    u = np.zeros((K, M))
    rows = np.arange(M)
    for k in range(K):
        sel = basis[k] < M
        u[k, basis[k, sel]] = T[k, rows[sel], -1]
    w = T[:, M, M:2 * M].copy()

    reduced = T[:, M, :2 * M]
    nonbasic = np.ones((K, 2 * M), dtype=bool)
    np.put_along_axis(nonbasic, basis, False, axis=1)
    zero_reduced = (nonbasic & (np.abs(reduced) <= TIE_TOL)).any(axis=1)
    degenerate = (T[:, :M, -1] <= TIE_TOL).any(axis=1)
    tie = zero_reduced | degenerate
    return u, w, tie, stuck


def _solve_normalized_lp(Abar_k: np.ndarray):
    """Robust scalar fallback for one normalized game: linprog on both sides."""
    M = Abar_k.shape[0]
    res_q = linprog(-np.ones(M), A_ub=Abar_k, b_ub=np.ones(M), bounds=(0, None),
                    method="highs")
    res_p = linprog(np.ones(M), A_ub=-Abar_k.T, b_ub=-np.ones(M), bounds=(0, None),
                    method="highs")
    if not (res_q.success and res_p.success):
        raise ArithmeticError("fallback LP failed on a bounded matrix game")
    return res_q.x, res_p.x


def _simplex_batch_with_fallback(Abar: np.ndarray):
    """Batched simplex plus the robust scalar path for numerically stuck games."""
    u, w, tie, stuck = _simplex_batch(Abar)
    # degenerate pivoting can also leave a corrupted strategy pair behind
    stuck |= (u.sum(axis=1) <= PIVOT_TOL) | (w.sum(axis=1) <= PIVOT_TOL)
    for k in np.nonzero(stuck)[0]:
        u[k], w[k] = _solve_normalized_lp(Abar[k])
        tie[k] = True  # canonicalize through the lexicographic refinement
    return u, w, tie


def solve_matrix_game_batch(A: np.ndarray):
    """Values and Bland-simplex strategies for a (K, M, M) batch of payoff matrices.

    No tie refinement is applied here; the returned tie flags tell the caller
    which instances may need the lexicographic refinement for a canonical
    strategy choice. Values are always unique.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise ValueError(f"expected a (K, M, M) batch, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("payoff matrices must be finite")
    K, M, _ = A.shape
    Abar, lo, span, const = _normalize(A)

    values = np.empty(K)
    P = np.zeros((K, M))
    Q = np.zeros((K, M))
    tie = np.zeros(K, dtype=bool)

    todo = ~const
    if todo.any():
        u, w, t = _simplex_batch_with_fallback(Abar[todo])
        sum_u = u.sum(axis=1)
        sum_w = w.sum(axis=1)
        vbar = 1.0 / sum_u
        values[todo] = (vbar - 1.0) * span[todo] + lo[todo]
        Q[todo] = u / sum_u[:, None]
        P[todo] = w / sum_w[:, None]
        tie[todo] = t
    if const.any():
        # constant payoff: every strategy pair is optimal; lex-min picks the
        # last pure action for both players
        values[const] = lo[const]
        P[const, M - 1] = 1.0
        Q[const, M - 1] = 1.0
    return values, P, Q, tie


def _lex_min_over(c_dim, a_ub, b_ub, start):
    """Lexicographically smallest point of {x in simplex: a_ub x <= b_ub}.

    Minimizes x_0, then x_1 given x_0, and so on. `start` is a feasible point
    used as a fallback if a refinement step fails.
    """
    M = c_dim
    a_eq = [np.ones(M)]
    b_eq = [1.0]
    x = np.asarray(start, dtype=float)
    for k in range(M - 1):
        c = np.zeros(M)
        c[k] = 1.0
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=np.array(a_eq),
                      b_eq=np.array(b_eq), bounds=(0, None), method="highs")
        if not res.success:
            return x
        x = res.x
        fixed = np.zeros(M)
        fixed[k] = 1.0
        a_eq.append(fixed)
        b_eq.append(x[k])
    return clean_strategy(x)


def clean_strategy(x: np.ndarray, dust: float = 1e-9) -> np.ndarray:
    """Clamp a near-simplex vector: drop float dust below `dust`, renormalize.

    Solver output can carry basic-variable dust around 1e-16; downstream
    operators subtract strategy-weighted rows, and dust there turns exact
    cancellations into spurious near-zero rows.
    """
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    x[x < dust] = 0.0
    return x / x.sum()


def _refine_solution(A: np.ndarray, value: float, p: np.ndarray, q: np.ndarray):
    """Replace (p, q) by the lexicographically smallest optimal strategies."""
    M = A.shape[0]
    if M == 1:
        return p, q
    scale = max(1.0, np.abs(A).max())
    slack = REFINE_SLACK * scale
    # q ranges over {q in simplex : A q <= value}
    q = _lex_min_over(M, A, np.full(M, value + slack), q)
    # p ranges over {p in simplex : A' p >= value}
    p = _lex_min_over(M, -A.T, np.full(M, -(value - slack)), p)
    return p, q


def solve_matrix_game(A: np.ndarray, tol: float = 1e-9) -> MatrixGameSolution:
    """Value and minimax bistrategy of a single zero-sum matrix game.

    The returned strategies satisfy A'p >= V - tol and A q <= V + tol
    componentwise. Among multiple optimal strategies the lexicographically
    smallest optimal point is returned for each player.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("payoff matrix must be finite")
    values, P, Q, tie = solve_matrix_game_batch(A[None, :, :])
    value, p, q = float(values[0]), P[0], Q[0]
    if tie[0]:
        p, q = _refine_solution(A, value, p, q)
    p, q = clean_strategy(p), clean_strategy(q)
    report = verify_minimax_bistrategy(A, p, q, value, max(tol, 1e-9))
    if not report.ok:
        raise ArithmeticError(f"matrix game solve failed verification: {report.violations[:3]}")
    return MatrixGameSolution(value, p, q)


def verify_minimax_bistrategy(A: np.ndarray, p: np.ndarray, q: np.ndarray,
                              value: float, tol: float) -> BistrategyReport:
    """Check the minimax inequalities A'p >= V - tol and A q <= V + tol."""
    A = np.asarray(A, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    violations = []
    row_payoffs = A.T @ p   # payoff to player 1 per opposing column
    col_payoffs = A @ q     # payoff to player 1 per own row
    for j in range(A.shape[1]):
        if row_payoffs[j] < value - tol:
            violations.append((1, j, value - tol - row_payoffs[j]))
    for i in range(A.shape[0]):
        if col_payoffs[i] > value + tol:
            violations.append((2, i, col_payoffs[i] - value - tol))
    return BistrategyReport(ok=not violations, violations=violations)
