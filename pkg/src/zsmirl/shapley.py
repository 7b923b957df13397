"""Forward solver: minimax bipolicy and values via Shapley value iteration.

Iterates V(s) <- value(r(s) + gamma * sum_s' p(s'|s,.,.) V(s')) from V = 0.
The per-state stage games are solved in one batched simplex call per sweep;
the returned bipolicy is produced by a final per-state solve with the full
lexicographic tie-break at the converged values, so it is a deterministic
function of the game alone.
"""

from dataclasses import dataclass, field

import numpy as np

from .game import Bipolicy, StochasticGame
from .matrixgame import clean_strategy, solve_matrix_game_batch, _refine_solution

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 2000


class ForwardSolveError(RuntimeError):
    """Raised by callers that cannot proceed with a non-converged solution."""

    def __init__(self, solution):
        super().__init__(
            f"value iteration did not converge: residual {solution.residual:.3g} "
            f"after {solution.iterations} iterations")
        self.solution = solution


@dataclass(frozen=True)
class ForwardSolution:
    """Converged values, the minimax bipolicy, and iteration diagnostics."""

    values: np.ndarray
    bipolicy: Bipolicy
    iterations: int
    residual: float
    converged: bool
    residual_history: np.ndarray = field(repr=False, default=None)


def _stage_matrices(game: StochasticGame, values: np.ndarray) -> np.ndarray:
    """Per-state payoff matrices r(s) + gamma * sum p(s'|s,a1,a2) V(s'), shape (N, M, M)."""
    q_flat = game.rewards + game.discount * (game.transitions @ values)
    return game.layout.per_state_matrices(q_flat)


def shapley_solve(game: StochasticGame, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER) -> ForwardSolution:
    """Solve the discounted game for its value vector and minimax bipolicy.

    Stops when the sup-norm update falls to tol; the iteration contracts with
    factor gamma, so this needs about log(tol)/log(gamma) sweeps. On max_iter
    exhaustion the best iterate is returned with converged=False.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    N = game.n_states
    V = np.zeros(N)
    residual = np.inf
    history = []
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        mats = _stage_matrices(game, V)
        new_V, _, _, _ = solve_matrix_game_batch(mats)
        residual = float(np.abs(new_V - V).max())
        history.append(residual)
        V = new_V
        if residual <= tol:
            converged = True
            break

    mats = _stage_matrices(game, V)
    _, P, Q, tie = solve_matrix_game_batch(mats)
    for s in np.nonzero(tie)[0]:
        vs = float(P[s] @ mats[s] @ Q[s])
        P[s], Q[s] = _refine_solution(mats[s], vs, P[s], Q[s])
    for s in range(N):
        P[s] = clean_strategy(P[s])
        Q[s] = clean_strategy(Q[s])
    bipolicy = Bipolicy(P, Q)
    return ForwardSolution(values=V, bipolicy=bipolicy, iterations=iterations,
                           residual=residual, converged=converged,
                           residual_history=np.array(history))


@dataclass(frozen=True)
class BipolicyReport:
    """Per-state minimax check of a bipolicy against its own Q and V.

    violations holds (state, player, action, amount) rows; player 1 entries
    are opposing columns that drop below V(s) - tol, player 2 entries are own
    rows exceeding V(s) + tol.
    """

    ok: bool
    violations: list = field(default_factory=list)
    max_violation: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def verify_minimax_bipolicy(game: StochasticGame, pi: Bipolicy,
                            tol: float) -> BipolicyReport:
    """Check the per-state minimax inequalities for pi under its own V and Q."""
    from .game import policy_value, q_function

    V = policy_value(pi, game)
    Q = q_function(pi, game)
    mats = game.layout.per_state_matrices(Q)
    row_payoffs = np.einsum("si,sij->sj", pi.pi1, mats)  # p' Q(s), per column
    col_payoffs = np.einsum("sij,sj->si", mats, pi.pi2)  # Q(s) q, per row
    short1 = V[:, None] - row_payoffs   # > 0 where player 1's guarantee falls short
    short2 = col_payoffs - V[:, None]   # > 0 where player 2's cap is exceeded
    violations = []
    for s, j in zip(*np.nonzero(short1 > tol)):
        violations.append((int(s), 1, int(j), float(short1[s, j])))
    for s, i in zip(*np.nonzero(short2 > tol)):
        violations.append((int(s), 2, int(i), float(short2[s, i])))
    max_violation = max(float(short1.max()), float(short2.max()), 0.0)
    return BipolicyReport(ok=not violations, violations=violations,
                          max_violation=max_violation)


def minimax_bipolicy_for(game: StochasticGame, tol: float = DEFAULT_TOL,
                         max_iter: int = DEFAULT_MAX_ITER) -> ForwardSolution:
    """shapley_solve that raises ForwardSolveError instead of returning flagged."""
    solution = shapley_solve(game, tol=tol, max_iter=max_iter)
    if not solution.converged:
        raise ForwardSolveError(solution)
    return solution
