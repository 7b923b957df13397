"""Forward and inverse solvers for two-player zero-sum discounted stochastic games."""

from .game import (
    Bipolicy,
    FlatLayout,
    StochasticGame,
    build_B,
    build_B_conditioned,
    build_G,
    build_G_conditioned,
    expected_reward,
    policy_value,
    q_function,
    swap_players,
)
from .matrixgame import MatrixGameSolution, solve_matrix_game, verify_minimax_bistrategy
from .shapley import (
    ForwardSolution,
    ForwardSolveError,
    shapley_solve,
    verify_minimax_bipolicy,
)

__version__ = "0.1.0"
