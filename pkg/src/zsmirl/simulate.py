"""Monte Carlo match play between two policy-equipped agents.

Agent C plays A's role (player 1), agent B plays player 2. Episodes start at
the initial board with possession assigned uniformly at random, run until the
first goal (the scorer wins) or a step cap (a draw), and are driven by a
per-episode generator derived from (master seed, episode index), so results
are reproducible and independent of any execution order.
"""

from dataclasses import dataclass

import numpy as np

from .game import Bipolicy, StochasticGame
from .shapley import ForwardSolveError, shapley_solve
from .soccer import N_ACTIONS, SoccerConfig, SoccerDynamics, build_soccer_game


@dataclass(frozen=True)
class MatchStats:
    """Episode tallies; win percentages count decisive episodes only."""

    episodes: int
    wins_c: int
    wins_b: int
    draws: int

    def __post_init__(self):
        if self.wins_c + self.wins_b + self.draws != self.episodes:
            raise ValueError("tallies must add up to the episode count")

    @property
    def decisive(self) -> int:
        return self.wins_c + self.wins_b

    @property
    def win_pct_c(self) -> float:
        return 100.0 * self.wins_c / self.decisive if self.decisive else 0.0

    @property
    def win_pct_b(self) -> float:
        return 100.0 * self.wins_b / self.decisive if self.decisive else 0.0


def minimax_policy_from(rewards: np.ndarray, config: SoccerConfig, player: int = 1,
                        tol: float = 1e-8, max_iter: int = 2000,
                        game: StochasticGame = None) -> np.ndarray:
    """One side of the minimax bipolicy of the soccer dynamics under `rewards`.

    Builds the game at the config's beta (pass `game` to reuse a built one),
    solves it, and returns the requested player's per-state strategies.
    Raises ForwardSolveError if value iteration does not converge.
    """
    if game is None:
        game = build_soccer_game(config)
    game = game.with_rewards(rewards)
    solution = shapley_solve(game, tol=tol, max_iter=max_iter)
    if not solution.converged:
        raise ForwardSolveError(solution)
    return solution.bipolicy.pi1 if player == 1 else solution.bipolicy.pi2


def random_policy(config: SoccerConfig) -> np.ndarray:
    """Uniform strategy: every action with probability 1/6 in every state."""
    return np.full((config.n_states, N_ACTIONS), 1.0 / N_ACTIONS)


def _episode_rng(seed: int, episode: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, episode)))


def simulate_match(policy_c: np.ndarray, policy_b: np.ndarray, config: SoccerConfig,
                   episodes: int, step_cap: int = 500, seed: int = 0) -> MatchStats:
    """Play `episodes` first-goal-wins episodes of C (role A) against B.

    Policies are (n_states, 6) row-stochastic arrays. Identical inputs and
    seed give bit-identical tallies.
    """
    policy_c = np.asarray(policy_c, dtype=float)
    policy_b = np.asarray(policy_b, dtype=float)
    expect = (config.n_states, N_ACTIONS)
    if policy_c.shape != expect or policy_b.shape != expect:
        raise ValueError(f"policies must have shape {expect}")
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    dyn = SoccerDynamics(config)
    cum_c = np.cumsum(policy_c, axis=1)
    cum_b = np.cumsum(policy_b, axis=1)
    reset_a, reset_b = dyn.reset_states

    wins_c = wins_b = draws = 0
    for ep in range(episodes):
        rng = _episode_rng(seed, ep)
        state = reset_a if rng.random() < 0.5 else reset_b
        outcome = 0.0
        for _ in range(step_cap):
            a1 = int(np.searchsorted(cum_c[state], rng.random(), side="right"))
            a2 = int(np.searchsorted(cum_b[state], rng.random(), side="right"))
            state, points = dyn.step(state, min(a1, N_ACTIONS - 1),
                                     min(a2, N_ACTIONS - 1), rng)
            if points != 0.0:
                outcome = points
                break
        if outcome > 0.0:
            wins_c += 1
        elif outcome < 0.0:
            wins_b += 1
        else:
            draws += 1
    return MatchStats(episodes=episodes, wins_c=wins_c, wins_b=wins_b, draws=draws)


def empirical_bipolicy(pi: Bipolicy, samples_per_state: int, seed: int = 0) -> Bipolicy:
    """Frequency estimate of a bipolicy from sampled action draws per state.

    Experimentation aid: the recovery pipeline consumes the exact solver
    bipolicy, but this lets one study what finite observation does.
    """
    if samples_per_state < 1:
        raise ValueError("samples_per_state must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB1)))
    N, M = pi.pi1.shape
    out = []
    for strat in (pi.pi1, pi.pi2):
        counts = np.zeros((N, M))
        for s in range(N):
            draws = rng.choice(M, size=samples_per_state, p=strat[s])
            counts[s] = np.bincount(draws, minlength=M)
        out.append(counts / samples_per_state)
    return Bipolicy(out[0], out[1])
