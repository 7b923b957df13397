"""Grid-soccer stochastic game: board, dynamics, rewards and state coding.

Two players A (player 1) and B (player 2) move on a rows x cols board whose
squares are numbered 1..rows*cols row-major. Each has 6 actions: N, S, E, W,
stand, shoot. The ball holder scores by shooting (success probability given
by a per-square table) or by carrying the ball onto one of its goal squares;
either a goal or a missed shot resets the board to the initial positions with
possession assigned uniformly at random. When both players land on the same
square, possession flips with probability beta. A state is (A's square, B's
square, possession), giving rows*cols*rows*cols*2 states.

The reward vector holds A's expected points scored minus B's for each
(state, action pair), which makes it exactly consistent with the dynamics.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .game import StochasticGame

ACTIONS = ("N", "S", "E", "W", "stand", "shoot")
N_ACTIONS = 6
A_N, A_S, A_E, A_W, A_STAND, A_SHOOT = range(6)

# shot success by ring distance 1..4 from the nearest goal square; distance 0
# (own goal square) and distance >= 5 give 0
PSS_LEVELS_A = (0.7, 0.5, 0.3, 0.1)
PSS_LEVELS_B = (0.6, 0.4, 0.2, 0.05)


def _square_rc(square: int, cols: int) -> tuple[int, int]:
    """1-based square -> 1-based (row, col)."""
    return (square - 1) // cols + 1, (square - 1) % cols + 1


def _rc_square(row: int, col: int, cols: int) -> int:
    return (row - 1) * cols + col


def _ring_pss(rows: int, cols: int, goals: tuple, levels: tuple) -> tuple:
    out = []
    for sq in range(1, rows * cols + 1):
        r, c = _square_rc(sq, cols)
        d = min(abs(r - gr) + abs(c - gc)
                for gr, gc in (_square_rc(g, cols) for g in goals))
        out.append(0.0 if d == 0 or d > len(levels) else levels[d - 1])
    return tuple(out)


def _default_goals(rows: int, cols: int) -> tuple[tuple, tuple]:
    mid = [(rows + 1) // 2] if rows % 2 else [rows // 2, rows // 2 + 1]
    goals_a = tuple(_rc_square(r, 1, cols) for r in mid)
    goals_b = tuple(_rc_square(r, cols, cols) for r in mid)
    return goals_a, goals_b


@dataclass(frozen=True)
class SoccerConfig:
    """Board geometry, shot tables and match parameters.

    Defaults reproduce the 4x5 benchmark board: goals on the left/right edge
    middle rows, per-square shot probabilities decaying with ring distance
    from the nearest goal, initial positions a rotationally symmetric pair.
    """

    rows: int = 4
    cols: int = 5
    goals_a: tuple = None
    goals_b: tuple = None
    pss_a: tuple = None
    pss_b: tuple = None
    beta: float = 0.6
    gamma: float = 0.9
    initial_a: int = None
    initial_b: int = None
    goal_point: float = 1.0

    def __post_init__(self):
        rows, cols = self.rows, self.cols
        if rows < 1 or cols < 2:
            raise ValueError("board must have at least 1 row and 2 columns")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.goal_point <= 0.0:
            raise ValueError("goal_point must be positive")
        S = rows * cols

        goals_a, goals_b = self.goals_a, self.goals_b
        if goals_a is None or goals_b is None:
            da, db = _default_goals(rows, cols)
            goals_a = da if goals_a is None else tuple(goals_a)
            goals_b = db if goals_b is None else tuple(goals_b)
        goals_a, goals_b = tuple(goals_a), tuple(goals_b)
        for g in goals_a + goals_b:
            if not 1 <= g <= S:
                raise ValueError(f"goal square {g} off the board")
        if set(goals_a) & set(goals_b):
            raise ValueError("goal sets must be disjoint")

        pss_a = self.pss_a if self.pss_a is not None else _ring_pss(rows, cols, goals_a, PSS_LEVELS_A)
        pss_b = self.pss_b if self.pss_b is not None else _ring_pss(rows, cols, goals_b, PSS_LEVELS_B)
        pss_a, pss_b = tuple(float(x) for x in pss_a), tuple(float(x) for x in pss_b)
        for name, pss, goals in (("pss_a", pss_a, goals_a), ("pss_b", pss_b, goals_b)):
            if len(pss) != S:
                raise ValueError(f"{name} must have {S} entries")
            if min(pss) < 0.0 or max(pss) > 1.0:
                raise ValueError(f"{name} values must lie in [0, 1]")
            if any(pss[g - 1] != 0.0 for g in goals):
                raise ValueError(f"{name} must be 0 on the player's own goal squares")

        initial_a = self.initial_a
        initial_b = self.initial_b
        if initial_a is None:
            initial_a = _rc_square(max(rows // 2, 1), max(cols - 1, 1), cols)
        if initial_b is None:
            initial_b = S + 1 - initial_a
        for p in (initial_a, initial_b):
            if not 1 <= p <= S:
                raise ValueError(f"initial position {p} off the board")

        object.__setattr__(self, "goals_a", goals_a)
        object.__setattr__(self, "goals_b", goals_b)
        object.__setattr__(self, "pss_a", pss_a)
        object.__setattr__(self, "pss_b", pss_b)
        object.__setattr__(self, "initial_a", int(initial_a))
        object.__setattr__(self, "initial_b", int(initial_b))

    @property
    def n_squares(self) -> int:
        return self.rows * self.cols

    @property
    def n_states(self) -> int:
        return self.n_squares ** 2 * 2

    def with_beta(self, beta: float) -> "SoccerConfig":
        return SoccerConfig(rows=self.rows, cols=self.cols, goals_a=self.goals_a,
                            goals_b=self.goals_b, pss_a=self.pss_a, pss_b=self.pss_b,
                            beta=beta, gamma=self.gamma, initial_a=self.initial_a,
                            initial_b=self.initial_b, goal_point=self.goal_point)


@dataclass(frozen=True)
class SoccerState:
    """Decoded state: both squares 1-based, possession "A" or "B"."""

    pos_a: int
    pos_b: int
    possession: Literal["A", "B"]


def encode_state(pos_a: int, pos_b: int, possession: str, config: SoccerConfig) -> int:
    S = config.n_squares
    if not (1 <= pos_a <= S and 1 <= pos_b <= S):
        raise ValueError(f"positions ({pos_a}, {pos_b}) off the board")
    if possession not in ("A", "B"):
        raise ValueError(f"possession must be 'A' or 'B', got {possession!r}")
    bit = 0 if possession == "A" else 1
    return ((pos_a - 1) * S + (pos_b - 1)) * 2 + bit


def decode_state(index: int, config: SoccerConfig) -> SoccerState:
    S = config.n_squares
    if not 0 <= index < config.n_states:
        raise ValueError(f"state index {index} out of range")
    pair, bit = divmod(index, 2)
    pos_a, pos_b = divmod(pair, S)
    return SoccerState(pos_a + 1, pos_b + 1, "A" if bit == 0 else "B")


def state_tables(config: SoccerConfig):
    """Vectorized decode of all states: (pos_a, pos_b, possession_bit) arrays.

    Squares are 1-based; possession_bit is 0 for A, 1 for B.
    """
    S = config.n_squares
    idx = np.arange(config.n_states)
    pair, bit = np.divmod(idx, 2)
    pos_a, pos_b = np.divmod(pair, S)
    return pos_a + 1, pos_b + 1, bit


def _move_table(config: SoccerConfig) -> np.ndarray:
    """(n_squares, 6) table of 1-based destination squares; off-board moves stand."""
    rows, cols = config.rows, config.cols
    S = config.n_squares
    table = np.zeros((S, N_ACTIONS), dtype=np.int64)
    for sq in range(1, S + 1):
        r, c = _square_rc(sq, cols)
        table[sq - 1, A_N] = _rc_square(r - 1, c, cols) if r > 1 else sq
        table[sq - 1, A_S] = _rc_square(r + 1, c, cols) if r < rows else sq
        table[sq - 1, A_E] = _rc_square(r, c + 1, cols) if c < cols else sq
        table[sq - 1, A_W] = _rc_square(r, c - 1, cols) if c > 1 else sq
        table[sq - 1, A_STAND] = sq
        table[sq - 1, A_SHOOT] = sq
    return table


class SoccerDynamics:
    """Precomputed step machinery shared by the game builder and the simulator."""

    def __init__(self, config: SoccerConfig):
        self.config = config
        self.move = _move_table(config)
        self.pss_a = np.array(config.pss_a)
        self.pss_b = np.array(config.pss_b)
        S = config.n_squares
        self.goal_mask_a = np.zeros(S, dtype=bool)
        self.goal_mask_a[np.array(config.goals_a) - 1] = True
        self.goal_mask_b = np.zeros(S, dtype=bool)
        self.goal_mask_b[np.array(config.goals_b) - 1] = True
        self.reset_states = (encode_state(config.initial_a, config.initial_b, "A", config),
                             encode_state(config.initial_a, config.initial_b, "B", config))

    def outcomes(self, state: int, a1: int, a2: int):
        """All (probability, next_state, points_for_A) branches of one joint step."""
        cfg = self.config
        S = cfg.n_squares
        pair, bit = divmod(state, 2)
        pa, pb = divmod(pair, S)  # 0-based squares
        gp = cfg.goal_point
        beta = cfg.beta
        reset_a, reset_b = self.reset_states

        holder_shot = (a1 == A_SHOOT) if bit == 0 else (a2 == A_SHOOT)
        if holder_shot:
            if bit == 0:
                pss, sign = self.pss_a[pa], 1.0
            else:
                pss, sign = self.pss_b[pb], -1.0
            out = []
            for reset in (reset_a, reset_b):
                if pss > 0.0:
                    out.append((0.5 * pss, reset, sign * gp))
                if pss < 1.0:
                    out.append((0.5 * (1.0 - pss), reset, 0.0))
            return out

        new_pa = self.move[pa, a1] - 1
        new_pb = self.move[pb, a2] - 1
        scored = (self.goal_mask_a[new_pa] if bit == 0 else self.goal_mask_b[new_pb])
        if scored:
            sign = 1.0 if bit == 0 else -1.0
            return [(0.5, reset_a, sign * gp), (0.5, reset_b, sign * gp)]

        stay = ((new_pa * S) + new_pb) * 2 + bit
        if new_pa == new_pb:
            flipped = ((new_pa * S) + new_pb) * 2 + (1 - bit)
            out = []
            if beta > 0.0:
                out.append((beta, flipped, 0.0))
            if beta < 1.0:
                out.append((1.0 - beta, stay, 0.0))
            return out
        return [(1.0, stay, 0.0)]

    def step(self, state: int, a1: int, a2: int, rng: np.random.Generator):
        """Sample one joint step; returns (next_state, points_for_A)."""
        cfg = self.config
        S = cfg.n_squares
        pair, bit = divmod(state, 2)
        pa, pb = divmod(pair, S)
        holder_shot = (a1 == A_SHOOT) if bit == 0 else (a2 == A_SHOOT)
        if holder_shot:
            if bit == 0:
                pss, sign = self.pss_a[pa], 1.0
            else:
                pss, sign = self.pss_b[pb], -1.0
            points = sign * cfg.goal_point if rng.random() < pss else 0.0
            nxt = self.reset_states[0] if rng.random() < 0.5 else self.reset_states[1]
            return nxt, points

        new_pa = self.move[pa, a1] - 1
        new_pb = self.move[pb, a2] - 1
        if bit == 0 and self.goal_mask_a[new_pa]:
            nxt = self.reset_states[0] if rng.random() < 0.5 else self.reset_states[1]
            return nxt, cfg.goal_point
        if bit == 1 and self.goal_mask_b[new_pb]:
            nxt = self.reset_states[0] if rng.random() < 0.5 else self.reset_states[1]
            return nxt, -cfg.goal_point

        if new_pa == new_pb and rng.random() < cfg.beta:
            bit = 1 - bit
        return ((new_pa * S) + new_pb) * 2 + bit, 0.0


def build_soccer_game(config: SoccerConfig) -> StochasticGame:
    """Assemble the soccer StochasticGame for the given configuration.

    The reward at (s, a1, a2) is the expected points scored by A minus by B
    in that step, so rewards are exactly consistent with the transition rows.
    """
    dyn = SoccerDynamics(config)
    N = config.n_states
    M = N_ACTIONS
    rewards = np.zeros(N * M * M)
    rows_idx = []
    cols_idx = []
    probs = []
    for s in range(N):
        for a1 in range(M):
            for a2 in range(M):
                flat_row = (a1 * M + a2) * N + s
                agg: dict[int, float] = {}
                expected_points = 0.0
                for prob, nxt, points in dyn.outcomes(s, a1, a2):
                    agg[nxt] = agg.get(nxt, 0.0) + prob
                    expected_points += prob * points
                rewards[flat_row] = expected_points
                for nxt, prob in agg.items():
                    rows_idx.append(flat_row)
                    cols_idx.append(nxt)
                    probs.append(prob)
    P = sp.coo_matrix((probs, (rows_idx, cols_idx)), shape=(N * M * M, N)).tocsr()
    return StochasticGame(N, M, P, rewards, config.gamma)
