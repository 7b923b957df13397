"""Distance metrics and reward-structure extraction for the soccer benchmark.

ARD is the root-mean-square distance between recovered and true reward
vectors over both players; APD is the analogous distance between recovered
and true per-square shot-probability vectors. The shot vector is read off a
reward vector by averaging the holder's shot entries per square (normalized
by the goal score), which reproduces the generating table exactly on the
true reward.
"""

import numpy as np

from .game import FlatLayout
from .soccer import A_SHOOT, N_ACTIONS, SoccerConfig, state_tables


def ard(r1_rec: np.ndarray, r1_true: np.ndarray, r2_rec: np.ndarray,
        r2_true: np.ndarray) -> float:
    """Average reward distance: RMS error across both players' reward vectors."""
    vecs = [np.asarray(v, dtype=float) for v in (r1_rec, r1_true, r2_rec, r2_true)]
    n = vecs[0].shape[0]
    if any(v.shape != (n,) for v in vecs):
        raise ValueError("all four reward vectors must share one length")
    d1 = vecs[0] - vecs[1]
    d2 = vecs[2] - vecs[3]
    return float(np.sqrt((d1 @ d1 + d2 @ d2) / (2.0 * n)))


def apd(theta_rec_a: np.ndarray, theta_rec_b: np.ndarray, theta0_a: np.ndarray,
        theta0_b: np.ndarray) -> float:
    """Average shot-probability distance: RMS error across both players' tables."""
    vecs = [np.asarray(v, dtype=float)
            for v in (theta_rec_a, theta_rec_b, theta0_a, theta0_b)]
    n = vecs[0].shape[0]
    if any(v.shape != (n,) for v in vecs):
        raise ValueError("all four shot vectors must share one length")
    d1 = vecs[0] - vecs[2]
    d2 = vecs[1] - vecs[3]
    return float(np.sqrt((d1 @ d1 + d2 @ d2) / (2.0 * n)))


def true_pss(config: SoccerConfig) -> tuple[np.ndarray, np.ndarray]:
    """The generating per-square shot tables (own-goal squares already 0)."""
    return np.array(config.pss_a), np.array(config.pss_b)


def extract_pss(r_rec: np.ndarray, config: SoccerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Read per-square shot probabilities off a recovered reward vector.

    For each square, average the holder's shot entries over all states with
    the holder there (any opponent position, any opponent action), divide by
    the goal score, clamp to [0, 1]; own-goal squares are forced to 0. B's
    entries enter with the sign flipped since the stored reward is A's.
    """
    r_rec = np.asarray(r_rec, dtype=float)
    layout = FlatLayout(config.n_states, N_ACTIONS)
    cube = layout.to_cube(r_rec)  # [a1, a2, s]
    pos_a, pos_b, bit = state_tables(config)
    S = config.n_squares
    gp = config.goal_point

    theta_a = np.zeros(S)
    theta_b = np.zeros(S)
    shots_a = cube[A_SHOOT, :, :]   # [a2, s]
    shots_b = cube[:, A_SHOOT, :]   # [a1, s]
    for sq in range(1, S + 1):
        mask_a = (pos_a == sq) & (bit == 0)
        if mask_a.any():
            theta_a[sq - 1] = shots_a[:, mask_a].mean() / gp
        mask_b = (pos_b == sq) & (bit == 1)
        if mask_b.any():
            theta_b[sq - 1] = -shots_b[:, mask_b].mean() / gp
    theta_a = np.clip(theta_a, 0.0, 1.0)
    theta_b = np.clip(theta_b, 0.0, 1.0)
    theta_a[np.array(config.goals_a) - 1] = 0.0
    theta_b[np.array(config.goals_b) - 1] = 0.0
    return theta_a, theta_b


def goal_recovery_averages(r_rec: np.ndarray, config: SoccerConfig,
                           squares_a=None, squares_b=None) -> dict:
    """Mean received reward per candidate goal square, over non-shot play.

    For each listed square, averages the holder's reward over all states with
    that player there holding the ball, across all action pairs where the
    holder does not shoot. B's averages negate the stored reward (B receives
    -r). Defaults: the leftmost column for A, the rightmost for B.
    """
    r_rec = np.asarray(r_rec, dtype=float)
    layout = FlatLayout(config.n_states, N_ACTIONS)
    cube = layout.to_cube(r_rec)
    pos_a, pos_b, bit = state_tables(config)
    cols = config.cols
    S = config.n_squares
    if squares_a is None:
        squares_a = tuple(sq for sq in range(1, S + 1) if (sq - 1) % cols == 0)
    if squares_b is None:
        squares_b = tuple(sq for sq in range(1, S + 1) if sq % cols == 0)

    non_shot_1 = np.arange(N_ACTIONS) != A_SHOOT
    out = {"A": {}, "B": {}}
    for sq in squares_a:
        mask = (pos_a == sq) & (bit == 0)
        out["A"][int(sq)] = float(cube[non_shot_1][:, :, mask].mean()) if mask.any() else 0.0
    for sq in squares_b:
        mask = (pos_b == sq) & (bit == 1)
        out["B"][int(sq)] = float(-cube[:, non_shot_1][:, :, mask].mean()) if mask.any() else 0.0
    return out
