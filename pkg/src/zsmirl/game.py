"""Data model and linear operators for two-player zero-sum discounted stochastic games.

A game has N states and M actions per player. Rewards and Q-values live in
flat vectors of length N*M*M using an action-pair-major, state-minor layout
(see FlatLayout). The transition kernel is an (N*M*M) x N row-stochastic
sparse matrix P whose row for (a1, a2, s) holds p(s' | s, a1, a2).

All indices are 0-based. Player 1 maximizes the reward vector r; player 2's
reward is -r.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

ROW_SUM_TOL = 1e-12
SIMPLEX_TOL = 1e-12
BELLMAN_TOL = 1e-9

# Above this state count (I - gamma*G) systems are solved by fixed-point
# iteration instead of a direct sparse factorization.
DIRECT_SOLVE_MAX_STATES = 2000
FIXED_POINT_TOL = 1e-10


@dataclass(frozen=True)
class FlatLayout:
    """Bijection between (a1, a2, s) triples and flat vector positions.

    Position of (a1, a2, s) is (a1*M + a2)*N + s: action-pair-major blocks,
    states contiguous within each block. This matches the block structure of
    the per-state averaging matrix built by build_B, so every operator here
    can be written down directly against flat vectors.
    """

    n_states: int
    n_actions: int

    def __post_init__(self):
        if self.n_states < 1 or self.n_actions < 1:
            raise ValueError("n_states and n_actions must be positive")

    @property
    def size(self) -> int:
        return self.n_states * self.n_actions ** 2

    def flat(self, a1: int, a2: int, s: int) -> int:
        N, M = self.n_states, self.n_actions
        if not (0 <= a1 < M and 0 <= a2 < M and 0 <= s < N):
            raise IndexError(f"index ({a1}, {a2}, {s}) out of range for N={N}, M={M}")
        return (a1 * M + a2) * N + s

    def unflat(self, k: int) -> tuple[int, int, int]:
        N, M = self.n_states, self.n_actions
        if not 0 <= k < self.size:
            raise IndexError(f"flat index {k} out of range")
        pair, s = divmod(k, N)
        a1, a2 = divmod(pair, M)
        return a1, a2, s

    def to_cube(self, vec: np.ndarray) -> np.ndarray:
        """Reshape a flat vector to an (M, M, N) cube indexed [a1, a2, s]."""
        vec = np.asarray(vec)
        if vec.shape != (self.size,):
            raise ValueError(f"expected length-{self.size} vector, got shape {vec.shape}")
        return vec.reshape(self.n_actions, self.n_actions, self.n_states)

    def from_cube(self, cube: np.ndarray) -> np.ndarray:
        cube = np.asarray(cube)
        M, N = self.n_actions, self.n_states
        if cube.shape != (M, M, N):
            raise ValueError(f"expected shape {(M, M, N)}, got {cube.shape}")
        return cube.reshape(self.size)

    def state_matrix(self, vec: np.ndarray, s: int) -> np.ndarray:
        """The M x M slice of a flat vector at state s (rows a1, columns a2)."""
        return self.to_cube(vec)[:, :, s]

    def per_state_matrices(self, vec: np.ndarray) -> np.ndarray:
        """All state slices at once, shape (N, M, M)."""
        return np.moveaxis(self.to_cube(vec), 2, 0)


def _check_simplex_rows(arr: np.ndarray, what: str, tol: float = SIMPLEX_TOL):
    if np.any(arr < -tol):
        raise ValueError(f"{what} has negative entries")
    err = np.abs(arr.sum(axis=-1) - 1.0).max()
    if err > tol:
        raise ValueError(f"{what} rows do not sum to 1 (max error {err:.3g})")


@dataclass(frozen=True)
class Bipolicy:
    """Per-state pair of mixed strategies, one row per state, one column per action."""

    pi1: np.ndarray
    pi2: np.ndarray

    def __post_init__(self):
        pi1 = np.ascontiguousarray(self.pi1, dtype=float)
        pi2 = np.ascontiguousarray(self.pi2, dtype=float)
        if pi1.ndim != 2 or pi1.shape != pi2.shape:
            raise ValueError(f"strategy arrays must share an (N, M) shape, "
                             f"got {pi1.shape} and {pi2.shape}")
        _check_simplex_rows(pi1, "player 1 strategy")
        _check_simplex_rows(pi2, "player 2 strategy")
        pi1.setflags(write=False)
        pi2.setflags(write=False)
        object.__setattr__(self, "pi1", pi1)
        object.__setattr__(self, "pi2", pi2)

    @property
    def n_states(self) -> int:
        return self.pi1.shape[0]

    @property
    def n_actions(self) -> int:
        return self.pi1.shape[1]

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "Bipolicy":
        block = np.full((n_states, n_actions), 1.0 / n_actions)
        return cls(block, block.copy())

    @classmethod
    def pure(cls, actions1, actions2, n_actions: int) -> "Bipolicy":
        """Deterministic bipolicy playing actions1[s] / actions2[s] in state s."""
        actions1 = np.asarray(actions1, dtype=int)
        actions2 = np.asarray(actions2, dtype=int)
        n = len(actions1)
        pi1 = np.zeros((n, n_actions))
        pi2 = np.zeros((n, n_actions))
        pi1[np.arange(n), actions1] = 1.0
        pi2[np.arange(n), actions2] = 1.0
        return cls(pi1, pi2)


@dataclass(frozen=True)
class StochasticGame:
    """Two-player zero-sum discounted stochastic game.

    transitions: (N*M*M) x N sparse row-stochastic matrix, rows in flat order.
    rewards: player 1's reward vector, flat order; player 2 receives -rewards.
    """

    n_states: int
    n_actions: int
    transitions: sp.csr_matrix
    rewards: np.ndarray
    discount: float

    def __post_init__(self):
        N, M = self.n_states, self.n_actions
        if N < 1 or M < 1:
            raise ValueError("n_states and n_actions must be positive")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        P = sp.csr_matrix(self.transitions, dtype=float)
        if P.shape != (N * M * M, N):
            raise ValueError(f"transitions must be {(N * M * M, N)}, got {P.shape}")
        if P.nnz and (P.data.min() < 0.0 or P.data.max() > 1.0):
            raise ValueError("transition probabilities must lie in [0, 1]")
        row_err = np.abs(np.asarray(P.sum(axis=1)).ravel() - 1.0).max()
        if row_err > ROW_SUM_TOL:
            raise ValueError(f"transition rows must sum to 1 (max error {row_err:.3g})")
        r = np.ascontiguousarray(self.rewards, dtype=float)
        if r.shape != (N * M * M,):
            raise ValueError(f"rewards must have length {N * M * M}, got shape {r.shape}")
        r.setflags(write=False)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", r)

    @property
    def layout(self) -> FlatLayout:
        return FlatLayout(self.n_states, self.n_actions)

    def with_rewards(self, rewards: np.ndarray) -> "StochasticGame":
        """Same dynamics and discount, different reward vector."""
        return StochasticGame(self.n_states, self.n_actions, self.transitions,
                              rewards, self.discount)


def _check_dims(pi: Bipolicy, n_states: int, n_actions: int):
    if pi.n_states != n_states or pi.n_actions != n_actions:
        raise ValueError(f"bipolicy has shape ({pi.n_states}, {pi.n_actions}), "
                         f"expected ({n_states}, {n_actions})")


def build_B(pi: Bipolicy, n_states: int, n_actions: int) -> sp.csr_matrix:
    """Per-state averaging operator: row s has pi1(i|s)*pi2(j|s) at (i, j, s).

    B @ r is the expected single-stage reward vector under the bipolicy.
    Rows sum to 1; explicit zeros are dropped.
    """
    _check_dims(pi, n_states, n_actions)
    N, M = n_states, n_actions
    i_idx, j_idx, s_idx = np.meshgrid(np.arange(M), np.arange(M), np.arange(N),
                                      indexing="ij")
    rows = s_idx.ravel()
    cols = ((i_idx * M + j_idx) * N + s_idx).ravel()
    data = (pi.pi1[s_idx, i_idx] * pi.pi2[s_idx, j_idx]).ravel()
    B = sp.coo_matrix((data, (rows, cols)), shape=(N, N * M * M)).tocsr()
    B.eliminate_zeros()
    return B


def build_B_conditioned(pi: Bipolicy, player: int, fixed_action: int,
                        n_states: int, n_actions: int) -> sp.csr_matrix:
    """Averaging operator with one player's mixed strategy and the other fixed.

    player is the one whose mixed strategy is kept; fixed_action is the pure
    action the opponent takes in every state. For player=1 with a2=j fixed,
    row s has pi1(i|s) at (i, j, s); symmetric for player=2.
    """
    _check_dims(pi, n_states, n_actions)
    N, M = n_states, n_actions
    if not 0 <= fixed_action < M:
        raise ValueError(f"fixed_action {fixed_action} out of range for M={M}")
    a_idx, s_idx = np.meshgrid(np.arange(M), np.arange(N), indexing="ij")
    rows = s_idx.ravel()
    if player == 1:
        cols = ((a_idx * M + fixed_action) * N + s_idx).ravel()
        data = pi.pi1[s_idx, a_idx].ravel()
    elif player == 2:
        cols = ((fixed_action * M + a_idx) * N + s_idx).ravel()
        data = pi.pi2[s_idx, a_idx].ravel()
    else:
        raise ValueError(f"player must be 1 or 2, got {player}")
    B = sp.coo_matrix((data, (rows, cols)), shape=(N, N * M * M)).tocsr()
    B.eliminate_zeros()
    return B


def _weighted_block_sum(weights, blocks_iter, n_states) -> sp.csr_matrix:
    """Sum of diag(w_k) @ block_k over action pairs, as a csr matrix."""
    G = sp.csr_matrix((n_states, n_states))
    for w, blk in zip(weights, blocks_iter):
        G = G + sp.diags(w) @ blk
    G.eliminate_zeros()
    return G


def build_G(pi: Bipolicy, game: StochasticGame) -> sp.csr_matrix:
    """State transition matrix under the bipolicy.

    Entry (s, s') is sum over (a1, a2) of pi1(a1|s)*pi2(a2|s)*p(s'|s, a1, a2).
    Computed from the transition blocks directly (not as build_B @ P, which is
    the independent identity checked in tests).
    """
    _check_dims(pi, game.n_states, game.n_actions)
    N, M = game.n_states, game.n_actions
    P = game.transitions
    weights = []
    blocks = []
    for a1 in range(M):
        for a2 in range(M):
            k = (a1 * M + a2) * N
            weights.append(pi.pi1[:, a1] * pi.pi2[:, a2])
            blocks.append(P[k:k + N, :])
    return _weighted_block_sum(weights, blocks, N)


def build_G_conditioned(pi: Bipolicy, game: StochasticGame, player: int,
                        fixed_action: int) -> sp.csr_matrix:
    """Transition matrix with one player's strategy kept and the other's action fixed.

    For player=2 with a1=i fixed, entry (s, s') is
    sum over a2 of pi2(a2|s)*p(s'|s, i, a2); symmetric for player=1.
    """
    _check_dims(pi, game.n_states, game.n_actions)
    N, M = game.n_states, game.n_actions
    if not 0 <= fixed_action < M:
        raise ValueError(f"fixed_action {fixed_action} out of range for M={M}")
    P = game.transitions
    weights = []
    blocks = []
    if player == 2:
        for a2 in range(M):
            k = (fixed_action * M + a2) * N
            weights.append(pi.pi2[:, a2])
            blocks.append(P[k:k + N, :])
    elif player == 1:
        for a1 in range(M):
            k = (a1 * M + fixed_action) * N
            weights.append(pi.pi1[:, a1])
            blocks.append(P[k:k + N, :])
    else:
        raise ValueError(f"player must be 1 or 2, got {player}")
    return _weighted_block_sum(weights, blocks, N)


def expected_reward(pi: Bipolicy, game: StochasticGame) -> np.ndarray:
    """Single-stage expected reward of player 1 per state: pi1(s)' r(s) pi2(s)."""
    _check_dims(pi, game.n_states, game.n_actions)
    cube = game.layout.to_cube(game.rewards)
    return np.einsum("si,ijs,sj->s", pi.pi1, cube, pi.pi2)


def solve_discounted(G: sp.spmatrix, b: np.ndarray, discount: float,
                     method: str = "auto") -> np.ndarray:
    """Solve (I - discount*G) x = b for a row-stochastic G and discount < 1.

    Direct sparse factorization up to DIRECT_SOLVE_MAX_STATES states; above
    that, the fixed-point iteration x <- b + discount*G x (a contraction with
    factor `discount`) run to sup-norm update <= 1e-10.
    """
    N = G.shape[0]
    b = np.asarray(b, dtype=float)
    if method == "auto":
        method = "direct" if N <= DIRECT_SOLVE_MAX_STATES else "fixed-point"
    if method == "direct":
        A = (sp.identity(N, format="csr") - discount * G).tocsc()
        x = spla.spsolve(A, b)
        x = np.atleast_1d(np.asarray(x, dtype=float))
    elif method == "fixed-point":
        x = b.copy()
        # gamma^t contraction: iteration count is logarithmic in the tolerance
        max_sweeps = 100_000
        for _ in range(max_sweeps):
            x_new = b + discount * (G @ x)
            delta = np.abs(x_new - x).max()
            x = x_new
            if delta <= FIXED_POINT_TOL:
                break
        else:
            raise ArithmeticError("fixed-point solve did not converge")
    else:
        raise ValueError(f"unknown method {method!r}")
    resid = np.abs(x - discount * (G @ x) - b).max()
    if resid > BELLMAN_TOL * (1.0 + np.abs(x).max()):
        raise ArithmeticError(f"linear solve residual {resid:.3g} too large")
    return x


def policy_value(pi: Bipolicy, game: StochasticGame, method: str = "auto") -> np.ndarray:
    """Discounted value vector of the bipolicy: (I - gamma*G)^-1 B r."""
    rtil = expected_reward(pi, game)
    G = build_G(pi, game)
    return solve_discounted(G, rtil, game.discount, method=method)


def q_function(pi: Bipolicy, game: StochasticGame, method: str = "auto") -> np.ndarray:
    """Flat Q vector of the bipolicy: r + gamma * P V."""
    V = policy_value(pi, game, method=method)
    return game.rewards + game.discount * (game.transitions @ V)


def swap_players(game: StochasticGame) -> StochasticGame:
    """The role-swapped game: action axes transposed, rewards negated.

    Solving the swapped game gives the original game from player 2's
    perspective (values negate).
    """
    N, M = game.n_states, game.n_actions
    perm = np.arange(N * M * M).reshape(M, M, N).transpose(1, 0, 2).ravel()
    P_swapped = game.transitions[perm, :]
    r_swapped = -game.rewards[perm]
    return StochasticGame(N, M, P_swapped, r_swapped, game.discount)
