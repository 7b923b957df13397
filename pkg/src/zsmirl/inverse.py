"""Minimax-feasibility constraint systems and MAP reward recovery.

Observing a minimax bipolicy pi of a game with known dynamics (P, gamma)
constrains the unknown reward vector r to a homogeneous polyhedral cone:
for every state and every unilateral deviation, the deviating player must
not gain. With D = I + gamma P (I - gamma G)^-1 B mapping rewards to
Q-values, the general (action-dependent) system stacks rows

    (B_{pi2|a1=i} - B) D r <= 0    (player 1 deviates to i)
   -(B_{pi1|a2=j} - B) D r <= 0    (player 2 deviates to j)

and the state-only system replaces B-blocks by conditioned transition
matrices acting on a length-N reward. Rows are rescaled to unit sup-norm
(the systems are homogeneous, so this is exact); the full general system is
kept in the factored form S + gamma * Y Bsp with Y = (S P)(I - gamma G)^-1
materialized once from a single sparse factorization, so products with the
28800-column soccer system never form the dense matrix.

The MAP estimate of r under a Gaussian prior restricted to this cone is the
solution of the strictly convex QP min 0.5 (r-mu)' Cov^-1 (r-mu) s.t. A r <= 0.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .game import Bipolicy, StochasticGame, build_B, build_B_conditioned, build_G, \
    build_G_conditioned
from .priors import GaussianPrior
from .qp import KktReport, QpProblem, solve_qp

_NORM_CHUNK = 512


class DOperator:
    """Reward-to-Q map D = I + gamma P (I - gamma G)^-1 B as a lazy operator."""

    def __init__(self, pi: Bipolicy, game: StochasticGame):
        N, M = game.n_states, game.n_actions
        self.shape = (N * M * M, N * M * M)
        self._P = game.transitions
        self._B = build_B(pi, N, M)
        self._gamma = game.discount
        G = build_G(pi, game)
        eye = sp.identity(N, format="csc")
        self._lu = spla.splu((eye - self._gamma * G).tocsc())

    def matvec(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        v = self._lu.solve(self._B @ r)
        return r + self._gamma * (self._P @ v)

    def to_dense(self) -> np.ndarray:
        n = self.shape[0]
        V = self._lu.solve(self._B.toarray())
        return np.eye(n) + self._gamma * (self._P @ V)


def build_D(pi: Bipolicy, game: StochasticGame) -> DOperator:
    """Operator form of the reward-to-Q map; D r equals the bipolicy Q for reward r."""
    return DOperator(pi, game)


@dataclass(frozen=True)
class ConstraintSystem:
    """Homogeneous system A r <= 0 with per-row (player, state, action) labels.

    Rows are scaled to unit sup-norm (zero rows keep scale 1). matvec/rmatvec
    apply the scaled operator; tocsr() materializes it (always possible for
    the state-only system, and for small general systems).

    Internally either dense ("dense", array) or factored
    ("general", S, Y, B, gamma) with A_raw = S + gamma * Y @ B.
    """

    n_rows: int
    n_cols: int
    labels: tuple
    row_scale: np.ndarray
    _parts: tuple

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def matvec(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        kind = self._parts[0]
        if kind == "dense":
            out = self._parts[1] @ r
        else:
            _, S, Y, B, gamma = self._parts
            out = S @ r + gamma * (Y @ (B @ r))
        return self.row_scale * out

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float) * self.row_scale
        kind = self._parts[0]
        if kind == "dense":
            return self._parts[1].T @ y
        _, S, Y, B, gamma = self._parts
        return S.T @ y + gamma * (B.T @ (Y.T @ y))

    def tocsr(self) -> sp.csr_matrix:
        if self.n_rows * self.n_cols > 50_000_000:
            raise MemoryError("constraint system too large to materialize; "
                              "use matvec/rmatvec")
        kind = self._parts[0]
        if kind == "dense":
            raw = self._parts[1]
        else:
            _, S, Y, B, gamma = self._parts
            raw = S.toarray() + gamma * (B.T @ Y.T).T
        return sp.csr_matrix(self.row_scale[:, None] * np.asarray(raw))

    def to_dense(self) -> np.ndarray:
        return self.tocsr().toarray()

    def residuals(self, r: np.ndarray) -> np.ndarray:
        """Scaled row values A r; feasible rewards give residuals <= 0."""
        return self.matvec(r)

    def max_violation(self, r: np.ndarray) -> float:
        return float(np.maximum(self.residuals(r), 0.0).max(initial=0.0))


def _deviation_labels(n_states: int, n_actions: int) -> tuple:
    labels = []
    for player in (1, 2):
        for action in range(n_actions):
            for s in range(n_states):
                labels.append((player, s, action))
    return tuple(labels)


def _row_norms_factored(S: sp.csr_matrix, Y: np.ndarray, B: sp.csr_matrix,
                        gamma: float) -> np.ndarray:
    """Sup-norm of each row of S + gamma*Y@B, computed in row chunks."""
    m = S.shape[0]
    norms = np.zeros(m)
    for lo in range(0, m, _NORM_CHUNK):
        hi = min(lo + _NORM_CHUNK, m)
        chunk = S[lo:hi].toarray()
        if gamma > 0.0:
            chunk += gamma * (B.T @ Y[lo:hi].T).T
        norms[lo:hi] = np.abs(chunk).max(axis=1)
    return norms


def _scale_from_norms(norms: np.ndarray) -> np.ndarray:
    # rows whose norm sits near float-dust level are zero rows up to solver
    # error (the deviation action is already played with probability ~1);
    # scaling them to unit norm would amplify that error into fake
    # constraints, so they are left unscaled
    floor = 1e-6 * max(1.0, norms.max(initial=0.0))
    scale = np.ones_like(norms)
    nz = norms > floor
    scale[nz] = 1.0 / norms[nz]
    return scale


def build_constraints_general(pi: Bipolicy, game: StochasticGame) -> ConstraintSystem:
    """Proposition-style system over action-dependent rewards (2NM x NM^2).

    Player-1 deviation rows come first (action-major, state-minor), then
    player-2 rows with the sign flipped into <= form.
    """
    N, M = game.n_states, game.n_actions
    B = build_B(pi, N, M)
    blocks = []
    for i in range(M):
        blocks.append(build_B_conditioned(pi, player=2, fixed_action=i,
                                          n_states=N, n_actions=M) - B)
    for j in range(M):
        blocks.append(-(build_B_conditioned(pi, player=1, fixed_action=j,
                                            n_states=N, n_actions=M) - B))
    S = sp.vstack(blocks, format="csr")

    gamma = game.discount
    if gamma > 0.0:
        W = (S @ game.transitions).tocsr()
        G = build_G(pi, game)
        eye = sp.identity(N, format="csc")
        lu = spla.splu((eye - gamma * G).T.tocsc())
        # Y = W (I - gamma G)^-1, via the transposed factorization
        Y = lu.solve(W.T.toarray()).T
    else:
        Y = np.zeros((S.shape[0], N))

    norms = _row_norms_factored(S, Y, B, gamma)
    return ConstraintSystem(n_rows=2 * N * M, n_cols=N * M * M,
                            labels=_deviation_labels(N, M),
                            row_scale=_scale_from_norms(norms),
                            _parts=("general", S, Y, B, gamma))


def build_constraints_state_only(pi: Bipolicy, game: StochasticGame) -> ConstraintSystem:
    """Proposition-style system over state-only rewards (2NM x N).

    Rows encode (G_{pi2|a1=i} - G)(I - gamma G)^-1 r <= 0 for player-1
    deviations and (G - G_{pi1|a2=j})(I - gamma G)^-1 r <= 0 for player-2
    deviations.
    """
    N, M = game.n_states, game.n_actions
    G = build_G(pi, game)
    blocks = []
    for i in range(M):
        blocks.append(build_G_conditioned(pi, game, player=2, fixed_action=i) - G)
    for j in range(M):
        blocks.append(G - build_G_conditioned(pi, game, player=1, fixed_action=j))
    Z = sp.vstack(blocks, format="csr")

    gamma = game.discount
    if gamma > 0.0:
        eye = sp.identity(N, format="csc")
        lu = spla.splu((eye - gamma * G).T.tocsc())
        A = lu.solve(Z.T.toarray()).T
    else:
        A = Z.toarray()

    norms = np.abs(A).max(axis=1)
    return ConstraintSystem(n_rows=2 * N * M, n_cols=N,
                            labels=_deviation_labels(N, M),
                            row_scale=_scale_from_norms(norms),
                            _parts=("dense", A))


@dataclass(frozen=True)
class MapEstimate:
    """MAP reward vector with the QP solver report attached."""

    rewards: np.ndarray
    report: KktReport

    @property
    def converged(self) -> bool:
        return self.report.converged

    @property
    def n_active(self) -> int:
        return self.report.n_active


def map_estimate(constraints: ConstraintSystem, prior: GaussianPrior,
                 tol: float = 1e-6, max_iter: int = 50_000,
                 method: str = "auto") -> MapEstimate:
    """Maximize the Gaussian prior over the feasibility cone.

    Equivalent to min 0.5 (r-mu)' Cov^-1 (r-mu) s.t. A r <= 0; r = 0 is always
    feasible, and the regularized covariance makes the minimizer unique.
    Non-convergence of the QP is reported through the attached report.
    """
    if prior.mean.shape[0] != constraints.n_cols:
        raise ValueError(f"prior dimension {prior.mean.shape[0]} does not match "
                         f"constraint columns {constraints.n_cols}")
    cov = prior.covariance
    problem = QpProblem(mu=prior.mean, a=constraints,
                        b=np.zeros(constraints.n_rows),
                        h_mult=cov.solve, h_solve=cov.multiply)
    rewards, report = solve_qp(problem, tol=tol, max_iter=max_iter, method=method)
    return MapEstimate(rewards=rewards, report=report)
