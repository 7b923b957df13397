"""Shared test utilities: random instance generators and independent oracles.

The oracles here deliberately avoid the library's own linear-operator and LP
machinery: plain loops, grids, finite sums and subset enumeration only.
"""

import itertools

import numpy as np
import scipy.sparse as sp

from zsmirl.game import Bipolicy, StochasticGame


def random_simplex_rows(rng, n, m):
    x = rng.random((n, m)) + 1e-3
    return x / x.sum(axis=1, keepdims=True)


def random_bipolicy(rng, n_states, n_actions):
    return Bipolicy(random_simplex_rows(rng, n_states, n_actions),
                    random_simplex_rows(rng, n_states, n_actions))


def random_game(rng, n_states, n_actions, discount, reward_scale=1.0):
    nmm = n_states * n_actions ** 2
    P = random_simplex_rows(rng, nmm, n_states)
    rewards = reward_scale * rng.uniform(-1.0, 1.0, size=nmm)
    return StochasticGame(n_states, n_actions, sp.csr_matrix(P), rewards, discount)


def flat(a1, a2, s, n_states, n_actions):
    return (a1 * n_actions + a2) * n_states + s


# ---------------------------------------------------------------- oracles


def expected_reward_loop(pi, game):
    """Direct triple-sum per state: sum_{a1,a2} pi1 pi2 r(s,a1,a2)."""
    N, M = game.n_states, game.n_actions
    out = np.zeros(N)
    for s in range(N):
        for a1 in range(M):
            for a2 in range(M):
                out[s] += (pi.pi1[s, a1] * pi.pi2[s, a2]
                           * game.rewards[flat(a1, a2, s, N, M)])
    return out


def conditioned_reward_loop(pi, game, player, fixed_action):
    """Per-state sum with one player's policy kept and the other's action fixed."""
    N, M = game.n_states, game.n_actions
    out = np.zeros(N)
    for s in range(N):
        for a in range(M):
            if player == 1:
                out[s] += pi.pi1[s, a] * game.rewards[flat(a, fixed_action, s, N, M)]
            else:
                out[s] += pi.pi2[s, a] * game.rewards[flat(fixed_action, a, s, N, M)]
    return out


def truncated_value_series(pi, game, tol=1e-8):
    """Value by truncated sum of gamma^t G^t rtil with an explicit tail bound."""
    from zsmirl.game import build_G

    rtil = expected_reward_loop(pi, game)
    G = build_G(pi, game).toarray()
    gamma = game.discount
    scale = max(np.abs(rtil).max(), 1e-30)
    T = 1
    while gamma ** T * scale / (1.0 - gamma) >= tol:
        T += 1
    out = np.zeros_like(rtil)
    term = rtil.copy()
    for t in range(T + 1):
        out += gamma ** t * term
        term = G @ term
    return out


def finite_horizon_dp(game, horizon, value_fn):
    """Horizon-T dynamic program from V = 0 using a supplied matrix-game value."""
    N, M = game.n_states, game.n_actions
    V = np.zeros(N)
    for _ in range(horizon):
        q_flat = game.rewards + game.discount * (game.transitions @ V)
        mats = game.layout.per_state_matrices(q_flat)
        V = np.array([value_fn(mats[s]) for s in range(N)])
    return V


def dp_horizon_for(tol, game):
    """Iterations after which gamma^T ||r||inf / (1-gamma) < tol."""
    gamma = game.discount
    scale = max(np.abs(game.rewards).max(), 1e-30)
    T = 1
    while gamma ** T * scale / (1.0 - gamma) >= tol:
        T += 1
    return T


def grid_game_value(A, step=1e-3):
    """Max over a p-grid of the min over pure columns. Tractable for M <= 3."""
    A = np.asarray(A, dtype=float)
    M = A.shape[0]
    ticks = int(round(1.0 / step))
    best = -np.inf
    if M == 1:
        return float(A[0, 0])
    if M == 2:
        p0 = np.arange(ticks + 1) / ticks
        P = np.stack([p0, 1.0 - p0], axis=1)
        vals = (P @ A).min(axis=1)
        return float(vals.max())
    if M == 3:
        for i in range(ticks + 1):
            p0 = i / ticks
            j = np.arange(ticks - i + 1)
            p1 = j / ticks
            P = np.stack([np.full_like(p1, p0), p1, 1.0 - p0 - p1], axis=1)
            vals = (P @ A).min(axis=1)
            best = max(best, float(vals.max()))
        return best
    raise ValueError("grid oracle only tractable for M <= 3")


def support_enumeration_value(A, tol=1e-9):
    """Exact game value by support enumeration.

    For every equal-size support pair solve the square indifference system,
    then keep the solution passing the full equilibrium checks. Independent
    of any simplex/LP code.
    """
    A = np.asarray(A, dtype=float)
    M = A.shape[0]
    scale = max(1.0, np.abs(A).max())
    for k in range(1, M + 1):
        for rows in itertools.combinations(range(M), k):
            for cols in itertools.combinations(range(M), k):
                sub = A[np.ix_(rows, cols)]
                # p on rows: p' sub = v 1', sum p = 1
                lhs = np.zeros((k + 1, k + 1))
                lhs[:k, :k] = sub.T
                lhs[:k, k] = -1.0
                lhs[k, :k] = 1.0
                rhs = np.zeros(k + 1)
                rhs[k] = 1.0
                try:
                    sol = np.linalg.solve(lhs, rhs)
                except np.linalg.LinAlgError:
                    continue
                p_sub, v = sol[:k], sol[k]
                lhs_q = np.zeros((k + 1, k + 1))
                lhs_q[:k, :k] = sub
                lhs_q[:k, k] = -1.0
                lhs_q[k, :k] = 1.0
                try:
                    sol_q = np.linalg.solve(lhs_q, rhs)
                except np.linalg.LinAlgError:
                    continue
                q_sub, v_q = sol_q[:k], sol_q[k]
                eps = tol * scale
                if abs(v - v_q) > 1e-7 * scale:
                    continue
                if p_sub.min() < -eps or q_sub.min() < -eps:
                    continue
                p = np.zeros(M)
                q = np.zeros(M)
                p[list(rows)] = np.maximum(p_sub, 0.0)
                q[list(cols)] = np.maximum(q_sub, 0.0)
                p /= p.sum()
                q /= q.sum()
                if (A.T @ p).min() < v - 1e-7 * scale:
                    continue
                if (A @ q).max() > v + 1e-7 * scale:
                    continue
                return float(v)
    raise ArithmeticError("support enumeration found no equilibrium")


def qp_enumeration_oracle(H, mu, A, b, tol=1e-9):
    """Exact solution of min 0.5 (x-mu)' H (x-mu) s.t. A x <= b by subset enumeration.

    Solves the equality-constrained KKT system for every constraint subset and
    returns the unique primal-dual feasible point.
    """
    H = np.asarray(H, dtype=float)
    mu = np.asarray(mu, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m = A.shape[0]
    best = None
    for size in range(m + 1):
        for subset in itertools.combinations(range(m), size):
            W = list(subset)
            Aw = A[W]
            kkt = np.block([[H, Aw.T], [Aw, np.zeros((size, size))]])
            rhs = np.concatenate([H @ mu, b[W]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            x = sol[:len(mu)]
            lam_w = sol[len(mu):]
            if lam_w.size and lam_w.min() < -tol:
                continue
            if (A @ x - b).max() > 1e-8 * (1.0 + np.abs(b).max()):
                continue
            lam = np.zeros(m)
            lam[W] = np.maximum(lam_w, 0.0)
            obj = 0.5 * (x - mu) @ H @ (x - mu)
            if best is None or obj < best[2] - 1e-12:
                best = (x, lam, obj)
    if best is None:
        raise ArithmeticError("no KKT point found")
    return best
