import numpy as np
import pytest
import scipy.sparse as sp

from zsmirl.game import Bipolicy, StochasticGame, q_function
from zsmirl.inverse import (
    build_constraints_general,
    build_constraints_state_only,
    build_D,
    map_estimate,
)
from zsmirl.priors import GaussianPrior, weak_covariance
from zsmirl.shapley import shapley_solve, verify_minimax_bipolicy

from helpers import qp_enumeration_oracle, random_bipolicy, random_game


def state_only_game(rng, n_states, n_actions, discount):
    """Random game whose reward depends on the state only."""
    game = random_game(rng, n_states, n_actions, discount)
    rho = rng.uniform(-1.0, 1.0, size=n_states)
    r = np.tile(rho, n_actions * n_actions)
    return game.with_rewards(r), rho


class TestBuildD:
    def test_gamma_zero_identity(self):
        rng = np.random.default_rng(400)
        game = random_game(rng, 3, 2, 0.0)
        pi = random_bipolicy(rng, 3, 2)
        D = build_D(pi, game)
        x = rng.normal(size=12)
        assert np.abs(D.matvec(x) - x).max() < 1e-15
        assert np.abs(D.to_dense() - np.eye(12)).max() < 1e-15

    def test_single_state_rank_one(self):
        # one state: D = I + (gamma/(1-gamma)) * 1 b' with b the averaging row
        rng = np.random.default_rng(401)
        gamma = 0.9
        M = 2
        P = sp.csr_matrix(np.ones((M * M, 1)))
        game = StochasticGame(1, M, P, rng.normal(size=M * M), gamma)
        pi = random_bipolicy(rng, 1, M)
        from zsmirl.game import build_B
        b_row = build_B(pi, 1, M).toarray()
        expected = np.eye(M * M) + (gamma / (1 - gamma)) * np.ones((M * M, 1)) @ b_row
        D = build_D(pi, game)
        assert np.abs(D.to_dense() - expected).max() < 1e-9

    def test_maps_rewards_to_q(self):
        rng = np.random.default_rng(402)
        for _ in range(3):
            game = random_game(rng, 4, 2, 0.9)
            pi = random_bipolicy(rng, 4, 2)
            D = build_D(pi, game)
            r2 = rng.normal(size=game.rewards.shape)
            q_direct = q_function(pi, game.with_rewards(r2))
            assert np.abs(D.matvec(r2) - q_direct).max() < 1e-9
            assert np.abs(D.to_dense() @ r2 - q_direct).max() < 1e-9


class TestGeneralConstraints:
    def test_dimensions_and_labels(self):
        rng = np.random.default_rng(403)
        game = random_game(rng, 3, 2, 0.9)
        pi = random_bipolicy(rng, 3, 2)
        sys = build_constraints_general(pi, game)
        assert sys.shape == (2 * 3 * 2, 3 * 4)
        assert len(sys.labels) == sys.n_rows
        p1 = [lab for lab in sys.labels if lab[0] == 1]
        p2 = [lab for lab in sys.labels if lab[0] == 2]
        assert len(p1) == len(p2) == 3 * 2

    def test_zero_reward_feasible(self):
        rng = np.random.default_rng(404)
        game = random_game(rng, 3, 2, 0.9)
        pi = random_bipolicy(rng, 3, 2)
        sys = build_constraints_general(pi, game)
        assert sys.max_violation(np.zeros(sys.n_cols)) == 0.0

    def test_true_reward_feasible_at_equilibrium(self):
        rng = np.random.default_rng(405)
        for _ in range(5):
            game = random_game(rng, 3, 2, 0.9)
            sol = shapley_solve(game, tol=1e-10)
            sys = build_constraints_general(sol.bipolicy, game)
            assert sys.max_violation(game.rewards) < 1e-7

    def test_iff_direction_rejects(self):
        # rewards for which the observed bipolicy is NOT minimax must violate
        rng = np.random.default_rng(406)
        rejected = 0
        for _ in range(10):
            game = random_game(rng, 3, 2, 0.9)
            sol = shapley_solve(game, tol=1e-10)
            sys = build_constraints_general(sol.bipolicy, game)
            r_alt = rng.uniform(-1.0, 1.0, size=game.rewards.shape)
            is_minimax = verify_minimax_bipolicy(game.with_rewards(r_alt),
                                                 sol.bipolicy, tol=1e-7).ok
            violated = sys.max_violation(r_alt) > 1e-7
            assert violated == (not is_minimax)
            rejected += violated
        assert rejected >= 8  # random rewards almost never share the equilibrium

    def test_homogeneity(self):
        rng = np.random.default_rng(407)
        game = random_game(rng, 3, 2, 0.9)
        sol = shapley_solve(game, tol=1e-10)
        sys = build_constraints_general(sol.bipolicy, game)
        base = sys.residuals(game.rewards)
        for c in (0.5, 2.0, 10.0):
            assert np.abs(sys.residuals(c * game.rewards) - c * base).max() < 1e-9

    def test_unit_row_norms(self):
        rng = np.random.default_rng(408)
        game = random_game(rng, 3, 2, 0.9)
        pi = random_bipolicy(rng, 3, 2)
        sys = build_constraints_general(pi, game)
        dense = sys.to_dense()
        norms = np.abs(dense).max(axis=1)
        nz = norms > 1e-14
        assert np.abs(norms[nz] - 1.0).max() < 1e-9

    def test_matvec_matches_materialization(self):
        rng = np.random.default_rng(409)
        game = random_game(rng, 4, 3, 0.9)
        pi = random_bipolicy(rng, 4, 3)
        sys = build_constraints_general(pi, game)
        dense = sys.to_dense()
        x = rng.normal(size=sys.n_cols)
        y = rng.normal(size=sys.n_rows)
        assert np.abs(sys.matvec(x) - dense @ x).max() < 1e-10
        assert np.abs(sys.rmatvec(y) - dense.T @ y).max() < 1e-10


class TestStateOnlyConstraints:
    def test_zero_feasible_and_dims(self):
        rng = np.random.default_rng(410)
        game, _ = state_only_game(rng, 4, 2, 0.9)
        pi = random_bipolicy(rng, 4, 2)
        sys = build_constraints_state_only(pi, game)
        assert sys.shape == (2 * 4 * 2, 4)
        assert sys.max_violation(np.zeros(4)) == 0.0

    def test_single_action_all_zero_rows(self):
        rng = np.random.default_rng(411)
        game, _ = state_only_game(rng, 3, 1, 0.9)
        pi = Bipolicy(np.ones((3, 1)), np.ones((3, 1)))
        sys = build_constraints_state_only(pi, game)
        assert np.abs(sys.to_dense()).max() == 0.0

    def test_true_state_reward_feasible(self):
        rng = np.random.default_rng(412)
        for _ in range(5):
            game, rho = state_only_game(rng, 3, 2, 0.9)
            sol = shapley_solve(game, tol=1e-10)
            sys = build_constraints_state_only(sol.bipolicy, game)
            assert sys.max_violation(rho) < 1e-7

    def test_agrees_with_general_on_state_only_rewards(self):
        rng = np.random.default_rng(413)
        for _ in range(5):
            game, rho = state_only_game(rng, 3, 2, 0.9)
            sol = shapley_solve(game, tol=1e-10)
            gen = build_constraints_general(sol.bipolicy, game)
            st = build_constraints_state_only(sol.bipolicy, game)
            for _ in range(6):
                rho_probe = rng.uniform(-1.0, 1.0, size=3)
                expanded = np.tile(rho_probe, 4)
                ok_gen = gen.max_violation(expanded) <= 1e-6
                ok_st = st.max_violation(rho_probe) <= 1e-6
                assert ok_gen == ok_st
            assert st.max_violation(rho) < 1e-6
            assert gen.max_violation(np.tile(rho, 4)) < 1e-6


class TestMapEstimate:
    def test_feasible_mean_returned(self):
        rng = np.random.default_rng(414)
        game = random_game(rng, 3, 2, 0.9)
        sol = shapley_solve(game, tol=1e-10)
        sys = build_constraints_general(sol.bipolicy, game)
        prior = GaussianPrior(game.rewards.copy(), weak_covariance(sys.n_cols, 1e-4))
        est = map_estimate(sys, prior, tol=1e-8)
        assert est.converged
        assert np.abs(est.rewards - game.rewards).max() < 1e-6
        assert est.report.objective < 1e-10

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(415)
        for _ in range(3):
            game = random_game(rng, 2, 2, 0.9)
            sol = shapley_solve(game, tol=1e-10)
            sys = build_constraints_general(sol.bipolicy, game)
            dense = sys.to_dense()
            # keep the oracle tractable: only rows that can ever bind
            keep = np.abs(dense).max(axis=1) > 1e-12
            keep_idx = np.nonzero(keep)[0][:6]
            A_small = dense[keep_idx]
            mu = game.rewards + 0.3 * rng.normal(size=sys.n_cols)
            alpha = 1e-2
            prior = GaussianPrior(mu, weak_covariance(sys.n_cols, alpha))
            H = np.eye(sys.n_cols) / (1.0 + alpha)
            x_star, _, _ = qp_enumeration_oracle(H, mu, A_small, np.zeros(len(keep_idx)))
            sub = ConstraintSubset(sys, keep_idx)
            est = map_estimate(sub, prior, tol=1e-9)
            assert est.converged
            assert np.abs(est.rewards - x_star).max() < 1e-6

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(416)
        game = random_game(rng, 2, 2, 0.9)
        sys = build_constraints_general(random_bipolicy(rng, 2, 2), game)
        prior = GaussianPrior(np.zeros(5), weak_covariance(5, 1e-4))
        with pytest.raises(ValueError, match="dimension"):
            map_estimate(sys, prior)

    def test_equilibrium_round_trip(self):
        # a near-feasible prior mean recovers rewards whose equilibrium matches
        # the observed bipolicy to small total variation per state
        rng = np.random.default_rng(417)
        game = random_game(rng, 3, 2, 0.9)
        sol = shapley_solve(game, tol=1e-10)
        sys = build_constraints_general(sol.bipolicy, game)
        mu = game.rewards + 0.01 * rng.normal(size=sys.n_cols)
        frac_ok = float((sys.residuals(mu) <= 1e-9).mean())
        assert frac_ok >= 0.9, "test setup: mean must satisfy 90% of constraints"
        prior = GaussianPrior(mu, weak_covariance(sys.n_cols, 1e-4))
        est = map_estimate(sys, prior, tol=1e-9)
        sol_hat = shapley_solve(game.with_rewards(est.rewards), tol=1e-10)
        tv1 = 0.5 * np.abs(sol_hat.bipolicy.pi1 - sol.bipolicy.pi1).sum(axis=1)
        tv2 = 0.5 * np.abs(sol_hat.bipolicy.pi2 - sol.bipolicy.pi2).sum(axis=1)
        assert tv1.max() < 1e-3
        assert tv2.max() < 1e-3


class ConstraintSubset:
    """Row-subset view of a ConstraintSystem, for oracle-sized tests."""

    def __init__(self, system, rows):
        self._dense = system.to_dense()[rows]
        self.n_rows = len(rows)
        self.n_cols = system.n_cols
        self.shape = (self.n_rows, self.n_cols)

    def matvec(self, x):
        return self._dense @ x

    def rmatvec(self, y):
        return self._dense.T @ y

    def to_dense(self):
        return self._dense
