import numpy as np
import pytest

from lqgid import designsdp, envmodel, structure, symmetry


def gis_direct(X, Y, Z):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n, m = Y.shape
    cov = np.block([[X, Y], [Y.T, Z]])
    return structure.GaussianInfoStructure(n=n, m=m, mean=np.zeros(n + m),
                                           cov=cov)


def k4_env(rho):
    net = envmodel.NetworkSpec(4, envmodel.complete_adjacency(4), -0.5)
    return envmodel.welfare_environment(net, Z=envmodel.equicorrelated_Z(4, rho))


class TestFromPrimal:
    def test_blocks_and_mean(self):
        env = envmodel.make_environment(np.eye(2), np.eye(2), np.eye(2),
                                        np.zeros((2, 2)), np.eye(2),
                                        theta_mean=[1.0, 2.0])
        gis = structure.from_primal(env, designsdp.full_disclosure_point(env))
        assert np.allclose(gis.X, np.eye(2))
        assert np.allclose(gis.Y, np.eye(2))
        assert np.allclose(gis.Z, np.eye(2))
        assert np.allclose(gis.mean, [1.0, 2.0, 1.0, 2.0])

    def test_infeasible_rejected(self):
        env = envmodel.make_environment([[1.0]], [[1.0]], [[1.0]], [[0.0]],
                                        [[1.0]])
        bad = designsdp.PrimalPoint(X=np.array([[1.0]]), Y=np.array([[0.5]]))
        with pytest.raises(ValueError):
            structure.from_primal(env, bad)

    def test_solver_output_accepted(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            n, m = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            Q = rng.standard_normal((n, n))
            Q = Q @ Q.T / n + np.eye(n)
            R = rng.standard_normal((n, m))
            V = rng.standard_normal((n, n))
            W = rng.standard_normal((n, m))
            L = rng.standard_normal((m, m))
            env = envmodel.make_environment(Q, R, (V + V.T) / 2, W,
                                            L @ L.T + 0.1 * np.eye(m))
            pt, _, _, _ = designsdp.solve_design(env)
            gis = structure.from_primal(env, pt)
            w = np.linalg.eigvalsh(gis.cov)
            assert w[0] >= -1e-12


class TestClassification:
    def test_identity_structure(self):
        gis = gis_direct(np.eye(2), np.eye(2), np.eye(2))
        assert structure.noise_freeness(gis)["is_noise_free"]
        assert structure.state_identifiability(gis)["is_identifiable"]

    def test_noisy_signal(self):
        gis = gis_direct([[2.0]], [[1.0]], [[1.0]])
        res = structure.noise_freeness(gis)
        assert not res["is_noise_free"]
        assert res["conditional_cov"][0, 0] == pytest.approx(1.0)

    def test_pure_noise_not_identifiable(self):
        gis = gis_direct([[1.0]], [[0.0]], [[1.0]])
        res = structure.state_identifiability(gis)
        assert not res["is_identifiable"]
        assert res["conditional_cov"][0, 0] == pytest.approx(1.0)

    def test_full_disclosure_both(self):
        rng = np.random.default_rng(1)
        Q = np.array([[1.0, -0.3], [0.2, 1.5]])
        R = rng.standard_normal((2, 2)) + 2 * np.eye(2)
        env = envmodel.make_environment(Q, R, np.eye(2), np.zeros((2, 2)),
                                        np.array([[1.0, 0.4], [0.4, 2.0]]))
        gis = structure.from_primal(env, designsdp.full_disclosure_point(env))
        assert structure.noise_freeness(gis)["is_noise_free"]
        assert structure.state_identifiability(gis)["is_identifiable"]

    def test_no_disclosure_noise_free_not_identifiable(self):
        env = envmodel.make_environment([[1.0]], [[1.0]], [[-1.0]], [[0.0]],
                                        [[1.0]])
        gis = structure.from_primal(env, designsdp.no_disclosure_point(env))
        assert structure.noise_freeness(gis)["is_noise_free"]
        assert not structure.state_identifiability(gis)["is_identifiable"]


class TestMetrics:
    def test_uninformative(self):
        m = structure.metrics(gis_direct([[1.0]], [[0.0]], [[1.0]]))
        assert m.s[0] == 0.0
        assert m.S[0] == 0.0
        assert m.N[0] == 1.0

    def test_perfect(self):
        m = structure.metrics(gis_direct([[1.0]], [[1.0]], [[1.0]]))
        assert m.s[0] == pytest.approx(1.0)
        assert m.S[0] == pytest.approx(1.0)
        assert m.N[0] == pytest.approx(0.0, abs=1e-12)

    def test_half_correlation(self):
        m = structure.metrics(gis_direct([[1.0]], [[0.5]], [[1.0]]))
        assert m.s[0] == pytest.approx(0.25)
        assert m.S[0] == pytest.approx(0.25)
        assert m.N[0] == pytest.approx(0.75)

    def test_cross_signal_helps(self):
        # agent 1's own signal is pure noise but agent 2's reveals theta_1
        X = np.eye(2)
        Y = np.array([[0.0, 0.0], [1.0, 0.0]])
        Z = np.eye(2)
        m = structure.metrics(gis_direct(X, Y, Z))
        assert m.s[0] == pytest.approx(0.0)
        assert m.S[0] == pytest.approx(1.0)

    def test_nan_on_zero_variance(self):
        m = structure.metrics(gis_direct([[0.0]], [[0.0]], [[0.0]]))
        assert np.isnan(m.s[0]) and np.isnan(m.S[0]) and np.isnan(m.N[0])

    def test_requires_square(self):
        with pytest.raises(ValueError):
            structure.metrics(gis_direct(np.eye(2), np.zeros((2, 1)), np.eye(1)))

    def test_total_dominates_own(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            L = rng.standard_normal((2 * n, 2 * n))
            M = L @ L.T
            gis = structure.GaussianInfoStructure(
                n=n, m=n, mean=np.zeros(2 * n), cov=M)
            met = structure.metrics(gis)
            for i in range(n):
                if not np.isnan(met.s[i]):
                    assert met.S[i] >= met.s[i] - 1e-9

    def test_k4_common_value(self):
        env = k4_env(1.0)
        pt, _, _, _ = designsdp.solve_design(env)
        pt = symmetry.symmetrize(pt, symmetry.complete_group(4), env)
        met = structure.metrics(structure.from_primal(env, pt))
        assert np.allclose(met.s, 0.25, atol=1e-5)
        assert np.allclose(met.S, 1.0, atol=1e-5)
        assert np.allclose(met.N, 0.75, atol=1e-5)

    def test_k4_independent_states_noise_free(self):
        env = k4_env(0.0)
        pt, _, _, _ = designsdp.solve_design(env)
        pt = symmetry.symmetrize(pt, symmetry.complete_group(4), env)
        gis = structure.from_primal(env, pt)
        met = structure.metrics(gis)
        assert np.allclose(met.N, 0.0, atol=1e-6)
        assert structure.noise_freeness(gis, tol=1e-6)["is_noise_free"]


class TestMcObedience:
    def _env(self, seed=3, n=2, m=2):
        rng = np.random.default_rng(seed)
        Q = rng.standard_normal((n, n))
        Q = Q @ Q.T / n + np.eye(n)
        R = rng.standard_normal((n, m))
        V = rng.standard_normal((n, n))
        W = rng.standard_normal((n, m))
        L = rng.standard_normal((m, m))
        return envmodel.make_environment(Q, R, (V + V.T) / 2, W,
                                         L @ L.T + 0.1 * np.eye(m),
                                         theta_mean=rng.standard_normal(m))

    def test_count_floor(self):
        env = self._env()
        pt, _, _, _ = designsdp.solve_design(env)
        gis = structure.from_primal(env, pt)
        with pytest.raises(ValueError):
            structure.mc_obedience(env, gis, 100, seed=0)

    def test_optimal_point_passes(self):
        env = self._env()
        pt, _, _, _ = designsdp.solve_design(env)
        gis = structure.from_primal(env, pt)
        res = structure.mc_obedience(env, gis, 1_000_000, seed=7)
        assert res["ok"]
        assert res["moment1_residual"] <= 5.0
        assert res["moment2_residual"] <= 5.0

    def test_corrupted_y_fails(self):
        env = self._env()
        pt, _, _, _ = designsdp.solve_design(env)
        gis = structure.from_primal(env, pt)
        bad_cov = gis.cov.copy()
        # break the action-state cross moments while keeping the law valid
        bad_cov[: env.n, env.n:] *= 0.5
        bad_cov[env.n:, : env.n] *= 0.5
        bad = structure.GaussianInfoStructure(n=env.n, m=env.m, mean=gis.mean,
                                              cov=bad_cov)
        res = structure.mc_obedience(env, bad, 1_000_000, seed=7)
        assert not res["ok"]

    def test_deterministic(self):
        env = self._env(seed=4)
        pt, _, _, _ = designsdp.solve_design(env)
        gis = structure.from_primal(env, pt)
        a = structure.mc_obedience(env, gis, 20_000, seed=11)
        b = structure.mc_obedience(env, gis, 20_000, seed=11)
        assert a == b
