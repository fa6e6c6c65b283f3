import dataclasses
import math

import numpy as np
from django.test import SimpleTestCase

from thresholds import dp_bench, gain_models, market_sim
from thresholds import threshold_policies as tp
from thresholds.exceptions import InfeasibleTargetError, ParameterError, TrajectoryNotStoredError
from thresholds.market_sim import SimConfig


def constant_policy(p):
    return lambda n, Q: p


class SimConfigTests(SimpleTestCase):

    def setUp(self):
        self.model = gain_models.linear_uniform()

    def test_validation(self):
        grid = dp_bench.deterministic_policy_grid(10, 5)
        with self.assertRaises(InfeasibleTargetError):
            SimConfig(N=10, Q_star=11, model=self.model, policy=grid)
        with self.assertRaises(ParameterError):
            SimConfig(N=10, Q_star=5, model=self.model, policy=grid, paths=0)
        with self.assertRaises(ParameterError):
            SimConfig(N=10, Q_star=5, model=self.model, policy=grid, checkpoints=(11,))

    def test_default_checkpoints(self):
        cfg = SimConfig(N=25, Q_star=5, model=self.model, policy=constant_policy(0.2))
        self.assertEqual(cfg.resolved_checkpoints, (0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 25))

    def test_noise_needs_the_linear_model(self):
        rows = np.column_stack([np.linspace(-0.5, 0.5, 2000), np.linspace(-1.0, 1.0, 2000)])
        empirical = gain_models.empirical_from_samples(rows)
        cfg = SimConfig(N=10, Q_star=5, model=empirical, policy=constant_policy(0.5), noise_std=0.1)
        with self.assertRaises(ParameterError):
            cfg.environment
        noisy = SimConfig(N=10, Q_star=5, model=self.model, policy=constant_policy(0.5), noise_std=0.1)
        self.assertEqual(noisy.environment.noise_std, 0.1)


class EnsembleTests(SimpleTestCase):

    def setUp(self):
        self.model = gain_models.linear_uniform(1.0)

    def test_deterministic_policy_inventory(self):
        cfg = SimConfig(N=100, Q_star=50, model=self.model, policy=dp_bench.deterministic_policy_grid(100, 50),
                        paths=10000, seed=1, checkpoints=(50, 100))
        ensemble = market_sim.run_ensemble(cfg)
        mean, var = market_sim.moments(ensemble.inventory_at(50))
        self.assertLess(abs(mean - 25.0), 3 * math.sqrt(var / ensemble.paths))
        # hypergeometric: 50 of 100 slots drawn without replacement
        self.assertAlmostEqual(var, 50 * 0.25 * 50 / 99, delta=0.5)
        self.assertTrue(np.all(ensemble.terminal_Q == 50))

    def test_gain_matches_exact_policy_value(self):
        policies = {'optimal': dp_bench.solve_dp(100, 50, self.model)[1]}
        policies.update((variant, tp.lattice_policy(variant, 100, 50)) for variant in tp.VARIANTS)
        for variant, grid in policies.items():
            cfg = SimConfig(N=100, Q_star=50, model=self.model, policy=grid, paths=100000, seed=20190101)
            mean, se = market_sim.run_ensemble(cfg, threads=2).gain_summary()
            exact = dp_bench.evaluate_policy(grid, 100, 50, self.model)
            self.assertLess(abs(mean - exact), 3 * se, msg=variant)

    def test_constant_policy_gain_and_variance(self):
        N = 100
        cfg = SimConfig(N=N, Q_star=N, model=self.model, policy=constant_policy(0.5), paths=20000, seed=3,
                        force_boundary=False)
        ensemble = market_sim.run_ensemble(cfg)
        mean, se = ensemble.gain_summary()
        self.assertLess(abs(mean - N * self.model.gain(0.5)), 4 * se)
        _, var = market_sim.moments(ensemble.terminal_Q)
        self.assertAlmostEqual(var / (N * 0.25), 1.0, delta=0.05)
        counts, _ = ensemble.fill_rate_histogram()
        self.assertEqual(counts.sum(), ensemble.paths)

    def test_results_do_not_depend_on_threads(self):
        cfg = SimConfig(N=30, Q_star=12, model=self.model, policy=tp.lattice_policy('mixed', 30, 12),
                        paths=5000, seed=42, block_size=512)
        serial = market_sim.run_ensemble(cfg, threads=1)
        threaded = market_sim.run_ensemble(cfg, threads=4)
        np.testing.assert_array_equal(serial.terminal_M, threaded.terminal_M)
        np.testing.assert_array_equal(serial.checkpoint_Q, threaded.checkpoint_Q)

    def test_results_do_not_depend_on_block_size(self):
        cfg = SimConfig(N=30, Q_star=12, model=self.model, policy=tp.lattice_policy('mixed', 30, 12),
                        paths=700, seed=42, block_size=512)
        small = market_sim.run_ensemble(dataclasses.replace(cfg, block_size=7))
        large = market_sim.run_ensemble(cfg)
        np.testing.assert_array_equal(small.terminal_M, large.terminal_M)
        np.testing.assert_array_equal(small.checkpoint_Q, large.checkpoint_Q)

    def test_each_path_has_its_own_stream(self):
        cfg = SimConfig(N=20, Q_star=8, model=self.model, policy=dp_bench.deterministic_policy_grid(20, 8),
                        paths=50, seed=11, store_trajectories=True, block_size=16)
        ensemble = market_sim.run_ensemble(cfg)
        single = market_sim.simulate_path(cfg, market_sim.path_rng(11, 37))
        np.testing.assert_array_equal(single.signals, ensemble.path(37).signals)
        np.testing.assert_array_equal(single.M, ensemble.path(37).M)

    def test_seed_changes_the_draws(self):
        grid = dp_bench.deterministic_policy_grid(20, 10)
        first = market_sim.run_ensemble(SimConfig(N=20, Q_star=10, model=self.model, policy=grid, paths=200, seed=1))
        second = market_sim.run_ensemble(SimConfig(N=20, Q_star=10, model=self.model, policy=grid, paths=200, seed=2))
        self.assertFalse(np.array_equal(first.terminal_M, second.terminal_M))

    def test_checkpoint_rows(self):
        cfg = SimConfig(N=20, Q_star=10, model=self.model, policy=dp_bench.deterministic_policy_grid(20, 10),
                        paths=100, checkpoints=(0, 20))
        rows = list(market_sim.run_ensemble(cfg).checkpoint_rows())
        self.assertEqual(rows, [(0, 0.0, 0.0), (20, 10.0, 0.0)])
        with self.assertRaises(ParameterError):
            market_sim.run_ensemble(cfg).inventory_at(10)


class PathTests(SimpleTestCase):

    def setUp(self):
        self.model = gain_models.linear_uniform(1.0, noise_std=0.3)
        self.cfg = SimConfig(N=40, Q_star=15, model=self.model, policy=tp.lattice_policy('mixed', 40, 15),
                             P0=50.0)

    def test_x_bookkeeping(self):
        path = market_sim.simulate_path(self.cfg, np.random.default_rng(8))
        X = market_sim.x_diagnostic(path)
        self.assertAlmostEqual(X[0], -15 * 50.0)
        direct, from_draws = market_sim.x_increments(path)
        np.testing.assert_allclose(direct, from_draws, atol=1e-9)
        P, Q, M, X_N = path.terminal
        self.assertEqual(Q, 15)
        self.assertAlmostEqual(X_N, M)

    def test_stored_ensemble_paths(self):
        cfg = SimConfig(N=40, Q_star=15, model=self.model, policy=self.cfg.policy, paths=10,
                        store_trajectories=True, block_size=4)
        ensemble = market_sim.run_ensemble(cfg, threads=2)
        path = ensemble.path(7)
        self.assertEqual(path.Q[-1], ensemble.terminal_Q[7])
        self.assertAlmostEqual(market_sim.x_diagnostic(path)[-1], ensemble.terminal_X[7])

    def test_trajectory_not_stored(self):
        ensemble = market_sim.run_ensemble(SimConfig(N=40, Q_star=15, model=self.model, policy=self.cfg.policy,
                                                     paths=3))
        with self.assertRaises(TrajectoryNotStoredError):
            ensemble.path(0)
        with self.assertRaises(TrajectoryNotStoredError):
            market_sim.PathRecord(Q_star=3).terminal
        with self.assertRaises(TrajectoryNotStoredError):
            market_sim.x_diagnostic(None)

    def test_moments(self):
        self.assertEqual(market_sim.moments([1.0, 2.0, 3.0]), (2.0, 1.0))
        self.assertEqual(market_sim.moments([4.0]), (4.0, 0.0))
