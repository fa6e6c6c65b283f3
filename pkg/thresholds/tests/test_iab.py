import math

import numpy as np
from django.test import SimpleTestCase

from thresholds import iab
from thresholds.exceptions import DomainError, FieldContractError


class FieldTests(SimpleTestCase):

    def test_contract(self):
        with self.assertRaises(FieldContractError):
            iab.FillRateField(lambda t, q: 1.5)(0.0, 0.0)
        with self.assertRaises(FieldContractError):
            iab.constant(1.2)
        with self.assertRaises(FieldContractError):
            iab.piecewise_constant([0.5], [0.2, -0.1])
        with self.assertRaises(DomainError):
            iab.piecewise_constant([0.5], [0.2])

    def test_piecewise_lookup(self):
        field = iab.piecewise_constant([0.25, 0.5], [0.1, 0.4, 0.9])
        np.testing.assert_allclose(field(np.array([0.0, 0.25, 0.3, 0.5, 0.99]), 0.0), [0.1, 0.4, 0.4, 0.9, 0.9])
        self.assertEqual(field.segments(0.75), [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75)])

    def test_deterministic_field(self):
        field = iab.deterministic_policy(0.5)
        self.assertAlmostEqual(field(0.0, 0.0), 0.5)
        self.assertAlmostEqual(field(0.5, 0.1), 0.8)
        self.assertEqual(field(0.5, 0.5), 0.0)
        self.assertEqual(field(1.0, 0.4), 1.0)
        self.assertAlmostEqual(float(field.derivative_q(0.5, 0.25)), -2.0)

    def test_numerical_derivative(self):
        field = iab.FillRateField(lambda t, q: 0.2 + 0.5 * np.asarray(q) ** 2, q_star=1.0)
        self.assertAlmostEqual(float(field.derivative_q(0.0, 0.4)), 0.4, delta=1e-6)
        self.assertEqual(float(iab.constant(0.3).derivative_q(0.1, 0.2)), 0.0)

    def test_policy_variant_field_stays_in_bounds(self):
        field = iab.from_policy_variant('mixed', 0.5, 100)
        t, q = np.meshgrid(np.linspace(0.0, 0.99, 34), np.linspace(0.0, 0.5, 26))
        values = field(t, q)
        self.assertTrue(np.all((values >= 0.0) & (values <= 1.0)))
        self.assertEqual(field(1.0, 0.3), 1.0)


class MomentTests(SimpleTestCase):

    def test_constant_field(self):
        field = iab.constant(0.5, N=100)
        mean, var = iab.gaussian_moments(field, 0.5)
        self.assertAlmostEqual(mean, 25.0, delta=1e-8)
        self.assertAlmostEqual(var, 12.5, delta=1e-8)
        self.assertEqual(iab.gaussian_moments(field, 0.0), (0.0, 0.0))
        self.assertEqual(iab.bernoulli_moments(field, 100), (50.0, 25.0))

    def test_piecewise_field_matches_bernoulli_sum(self):
        field = iab.piecewise_constant([0.5], [0.2, 0.7], N=100)
        mean, var = iab.gaussian_moments(field, 1.0)
        exact_mean, exact_var = iab.bernoulli_moments(field, 100)
        self.assertAlmostEqual(mean, exact_mean, delta=1e-8)
        self.assertAlmostEqual(var, exact_var, delta=1e-8)
        self.assertAlmostEqual(exact_var, 18.5, delta=1e-12)

    def test_linearized_variance_under_pacing(self):
        # pacing to q* makes the chain hypergeometric: N q*(1 - q*) t (1 - t) in the limit
        field = iab.deterministic_policy(0.5, N=100)
        mean, var = iab.gaussian_moments(field, 0.5)
        self.assertAlmostEqual(mean, 25.0, delta=1e-8)
        self.assertAlmostEqual(var, 6.25, delta=1e-6)
        _, frozen = iab.gaussian_moments(field, 0.5, mode='frozen')
        self.assertAlmostEqual(frozen, 12.5, delta=1e-6)

    def test_std_scales_like_root_N(self):
        small = iab.predict(iab.deterministic_policy(0.3, N=100), [0.4])
        large = iab.predict(iab.deterministic_policy(0.3, N=400), [0.4])
        self.assertAlmostEqual(float(large.std[0] / small.std[0]), 2.0, delta=0.1)

    def test_predict_keeps_the_requested_order(self):
        prediction = iab.predict(iab.constant(0.25, N=40), [0.75, 0.25, 0.5])
        np.testing.assert_allclose(prediction.mean, [7.5, 2.5, 5.0], atol=1e-8)

    def test_domain(self):
        field = iab.constant(0.5)
        with self.assertRaises(DomainError):
            iab.gaussian_moments(field, 1.5)
        with self.assertRaises(DomainError):
            iab.predict(field, [0.5], mode='exact')
        with self.assertRaises(DomainError):
            iab.bernoulli_moments(iab.deterministic_policy(0.5), 10)

    def test_normality_of_gaussian_draws(self):
        values = np.random.default_rng(2).standard_normal(100000)
        skew, kurt, stat = iab.normality(values)
        self.assertLess(abs(skew), 0.05)
        self.assertLess(abs(kurt), 0.1)
        self.assertAlmostEqual(stat, skew ** 2 + kurt ** 2 / 4)


class EulerTests(SimpleTestCase):

    def test_needs_one_step_per_opportunity(self):
        with self.assertRaises(DomainError):
            iab.euler_sde(iab.constant(0.5, N=100), 50, np.random.default_rng(0))

    def test_single_path_shape(self):
        times, values = iab.euler_sde(iab.constant(0.5, N=10), 1000, np.random.default_rng(0), record_every=100)
        self.assertEqual(times.shape, (11,))
        self.assertEqual(values.shape, (11,))
        self.assertAlmostEqual(times[-1], 1.0)

    def test_constant_field_moments(self):
        N, paths = 100, 4000
        _, values = iab.euler_sde(iab.constant(0.5, N=N), 1000, np.random.default_rng(9), paths=paths,
                                  record_every=1000)
        Q = N * values[:, -1]
        self.assertLess(abs(Q.mean() - 50.0), 4 * math.sqrt(25.0 / paths))
        self.assertAlmostEqual(Q.var(ddof=1) / 25.0, 1.0, delta=0.1)


class VerifyTests(SimpleTestCase):

    def test_constant_field_against_the_chain(self):
        report = iab.verify_iab(iab.constant(0.5), 100, 100000, seed=20190101, threads=2)
        self.assertEqual(report.mode, 'frozen')
        self.assertLess(report.max_abs_z, 3.0)
        for ratio in report.variance_ratios:
            self.assertGreaterEqual(ratio, 0.95)
            self.assertLessEqual(ratio, 1.05)
        self.assertEqual([r['checkpoint'] for r in report.rows], [10, 20, 30, 40, 50, 60, 70, 80, 90])

    def test_pacing_field_against_the_chain(self):
        report = iab.verify_iab(iab.deterministic_policy(0.5), 100, 100000, seed=20190101, threads=2)
        self.assertEqual(report.mode, 'linearized')
        for row in report.rows:
            self.assertGreaterEqual(row['var_ratio'], 0.8, msg=row)
            self.assertLessEqual(row['var_ratio'], 1.2, msg=row)

    def test_default_checkpoints(self):
        self.assertEqual(iab.default_checkpoints(20), (2, 4, 6, 8, 10, 12, 14, 16, 18))
        self.assertEqual(iab.default_checkpoints(100, stop=0.5), (10, 20, 30, 40, 50))
