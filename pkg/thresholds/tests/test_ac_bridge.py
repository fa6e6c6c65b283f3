import math

import numpy as np
from django.test import SimpleTestCase

from thresholds import ac_bridge, iab
from thresholds.ac_bridge import ACParams, ACSchedule
from thresholds.exceptions import ParameterError, SaturationError


def figure_params(**overrides):
    values = dict(T=1.0, Q_star=100.0, sigma=1.0, eta=1.0, gamma_perm=1.0, lambda_risk=3.0, tau=0.05, u=10000.0)
    values.update(overrides)
    return ACParams(**values)


class ScheduleTests(SimpleTestCase):

    def setUp(self):
        self.params = figure_params()
        self.plan = ac_bridge.schedule(self.params)

    def test_kappas(self):
        eta_tilde, kappa_tilde, kappa = ac_bridge.compute_kappas(self.params)
        self.assertAlmostEqual(eta_tilde, 0.975, delta=1e-15)
        self.assertAlmostEqual(kappa_tilde, math.sqrt(3 / 0.975), delta=1e-12)
        self.assertAlmostEqual(kappa_tilde, 1.7541, delta=1e-4)
        # the discrete urgency is slightly below its continuous counterpart
        self.assertLess(kappa, kappa_tilde)
        self.assertAlmostEqual(kappa, kappa_tilde, delta=1e-3)

    def test_mass_is_conserved(self):
        self.assertEqual(self.plan.speeds.shape, (20,))
        self.assertAlmostEqual(float(np.sum(self.plan.speeds) * self.params.tau), 100.0, delta=1e-10)
        self.assertTrue(np.all(np.diff(self.plan.speeds) < 0))

    def test_remaining_matches_the_continuous_curve_at_edges(self):
        edges = self.plan.edges
        np.testing.assert_allclose(self.plan.remaining(edges), self.plan.continuous_remaining(edges), atol=1e-9)
        self.assertAlmostEqual(float(self.plan.remaining(0.0)), 100.0)
        self.assertAlmostEqual(float(self.plan.remaining(1.0)), 0.0, delta=1e-10)

    def test_risk_neutral_schedule_is_uniform(self):
        plan = ac_bridge.schedule(figure_params(lambda_risk=0.0))
        np.testing.assert_allclose(plan.speeds, 100.0)
        self.assertEqual(plan.kappa, 0.0)

    def test_risk_aversion_front_loads_the_schedule(self):
        timid = ac_bridge.schedule(figure_params(lambda_risk=0.5))
        averse = ac_bridge.schedule(figure_params(lambda_risk=3.0))
        self.assertGreater(averse.speeds[0], timid.speeds[0])
        inner = np.linspace(0.0, 1.0, 41)[1:-1]
        self.assertTrue(np.all(averse.continuous_remaining(inner) < timid.continuous_remaining(inner)))
        self.assertTrue(np.all(averse.remaining(averse.edges[1:-1]) < timid.remaining(timid.edges[1:-1])))

    def test_parameter_errors(self):
        with self.assertRaises(ParameterError):
            figure_params(tau=0.3)
        with self.assertRaises(ParameterError):
            figure_params(u=10.0)
        with self.assertRaises(ParameterError):
            figure_params(Q_star=0.0)
        with self.assertRaises(ParameterError):
            ac_bridge.compute_kappas(figure_params(gamma_perm=100.0))

    def test_speed_table(self):
        with self.assertRaises(ParameterError):
            ACSchedule.from_speeds(self.params, [5.0] * 3)
        with self.assertLogs('thresholds.ac_bridge', level='WARNING'):
            ACSchedule.from_speeds(self.params, [1.0] * 20)


class BandTests(SimpleTestCase):

    def setUp(self):
        self.params = figure_params()
        self.plan = ac_bridge.schedule(self.params)

    def test_saturation(self):
        params = figure_params(u=100.0)
        with self.assertRaises(SaturationError) as cm:
            ac_bridge.fill_field(params, ac_bridge.schedule(params))
        self.assertAlmostEqual(cm.exception.minimal_u, float(np.max(self.plan.speeds)))
        self.assertGreater(cm.exception.minimal_u, 100.0)

    def test_fill_rates(self):
        field = ac_bridge.fill_field(self.params, self.plan)
        self.assertEqual(field.N, 10000.0)
        self.assertAlmostEqual(field(0.0, 0.0), self.plan.speeds[0] / 10000.0)
        self.assertAlmostEqual(field(0.999, 0.0), self.plan.speeds[-1] / 10000.0)

    def test_band_rows(self):
        rows = ac_bridge.uncertainty_bands(self.params, self.plan, self.plan.edges)
        self.assertEqual(len(rows), 21)
        self.assertAlmostEqual(rows[0]['mean_Q'], 100.0)
        self.assertEqual(rows[0]['std_Q'], 0.0)
        middle = rows[10]
        z = 1.6448536269514722
        self.assertAlmostEqual(middle['q05'], middle['mean_Q'] - z * middle['std_Q'], delta=1e-9)
        self.assertLess(middle['q005'], middle['q05'])
        self.assertLess(middle['q25'], middle['mean_Q'])
        self.assertGreater(middle['q995'], middle['q95'])
        self.assertEqual(set(rows[0]), set(ac_bridge.BAND_COLUMNS))

    def test_bands_are_symmetric_about_the_mean(self):
        rows = ac_bridge.uncertainty_bands(self.params, self.plan, np.linspace(0.0, 1.0, 37))
        for row in rows:
            for lo, hi in ac_bridge.BAND_KEYS.values():
                self.assertAlmostEqual(row['mean_Q'] - row[lo], row[hi] - row['mean_Q'], delta=1e-9, msg=row)
                self.assertLessEqual(row[lo], row[hi])

    def test_speed_std_at_one_half(self):
        params = ACParams(T=1.0, Q_star=50.0, sigma=1.0, eta=1.0, gamma_perm=0.0, lambda_risk=0.0, tau=0.1, u=100.0)
        plan = ACSchedule.from_speeds(params, [50.0] * 10)
        row = ac_bridge.uncertainty_bands(params, plan, [0.35])[0]
        self.assertAlmostEqual(row['std_speed'], math.sqrt(250.0), delta=1e-12)
        self.assertAlmostEqual(row['mean_Q'], 32.5)

    def test_horizon_variance_matches_moment_integration(self):
        field = ac_bridge.fill_field(self.params, self.plan)
        prediction = iab.predict(field, [0.5, 1.0])
        expected = self.plan.integrated_variance(np.array([0.5, 1.0])) * self.params.opportunities
        np.testing.assert_allclose(prediction.variance, expected, rtol=1e-9)
        np.testing.assert_allclose(prediction.mean, 100.0 - self.plan.remaining(np.array([0.5, 1.0])), rtol=1e-9)

    def test_monte_carlo_coverage(self):
        report = ac_bridge.validate_bands(self.params, 100000, np.random.default_rng(20190101))
        self.assertGreaterEqual(report.coverage, 0.885)
        self.assertLessEqual(report.coverage, 0.915)
        self.assertLess(report.max_abs_z, 4.5)
        for row in report.rows:
            self.assertAlmostEqual(row['var_ratio'], 1.0, delta=0.03)
        for row in report.speed_rows:
            self.assertAlmostEqual(row['var_ratio'], 1.0, delta=0.03)

    def test_fractional_observations_cannot_be_simulated(self):
        with self.assertRaises(ParameterError):
            ac_bridge.validate_bands(figure_params(u=1000.5), 10, np.random.default_rng(0))
