from thresholds import ac_bridge, tables
from thresholds.forms import ACBandsForm
from thresholds.runconfig import RunCommand

AC_KEYS = ('T', 'Q_star', 'sigma', 'eta', 'gamma_perm', 'lambda_risk', 'tau', 'u')


class Command(RunCommand):
    help = 'Uncertainty bands of an Almgren-Chriss schedule traded with a signal threshold'
    section = 'ac'
    form_class = ACBandsForm

    def add_run_arguments(self, parser):
        parser.add_argument('--T', type=float, help="horizon")
        parser.add_argument('--Q-star', dest='Q_star', type=float)
        parser.add_argument('--sigma', type=float)
        parser.add_argument('--eta', type=float, help="temporary impact")
        parser.add_argument('--gamma', dest='gamma_perm', type=float, help="permanent impact")
        parser.add_argument('--lambda', dest='lambda_risk', type=float, help="risk aversion")
        parser.add_argument('--tau', type=float, help="interval length")
        parser.add_argument('--u', type=float, help="signal observations per unit of time")
        parser.add_argument('--paths', type=int, help="Monte Carlo paths for band validation (0 skips it)")
        parser.add_argument('--speeds', help="comma separated speed per interval instead of the AC schedule")

    def run(self, config):
        params = ac_bridge.ACParams(**{k: config[k] for k in AC_KEYS})
        if config['speeds']:
            plan = ac_bridge.ACSchedule.from_speeds(params, config['speeds'])
        else:
            plan = ac_bridge.schedule(params)
        rows = ac_bridge.uncertainty_bands(params, plan, plan.edges)
        self.write_table('bands', tables.band_dataset(rows))
        self.write_table('speeds', tables.speed_dataset(plan))

        summary = [
            ('intervals', params.intervals),
            ('opportunities', params.opportunities),
            ('kappa', plan.kappa),
            ('eta_tilde', plan.eta_tilde),
            ('max_fill_rate', float(plan.fill_rates.max())),
            ('std_Q_max', max(r['std_Q'] for r in rows)),
        ]
        if config['paths'] > 0:
            report = ac_bridge.validate_bands(params, config['paths'], self.rng(config), plan=plan)
            self.write_table('band_validation', tables.band_validation_dataset(report))
            self.write_table('speed_validation', tables.speed_validation_dataset(report))
            summary.append(('coverage_90', report.coverage))
            summary.append(('max_abs_z', report.max_abs_z))
            self.report(f"pooled 90% band coverage {report.coverage:.4f}")
        self.write_table('ac_summary', tables.summary_dataset(summary))
        self.report(f"mean_Q(0) = {rows[0]['mean_Q']:.6g}, mean_Q(T) = {rows[-1]['mean_Q']:.6g}")
