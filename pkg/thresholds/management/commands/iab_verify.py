import math

from thresholds import iab, market_sim, tables
from thresholds.forms import IABVerifyForm
from thresholds.runconfig import RunCommand

# spawn key of the Euler generator, far past any chain block index
EULER_STREAM = 2 ** 31


def build_field(config, constants):
    kind, N = config['field_kind'], config['N']
    if kind == 'constant':
        return iab.constant(config['p'], N=N)
    if kind == 'deterministic':
        return iab.deterministic_policy(config['q_star'], N=N)
    return iab.from_policy_variant(kind, config['q_star'], N, constants=constants,
                                   border_width=config['border_width'])


class Command(RunCommand):
    help = 'Compare inventory moments of the discrete chain with the Gaussian limit'
    section = 'iab'
    form_class = IABVerifyForm

    def add_run_arguments(self, parser):
        parser.add_argument('--N', type=int)
        parser.add_argument('--paths', type=int)
        parser.add_argument('--field', dest='field_kind', help="constant or a policy variant")
        parser.add_argument('--p', type=float, help="fill rate of the constant field")
        parser.add_argument('--q-star', dest='q_star', type=float, help="target as a fraction of N")
        parser.add_argument('--mode', help="variance propagation: auto, frozen or linearized")
        parser.add_argument('--checkpoints', help="comma separated steps n")
        parser.add_argument('--euler-paths', dest='euler_paths', type=int,
                            help="also integrate this many limit-diffusion paths")
        self.add_calibration_arguments(parser)

    def run(self, config):
        N = config['N']
        field = build_field(config, self.calibration(config)).with_scale(N)
        report = iab.verify_iab(field, N, config['paths'], checkpoints=config['checkpoints'],
                                seed=config['seed'], threads=config['threads'], mode=config['mode'],
                                progress=self.progress)
        self.write_table('iab', tables.iab_dataset(report))
        if config['euler_paths'] > 0:
            self.write_table('euler', tables.euler_dataset(self.euler_rows(field, report, config)))

        self.write_table('iab_summary', tables.summary_dataset([
            ('field', field.label),
            ('mode', report.mode),
            ('paths', report.paths),
            ('max_abs_z', report.max_abs_z),
            ('min_var_ratio', min(report.variance_ratios)),
            ('max_var_ratio', max(report.variance_ratios)),
        ]))
        self.report(f"max |z| of the mean {report.max_abs_z:.3f} over {len(report.rows)} checkpoints")

    def euler_rows(self, field, report, config):
        N = config['N']
        per_step = math.ceil(iab.MIN_SUBSTEPS_PER_UNIT_T * field.T / N)
        times, values = iab.euler_sde(field, N * per_step, market_sim.path_rng(config['seed'], EULER_STREAM),
                                      paths=config['euler_paths'], record_every=per_step)
        rows = []
        for row in report.rows:
            Q = N * values[:, int(row['checkpoint'])]
            mean, var = market_sim.moments(Q)
            rows.append({'t': float(times[row['checkpoint']]), 'pred_mean': row['pred_mean'],
                         'pred_var': row['pred_var'], 'euler_mean': mean, 'euler_var': var})
        return rows
