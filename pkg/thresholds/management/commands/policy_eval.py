from thresholds import dp_bench, tables
from thresholds.exceptions import UndefinedRatioError
from thresholds.forms import PolicyEvalForm
from thresholds.runconfig import RunCommand


class Command(RunCommand):
    help = 'Tabulate one policy on the lattice and evaluate it exactly against the optimum'
    section = 'policy'
    form_class = PolicyEvalForm

    def add_run_arguments(self, parser):
        parser.add_argument('--N', type=int)
        parser.add_argument('--Q-star', dest='Q_star', type=int)
        parser.add_argument('--variant', help="optimal, deterministic, unconstrained_raw, ... or mixed")
        self.add_model_arguments(parser)
        self.add_calibration_arguments(parser)

    def run(self, config):
        N, Q_star, variant = config['N'], config['Q_star'], config['variant']
        model = self.gain_model(config)
        grid = self.policy_grid(config, variant, N, Q_star, model)
        self.write_table('policy', tables.policy_dataset(grid))

        bench = dp_bench.PerformanceBench(N, Q_star, model)
        value = bench.evaluate(grid)
        try:
            ratio = bench.ratio(grid)
        except UndefinedRatioError as exc:
            self.warn(str(exc))
            ratio = None
        self.write_table('policy_summary', tables.summary_dataset([
            ('variant', variant),
            ('N', N),
            ('Q_star', Q_star),
            ('value', value),
            ('perf_optimal', bench.perf_optimal),
            ('perf_deterministic', bench.perf_deterministic),
            ('ratio', ratio),
        ]))
        self.report(f"{variant}: value {value:.10g}, ratio {'n/a' if ratio is None else f'{ratio:.6f}'}")
