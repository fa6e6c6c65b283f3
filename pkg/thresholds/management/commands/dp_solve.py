import os

from thresholds import dp_bench, gain_models, tables
from thresholds.forms import DPSolveForm
from thresholds.runconfig import RunCommand


def spot_cells(N, Q_star):
    """Cells two and three steps from the end with known closed-form values."""
    for back, short in ((2, 1), (3, 1), (3, 2)):
        n, Q = N - back, Q_star - short
        if n >= 0 and Q >= 0:
            lo, hi = dp_bench.feasible_range(n, N, Q_star)
            if lo <= Q <= hi:
                yield n, Q


class Command(RunCommand):
    help = 'Solve the exact lattice problem and export V(n, Q) and p(n, Q)'
    section = 'dp'
    form_class = DPSolveForm

    def add_run_arguments(self, parser):
        parser.add_argument('--N', type=int, help="number of trading opportunities")
        parser.add_argument('--Q-star', dest='Q_star', type=int, help="shares to buy")
        self.add_model_arguments(parser)

    def run(self, config):
        N, Q_star = config['N'], config['Q_star']
        model = self.gain_model(config)
        value_grid, policy_grid = dp_bench.solve_dp(N, Q_star, model)
        self.write_table('grid', tables.grid_dataset(value_grid, policy_grid))

        perf_det = dp_bench.evaluate_policy(dp_bench.deterministic_policy_grid(N, Q_star), N, Q_star, model)
        symmetry = dp_bench.check_symmetry((value_grid, policy_grid), N, Q_star, model)
        summary = [
            ('N', N),
            ('Q_star', Q_star),
            ('model', model.kind.value),
            ('V(0,0)', value_grid(0, 0)),
            ('perf_deterministic', perf_det),
        ]
        for n, Q in spot_cells(N, Q_star):
            summary.append((f'V({n},{Q})', value_grid(n, Q)))
            summary.append((f'p({n},{Q})', float(policy_grid(n, Q))))
        summary.append(('symmetry', 'pass' if symmetry.passed else ('fail' if symmetry.applicable else 'n/a')))
        for key, value in gain_models.shape_report(model).items():
            summary.append((f'shape.{key}', value))
        self.write_table('dp_summary', tables.summary_dataset(summary))

        if config.get('samples'):
            path = os.path.join(config["out"], "gain_model.json")
            gain_models.dump_model(model, path)
            self.written.append(path)

        self.report(f"V(0,0) = {value_grid(0, 0):.12g}")
        if symmetry.applicable and not symmetry.passed:
            self.warn(f"symmetry check failed (value gap {symmetry.max_value_gap:.3g})")
