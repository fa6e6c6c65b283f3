from concurrent.futures import ThreadPoolExecutor

from tqdm import tqdm

from thresholds import dp_bench, tables
from thresholds.exceptions import UndefinedRatioError
from thresholds.forms import PerfCompareForm
from thresholds.runconfig import RunCommand

MIXED_TARGET = 0.98


class Command(RunCommand):
    help = 'Performance ratios of every closed-form policy across a range of targets Q*'
    section = 'perf'
    form_class = PerfCompareForm

    def add_run_arguments(self, parser):
        parser.add_argument('--N', type=int)
        parser.add_argument('--q-min', dest='q_min', type=int)
        parser.add_argument('--q-max', dest='q_max', type=int)
        parser.add_argument('--variants', help="comma separated subset of policy variants to compare")
        self.add_model_arguments(parser)
        self.add_calibration_arguments(parser)

    def compare(self, config, model, Q_star):
        N = config['N']
        bench = dp_bench.PerformanceBench(N, Q_star, model)
        rows = [
            {'Q_star': Q_star, 'variant': 'optimal', 'value': bench.perf_optimal, 'ratio': 1.0},
            {'Q_star': Q_star, 'variant': 'deterministic', 'value': bench.perf_deterministic, 'ratio': 0.0},
        ]
        for variant in config['variants']:
            if variant == 'deterministic':
                continue
            grid = self.policy_grid(config, variant, N, Q_star, model)
            try:
                ratio = bench.ratio(grid)
            except UndefinedRatioError:
                ratio = None
            rows.append({'Q_star': Q_star, 'variant': variant, 'value': bench.evaluate(grid), 'ratio': ratio})
        return rows

    def run(self, config):
        model = self.gain_model(config)
        targets = range(config['q_min'], config['q_max'] + 1)
        with ThreadPoolExecutor(max_workers=config['threads']) as pool:
            results = list(tqdm(pool.map(lambda q: self.compare(config, model, q), targets),
                                total=len(targets), desc='Q*', disable=not self.progress))
        rows = [row for block in results for row in block]
        for row in rows:
            if row['ratio'] is None:
                row['ratio'] = ''
        self.write_table('performance', tables.performance_dataset(rows))

        summary = []
        for variant in ['optimal', 'deterministic', *[v for v in config['variants'] if v != 'deterministic']]:
            ratios = [r['ratio'] for r in rows if r['variant'] == variant and r['ratio'] != '']
            if ratios:
                summary.append((f'{variant}.min_ratio', min(ratios)))
                summary.append((f'{variant}.mean_ratio', sum(ratios) / len(ratios)))
        mixed = [r['ratio'] for r in rows if r['variant'] == 'mixed' and r['ratio'] != '']
        if mixed:
            share = sum(r >= MIXED_TARGET for r in mixed) / len(mixed)
            summary.append(('mixed.share_above_0.98', share))
            self.report(f"mixed policy reaches {MIXED_TARGET:.0%} of the optimum on {share:.1%} of targets")
        self.write_table('perf_summary', tables.summary_dataset(summary))
