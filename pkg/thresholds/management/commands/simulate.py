from thresholds import dp_bench, market_sim, tables
from thresholds.forms import SimulateForm
from thresholds.runconfig import RunCommand


class Command(RunCommand):
    help = 'Monte Carlo the threshold-trading chain under one policy'
    section = 'simulate'
    form_class = SimulateForm

    def add_run_arguments(self, parser):
        parser.add_argument('--N', type=int)
        parser.add_argument('--Q-star', dest='Q_star', type=int)
        parser.add_argument('--variant')
        parser.add_argument('--noise-std', dest='noise_std', type=float, help="std of the price noise")
        parser.add_argument('--P0', type=float, help="initial price")
        parser.add_argument('--paths', type=int)
        parser.add_argument('--no-force-boundary', dest='force_boundary', action='store_const', const=False,
                            help="do not force trades on the feasibility boundaries")
        parser.add_argument('--checkpoints', help="comma separated steps at which to record inventory")
        self.add_model_arguments(parser)
        self.add_calibration_arguments(parser)

    def run(self, config):
        N, Q_star = config['N'], config['Q_star']
        model = self.gain_model(config)
        grid = self.policy_grid(config, config['variant'], N, Q_star, model)
        cfg = market_sim.SimConfig(
            N=N, Q_star=Q_star, model=model, policy=grid,
            paths=config['paths'],
            seed=config['seed'],
            P0=config['P0'],
            force_boundary=config['force_boundary'],
            checkpoints=tuple(config['checkpoints']),
            block_size=config['block_size'],
        )
        ensemble = market_sim.run_ensemble(cfg, threads=config['threads'], progress=self.progress)
        self.write_table('checkpoints', tables.checkpoint_dataset(ensemble))
        self.write_table('fill_rate', tables.histogram_dataset(*ensemble.fill_rate_histogram()))

        mean, se = ensemble.gain_summary()
        summary = [
            ('variant', config['variant']),
            ('paths', ensemble.paths),
            ('gain_mean', mean),
            ('gain_se', se),
            ('terminal_Q_mean', market_sim.moments(ensemble.terminal_Q)[0]),
        ]
        if config['force_boundary']:
            exact = dp_bench.evaluate_policy(grid, N, Q_star, model)
            summary.append(('gain_exact', exact))
            summary.append(('gain_z', (mean - exact) / se if se > 0.0 else 0.0))
        self.write_table('simulate_summary', tables.summary_dataset(summary))
        self.report(f"mean gain {mean:.6g} +/- {se:.2g} over {ensemble.paths} paths")
