from thresholds import tables, threshold_policies
from thresholds.forms import CalibrateForm
from thresholds.runconfig import RunCommand


class Command(RunCommand):
    help = 'Recompute the calibration shifts of the unconstrained and constrained policies'
    section = 'calibrate'
    form_class = CalibrateForm

    def add_run_arguments(self, parser):
        parser.add_argument('--lambda-iterations', dest='lambda_iterations', type=int)

    def run(self, config):
        constants = threshold_policies.calibrate_constants(config['lambda_iterations'])
        self.write_table('constants', tables.constants_dataset(constants))
        self.report(f"tau_unconstrained = {constants.tau_unconstrained:.6f}")
        self.report(f"tau_constrained = {constants.tau_constrained:.6f}")
