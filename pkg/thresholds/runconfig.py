"""Shared plumbing for the management commands.

Every command resolves its configuration the same way: settings defaults,
then the YAML file given with --config, then command-line flags.  The
merged dict is validated by the command's form before anything runs.
"""
import copy
import json
import logging
import os

import numpy as np
import yaml
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from . import dp_bench, gain_models, threshold_policies
from .exceptions import ThresholdsError
from .forms import error_lines

logger = logging.getLogger(__name__)

COMMON_KEYS = ('seed', 'out', 'threads', 'format', 'block_size')
CONFIG_ERROR = 2
NUMERICAL_ERROR = 3


def load_config_file(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise CommandError(f"config: cannot read {path}: {exc}", returncode=CONFIG_ERROR) from exc
    except yaml.YAMLError as exc:
        raise CommandError(f"config: {path} is not valid YAML: {exc}", returncode=CONFIG_ERROR) from exc
    if not isinstance(data, dict):
        raise CommandError(f"config: {path} must hold a mapping", returncode=CONFIG_ERROR)
    return data


def defaults(section):
    conf = settings.THRESHOLDS
    out = {key: conf[key] for key in COMMON_KEYS}
    out.update(conf['calibration'])
    out.update(copy.deepcopy(conf['commands'].get(section, {})))
    return out


def _plain(value):
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


class RunCommand(BaseCommand):
    """A numerical run: validated config in, tables and a manifest out."""

    section = None
    form_class = None

    def add_arguments(self, parser):
        parser.add_argument('--config', help="YAML run configuration")
        parser.add_argument('--seed', type=int, help="reproducibility seed (unsigned 64-bit)")
        parser.add_argument('--out', help="output directory")
        parser.add_argument('--threads', type=int, help="worker threads (default: available cores)")
        parser.add_argument('--format', choices=['csv', 'json'], help="table format")
        parser.add_argument('--block-size', dest='block_size', type=int, help="paths stepped together (memory only)")
        self.add_run_arguments(parser)

    def add_run_arguments(self, parser):
        pass

    def add_calibration_arguments(self, parser):
        parser.add_argument('--tau-unconstrained', dest='tau_unconstrained', type=float)
        parser.add_argument('--tau-constrained', dest='tau_constrained', type=float)
        parser.add_argument('--lambda-iterations', dest='lambda_iterations', type=int)
        parser.add_argument('--border-width', dest='border_width', type=float)

    def add_model_arguments(self, parser):
        parser.add_argument('--G', dest='scale_G', type=float, help="scale of g(p) = G p (1 - p)")
        parser.add_argument('--model', help="JSON gain model file")
        parser.add_argument('--samples', help="CSV of signal,price_change rows for an empirical model")

    def resolve(self, options):
        config = defaults(self.section)
        if options.get('config'):
            data = load_config_file(options['config'])
            config.update({k: data[k] for k in COMMON_KEYS if k in data})
            config.update(data.get('calibration') or {})
            config.update(data.get(self.section) or {})
        form_fields = self.form_class.base_fields
        config.update({k: v for k, v in options.items() if k in form_fields and v is not None})
        form = self.form_class(data=config)
        if not form.is_valid():
            raise CommandError("\n".join(error_lines(form)), returncode=CONFIG_ERROR)
        return form.cleaned_data

    def handle(self, *args, **options):
        self.verbosity = options.get('verbosity', 1)
        config = self.resolve(options)
        self.config = config
        self.written = []
        try:
            self.run(config)
        except ThresholdsError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=NUMERICAL_ERROR) from exc
        self.write_manifest(config)
        if self.verbosity > 0:
            self.stdout.write(self.style.SUCCESS(f"wrote {len(self.written)} file(s) to {config['out']}"))

    def run(self, config):
        raise NotImplementedError

    @property
    def progress(self):
        return self.verbosity > 0

    # -- helpers -------------------------------------------------------------

    def calibration(self, config):
        return threshold_policies.CalibrationConstants(
            tau_unconstrained=config['tau_unconstrained'],
            tau_constrained=config['tau_constrained'],
            lambda_iterations=config['lambda_iterations'],
        )

    def gain_model(self, config):
        try:
            if config.get('model'):
                return gain_models.load_model(config['model'])
            if config.get('samples'):
                return gain_models.empirical_from_samples(gain_models.load_samples(config['samples']))
        except OSError as exc:
            raise CommandError(f"model: {exc}", returncode=CONFIG_ERROR) from exc
        return gain_models.linear_uniform(config['scale_G'], config.get('noise_std') or 0.0)

    def rng(self, config):
        return np.random.default_rng(config['seed'])

    def write_table(self, name, dataset):
        fmt = self.config['format']
        os.makedirs(self.config['out'], exist_ok=True)
        path = os.path.join(self.config['out'], f"{name}.{fmt}")
        with open(path, 'w', newline='') as fh:
            fh.write(dataset.export(fmt))
        self.written.append(path)
        return path

    def write_manifest(self, config):
        os.makedirs(config['out'], exist_ok=True)
        manifest = {
            'command': self.section,
            'seed': config['seed'],
            'config': {k: _plain(v) for k, v in config.items()},
            'files': sorted(os.path.basename(p) for p in self.written),
        }
        path = os.path.join(config['out'], f"{self.section}_manifest.json")
        with open(path, 'w') as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write('\n')
        self.written.append(path)

    def report(self, message):
        if self.verbosity > 0:
            self.stdout.write(message)

    def warn(self, message):
        self.stdout.write(self.style.WARNING(message))

    def policy_grid(self, config, variant, N, Q_star, model):
        """The optimal lattice policy, or a closed-form variant tabulated on the lattice."""
        if variant == 'optimal':
            return dp_bench.solve_dp(N, Q_star, model)[1]
        return threshold_policies.lattice_policy(variant, N, Q_star, self.calibration(config),
                                                 config['border_width'])
