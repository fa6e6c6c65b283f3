"""
Django settings for the signalexec project.

The project has no web surface: it is a Django project only for its
management commands, settings, forms and test runner.  Everything the
numerics need by default lives in the THRESHOLDS dict below.
"""

import os

# Build paths inside the project like this: os.path.join(BASE_DIR, ...)
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# No sessions, cookies or signing are used; override in the environment if that changes.
SECRET_KEY = os.environ.get('SIGNALEXEC_SECRET_KEY', 'signalexec-cli-only-no-web-surface')

DEBUG = False

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'thresholds.apps.ThresholdsConfig',
]

MIDDLEWARE = []

DATABASES = {}

# Form error messages are the only translated strings; keep them in English.
USE_I18N = False


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'thresholds': {
            'handlers': ['console'],
            'level': os.environ.get('THRESHOLDS_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
    },
}


# Numerical defaults. Resolution order for every run: these < YAML config < flags.

THRESHOLDS = {
    'seed': 20190101,
    'out': os.path.join(BASE_DIR, 'out'),
    'threads': os.cpu_count() or 1,
    'format': 'csv',
    'block_size': 4096,
    'calibration': {
        'tau_unconstrained': 3.5723,
        'tau_constrained': 1.3445,
        'lambda_iterations': 4,
        'border_width': 0.15,
    },
    'commands': {
        'dp': {
            'N': 100,
            'Q_star': 50,
            'scale_G': 1.0,
        },
        'policy': {
            'N': 100,
            'Q_star': 50,
            'scale_G': 1.0,
            'variant': 'mixed',
        },
        'perf': {
            'N': 100,
            'scale_G': 1.0,
        },
        'simulate': {
            'N': 100,
            'Q_star': 50,
            'scale_G': 1.0,
            'noise_std': 0.0,
            'P0': 100.0,
            'paths': 10000,
            'variant': 'deterministic',
            'force_boundary': True,
        },
        'iab': {
            'N': 100,
            'paths': 100000,
            'field_kind': 'constant',
            'p': 0.5,
            'q_star': 0.5,
            'mode': 'auto',
            'euler_paths': 0,
        },
        'ac': {
            'T': 1.0,
            'Q_star': 100.0,
            'sigma': 1.0,
            'eta': 1.0,
            'gamma_perm': 1.0,
            'lambda_risk': 3.0,
            'tau': 0.05,
            'u': 10000.0,
            'paths': 0,
        },
        'calibrate': {},
    },
}
