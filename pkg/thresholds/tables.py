"""tablib datasets for every exported table.

Each builder returns a `tablib.Dataset` with headers; the commands export it
as CSV or JSON.
"""
import tablib

from .ac_bridge import BAND_COLUMNS
from .dp_bench import grid_rows


def _blank(value):
    return '' if value is None else value


def summary_dataset(items, title='summary'):
    data = tablib.Dataset(headers=['key', 'value'], title=title)
    for key, value in items:
        data.append([key, _blank(value)])
    return data


def grid_dataset(value_grid, policy_grid):
    data = tablib.Dataset(headers=['n', 'Q', 'V', 'p'], title='grid')
    for n, Q, V, p in grid_rows(value_grid, policy_grid):
        data.append([n, Q, V, _blank(p)])
    return data


def policy_dataset(policy_grid):
    data = tablib.Dataset(headers=['n', 'Q', 'p'], title='policy')
    for n in range(policy_grid.N):
        lo = max(0, policy_grid.Q_star - (policy_grid.N - n))
        for Q in range(lo, policy_grid.Q_star + 1):
            data.append([n, Q, float(policy_grid.probs[n, Q])])
    return data


def performance_dataset(rows):
    data = tablib.Dataset(headers=['Q_star', 'variant', 'value', 'ratio'], title='performance')
    for row in rows:
        data.append([row['Q_star'], row['variant'], row['value'], row['ratio']])
    return data


def checkpoint_dataset(ensemble):
    data = tablib.Dataset(headers=['checkpoint_n', 'mean_Q', 'var_Q'], title='checkpoints')
    for n, mean, var in ensemble.checkpoint_rows():
        data.append([n, mean, var])
    return data


def histogram_dataset(counts, edges):
    data = tablib.Dataset(headers=['bin_lo', 'bin_hi', 'paths'], title='fill_rate')
    for lo, hi, count in zip(edges[:-1], edges[1:], counts):
        data.append([float(lo), float(hi), int(count)])
    return data


IAB_COLUMNS = ('checkpoint', 'pred_mean', 'pred_var', 'emp_mean', 'emp_var', 'z_mean', 'var_ratio',
               'skew', 'excess_kurtosis')


def iab_dataset(report):
    data = tablib.Dataset(headers=list(IAB_COLUMNS), title='iab')
    for row in report.rows:
        data.append([row[c] for c in IAB_COLUMNS])
    return data


def euler_dataset(rows):
    data = tablib.Dataset(headers=['t', 'pred_mean', 'pred_var', 'euler_mean', 'euler_var'], title='euler')
    for row in rows:
        data.append([row['t'], row['pred_mean'], row['pred_var'], row['euler_mean'], row['euler_var']])
    return data


def band_dataset(rows):
    data = tablib.Dataset(headers=list(BAND_COLUMNS), title='bands')
    for row in rows:
        data.append([row[c] for c in BAND_COLUMNS])
    return data


def speed_dataset(schedule):
    data = tablib.Dataset(headers=['k', 't_start', 'speed', 'fill_rate', 'remaining_start'], title='speeds')
    edges = schedule.edges
    for k, speed in enumerate(schedule.speeds):
        data.append([k, float(edges[k]), float(speed), float(schedule.fill_rates[k]),
                     float(schedule.remaining(edges[k]))])
    return data


def band_validation_dataset(report):
    columns = ('k', 't', 'pred_mean', 'pred_var', 'emp_mean', 'emp_var', 'z_mean', 'var_ratio', 'coverage')
    data = tablib.Dataset(headers=list(columns), title='band_validation')
    for row in report.rows:
        data.append([row[c] for c in columns])
    return data


def speed_validation_dataset(report):
    columns = ('k', 'pred_speed', 'emp_speed', 'pred_var', 'emp_var', 'var_ratio')
    data = tablib.Dataset(headers=list(columns), title='speed_validation')
    for row in report.speed_rows:
        data.append([row[c] for c in columns])
    return data


def constants_dataset(constants):
    data = tablib.Dataset(headers=['variant', 'shift'], title='calibration')
    data.append(['unconstrained', constants.tau_unconstrained])
    data.append(['constrained', constants.tau_constrained])
    return data
