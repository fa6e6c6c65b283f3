"""Signal / price-change environments.

A gain model answers three questions about a signal S and the next price
move dP:

* the threshold theta(p) such that P(S >= theta(p)) = p,
* the gain g(p) = E[dP 1{S >= theta(p)}] of trading at quantile level p,
* how to draw (S, dP) pairs.

The canonical model is LinearUniform: S uniform on [-1/2, 1/2] and
E[dP | S] = a S, which gives g(p) = (a/2) p (1 - p).  Empirical models are
tabulated from user supplied (signal, price_change) rows.
"""
import enum
import json
import logging
import math
from dataclasses import dataclass

import numpy as np
import tablib

from .exceptions import DomainError, EmpiricalDataError

logger = logging.getLogger(__name__)

P_GRID_SIZE = 1001
MIN_EMPIRICAL_ROWS = 1000
SAMPLE_COLUMNS = ('signal', 'price_change')


class GainKind(enum.Enum):
    LINEAR_UNIFORM = 'LinearUniform'
    EMPIRICAL = 'Empirical'


def _check_probability(p):
    arr = np.asarray(p, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"probability outside [0, 1]: {p!r}")
    return arr


def _like(p, value):
    # scalars in, scalars out
    if np.ndim(p) == 0:
        return float(value)
    return value


@dataclass(frozen=True, eq=False)
class GainModel:
    kind: GainKind
    scale_G: float = 0.0
    noise_std: float = 0.0
    p_grid: np.ndarray = None
    quantile_table: np.ndarray = None
    gain_table: np.ndarray = None
    signals: np.ndarray = None
    price_changes: np.ndarray = None
    well_designed: bool = True
    zero_mean: bool = True

    @property
    def slope(self):
        """a in E[dP | S] = a S (LinearUniform only)."""
        return 2.0 * self.scale_G

    def gain(self, p):
        arr = _check_probability(p)
        if self.kind is GainKind.LINEAR_UNIFORM:
            value = self.scale_G * arr * (1.0 - arr)
        else:
            value = np.interp(arr, self.p_grid, self.gain_table)
        return _like(p, value)

    def threshold_of_quantile(self, p):
        arr = _check_probability(p)
        if self.kind is GainKind.LINEAR_UNIFORM:
            value = 0.5 - arr
        else:
            value = np.interp(arr, self.p_grid, self.quantile_table)
        return _like(p, value)

    def absolute_gain(self, p):
        """G(p) = g(p) / p, the expected price move given a trade."""
        arr = _check_probability(p)
        if self.kind is GainKind.LINEAR_UNIFORM:
            value = self.scale_G * (1.0 - arr)
        else:
            at_zero = self.gain_table[1] / self.p_grid[1]
            with np.errstate(divide='ignore', invalid='ignore'):
                value = np.where(arr > 0.0, np.interp(arr, self.p_grid, self.gain_table) / arr, at_zero)
        return _like(p, value)

    def marginal_gain(self, p):
        """g'(p) = E[dP | S = theta(p)]."""
        arr = _check_probability(p)
        if self.kind is GainKind.LINEAR_UNIFORM:
            value = self.slope * (0.5 - arr)
        else:
            value = np.interp(arr, self.p_grid, np.gradient(self.gain_table, self.p_grid))
        return _like(p, value)

    def is_symmetric(self, tol=1e-12):
        """True when g(1 - p) = g(p) on the evaluation grid."""
        grid = np.linspace(0.0, 1.0, 201)
        return bool(np.max(np.abs(self.gain(grid) - self.gain(1.0 - grid))) <= tol)

    def sample(self, rng, size):
        """Draw `size` i.i.d. (signal, price_change) pairs as two arrays."""
        if self.kind is GainKind.LINEAR_UNIFORM:
            signals = rng.uniform(-0.5, 0.5, size)
            price_changes = self.slope * signals
            if self.noise_std > 0.0:
                price_changes = price_changes + self.noise_std * rng.standard_normal(size)
            return signals, price_changes
        if self.signals is None:
            raise EmpiricalDataError("empirical model was loaded without a sample pool")
        rows = rng.integers(0, self.signals.size, size)
        return self.signals[rows], self.price_changes[rows]

    def sample_pair(self, rng):
        signals, price_changes = self.sample(rng, 1)
        return float(signals[0]), float(price_changes[0])


def linear_uniform(scale_G=1.0, noise_std=0.0):
    """The quadratic-gain model g(p) = G p (1 - p), i.e. slope a = 2 G."""
    if scale_G < 0.0 or noise_std < 0.0:
        raise DomainError("scale_G and noise_std must be non-negative")
    return GainModel(kind=GainKind.LINEAR_UNIFORM, scale_G=float(scale_G), noise_std=float(noise_std))


def gain(model, p):
    return model.gain(p)


def threshold_of_quantile(model, p):
    return model.threshold_of_quantile(p)


def absolute_gain(model, p):
    return model.absolute_gain(p)


def sample_pair(model, rng):
    return model.sample_pair(rng)


def _absolute_gain_monotone(p_grid, gain_table, price_changes):
    # compare G(p) on a coarse grid, with slack for sampling noise
    coarse = np.arange(50, p_grid.size, 50)
    G = gain_table[coarse] / p_grid[coarse]
    n = price_changes.size
    slack = 3.0 * float(np.std(price_changes)) / math.sqrt(n * p_grid[coarse[0]])
    return bool(np.all(np.diff(G) <= slack))


def empirical_from_samples(rows):
    """Tabulate theta(p) and g(p) from observed (signal, price_change) rows."""
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise EmpiricalDataError("rows must be (signal, price_change) pairs")
    n = data.shape[0]
    if n < MIN_EMPIRICAL_ROWS:
        raise EmpiricalDataError(f"need at least {MIN_EMPIRICAL_ROWS} rows, got {n}")
    signals = np.ascontiguousarray(data[:, 0])
    price_changes = np.ascontiguousarray(data[:, 1])
    if np.ptp(signals) == 0.0:
        raise EmpiricalDataError("signal is constant: the quantile map is not a bijection")

    mean = float(price_changes.mean())
    stderr = float(price_changes.std(ddof=1)) / math.sqrt(n)
    zero_mean = abs(mean) <= 3.0 * stderr if stderr > 0.0 else mean == 0.0
    if not zero_mean:
        logger.warning("mean price change %.3g is %.1f standard errors away from zero",
                       mean, abs(mean) / stderr if stderr > 0.0 else math.inf)

    p_grid = np.linspace(0.0, 1.0, P_GRID_SIZE)
    quantile_table = np.quantile(signals, 1.0 - p_grid, method='midpoint')

    order = np.argsort(-signals, kind='stable')
    cumulative = np.concatenate(([0.0], np.cumsum(price_changes[order] - mean)))
    top = np.rint(p_grid * n).astype(int)
    gain_table = cumulative[top] / n
    gain_table[0] = 0.0
    gain_table[-1] = 0.0

    well_designed = _absolute_gain_monotone(p_grid, gain_table, price_changes)
    if not well_designed:
        logger.warning("absolute gain G(p) is not non-increasing in p: signal is not well designed")

    return GainModel(
        kind=GainKind.EMPIRICAL,
        p_grid=p_grid,
        quantile_table=quantile_table,
        gain_table=gain_table,
        signals=signals,
        price_changes=price_changes,
        well_designed=well_designed,
        zero_mean=zero_mean,
    )


def shape_report(model, grid_size=201, tol=None):
    """Check the structural properties every gain map must have."""
    grid = np.linspace(0.0, 1.0, grid_size)
    g = model.gain(grid)
    if tol is None:
        tol = 1e-9 if model.kind is GainKind.LINEAR_UNIFORM else 1e-4 * max(float(np.max(np.abs(g))), 1e-12)
    chords = 0.5 * (g[:-2] + g[2:])
    G = model.absolute_gain(grid[1:])
    return {
        'g0': float(g[0]),
        'g1': float(g[-1]),
        'endpoints': bool(abs(g[0]) <= 1e-12 and abs(g[-1]) <= 1e-12),
        'concave': bool(np.all(g[1:-1] >= chords - tol)),
        'absolute_gain_monotone': bool(np.all(np.diff(G) <= tol)),
        'well_designed': model.well_designed,
    }


def load_samples(path):
    """Read `signal,price_change` rows (header required) from a CSV file."""
    with open(path, newline='') as fh:
        dataset = tablib.Dataset().load(fh.read(), format='csv', headers=True)
    headers = [h.strip() for h in (dataset.headers or [])]
    missing = [c for c in SAMPLE_COLUMNS if c not in headers]
    if missing:
        raise EmpiricalDataError(f"{path}: missing column(s) {', '.join(missing)}")
    try:
        columns = [np.asarray(dataset.get_col(headers.index(c)), dtype=float) for c in SAMPLE_COLUMNS]
    except ValueError as exc:
        raise EmpiricalDataError(f"{path}: non-numeric value ({exc})") from exc
    return np.column_stack(columns)


def model_to_dict(model):
    out = {'kind': model.kind.value}
    if model.kind is GainKind.LINEAR_UNIFORM:
        out.update(scale_G=model.scale_G, noise_std=model.noise_std)
    else:
        out.update(
            p_grid=model.p_grid.tolist(),
            quantile_table=model.quantile_table.tolist(),
            gain_table=model.gain_table.tolist(),
            well_designed=model.well_designed,
            zero_mean=model.zero_mean,
        )
    return out


def model_from_dict(data):
    try:
        kind = GainKind(data['kind'])
    except (KeyError, ValueError) as exc:
        raise EmpiricalDataError(f"unknown gain model kind: {data.get('kind')!r}") from exc
    if kind is GainKind.LINEAR_UNIFORM:
        return linear_uniform(data.get('scale_G', 1.0), data.get('noise_std', 0.0))
    return GainModel(
        kind=kind,
        p_grid=np.asarray(data['p_grid'], dtype=float),
        quantile_table=np.asarray(data['quantile_table'], dtype=float),
        gain_table=np.asarray(data['gain_table'], dtype=float),
        well_designed=bool(data.get('well_designed', True)),
        zero_mean=bool(data.get('zero_mean', True)),
    )


def dump_model(model, path):
    with open(path, 'w') as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
