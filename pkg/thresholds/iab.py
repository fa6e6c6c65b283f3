"""Inventory asymptotic behaviour of threshold-driven chains.

When the fill probability at opportunity n is F(nT/N, Q_n/N) for a smooth
fill-rate field F, the inventory behaves for large N like N times the
diffusion

    dq = F(t, q) dt / T + sqrt(F (1 - F) / N) dW / sqrt(T),

so Q_n is approximately Gaussian.  This module integrates the diffusion with
Euler-Maruyama, propagates its first two moments with an ODE solver and
compares both against Monte Carlo ensembles of the discrete chain.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .exceptions import DomainError, FieldContractError
from .gain_models import linear_uniform
from .market_sim import SimConfig, moments, run_ensemble
from .threshold_policies import BORDER_WIDTH, variant_probability

logger = logging.getLogger(__name__)

MIN_SUBSTEPS_PER_UNIT_T = 1000
FIELD_TOL = 1e-12
DERIVATIVE_STEP = 1e-6
ODE_RTOL = 1e-10
ODE_ATOL = 1e-12
VERIFY_STOP = 0.9
VARIANCE_MODES = ('auto', 'frozen', 'linearized')


@dataclass(frozen=True, eq=False)
class FillRateField:
    func: object
    T: float = 1.0
    N: float = 100
    q_star: float = 1.0
    depends_on_q: bool = True
    breakpoints: tuple = ()
    dq: object = None
    label: str = ''

    def __call__(self, t, q):
        value = np.asarray(self.func(t, q), dtype=float)
        if np.any(np.isnan(value)) or np.any(value < -FIELD_TOL) or np.any(value > 1.0 + FIELD_TOL):
            raise FieldContractError(f"fill-rate field {self.label or self.func!r} left [0, 1]")
        value = np.clip(value, 0.0, 1.0)
        return float(value) if value.ndim == 0 else value

    def derivative_q(self, t, q):
        """dF/dq, analytic when provided, else a central difference kept inside [0, q*]."""
        if not self.depends_on_q:
            return np.zeros_like(np.asarray(q, dtype=float))
        if self.dq is not None:
            return self.dq(t, q)
        h = DERIVATIVE_STEP
        hi = np.minimum(np.asarray(q, dtype=float) + h, self.q_star)
        lo = np.maximum(np.asarray(q, dtype=float) - h, 0.0)
        return (np.asarray(self(t, hi)) - np.asarray(self(t, lo))) / np.maximum(hi - lo, h)

    def segments(self, upto):
        """Integration pieces [a, b] of [0, upto] split at the field's breakpoints."""
        edges = [0.0] + [b for b in sorted(self.breakpoints) if 0.0 < b < upto] + [upto]
        return list(zip(edges[:-1], edges[1:]))

    def with_scale(self, N):
        return dataclasses.replace(self, N=N)


def constant(p, T=1.0, N=100):
    if not 0.0 <= p <= 1.0:
        raise FieldContractError(f"constant fill rate {p} outside [0, 1]")
    return FillRateField(lambda t, q: np.full(np.broadcast(np.asarray(t), np.asarray(q)).shape, float(p)),
                         T=T, N=N, depends_on_q=False, label=f'constant({p})')


def piecewise_constant(times, values, T=1.0, N=100, label='piecewise'):
    """values[k] on [times[k-1], times[k]); `times` are the interior breakpoints."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.size != times.size + 1:
        raise DomainError("need exactly one more value than breakpoints")
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise FieldContractError("piecewise fill rates must lie in [0, 1]")

    def func(t, q):
        index = np.searchsorted(times, np.asarray(t, dtype=float), side='right')
        shape = np.broadcast(np.asarray(t), np.asarray(q)).shape
        return np.broadcast_to(values[index], shape)

    return FillRateField(func, T=T, N=N, depends_on_q=False, breakpoints=tuple(times.tolist()), label=label)


def deterministic_policy(q_star, T=1.0, N=100):
    """F(t, q) = clamp((q* - q) / (1 - t/T), 0, 1)."""
    def remaining_time(t):
        return 1.0 - np.asarray(t, dtype=float) / T

    def func(t, q):
        left = q_star - np.asarray(q, dtype=float)
        r = remaining_time(t)
        with np.errstate(divide='ignore', invalid='ignore'):
            pace = np.where(r > 0.0, left / np.where(r > 0.0, r, 1.0), np.where(left > 0.0, 1.0, 0.0))
        return np.clip(pace, 0.0, 1.0)

    def dq(t, q):
        r = remaining_time(t)
        pace = func(t, q)
        interior = (pace > 0.0) & (pace < 1.0) & (r > 0.0)
        return np.where(interior, -1.0 / np.where(r > 0.0, r, 1.0), 0.0)

    return FillRateField(func, T=T, N=N, q_star=q_star, depends_on_q=True, dq=dq,
                         label=f'deterministic({q_star})')


def from_policy_variant(variant, q_star, N, T=1.0, constants=None, border_width=BORDER_WIDTH):
    """A closed-form threshold policy read as a fill-rate field."""
    def func(t, q):
        r = 1.0 - np.asarray(t, dtype=float) / T
        left = q_star - np.asarray(q, dtype=float)
        live = r > 0.0
        safe_r = np.where(live, r, 1.0)
        p_det = np.clip(left / safe_r, 0.0, 1.0)
        p = variant_probability(variant, p_det, np.maximum(N * safe_r, 1.0), constants, border_width)
        return np.where(live, p, np.where(left > 0.0, 1.0, 0.0))

    return FillRateField(func, T=T, N=N, q_star=q_star, depends_on_q=True, label=variant)


# -- limit diffusion ----------------------------------------------------------

def euler_sde(field, steps, rng, paths=None, record_every=1):
    """Euler-Maruyama paths of the limit diffusion, clamped to [0, q*].

    Returns (times, values); values has shape (len(times),) for a single
    path or (paths, len(times)) otherwise.
    """
    if steps < field.N:
        raise DomainError(f"need at least one Euler step per opportunity ({field.N}), got {steps}")
    substeps = max(int(steps), math.ceil(MIN_SUBSTEPS_PER_UNIT_T * field.T))
    dt = field.T / substeps
    size = 1 if paths is None else int(paths)
    q = np.zeros(size)
    times, recorded = [0.0], [q.copy()]
    scale = math.sqrt(dt / field.T)
    for i in range(substeps):
        t = i * dt
        F = field(t, q)
        q = q + F * dt / field.T + np.sqrt(F * (1.0 - F) / field.N) * scale * rng.standard_normal(size)
        q = np.clip(q, 0.0, field.q_star)
        if (i + 1) % record_every == 0 or i + 1 == substeps:
            times.append((i + 1) * dt)
            recorded.append(q.copy())
    values = np.stack(recorded, axis=-1)
    return np.asarray(times), values[0] if paths is None else values


# -- moment propagation --------------------------------------------------------

def _resolve_mode(field, mode):
    if mode not in VARIANCE_MODES:
        raise DomainError(f"variance mode must be one of {', '.join(VARIANCE_MODES)}")
    if mode == 'auto':
        return 'linearized' if field.depends_on_q else 'frozen'
    return mode


def _moment_rhs(field, mode, end=np.inf):
    N, T = field.N, field.T

    def rhs(s, y):
        # stages landing on the segment end must still see this segment
        s = min(s, end)
        mean, var = y
        q = min(max(mean / N, 0.0), field.q_star)
        F = field(s, q)
        dvar = N * F * (1.0 - F) / T
        if mode == 'linearized':
            dvar += 2.0 * float(field.derivative_q(s, q)) / T * var
        return [N * F / T, dvar]

    return rhs


@dataclass(frozen=True)
class IABPrediction:
    times: np.ndarray
    mean: np.ndarray
    variance: np.ndarray

    @property
    def std(self):
        return np.sqrt(self.variance)


def predict(field, times, mode='auto'):
    """Predicted mean and variance of Q_n = N q at each requested time."""
    mode = _resolve_mode(field, mode)
    times = np.asarray(times, dtype=float)
    if np.any(times < 0.0) or np.any(times > field.T):
        raise DomainError(f"times must lie in [0, {field.T}]")
    order = np.argsort(times, kind='stable')
    mean = np.zeros(times.size)
    variance = np.zeros(times.size)
    state = [0.0, 0.0]
    upto = float(times.max()) if times.size else 0.0
    for a, b in field.segments(upto):
        if b <= a:
            continue
        inside = [i for i in order if a < times[i] <= b]
        t_eval = sorted(set(times[inside].tolist()) | {b})
        rhs = _moment_rhs(field, mode, end=np.nextafter(b, a))
        sol = integrate.solve_ivp(rhs, (a, b), state, method='RK45', t_eval=t_eval, rtol=ODE_RTOL, atol=ODE_ATOL)
        for i in inside:
            j = t_eval.index(times[i])
            mean[i], variance[i] = sol.y[0, j], sol.y[1, j]
        state = [sol.y[0, -1], sol.y[1, -1]]
    return IABPrediction(times, mean, np.maximum(variance, 0.0))


def gaussian_moments(field, t, mode='auto'):
    """(mean, variance) of Q at time t."""
    if not 0.0 <= t <= field.T:
        raise DomainError(f"t={t} outside [0, {field.T}]")
    if t == 0.0:
        return 0.0, 0.0
    prediction = predict(field, [t], mode)
    return float(prediction.mean[0]), float(prediction.variance[0])


def bernoulli_moments(field, n):
    """Exact mean and variance of Q_n for a field that ignores q."""
    if field.depends_on_q:
        raise DomainError("exact Bernoulli moments need a q-independent field")
    steps = np.arange(int(n)) * field.T / field.N
    p = np.asarray(field(steps, np.zeros_like(steps)), dtype=float)
    return math.fsum(p), math.fsum(p * (1.0 - p))


# -- verification against the discrete chain ----------------------------------

def default_checkpoints(N, stop=VERIFY_STOP):
    return tuple(sorted({int(round(k * N / 10)) for k in range(1, 10) if k / 10 <= stop + 1e-12} - {0}))


def normality(values):
    """Sample skewness, excess kurtosis and the combined statistic s^2 + k^2/4."""
    skew = float(stats.skew(values))
    kurt = float(stats.kurtosis(values))
    return skew, kurt, skew ** 2 + kurt ** 2 / 4.0


@dataclass(frozen=True)
class IABReport:
    N: int
    paths: int
    mode: str
    rows: tuple

    @property
    def max_abs_z(self):
        return max(abs(r['z_mean']) for r in self.rows)

    @property
    def variance_ratios(self):
        return [r['var_ratio'] for r in self.rows]


def chain_config(field, N, paths, seed=0, checkpoints=()):
    """Unforced chain whose fill probability at (n, Q) is F(nT/N, Q/N)."""
    T = field.T

    def policy(n, Q):
        return field(n * T / N, np.minimum(Q / N, field.q_star))

    return SimConfig(N=N, Q_star=N, model=linear_uniform(), policy=policy, paths=paths, seed=seed,
                     force_boundary=False, checkpoints=tuple(checkpoints))


def verify_iab(field, N, paths, checkpoints=None, seed=0, threads=1, mode='auto', progress=False):
    """Compare ensemble moments of the discrete chain with the asymptotic prediction."""
    field = field.with_scale(N)
    checkpoints = tuple(checkpoints) if checkpoints else default_checkpoints(N)
    ensemble = run_ensemble(chain_config(field, N, paths, seed, checkpoints), threads=threads, progress=progress)
    prediction = predict(field, [n * field.T / N for n in checkpoints], mode)
    rows = []
    for i, n in enumerate(checkpoints):
        emp_mean, emp_var = moments(ensemble.inventory_at(n))
        pred_mean, pred_var = float(prediction.mean[i]), float(prediction.variance[i])
        pred_std = math.sqrt(pred_var)
        skew, kurt, stat = normality(ensemble.inventory_at(n))
        rows.append({
            'checkpoint': n,
            't': n * field.T / N,
            'pred_mean': pred_mean,
            'pred_var': pred_var,
            'emp_mean': emp_mean,
            'emp_var': emp_var,
            'z_mean': (emp_mean - pred_mean) / (pred_std / math.sqrt(paths)) if pred_std > 0.0 else 0.0,
            'var_ratio': emp_var / pred_var if pred_var > 0.0 else math.nan,
            'skew': skew,
            'excess_kurtosis': kurt,
            'normality': stat,
        })
    return IABReport(N=N, paths=paths, mode=_resolve_mode(field, mode), rows=tuple(rows))
