"""Uncertainty of Almgren-Chriss schedules executed with a signal threshold.

A target speed nu on [k tau, (k+1) tau) is realized by trading whenever the
signal clears the quantile of level F_k = nu_k / u, u being the number of
signal observations per unit of time.  The realized fills are then Binomial,
and for u tau >> 1 the realized speed and remaining inventory are Gaussian:

    speed on interval k      ~ Normal(nu_k, u F_k (1 - F_k) / tau)
    remaining at time t      ~ Normal(Q* - integral_0^t nu, u integral_0^t F (1 - F))
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import iab
from .exceptions import FieldContractError, ParameterError, SaturationError

logger = logging.getLogger(__name__)

BAND_LEVELS = (0.50, 0.90, 0.99)
BAND_KEYS = {0.50: ('q25', 'q75'), 0.90: ('q05', 'q95'), 0.99: ('q005', 'q995')}
BAND_COLUMNS = ('t', 'mean_Q', 'std_Q', 'q005', 'q05', 'q25', 'q75', 'q95', 'q995', 'mean_speed', 'std_speed')
MASS_TOL = 1e-10
INDEX_SLACK = 1e-9


@dataclass(frozen=True)
class ACParams:
    T: float
    Q_star: float
    sigma: float
    eta: float
    gamma_perm: float
    lambda_risk: float
    tau: float
    u: float

    def __post_init__(self):
        if self.T <= 0.0 or self.tau <= 0.0 or self.Q_star <= 0.0 or self.u <= 0.0:
            raise ParameterError("T, tau, Q_star and u must be positive")
        if self.sigma < 0.0 or self.lambda_risk < 0.0 or self.eta <= 0.0 or self.gamma_perm < 0.0:
            raise ParameterError("sigma, lambda_risk and gamma_perm must be non-negative, eta positive")
        if abs(self.intervals * self.tau - self.T) > INDEX_SLACK * self.T:
            raise ParameterError(f"tau={self.tau} does not divide T={self.T}")
        if self.u * self.tau < 1.0:
            raise ParameterError(f"u * tau = {self.u * self.tau} < 1: fewer than one observation per interval")

    @property
    def intervals(self):
        return max(int(round(self.T / self.tau)), 1)

    @property
    def opportunities(self):
        """N = u T, the total number of signal observations."""
        return self.u * self.T

    @property
    def observations_per_interval(self):
        return self.u * self.tau


def compute_kappas(p):
    """(eta_tilde, kappa_tilde, kappa) of the discrete schedule."""
    eta_tilde = p.eta * (1.0 - p.gamma_perm * p.tau / (2.0 * p.eta))
    if eta_tilde <= 0.0:
        raise ParameterError(f"eta_tilde = {eta_tilde} is not positive: reduce gamma * tau / 2 below eta")
    kappa_tilde = math.sqrt(p.lambda_risk * p.sigma ** 2 / eta_tilde)
    # arccosh(1 + x^2 / 2) = 2 asinh(x / 2), stable as tau -> 0
    kappa = 2.0 * math.asinh(kappa_tilde * p.tau / 2.0) / p.tau
    return eta_tilde, kappa_tilde, kappa


@dataclass(frozen=True, eq=False)
class ACSchedule:
    params: ACParams
    speeds: np.ndarray
    kappa: float = None
    eta_tilde: float = None
    kappa_tilde: float = None

    @classmethod
    def from_speeds(cls, params, speeds):
        """An arbitrary per-interval speed table (shares per unit of time)."""
        speeds = np.asarray(speeds, dtype=float)
        if speeds.shape != (params.intervals,):
            raise ParameterError(f"need {params.intervals} speeds, got {speeds.shape}")
        mass = float(np.sum(speeds) * params.tau)
        if abs(mass - params.Q_star) > MASS_TOL * params.Q_star:
            logger.warning("speed table trades %.6g shares, not Q* = %.6g", mass, params.Q_star)
        return cls(params, speeds)

    @property
    def edges(self):
        return np.arange(self.params.intervals + 1) * self.params.tau

    @property
    def fill_rates(self):
        return self.speeds / self.params.u

    @property
    def traded(self):
        """Cumulative shares at each interval edge."""
        return np.concatenate(([0.0], np.cumsum(self.speeds * self.params.tau)))

    def interval_index(self, t):
        k = np.floor(np.asarray(t, dtype=float) / self.params.tau + INDEX_SLACK).astype(int)
        return np.clip(k, 0, self.params.intervals - 1)

    def remaining(self, t):
        """Expected remaining inventory Q* - integral_0^t nu (exact for piecewise-constant nu)."""
        return self.params.Q_star - np.interp(t, self.edges, self.traded)

    def continuous_remaining(self, t):
        """Q* sinh(kappa (T - t)) / sinh(kappa T)."""
        if self.kappa is None:
            return self.remaining(t)
        t = np.asarray(t, dtype=float)
        T, Q_star = self.params.T, self.params.Q_star
        if self.kappa * T < 1e-12:
            return Q_star * (1.0 - t / T)
        return Q_star * np.sinh(self.kappa * (T - t)) / np.sinh(self.kappa * T)

    def integrated_variance(self, t):
        """V(t) = (1/T) integral_0^t F (1 - F) ds, summed interval by interval."""
        v = self.fill_rates * (1.0 - self.fill_rates)
        cumulative = np.concatenate(([0.0], np.cumsum(v * self.params.tau)))
        return np.interp(t, self.edges, cumulative) / self.params.T


def schedule(p):
    """Discrete Almgren-Chriss speeds, midpoint convention.

    nu_k = 2 sinh(kappa tau / 2) / sinh(kappa T) * Q*/tau * cosh(kappa (T - (k + 1/2) tau))
    """
    eta_tilde, kappa_tilde, kappa = compute_kappas(p)
    K = p.intervals
    if kappa * p.T < 1e-12:
        speeds = np.full(K, p.Q_star / p.T)
    else:
        mid = (np.arange(K) + 0.5) * p.tau
        factor = 2.0 * math.sinh(kappa * p.tau / 2.0) / math.sinh(kappa * p.T)
        speeds = factor * (p.Q_star / p.tau) * np.cosh(kappa * (p.T - mid))
    return ACSchedule(p, speeds, kappa=kappa, eta_tilde=eta_tilde, kappa_tilde=kappa_tilde)


def fill_field(p, s):
    """Piecewise-constant fill-rate field F(t) = nu_k / u, independent of inventory."""
    F = s.fill_rates
    if np.any(F < 0.0):
        raise FieldContractError("negative trading speed in schedule")
    if np.max(F) > 1.0:
        minimal_u = float(np.max(s.speeds))
        raise SaturationError(
            f"u={p.u} observations per unit time cannot realize a peak speed of {minimal_u:.6g}; "
            f"need u >= {minimal_u:.6g}", minimal_u)
    return iab.piecewise_constant(s.edges[1:-1], F, T=p.T, N=p.opportunities, label='almgren_chriss')


def _quantile_columns(mean, std):
    out = {}
    for level in BAND_LEVELS:
        z = float(stats.norm.ppf(0.5 + level / 2.0))
        lo_key, hi_key = BAND_KEYS[level]
        out[lo_key] = mean - z * std
        out[hi_key] = mean + z * std
    return out


def uncertainty_bands(p, s, times):
    """Gaussian bands of remaining inventory and realized speed at each time."""
    fill_field(p, s)
    times = np.asarray(times, dtype=float)
    rows = []
    for t in times:
        mean_Q = float(s.remaining(t))
        std_Q = math.sqrt(max(float(s.integrated_variance(t)) * p.opportunities, 0.0))
        k = int(s.interval_index(t))
        F = float(s.fill_rates[k])
        row = {'t': float(t), 'mean_Q': mean_Q, 'std_Q': std_Q}
        row.update(_quantile_columns(mean_Q, std_Q))
        row['mean_speed'] = float(s.speeds[k])
        row['std_speed'] = math.sqrt(p.u * F * (1.0 - F) / p.tau)
        rows.append(row)
    return rows


def _band_credit(x, lo, hi):
    # overlap of [x - 1/2, x + 1/2] with [lo, hi]: integer counts against a continuous band
    return np.clip(np.minimum(x + 0.5, hi) - np.maximum(x - 0.5, lo), 0.0, 1.0)


@dataclass(frozen=True)
class BandReport:
    paths: int
    level: float
    rows: tuple
    speed_rows: tuple
    coverage: float

    @property
    def max_abs_z(self):
        return max(abs(r['z_mean']) for r in self.rows)


def validate_bands(p, paths, rng, checkpoints=None, level=0.90, plan=None):
    """Simulate Binomial fills per interval and test the Gaussian bands.

    checkpoints are interval indices k (time k tau); the default is every
    interval edge after 0.
    """
    s = plan if plan is not None else schedule(p)
    fill_field(p, s)
    m = p.observations_per_interval
    if abs(m - round(m)) > INDEX_SLACK * max(m, 1.0):
        raise ParameterError(f"u * tau = {m} must be a whole number of observations to simulate")
    m = int(round(m))
    K = p.intervals
    checkpoints = tuple(checkpoints) if checkpoints else tuple(range(1, K + 1))
    rates = s.fill_rates

    counts = rng.binomial(m, rates, size=(paths, K))
    bought = np.cumsum(counts, axis=1)
    z = float(stats.norm.ppf(0.5 + level / 2.0))

    rows = []
    credit = []
    for k in checkpoints:
        t = k * p.tau
        remaining = p.Q_star - bought[:, k - 1]
        pred_mean = float(s.remaining(t))
        pred_var = float(s.integrated_variance(t)) * p.opportunities
        pred_std = math.sqrt(pred_var)
        emp_mean = float(np.mean(remaining))
        emp_var = float(np.var(remaining, ddof=1))
        hits = _band_credit(remaining, pred_mean - z * pred_std, pred_mean + z * pred_std)
        credit.append(hits)
        rows.append({
            'k': k,
            't': t,
            'pred_mean': pred_mean,
            'pred_var': pred_var,
            'emp_mean': emp_mean,
            'emp_var': emp_var,
            'z_mean': (emp_mean - pred_mean) / (pred_std / math.sqrt(paths)) if pred_std > 0.0 else 0.0,
            'var_ratio': emp_var / pred_var if pred_var > 0.0 else math.nan,
            'coverage': float(np.mean(hits)),
        })

    speed_rows = []
    realized = counts / p.tau
    for k in range(K):
        pred_var = p.u * rates[k] * (1.0 - rates[k]) / p.tau
        emp_var = float(np.var(realized[:, k], ddof=1))
        speed_rows.append({
            'k': k,
            'pred_speed': float(s.speeds[k]),
            'emp_speed': float(np.mean(realized[:, k])),
            'pred_var': pred_var,
            'emp_var': emp_var,
            'var_ratio': emp_var / pred_var if pred_var > 0.0 else math.nan,
        })

    coverage = float(np.mean(np.concatenate(credit)))
    logger.info("pooled %.0f%% band coverage over %d paths: %.4f", 100 * level, paths, coverage)
    return BandReport(paths=paths, level=level, rows=tuple(rows), speed_rows=tuple(speed_rows), coverage=coverage)
