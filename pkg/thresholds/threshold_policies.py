"""Closed-form approximate threshold policies.

Every policy is a function of the deterministic pace
p_det = (q* - q) / (1 - t) and of the remaining horizon h = N (1 - t),
the number of opportunities left.  The raw forms come from the Lagrangian
resolution of the approximate problem with loss factor 1/h; the calibrated
forms shift that loss factor by a constant x = N tau so the policy matches
the exact lattice value 3/8 at three remaining steps.

Array arguments are accepted everywhere below the scalar API so that whole
lattices can be tabulated in one call.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .dp_bench import PolicyGrid, force_boundaries
from .exceptions import CalibrationError, DomainError, EndOfHorizonError, SaturatedPolicy

logger = logging.getLogger(__name__)

TAU_UNCONSTRAINED = 3.5723
TAU_CONSTRAINED = 1.3445
BORDER_WIDTH = 0.15
LAMBDA_ITERATIONS = 4

CALIBRATION_HORIZON = 3.0
CALIBRATION_P_DET = 1.0 / 3.0
CALIBRATION_TARGET = 3.0 / 8.0
CALIBRATION_BRACKET = (1e-6, 100.0)
CALIBRATION_XTOL = 1e-6

FEASIBILITY_SLACK = 1e-12


@dataclass(frozen=True)
class PolicyInput:
    t: float
    q: float
    q_star: float
    N: int

    def __post_init__(self):
        if self.N < 2:
            raise DomainError(f"N must be at least 2, got {self.N}")
        if not 0.0 <= self.q <= self.q_star <= 1.0:
            raise DomainError(f"need 0 <= q <= q_star <= 1, got q={self.q}, q_star={self.q_star}")
        if self.t < 0.0:
            raise DomainError(f"negative time {self.t}")
        if self.t < 1.0 and self.q_star - self.q > 1.0 - self.t + FEASIBILITY_SLACK:
            raise DomainError(f"{self.q_star - self.q} left to buy in {1.0 - self.t} of time")

    @classmethod
    def from_lattice(cls, n, Q, N, Q_star):
        return cls(t=n / N, q=Q / N, q_star=Q_star / N, N=N)

    @property
    def horizon(self):
        return self.N * (1.0 - self.t)

    @property
    def p_det(self):
        return p_deterministic(self)


@dataclass(frozen=True)
class CalibrationConstants:
    tau_unconstrained: float = TAU_UNCONSTRAINED
    tau_constrained: float = TAU_CONSTRAINED
    lambda_iterations: int = LAMBDA_ITERATIONS

    def __post_init__(self):
        if self.tau_unconstrained <= 0.0 or self.tau_constrained <= 0.0:
            raise DomainError("calibration shifts must be positive")
        if self.lambda_iterations < 1:
            raise DomainError("at least one lambda iteration is required")


def _check_time(t):
    if t >= 1.0:
        raise DomainError(f"t={t} is at or past the horizon")


def _scalar(value):
    return float(np.asarray(value))


# -- array kernels -----------------------------------------------------------

def _unconstrained(p_det, h, shift):
    p_det = np.asarray(p_det, dtype=float)
    h = np.asarray(h, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        bracket = (1.0 + np.log(h + shift - 1.0) / h) * (1.0 - 1.0 / (h + shift))
        p = 0.5 + (p_det - 0.5) / bracket
    return np.clip(p, 0.0, 1.0)


def _lambda_iterate(p_det, h, shift, iters):
    """Signed lambda iterate and the pinned probability (NaN when not saturated)."""
    p_det, h = np.broadcast_arrays(np.asarray(p_det, dtype=float), np.asarray(h, dtype=float))
    excess = 1.0 - 2.0 * p_det
    sign = np.sign(excess)
    lam = excess.copy()
    pinned = np.full(lam.shape, np.nan)
    # lambda > 0 pushes p down to 0, lambda < 0 pushes it up to 1
    hard = np.where(sign > 0, 0.0, 1.0)

    for _ in range(iters):
        a = np.abs(lam)
        active = (a > 0.0) & np.isnan(pinned)
        saturated = active & (a >= 1.0)
        pinned = np.where(saturated, hard, pinned)
        active &= ~saturated
        with np.errstate(divide='ignore', invalid='ignore'):
            numerator = excess - sign * (1.0 - shift * (1.0 - a)) / h
            argument = (h + shift - 1.0) * (1.0 - a) / a
            denominator = 1.0 + np.log(argument) / h
            new = numerator / denominator
        # the quantity equation has no root of the sign of lambda_0: p stays at 1/2
        dead = active & (numerator * sign <= 0.0)
        broken = active & ~dead & ~((argument > 0.0) & (denominator > 0.0) & (np.abs(new) < 1.0))
        pinned = np.where(broken, hard, pinned)
        lam = np.where(dead, 0.0, np.where(active & ~broken, new, lam))

    saturated = (np.abs(lam) >= 1.0) & np.isnan(pinned)
    pinned = np.where(saturated, hard, pinned)
    return lam, pinned


def _constrained(p_det, h, shift, iters):
    lam, pinned = _lambda_iterate(p_det, h, shift, iters)
    h = np.asarray(h, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        p = 0.5 - 0.5 * lam / (1.0 - 1.0 / (h + shift))
    return np.where(np.isnan(pinned), np.clip(p, 0.0, 1.0), pinned)


def _mixed(p_det, h, constants, border_width):
    p_det = np.asarray(p_det, dtype=float)
    near_border = 0.5 - np.abs(p_det - 0.5) < border_width
    return np.where(
        near_border,
        _constrained(p_det, h, constants.tau_constrained, constants.lambda_iterations),
        _unconstrained(p_det, h, constants.tau_unconstrained),
    )


def _raw_fallback(kernel, p_det, h):
    p_det = np.asarray(p_det, dtype=float)
    h = np.asarray(h, dtype=float)
    inside = h > 1.0
    safe_h = np.where(inside, h, 2.0)
    return np.where(inside, kernel(p_det, safe_h), np.clip(p_det, 0.0, 1.0))


VARIANTS = {
    'deterministic': lambda p_det, h, c, w: np.clip(np.asarray(p_det, dtype=float), 0.0, 1.0),
    'unconstrained_raw': lambda p_det, h, c, w: _raw_fallback(
        lambda p, hh: _unconstrained(p, hh, 0.0), p_det, h),
    'constrained_raw': lambda p_det, h, c, w: _raw_fallback(
        lambda p, hh: _constrained(p, hh, 0.0, c.lambda_iterations), p_det, h),
    'unconstrained_calibrated': lambda p_det, h, c, w: _unconstrained(p_det, h, c.tau_unconstrained),
    'constrained_calibrated': lambda p_det, h, c, w: _constrained(
        p_det, h, c.tau_constrained, c.lambda_iterations),
    'mixed': lambda p_det, h, c, w: _mixed(p_det, h, c, w),
}

APPROXIMATE_VARIANTS = ('unconstrained_raw', 'constrained_raw', 'unconstrained_calibrated',
                        'constrained_calibrated', 'mixed')


def variant_probability(variant, p_det, horizon, constants=None, border_width=BORDER_WIDTH):
    """Array form of any named policy, with p_det fallback where a raw form is undefined."""
    try:
        kernel = VARIANTS[variant]
    except KeyError:
        raise DomainError(f"unknown policy variant {variant!r}") from None
    return kernel(p_det, horizon, constants or CalibrationConstants(), border_width)


# -- scalar API --------------------------------------------------------------

def p_deterministic(inp):
    _check_time(inp.t)
    return min(max((inp.q_star - inp.q) / (1.0 - inp.t), 0.0), 1.0)


def p_unconstrained_raw(inp):
    _check_time(inp.t)
    h = inp.horizon
    if h <= 1.0:
        raise EndOfHorizonError(f"raw unconstrained form needs N(1-t) > 1, got {h}")
    return _scalar(_unconstrained(p_deterministic(inp), h, 0.0))


def p_unconstrained_calibrated(inp, c=None):
    _check_time(inp.t)
    c = c or CalibrationConstants()
    return _scalar(_unconstrained(p_deterministic(inp), inp.horizon, c.tau_unconstrained))


def solve_lambda(p_det, horizon, shift, iters=LAMBDA_ITERATIONS):
    """Iterate the Lagrange multiplier map from lambda_0 = 1 - 2 p_det.

    Raises SaturatedPolicy when |lambda| reaches 1, carrying the hard
    probability the policy takes there.
    """
    if not 0.0 <= p_det <= 1.0:
        raise DomainError(f"p_det outside [0, 1]: {p_det}")
    if horizon <= 0.0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    if horizon + shift - 1.0 <= 0.0:
        raise EndOfHorizonError(f"log argument N(1-t)+shift-1 = {horizon + shift - 1.0} is not positive")
    lam, pinned = _lambda_iterate(p_det, horizon, shift, iters)
    lam, pinned = _scalar(lam), _scalar(pinned)
    if not math.isnan(pinned):
        logger.debug("lambda saturated for p_det=%.6g, horizon=%.6g", p_det, horizon)
        raise SaturatedPolicy(pinned, lam)
    return lam


def _constrained_scalar(inp, shift, iters):
    p_det = p_deterministic(inp)
    h = inp.horizon
    try:
        lam = solve_lambda(p_det, h, shift, iters)
    except SaturatedPolicy as exc:
        return exc.probability
    return min(max(0.5 - 0.5 * lam / (1.0 - 1.0 / (h + shift)), 0.0), 1.0)


def p_constrained_raw(inp, c=None):
    _check_time(inp.t)
    if inp.horizon <= 1.0:
        raise EndOfHorizonError(f"raw constrained form needs N(1-t) > 1, got {inp.horizon}")
    c = c or CalibrationConstants()
    return _constrained_scalar(inp, 0.0, c.lambda_iterations)


def p_constrained_calibrated(inp, c=None):
    _check_time(inp.t)
    c = c or CalibrationConstants()
    return _constrained_scalar(inp, c.tau_constrained, c.lambda_iterations)


def p_mixed(inp, c=None, border_width=BORDER_WIDTH):
    _check_time(inp.t)
    if 0.5 - abs(p_deterministic(inp) - 0.5) < border_width:
        return p_constrained_calibrated(inp, c)
    return p_unconstrained_calibrated(inp, c)


def value_deterministic_limit(t, q, q_star, model):
    """(1 - t) g(p_det): the per-opportunity value of pacing in the large-N limit."""
    _check_time(t)
    p_det = min(max((q_star - q) / (1.0 - t), 0.0), 1.0)
    return (1.0 - t) * model.gain(p_det)


# -- calibration -------------------------------------------------------------

def calibration_residual(variant, shift, iters=LAMBDA_ITERATIONS):
    """Policy value at horizon 3, p_det = 1/3 minus the lattice value 3/8."""
    if variant == 'unconstrained':
        p = _unconstrained(CALIBRATION_P_DET, CALIBRATION_HORIZON, shift)
    elif variant == 'constrained':
        p = _constrained(CALIBRATION_P_DET, CALIBRATION_HORIZON, shift, iters)
    else:
        raise DomainError(f"calibration variant must be 'unconstrained' or 'constrained', not {variant!r}")
    return _scalar(p) - CALIBRATION_TARGET


def calibrate_shift(variant, iters=LAMBDA_ITERATIONS, bracket=CALIBRATION_BRACKET, xtol=CALIBRATION_XTOL):
    """Shift x = N tau making the calibrated policy hit 3/8 at three remaining steps."""
    residual = lambda x: calibration_residual(variant, x, iters)
    lo, hi = bracket
    if residual(lo) * residual(hi) > 0.0:
        raise CalibrationError(f"no sign change of the {variant} calibration condition on [{lo}, {hi}]")
    shift = optimize.bisect(residual, lo, hi, xtol=xtol)
    logger.info("calibrated %s shift: %.6f", variant, shift)
    return shift


def calibrate_constants(iters=LAMBDA_ITERATIONS):
    return CalibrationConstants(
        tau_unconstrained=calibrate_shift('unconstrained', iters),
        tau_constrained=calibrate_shift('constrained', iters),
        lambda_iterations=iters,
    )


# -- lattice tabulation ------------------------------------------------------

def lattice_policy(variant, N, Q_star, constants=None, border_width=BORDER_WIDTH):
    """Tabulate a named variant on the DP lattice (t = n/N, q = Q/N)."""
    n = np.arange(N)[:, None]
    Q = np.arange(Q_star + 1)[None, :]
    horizon = (N - n).astype(float)
    p_det = np.clip((Q_star - Q) / horizon, 0.0, 1.0)
    probs = variant_probability(variant, p_det, horizon, constants, border_width)
    return PolicyGrid(N, Q_star, force_boundaries(np.broadcast_to(probs, p_det.shape), N, Q_star))


# -- approximate continuous problem ------------------------------------------

def _loss_weight(s, N):
    # 1 - gamma(s) with gamma(s) = 1 / (N (1 - s)), zero at the cutoff 1 - 1/N
    return 1.0 - 1.0 / (N * (1.0 - s))


def approximate_objective(profile, t, N, scale_G=1.0, breakpoints=()):
    """G * integral_t^{1-1/N} p_s (1 - p_s) (1 - gamma(s)) ds."""
    stop = 1.0 - 1.0 / N
    if t >= stop:
        return 0.0

    def integrand(s):
        p = profile(s)
        return p * (1.0 - p) * _loss_weight(s, N)

    points = [b for b in breakpoints if t < b < stop] or None
    value, _ = integrate.quad(integrand, t, stop, points=points, limit=200, epsabs=1e-12)
    return scale_G * value


def profile_quantity(profile, t, breakpoints=()):
    """integral_t^1 p_s ds."""
    points = [b for b in breakpoints if t < b < 1.0] or None
    value, _ = integrate.quad(profile, t, 1.0, points=points, limit=200, epsabs=1e-12)
    return value


@dataclass(frozen=True)
class OpenLoopSolution:
    t: float
    N: int
    lam: float

    def __call__(self, s):
        stop = 1.0 - 1.0 / self.N
        if s >= stop:
            return 0.0 if self.lam > 0.0 else (1.0 if self.lam < 0.0 else 0.5)
        return min(max(0.5 - 0.5 * self.lam / _loss_weight(s, self.N), 0.0), 1.0)

    @property
    def breakpoints(self):
        stop = 1.0 - 1.0 / self.N
        points = [stop]
        if 0.0 < abs(self.lam) < 1.0:
            points.append(1.0 - 1.0 / (self.N * (1.0 - abs(self.lam))))
        return tuple(points)


def optimal_open_loop(t, q, q_star, N):
    """Box-constrained maximizer of the approximate objective.

    p_s = clamp(1/2 - lambda / (2 (1 - gamma(s)))) with lambda root-found on
    the quantity constraint integral_t^1 p_s ds = q* - q.
    """
    _check_time(t)
    target = q_star - q
    if not 0.0 <= target <= 1.0 - t:
        raise DomainError(f"cannot buy {target} in {1.0 - t} of time")

    def excess(lam):
        profile = OpenLoopSolution(t, N, lam)
        return profile_quantity(profile, t, profile.breakpoints) - target

    lam = optimize.brentq(excess, -1.0, 1.0, xtol=1e-12)
    return OpenLoopSolution(t, N, lam)


def two_level_profiles(t, q, q_star, levels=101):
    """Profiles p = a before the midpoint of [t, 1], b after, spending exactly q* - q.

    Yields (a, b, profile, midpoint).
    """
    target = q_star - q
    mid = 0.5 * (t + 1.0)
    half = mid - t
    for a in np.linspace(0.0, 1.0, levels):
        b = (target - a * half) / (1.0 - mid)
        if 0.0 <= b <= 1.0:
            yield float(a), float(b), (lambda s, a=float(a), b=float(b): a if s < mid else b), mid
