"""Monte Carlo simulation of the discrete threshold-trading chain.

At each of the N opportunities a (signal, price change) pair is drawn, one
share is bought at the current price iff the signal clears the threshold
theta(p(n, Q)), and the price then moves:

    P_{n+1} = P_n + dP_{n+1}
    Q_{n+1} = Q_n + 1{S_{n+1} >= theta_n}
    M_{n+1} = M_n - P_n 1{S_{n+1} >= theta_n}

Path i draws its N (signal, price change) pairs from its own generator seeded
by (seed, i); paths are then stepped a block at a time with numpy. A run is a
pure function of its SimConfig whatever the block size or number of threads.
"""
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from .dp_bench import PolicyGrid, tabulate_policy
from .exceptions import InfeasibleTargetError, ParameterError, TrajectoryNotStoredError
from .gain_models import GainKind

logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096
HISTOGRAM_BINS = 20


@dataclass(frozen=True, eq=False)
class SimConfig:
    N: int
    Q_star: int
    model: object
    policy: object
    paths: int = 1000
    seed: int = 0
    P0: float = 100.0
    force_boundary: bool = True
    noise_std: float = None
    checkpoints: tuple = ()
    store_trajectories: bool = False
    block_size: int = BLOCK_SIZE

    def __post_init__(self):
        if self.paths < 1:
            raise ParameterError(f"paths must be at least 1, got {self.paths}")
        if not 1 <= self.Q_star <= self.N:
            raise InfeasibleTargetError(f"need 1 <= Q* <= N, got N={self.N}, Q*={self.Q_star}")
        if self.block_size < 1:
            raise ParameterError("block_size must be positive")
        if any(not 0 <= c <= self.N for c in self.checkpoints):
            raise ParameterError(f"checkpoints must lie in [0, {self.N}]")

    @property
    def environment(self):
        if self.noise_std is None:
            return self.model
        if self.model.kind is not GainKind.LINEAR_UNIFORM:
            raise ParameterError("noise_std can only be set on a LinearUniform model")
        return dataclasses.replace(self.model, noise_std=float(self.noise_std))

    @property
    def resolved_checkpoints(self):
        if self.checkpoints:
            return tuple(sorted(set(int(c) for c in self.checkpoints)))
        step = max(self.N // 10, 1)
        return tuple(sorted(set(range(0, self.N + 1, step)) | {self.N}))

    @property
    def inventory_cap(self):
        return self.Q_star if self.force_boundary else self.N


@dataclass(frozen=True, eq=False)
class PathRecord:
    Q_star: int
    P: np.ndarray = None
    Q: np.ndarray = None
    M: np.ndarray = None
    signals: np.ndarray = None
    price_changes: np.ndarray = None
    trades: np.ndarray = None

    @property
    def stored(self):
        return self.P is not None

    @property
    def terminal(self):
        if not self.stored:
            raise TrajectoryNotStoredError("path was simulated without its trajectory")
        return float(self.P[-1]), int(self.Q[-1]), float(self.M[-1]), float(x_diagnostic(self)[-1])


def policy_table(cfg):
    """p(n, Q) for n < N and 0 <= Q <= inventory cap, already clipped to [0, 1]."""
    if cfg.force_boundary:
        grid = tabulate_policy(cfg.policy, cfg.N, cfg.Q_star)
        return np.nan_to_num(grid.probs, nan=0.0)
    cap = cfg.N
    if isinstance(cfg.policy, PolicyGrid):
        table = np.zeros((cfg.N, cap + 1))
        table[:, :cfg.policy.Q_star + 1] = np.nan_to_num(cfg.policy.probs, nan=0.0)
        return table
    n = np.arange(cfg.N)[:, None]
    Q = np.arange(cap + 1)[None, :]
    with np.errstate(invalid='ignore', divide='ignore'):
        raw = np.broadcast_to(np.asarray(cfg.policy(n, Q), dtype=float), (cfg.N, cap + 1))
    return np.clip(np.nan_to_num(raw, nan=0.0), 0.0, 1.0)


def _forced_steps(cfg, n, Q):
    if not cfg.force_boundary:
        return np.zeros(Q.shape, dtype=bool)
    return (Q == cfg.Q_star) | (cfg.N - n == cfg.Q_star - Q)


def _draw_block(cfg, start, size):
    model = cfg.environment
    draws = [model.sample(path_rng(cfg.seed, i), cfg.N) for i in range(start, start + size)]
    return np.stack([s for s, _ in draws]), np.stack([dp for _, dp in draws])


def _simulate_block(cfg, table, draws, store=False):
    model = cfg.environment
    all_signals, all_price_changes = draws
    size = all_signals.shape[0]
    checkpoints = cfg.resolved_checkpoints
    N = cfg.N
    P = np.full(size, float(cfg.P0))
    Q = np.zeros(size, dtype=np.int64)
    M = np.zeros(size)
    unforced = np.zeros(size, dtype=np.int64)
    unforced_trades = np.zeros(size, dtype=np.int64)
    at_checkpoint = np.zeros((size, len(checkpoints)), dtype=np.int64)
    slot = {c: i for i, c in enumerate(checkpoints)}
    if store:
        P_path = np.empty((size, N + 1))
        Q_path = np.empty((size, N + 1), dtype=np.int64)
        M_path = np.empty((size, N + 1))
        S_path = np.empty((size, N))
        dP_path = np.empty((size, N))
        trade_path = np.empty((size, N), dtype=bool)
        P_path[:, 0], Q_path[:, 0], M_path[:, 0] = P, Q, M

    for n in range(N):
        if n in slot:
            at_checkpoint[:, slot[n]] = Q
        p = table[n, Q]
        signals, price_changes = all_signals[:, n], all_price_changes[:, n]
        thresholds = model.threshold_of_quantile(p)
        # p = 0 and p = 1 never depend on the draw
        trade = np.where(p >= 1.0, True, np.where(p <= 0.0, False, signals >= thresholds))
        free = ~_forced_steps(cfg, n, Q)
        unforced += free
        unforced_trades += free & trade
        M = M - P * trade
        Q = Q + trade
        P = P + price_changes
        if store:
            P_path[:, n + 1], Q_path[:, n + 1], M_path[:, n + 1] = P, Q, M
            S_path[:, n], dP_path[:, n], trade_path[:, n] = signals, price_changes, trade

    if N in slot:
        at_checkpoint[:, slot[N]] = Q
    with np.errstate(invalid='ignore', divide='ignore'):
        fill = np.where(unforced > 0, unforced_trades / np.maximum(unforced, 1), np.nan)
    out = {'P': P, 'Q': Q, 'M': M, 'checkpoint_Q': at_checkpoint, 'fill_fraction': fill}
    if store:
        out['trajectories'] = {'P': P_path, 'Q': Q_path, 'M': M_path, 'signals': S_path,
                               'price_changes': dP_path, 'trades': trade_path}
    return out


def path_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def simulate_path(cfg, rng):
    """One stored trajectory drawn from `rng`."""
    signals, price_changes = cfg.environment.sample(rng, cfg.N)
    block = _simulate_block(cfg, policy_table(cfg), (signals[None, :], price_changes[None, :]), store=True)
    tr = block['trajectories']
    return PathRecord(Q_star=cfg.Q_star, P=tr['P'][0], Q=tr['Q'][0], M=tr['M'][0],
                      signals=tr['signals'][0], price_changes=tr['price_changes'][0],
                      trades=tr['trades'][0])


def x_diagnostic(path):
    """X_n = M_n - (Q* - Q_n) P_n along a stored path."""
    if path is None or not path.stored:
        raise TrajectoryNotStoredError("X needs the full (P, Q, M) trajectory")
    return path.M - (path.Q_star - path.Q) * path.P


def x_increments(path):
    """X increments from the stored path and from the draws, for bookkeeping checks."""
    direct = np.diff(x_diagnostic(path))
    from_draws = (path.trades.astype(float) - (path.Q_star - path.Q[:-1])) * path.price_changes
    return direct, from_draws


def moments(values):
    """Mean and unbiased variance with compensated sums."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = math.fsum(values) / n
    var = math.fsum((values - mean) ** 2) / (n - 1) if n > 1 else 0.0
    return mean, var


@dataclass(eq=False)
class PathEnsemble:
    config: SimConfig
    terminal_P: np.ndarray
    terminal_Q: np.ndarray
    terminal_M: np.ndarray
    checkpoint_Q: np.ndarray
    fill_fraction: np.ndarray
    trajectories: dict = field(default=None, repr=False)

    @property
    def checkpoints(self):
        return self.config.resolved_checkpoints

    @property
    def paths(self):
        return self.terminal_Q.size

    @property
    def initial_X(self):
        return -self.config.Q_star * float(self.config.P0)

    @property
    def terminal_X(self):
        return self.terminal_M - (self.config.Q_star - self.terminal_Q) * self.terminal_P

    @property
    def gains(self):
        return self.terminal_X - self.initial_X

    def gain_summary(self):
        mean, var = moments(self.gains)
        return mean, math.sqrt(var / self.paths)

    def inventory_at(self, n):
        try:
            return self.checkpoint_Q[:, self.checkpoints.index(n)]
        except ValueError:
            raise ParameterError(f"step {n} is not a recorded checkpoint") from None

    def checkpoint_rows(self):
        for i, n in enumerate(self.checkpoints):
            mean, var = moments(self.checkpoint_Q[:, i])
            yield n, mean, var

    def fill_rate_histogram(self, bins=HISTOGRAM_BINS):
        values = self.fill_fraction[~np.isnan(self.fill_fraction)]
        return np.histogram(values, bins=bins, range=(0.0, 1.0))

    def path(self, i):
        if self.trajectories is None:
            raise TrajectoryNotStoredError("ensemble was run with store_trajectories=False")
        tr = self.trajectories
        return PathRecord(Q_star=self.config.Q_star, P=tr['P'][i], Q=tr['Q'][i], M=tr['M'][i],
                          signals=tr['signals'][i], price_changes=tr['price_changes'][i],
                          trades=tr['trades'][i])


def run_ensemble(cfg, threads=1, progress=False):
    """Simulate cfg.paths independent paths, block by block."""
    table = policy_table(cfg)
    starts = range(0, cfg.paths, cfg.block_size)
    sizes = [min(cfg.block_size, cfg.paths - start) for start in starts]
    logger.debug("simulating %d paths in %d blocks on %d threads", cfg.paths, len(sizes), threads)

    def run(b):
        return _simulate_block(cfg, table, _draw_block(cfg, starts[b], sizes[b]), cfg.store_trajectories)

    with ThreadPoolExecutor(max_workers=max(int(threads), 1)) as pool:
        blocks = list(tqdm(pool.map(run, range(len(sizes))), total=len(sizes),
                           desc='paths', unit='block', disable=not progress))

    def stack(key):
        return np.concatenate([b[key] for b in blocks])

    trajectories = None
    if cfg.store_trajectories:
        trajectories = {k: np.concatenate([b['trajectories'][k] for b in blocks])
                        for k in blocks[0]['trajectories']}
    return PathEnsemble(
        config=cfg,
        terminal_P=stack('P'),
        terminal_Q=stack('Q'),
        terminal_M=stack('M'),
        checkpoint_Q=stack('checkpoint_Q'),
        fill_fraction=stack('fill_fraction'),
        trajectories=trajectories,
    )
