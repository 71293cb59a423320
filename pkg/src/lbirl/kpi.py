"""Throughput KPIs, the demonstration ranking function, and Pearson r.

All KPI functions take the per-cell throughput vector of one sector. The
ranking reward is a weighted combination

    R_f(s) = alpha * T_min - beta * T_std - gamma * T_cc

evaluated on the throughput block of a 12-dimensional environment state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KpiConfig:
    congestion_threshold_mbps: float = 1.0  # cells below this count as congested
    alpha: float = 1.0
    beta: float = 0.5
    gamma: float = 1.0

    def __post_init__(self):
        if self.congestion_threshold_mbps <= 0:
            raise ValueError("congestion threshold must be positive")
        for w in (self.alpha, self.beta, self.gamma):
            if not math.isfinite(w):
                raise ValueError("ranking weights must be finite")


def t_min(x) -> float:
    """Minimum per-cell throughput."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("throughput vector must be non-empty")
    return float(x.min())


def t_std(x) -> float:
    """Population standard deviation of per-cell throughput."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("throughput vector must be non-empty")
    return float(np.sqrt(np.mean((x - x.mean()) ** 2)))


def t_cc(x, threshold: float) -> int:
    """Number of cells strictly below the congestion threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    x = np.asarray(x, dtype=float)
    return int(np.sum(x < threshold))


def rank_reward(state, cfg: KpiConfig) -> float:
    """Ranking reward of one environment state (throughputs are components 4:8)."""
    s = np.asarray(state, dtype=float)
    n_c = s.shape[-1] // 3
    ip = s[..., n_c:2 * n_c]
    return (cfg.alpha * t_min(ip)
            - cfg.beta * t_std(ip)
            - cfg.gamma * t_cc(ip, cfg.congestion_threshold_mbps))


def rank_rewards(states, cfg: KpiConfig) -> np.ndarray:
    """Vectorized rank_reward over an (n, state_dim) array."""
    s = np.atleast_2d(np.asarray(states, dtype=float))
    n_c = s.shape[-1] // 3
    ip = s[:, n_c:2 * n_c]
    mins = ip.min(axis=1)
    stds = np.sqrt(np.mean((ip - ip.mean(axis=1, keepdims=True)) ** 2, axis=1))
    ccs = np.sum(ip < cfg.congestion_threshold_mbps, axis=1)
    return cfg.alpha * mins - cfg.beta * stds - cfg.gamma * ccs


def trajectory_return(traj, cfg: KpiConfig) -> float:
    """Sum of per-state ranking rewards over a trajectory (or state array)."""
    states = getattr(traj, "states", traj)
    states = np.asarray(states, dtype=float)
    if states.size == 0:
        raise ValueError("trajectory must be non-empty")
    return float(rank_rewards(states, cfg).sum())


def rank_demos(trajectories, cfg: KpiConfig):
    """Stable ascending sort by ranking return.

    Returns (ordered trajectories, has_ties). Ties keep insertion order.
    """
    trajectories = list(trajectories)
    if len(trajectories) < 2:
        raise ValueError("need at least two trajectories to rank")
    returns = [trajectory_return(t, cfg) for t in trajectories]
    order = sorted(range(len(returns)), key=lambda i: (returns[i], i))
    has_ties = len(set(returns)) < len(returns)
    return [trajectories[i] for i in order], has_ties


def pearson(a, b) -> float:
    """Pearson correlation coefficient; NaN when either input is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be 1-D sequences of equal length")
    if a.size < 2:
        raise ValueError("need at least two samples")
    da = a - a.mean()
    db = b - b.mean()
    va = float(np.dot(da, da))
    vb = float(np.dot(db, db))
    if va == 0.0 or vb == 0.0:
        return float("nan")
    r = float(np.dot(da, db) / math.sqrt(va * vb))
    return max(-1.0, min(1.0, r))
