"""Reward extrapolation from ranked demonstrations.

Training pairs are sub-trajectories sliced from a ranked demo set, labeled by
the full-trajectory ranking. Two samplers are provided: "contiguous" takes a
block of consecutive states from an independent random offset in each
trajectory; "tcs" (temporally consistent sampling) draws one random index set
and slices both trajectories at those same time indexes, so daily load swings
cannot flip the local ordering.

The reward network scores single states; a sub-trajectory's score is the sum
of its state rewards, and pairs are fit with the pairwise-preference
cross-entropy loss.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .kpi import KpiConfig, rank_rewards, trajectory_return
from .nn import AdamState, Mlp, adam_update


@dataclass
class DemoSet:
    """Ranked demonstrations (worst first) split into train / extrapolation."""
    trajectories: list            # ascending quality
    returns: np.ndarray
    train_count: int
    kpi_config: KpiConfig
    has_ties: bool = False

    @classmethod
    def from_trajectories(cls, trajectories, kpi_config: KpiConfig,
                          train_fraction: float = 0.7) -> "DemoSet":
        from .kpi import rank_demos

        ranked, ties = rank_demos(trajectories, kpi_config)
        returns = np.array([trajectory_return(t, kpi_config) for t in ranked])
        cutoff = int(math.floor(train_fraction * len(ranked)))
        return cls(trajectories=ranked, returns=returns, train_count=cutoff,
                   kpi_config=kpi_config, has_ties=ties)

    @property
    def train(self) -> list:
        return self.trajectories[:self.train_count]

    @property
    def extrapolation(self) -> list:
        return self.trajectories[self.train_count:]

    @property
    def train_returns(self) -> np.ndarray:
        return self.returns[:self.train_count]


@dataclass
class PreferencePair:
    """Two equal-length sub-trajectories; label 0 means A's source ranks higher."""
    a_states: np.ndarray
    b_states: np.ndarray
    label: int
    a_indexes: np.ndarray
    b_indexes: np.ndarray

    def __post_init__(self):
        if self.a_states.shape != self.b_states.shape:
            raise ValueError("sub-trajectories must have identical shape")
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


def _states_of(traj) -> np.ndarray:
    return np.asarray(getattr(traj, "states", traj), dtype=np.float64)


def _draw_pair(rng, returns, n, max_tries=1000):
    """Uniform pair of distinct ranks; resampled while the returns tie."""
    for _ in range(max_tries):
        x = int(rng.integers(0, n))
        y = int(rng.integers(0, n))
        if x != y and returns[x] != returns[y]:
            return x, y
    raise ValueError("could not draw a pair with distinct returns "
                     "(are all demo returns tied?)")


def tcs_sample(demos: DemoSet, count: int, length: int, seed: int) -> list[PreferencePair]:
    """Temporally consistent sampling from the training partition.

    Each pair uses one uniformly random index set of `length` distinct time
    steps, applied to both trajectories.
    """
    train = demos.train
    returns = demos.train_returns
    n = len(train)
    if n < 2:
        raise ValueError("need at least two ranked training trajectories")
    horizon = _states_of(train[0]).shape[0]
    if length > horizon:
        raise ValueError(f"sub-trajectory length {length} exceeds horizon {horizon}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7C5]))
    pairs = []
    for _ in range(count):
        x, y = _draw_pair(rng, returns, n)
        idx = np.sort(rng.choice(horizon, size=length, replace=False))
        label = 0 if returns[x] > returns[y] else 1
        pairs.append(PreferencePair(
            a_states=_states_of(train[x])[idx],
            b_states=_states_of(train[y])[idx],
            label=label,
            a_indexes=idx,
            b_indexes=idx.copy(),
        ))
    return pairs


def contiguous_sample(demos: DemoSet, count: int, length: int,
                      seed: int) -> list[PreferencePair]:
    """Blocks of consecutive states from independent random offsets."""
    train = demos.train
    returns = demos.train_returns
    n = len(train)
    if n < 2:
        raise ValueError("need at least two ranked training trajectories")
    horizon = _states_of(train[0]).shape[0]
    if length > horizon:
        raise ValueError(f"sub-trajectory length {length} exceeds horizon {horizon}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xC09]))
    pairs = []
    for _ in range(count):
        x, y = _draw_pair(rng, returns, n)
        ox = int(rng.integers(0, horizon - length + 1))
        oy = int(rng.integers(0, horizon - length + 1))
        label = 0 if returns[x] > returns[y] else 1
        pairs.append(PreferencePair(
            a_states=_states_of(train[x])[ox:ox + length],
            b_states=_states_of(train[y])[oy:oy + length],
            label=label,
            a_indexes=np.arange(ox, ox + length),
            b_indexes=np.arange(oy, oy + length),
        ))
    return pairs


def mislabel_rate(pairs, cfg: KpiConfig) -> float:
    """Fraction of pairs whose local ranking-reward ordering contradicts the label."""
    if not pairs:
        raise ValueError("pairs must be non-empty")
    bad = 0
    for p in pairs:
        ra = float(rank_rewards(p.a_states, cfg).sum())
        rb = float(rank_rewards(p.b_states, cfg).sum())
        better_is_a = p.label == 0
        if (better_is_a and ra < rb) or (not better_is_a and rb < ra):
            bad += 1
    return bad / len(pairs)


def pref_prob(j_i: float, j_j: float) -> float:
    """P(the second trajectory is preferred) = exp(J_j) / (exp(J_i) + exp(J_j)).

    Computed as a stable logistic of the difference; safe for |J| ~ 1e4.
    """
    d = j_j - j_i
    if d >= 0:
        return 1.0 / (1.0 + math.exp(-d))
    e = math.exp(d)
    return e / (1.0 + e)


def _softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + e^x) without overflow
    return np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(x)))


@dataclass
class RewardModel:
    """Scalar state-reward network plus its input standardization."""
    mlp: Mlp
    mean: np.ndarray
    std: np.ndarray
    sampler: str = "tcs"

    @classmethod
    def create(cls, hidden=(64, 64), seed: int = 0, mean=None, std=None,
               sampler: str = "tcs", state_dim: int = 12) -> "RewardModel":
        sizes = [state_dim, *hidden, 1]
        acts = ["leaky_relu"] * (len(sizes) - 2) + ["identity"]
        mlp = Mlp(sizes, acts, seed=seed)
        mean = np.zeros(state_dim) if mean is None else np.asarray(mean, dtype=float)
        std = np.ones(state_dim) if std is None else np.asarray(std, dtype=float)
        return cls(mlp=mlp, mean=mean, std=std, sampler=sampler)

    def standardize(self, states: np.ndarray) -> np.ndarray:
        return (np.asarray(states, dtype=np.float64) - self.mean) / self.std

    def predict(self, states) -> np.ndarray:
        """Per-state rewards for an (n, state_dim) array (or a single state)."""
        x = self.standardize(np.atleast_2d(np.asarray(states, dtype=np.float64)))
        return self.mlp.forward(x)[:, 0]

    def save(self, path) -> None:
        doc = {
            "net": self.mlp.to_dict(),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "sampler": self.sampler,
        }
        with open(path, "w") as f:
            json.dump(doc, f, sort_keys=True, separators=(",", ":"))
            f.write("\n")

    @classmethod
    def load(cls, path) -> "RewardModel":
        with open(path) as f:
            doc = json.load(f)
        return cls(mlp=Mlp.from_dict(doc["net"]),
                   mean=np.asarray(doc["mean"], dtype=np.float64),
                   std=np.asarray(doc["std"], dtype=np.float64),
                   sampler=doc["sampler"])


def predict_return(model: RewardModel, traj) -> float:
    """Total predicted reward: sum of state rewards over the (sub-)trajectory."""
    states = _states_of(traj)
    if states.size == 0:
        raise ValueError("trajectory must be non-empty")
    return float(model.predict(states).sum())


def _pair_loss_grads(mlp: Mlp, xa: np.ndarray, xb: np.ndarray,
                     want_grads: bool = True):
    """Preference cross-entropy over standardized batches.

    xa, xb: (n_pairs, length, dim) where the A side is the preferred one.
    Loss per pair is softplus(J_worse - J_better); the mean is returned with
    its gradient (reduction order fixed by the batch layout).
    """
    n_pairs, length, dim = xa.shape
    flat = np.concatenate([xa.reshape(-1, dim), xb.reshape(-1, dim)], axis=0)
    out = mlp.forward(flat)[:, 0]
    ja = out[:n_pairs * length].reshape(n_pairs, length).sum(axis=1)
    jb = out[n_pairs * length:].reshape(n_pairs, length).sum(axis=1)
    margin = ja - jb  # better minus worse
    loss = float(np.mean(_softplus(-margin)))
    if not want_grads:
        return loss, None
    # d softplus(-m) / dm = -sigmoid(-m)
    sig = np.empty(n_pairs)
    pos = margin >= 0
    sig[pos] = np.exp(-margin[pos]) / (1.0 + np.exp(-margin[pos]))
    sig[~pos] = 1.0 / (1.0 + np.exp(margin[~pos]))
    dm = -sig / n_pairs
    upstream = np.concatenate([
        np.repeat(dm, length),
        np.repeat(-dm, length),
    ]).reshape(-1, 1)
    grads = mlp.backward(upstream)
    return loss, grads


def _pairs_to_arrays(model: RewardModel, pairs) -> tuple[np.ndarray, np.ndarray]:
    """Standardized (better, worse) state stacks for a batch of pairs."""
    better = np.stack([p.a_states if p.label == 0 else p.b_states for p in pairs])
    worse = np.stack([p.b_states if p.label == 0 else p.a_states for p in pairs])
    return model.standardize(better), model.standardize(worse)


def trex_loss(model: RewardModel, pairs) -> tuple[float, np.ndarray]:
    """Mean preference loss over a batch of pairs plus parameter gradients."""
    if not pairs:
        raise ValueError("batch must be non-empty")
    xa, xb = _pairs_to_arrays(model, pairs)
    loss, grads = _pair_loss_grads(model.mlp, xa, xb)
    if not math.isfinite(loss):
        raise RuntimeError(f"non-finite preference loss: {loss}")
    return loss, grads


@dataclass(frozen=True)
class TrainRewardConfig:
    pairs: int = 5000
    epochs: int = 200
    subtraj_len: int = 10
    batch_size: int = 32
    lr: float = 1e-5
    weight_decay: float = 1e-4
    hidden: tuple[int, ...] = (64, 64)


def _train_standardization(demos: DemoSet) -> tuple[np.ndarray, np.ndarray]:
    states = np.concatenate([_states_of(t) for t in demos.train], axis=0)
    mean = states.mean(axis=0)
    std = np.maximum(states.std(axis=0), 1e-8)
    return mean, std


def train_reward(demos: DemoSet, sampler: str, cfg: TrainRewardConfig,
                 seed: int) -> tuple[RewardModel, list[dict]]:
    """Fit a reward network on sampled preference pairs; returns (model, log).

    The log holds one row per epoch with the mean training loss. Aborts on a
    non-finite loss.
    """
    if sampler == "tcs":
        pairs = tcs_sample(demos, cfg.pairs, cfg.subtraj_len, seed)
    elif sampler == "contiguous":
        pairs = contiguous_sample(demos, cfg.pairs, cfg.subtraj_len, seed)
    else:
        raise ValueError(f"unknown sampler {sampler!r} (use 'tcs' or 'contiguous')")

    mean, std = _train_standardization(demos)
    state_dim = _states_of(demos.train[0]).shape[1]
    model = RewardModel.create(hidden=cfg.hidden, seed=seed, mean=mean, std=std,
                               sampler=sampler, state_dim=state_dim)
    if cfg.epochs == 0:
        return model, []
    xa, xb = _pairs_to_arrays(model, pairs)
    adam = AdamState(model.mlp.n_params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5F]))
    log = []
    n = len(pairs)
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            loss, grads = _pair_loss_grads(model.mlp, xa[idx], xb[idx])
            if not math.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch}, batch {lo // cfg.batch_size}")
            adam_update(adam, model.mlp.theta, grads)
            losses.append(loss)
        log.append({"epoch": epoch, "loss": float(np.mean(losses))})
    return model, log


@dataclass
class ExtrapolationReport:
    pearson_train: float
    pearson_extrapolation: float
    scatter: list  # (predicted_return, rf_return, partition)


def extrapolation_report(model: RewardModel, demos: DemoSet,
                         cfg: KpiConfig) -> ExtrapolationReport:
    """Correlation of predicted vs ranking returns on each demo partition."""
    from .kpi import pearson

    scatter = []
    corr = {}
    for name, part in (("train", demos.train), ("extrapolation", demos.extrapolation)):
        pred = np.array([predict_return(model, t) for t in part])
        rf = np.array([trajectory_return(t, cfg) for t in part])
        corr[name] = pearson(pred, rf) if len(part) >= 2 else float("nan")
        scatter.extend((float(p), float(r), name) for p, r in zip(pred, rf))
    return ExtrapolationReport(pearson_train=corr["train"],
                               pearson_extrapolation=corr["extrapolation"],
                               scatter=scatter)


def write_scatter_csv(report: ExtrapolationReport, path) -> None:
    lines = ["predicted_return,rf_return,partition"]
    for pred, rf, part in report.scatter:
        lines.append(f"{pred!r},{rf!r},{part}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_training_log_csv(log, path) -> None:
    lines = ["epoch,loss"]
    for row in log:
        lines.append(f"{row['epoch']},{row['loss']!r}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
