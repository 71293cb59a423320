"""Controllers and PPO training on the learned reward.

The policy is a factorized multi-discrete distribution: one categorical head
per action component (4 reselection weights, 12 handover offsets), all fed by
a shared tanh MLP trunk. The critic is a separate tanh MLP. Per-step reward
during training is the learned reward of the successor state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .env import (ACTION_DIM, ACTION_HIGH, ACTION_LOW, NEUTRAL_ACTION, STATE_DIM,
                  LoadBalanceEnv, Trajectory, rollout)
from .kpi import KpiConfig, t_cc, t_min, t_std
from .nn import AdamState, Mlp, adam_update
from .reward import RewardModel

HEAD_SIZES = tuple(int(hi - lo + 1) for lo, hi in zip(ACTION_LOW, ACTION_HIGH))


# ---------------------------------------------------------------------------
# controllers


class Controller:
    tag = "base"

    def reset(self) -> None:
        pass

    def act(self, obs) -> np.ndarray:
        raise NotImplementedError


class RandomController(Controller):
    """Samples each action component uniformly from its integer range."""

    tag = "random"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._rng = None
        self.reset()

    def reset(self) -> None:
        self._rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xA7]))

    def act(self, obs) -> np.ndarray:
        return self._rng.integers(ACTION_LOW, ACTION_HIGH + 1)


class FixedRuleController(Controller):
    """Emits one constant parameter set every hour."""

    tag = "fixed"

    def __init__(self, action=None):
        a = NEUTRAL_ACTION if action is None else np.asarray(action, dtype=np.int64)
        if np.any(a < ACTION_LOW) or np.any(a > ACTION_HIGH):
            raise ValueError("fixed action outside the action bounds")
        self.action = a.copy()

    def act(self, obs) -> np.ndarray:
        return self.action.copy()


class AdaptiveRuleController(Controller):
    """Load-difference rule.

    Reselection weights move with each cell's resource-use gap to the sector
    mean; the handover source trigger of the currently worst-throughput cell
    is loosened one step per hour and the best cell's is tightened.
    """

    tag = "adaptive"

    def __init__(self, gain: float = 10.0):
        if gain <= 0:
            raise ValueError("gain must be positive")
        self.gain = float(gain)
        self._src = np.zeros(4, dtype=np.int64)

    def reset(self) -> None:
        self._src[:] = 0

    def act(self, obs) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        n_c = STATE_DIM // 3
        ip = obs[n_c:2 * n_c]
        prb = obs[2 * n_c:]
        weights = NEUTRAL_ACTION[:n_c] + np.round(self.gain * (prb.mean() - prb)).astype(np.int64)
        weights = np.clip(weights, ACTION_LOW[:n_c], ACTION_HIGH[:n_c])
        if ip.max() > ip.min():
            self._src[int(np.argmin(ip))] -= 1  # loosen: trigger fires more easily
            self._src[int(np.argmax(ip))] += 1
            self._src = np.clip(self._src, -6, 6)
        action = NEUTRAL_ACTION.copy()
        action[:n_c] = weights
        action[n_c::3] = self._src
        return action


# ---------------------------------------------------------------------------
# actor-critic


def _head_slices(head_sizes):
    slices = []
    off = 0
    for h in head_sizes:
        slices.append(slice(off, off + h))
        off += h
    return slices


class ActorCritic:
    """Factorized categorical policy and value function over raw observations."""

    def __init__(self, obs_dim: int = STATE_DIM, head_sizes=HEAD_SIZES,
                 hidden=(256, 256), seed: int = 0, mean=None, std=None):
        self.obs_dim = obs_dim
        self.head_sizes = tuple(int(h) for h in head_sizes)
        self.head_slices = _head_slices(self.head_sizes)
        self.action_low = ACTION_LOW[:len(self.head_sizes)] if len(
            self.head_sizes) == ACTION_DIM else np.zeros(len(self.head_sizes), dtype=np.int64)
        n_logits = sum(self.head_sizes)
        acts = ["tanh"] * len(hidden) + ["identity"]
        self.actor = Mlp([obs_dim, *hidden, n_logits], acts, seed=seed)
        self.critic = Mlp([obs_dim, *hidden, 1], acts, seed=seed + 1)
        self.mean = np.zeros(obs_dim) if mean is None else np.asarray(mean, dtype=float)
        self.std = np.ones(obs_dim) if std is None else np.asarray(std, dtype=float)

    def standardize(self, obs) -> np.ndarray:
        return (np.asarray(obs, dtype=np.float64) - self.mean) / self.std

    def _logits(self, obs_batch) -> np.ndarray:
        return self.actor.forward(self.standardize(np.atleast_2d(obs_batch)))

    def head_log_probs(self, obs_batch) -> list[np.ndarray]:
        """Per-head log-probability tables, each (batch, head_size)."""
        logits = self._logits(obs_batch)
        out = []
        for sl in self.head_slices:
            lh = logits[:, sl]
            m = lh.max(axis=1, keepdims=True)
            lse = m + np.log(np.exp(lh - m).sum(axis=1, keepdims=True))
            out.append(lh - lse)
        return out

    def head_probs(self, obs) -> list[np.ndarray]:
        return [np.exp(lp)[0] for lp in self.head_log_probs(obs)]

    def _indices(self, actions) -> np.ndarray:
        return (np.atleast_2d(np.asarray(actions, dtype=np.int64))
                - self.action_low[None, :])

    def log_prob(self, obs_batch, actions) -> np.ndarray:
        """Joint log-probability: sum of the per-head log-probs."""
        idx = self._indices(actions)
        lps = self.head_log_probs(obs_batch)
        total = np.zeros(idx.shape[0])
        for h, lp in enumerate(lps):
            total += lp[np.arange(idx.shape[0]), idx[:, h]]
        return total

    def act(self, obs, rng: np.random.Generator | None = None, greedy: bool = False):
        """Draw one action; returns (action, log_prob, value)."""
        lps = self.head_log_probs(obs)
        action = np.empty(len(self.head_sizes), dtype=np.int64)
        logp = 0.0
        for h, lp in enumerate(lps):
            p = np.exp(lp[0])
            if greedy:
                k = int(np.argmax(p))
            else:
                k = int(np.searchsorted(np.cumsum(p), rng.random()))
                k = min(k, p.shape[0] - 1)
            action[h] = self.action_low[h] + k
            logp += float(lp[0, k])
        value = float(self.critic.forward(self.standardize(np.atleast_2d(obs)))[0, 0])
        return action, logp, value

    def value(self, obs_batch) -> np.ndarray:
        return self.critic.forward(self.standardize(np.atleast_2d(obs_batch)))[:, 0]

    def to_dict(self) -> dict:
        return {
            "actor": self.actor.to_dict(),
            "critic": self.critic.to_dict(),
            "head_sizes": list(self.head_sizes),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True, separators=(",", ":"))
            f.write("\n")

    @classmethod
    def load(cls, path) -> "ActorCritic":
        with open(path) as f:
            doc = json.load(f)
        ac = cls.__new__(cls)
        ac.actor = Mlp.from_dict(doc["actor"])
        ac.critic = Mlp.from_dict(doc["critic"])
        ac.head_sizes = tuple(doc["head_sizes"])
        ac.head_slices = _head_slices(ac.head_sizes)
        ac.obs_dim = ac.actor.sizes[0]
        ac.action_low = ACTION_LOW[:len(ac.head_sizes)] if len(
            ac.head_sizes) == ACTION_DIM else np.zeros(len(ac.head_sizes), dtype=np.int64)
        ac.mean = np.asarray(doc["mean"], dtype=np.float64)
        ac.std = np.asarray(doc["std"], dtype=np.float64)
        return ac


class PolicyController(Controller):
    """Rollout adapter for a trained policy (greedy by default)."""

    def __init__(self, ac: ActorCritic, greedy: bool = True, seed: int = 0, tag: str = "ours"):
        self.ac = ac
        self.greedy = greedy
        self.seed = int(seed)
        self.tag = tag
        self._rng = None
        self.reset()

    def reset(self) -> None:
        self._rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xBC]))

    def act(self, obs) -> np.ndarray:
        action, _, _ = self.ac.act(obs, rng=self._rng, greedy=self.greedy)
        return action


# ---------------------------------------------------------------------------
# PPO


@dataclass(frozen=True)
class PpoConfig:
    lr: float = 3e-4
    weight_decay: float = 1e-4
    total_timesteps: int = 50_000
    gamma: float = 0.97
    clip_range: float = 0.15
    batch_size: int = 64
    gae_lambda: float = 0.95
    update_epochs: int = 10
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    rollout_steps: int = 2048
    hidden: tuple[int, ...] = (256, 256)

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if self.clip_range <= 0:
            raise ValueError("clip_range must be positive")


@dataclass
class RolloutBuffer:
    obs: np.ndarray          # (n, obs_dim)
    actions: np.ndarray      # (n, action_dim)
    log_probs: np.ndarray    # (n,)
    rewards: np.ndarray      # learned rewards of the successor states
    values: np.ndarray
    dones: np.ndarray        # episode boundary after step t
    next_obs: np.ndarray
    last_value: float = 0.0
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self) -> int:
        return self.obs.shape[0]


class RolloutCollector:
    """Steps an env with the current policy, carrying episodes across buffers."""

    def __init__(self, env: LoadBalanceEnv, ac: ActorCritic, reward_model: RewardModel,
                 seed: int):
        self.env = env
        self.ac = ac
        self.reward_model = reward_model
        self.seed = int(seed)
        self._rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xAC]))
        self._episode = 0
        self._obs = None
        self._t = 0

    def _episode_seed(self) -> int:
        s = np.random.SeedSequence([self.seed, 0xE9, self._episode])
        self._episode += 1
        return int(s.generate_state(1)[0])

    def collect(self, n_steps: int) -> RolloutBuffer:
        obs_dim = self.ac.obs_dim
        buf = RolloutBuffer(
            obs=np.empty((n_steps, obs_dim)),
            actions=np.empty((n_steps, len(self.ac.head_sizes)), dtype=np.int64),
            log_probs=np.empty(n_steps),
            rewards=np.empty(n_steps),
            values=np.empty(n_steps),
            dones=np.zeros(n_steps, dtype=np.bool_),
            next_obs=np.empty((n_steps, obs_dim)),
        )
        for t in range(n_steps):
            if self._obs is None:
                self._obs = self.env.reset(self._episode_seed())
                self._t = 0
            action, logp, value = self.ac.act(self._obs, rng=self._rng)
            nxt = self.env.step(action)
            self._t += 1
            done = self._t >= self.env.horizon
            buf.obs[t] = self._obs
            buf.actions[t] = action
            buf.log_probs[t] = logp
            buf.values[t] = value
            buf.rewards[t] = float(self.reward_model.predict(nxt)[0])
            buf.dones[t] = done
            buf.next_obs[t] = nxt
            self._obs = None if done else nxt
        if self._obs is None:
            buf.last_value = 0.0
        else:
            buf.last_value = float(self.ac.value(self._obs)[0])
        return buf


def collect_rollout(env: LoadBalanceEnv, ac: ActorCritic, reward_model: RewardModel,
                    n_steps: int, seed: int) -> RolloutBuffer:
    return RolloutCollector(env, ac, reward_model, seed).collect(n_steps)


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float):
    """Generalized advantage estimation; returns (advantages, returns)."""
    n = len(buffer)
    adv = np.zeros(n)
    next_adv = 0.0
    for t in range(n - 1, -1, -1):
        if buffer.dones[t]:
            next_value = 0.0
            next_adv = 0.0
        elif t + 1 < n:
            next_value = buffer.values[t + 1]
        else:
            next_value = buffer.last_value
        delta = buffer.rewards[t] + gamma * next_value - buffer.values[t]
        adv[t] = delta + gamma * lam * next_adv
        next_adv = adv[t]
    returns = adv + buffer.values
    buffer.advantages = adv
    buffer.returns = returns
    return adv, returns


def ppo_loss(ac: ActorCritic, obs, actions, logp_old, advantages, returns,
             cfg: PpoConfig, want_grads: bool = True):
    """Clipped-surrogate objective on one minibatch.

    Returns (stats, actor_grads, critic_grads); the gradient entries are None
    when want_grads is false. The total objective is

        -mean(min(ratio*A, clip(ratio)*A)) + c_v*mse(V, R) - c_e*entropy
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    b = obs.shape[0]
    z = ac.standardize(obs)
    logits = ac.actor.forward(z)
    idx = ac._indices(actions)
    rows = np.arange(b)

    logp_new = np.zeros(b)
    entropy = np.zeros(b)
    head_cache = []
    for h, sl in enumerate(ac.head_slices):
        lh = logits[:, sl]
        m = lh.max(axis=1, keepdims=True)
        lse = m + np.log(np.exp(lh - m).sum(axis=1, keepdims=True))
        lp = lh - lse
        p = np.exp(lp)
        ent_h = -np.sum(p * lp, axis=1)
        logp_new += lp[rows, idx[:, h]]
        entropy += ent_h
        head_cache.append((lp, p, ent_h))

    ratio = np.exp(logp_new - np.asarray(logp_old, dtype=np.float64))
    adv = np.asarray(advantages, dtype=np.float64)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - cfg.clip_range, 1.0 + cfg.clip_range) * adv
    surrogate = np.minimum(unclipped, clipped)
    policy_loss = -float(np.mean(surrogate))

    v = ac.critic.forward(z)[:, 0]
    ret = np.asarray(returns, dtype=np.float64)
    value_loss = float(np.mean((v - ret) ** 2))
    ent_mean = float(np.mean(entropy))
    total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * ent_mean
    stats = {
        "total_loss": total,
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": ent_mean,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_range)),
        "surrogate_gap": float(np.mean(unclipped) - np.mean(surrogate)),
        "ratio_mean": float(np.mean(ratio)),
    }
    if not math.isfinite(total):
        raise RuntimeError(f"non-finite PPO loss: {stats}")
    if not want_grads:
        return stats, None, None

    # gradient flows through the unclipped branch only where it is the minimum
    active = unclipped <= clipped
    dlogp = -(ratio * adv * active) / b
    upstream = np.zeros_like(logits)
    for h, sl in enumerate(ac.head_slices):
        lp, p, ent_h = head_cache[h]
        dl = -p.copy()
        dl[rows, idx[:, h]] += 1.0
        dent = -p * (lp + ent_h[:, None])
        upstream[:, sl] = dlogp[:, None] * dl - (cfg.entropy_coef / b) * dent
    actor_grads = ac.actor.backward(upstream)
    ups_v = (cfg.value_coef * 2.0 * (v - ret) / b).reshape(-1, 1)
    ac.critic.forward(z)
    critic_grads = ac.critic.backward(ups_v)
    return stats, actor_grads, critic_grads


def ppo_update(ac: ActorCritic, buffer: RolloutBuffer, cfg: PpoConfig,
               adam_actor: AdamState, adam_critic: AdamState,
               rng: np.random.Generator) -> dict:
    """Minibatched clipped-PPO epochs over one buffer; returns mean stats."""
    if buffer.advantages is None:
        compute_gae(buffer, cfg.gamma, cfg.gae_lambda)
    adv = buffer.advantages
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    n = len(buffer)
    agg: dict[str, float] = {}
    batches = 0
    min_gap = np.inf
    for _ in range(cfg.update_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            sel = order[lo:lo + cfg.batch_size]
            stats, ga, gc = ppo_loss(ac, buffer.obs[sel], buffer.actions[sel],
                                     buffer.log_probs[sel], adv[sel],
                                     buffer.returns[sel], cfg)
            adam_update(adam_actor, ac.actor.theta, ga)
            adam_update(adam_critic, ac.critic.theta, gc)
            for k, v in stats.items():
                agg[k] = agg.get(k, 0.0) + v
            min_gap = min(min_gap, stats["surrogate_gap"])
            batches += 1
    out = {k: v / batches for k, v in agg.items()}
    out["surrogate_gap_min"] = float(min_gap)
    return out


def train_policy(make_env, reward_model: RewardModel, cfg: PpoConfig,
                 seed: int):
    """Alternate rollout collection and PPO updates until the step budget.

    Returns (actor_critic, learning_curve); the curve logs the mean learned
    reward of each rollout plus update statistics.
    """
    env = make_env() if callable(make_env) else make_env
    ac = ActorCritic(hidden=cfg.hidden, seed=seed,
                     mean=reward_model.mean, std=reward_model.std)
    adam_actor = AdamState(ac.actor.n_params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    adam_critic = AdamState(ac.critic.n_params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    collector = RolloutCollector(env, ac, reward_model, seed)
    update_rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xBB]))
    curve = []
    steps = 0
    while steps < cfg.total_timesteps:
        n = min(cfg.rollout_steps, cfg.total_timesteps - steps)
        buf = collector.collect(n)
        compute_gae(buf, cfg.gamma, cfg.gae_lambda)
        stats = ppo_update(ac, buf, cfg, adam_actor, adam_critic, update_rng)
        steps += n
        row = {"steps": steps, "mean_reward": float(np.mean(buf.rewards))}
        row.update({k: float(v) for k, v in stats.items()})
        curve.append(row)
    return ac, curve


# ---------------------------------------------------------------------------
# evaluation


def kpis_from_states(states, cfg: KpiConfig) -> np.ndarray:
    """(horizon, 3) array of [T_min, T_std, T_cc] per hour from stored states."""
    states = np.asarray(states, dtype=np.float64)
    n_c = states.shape[1] // 3
    out = np.empty((states.shape[0], 3))
    for h, row in enumerate(states):
        ip = row[n_c:2 * n_c]
        out[h, 0] = t_min(ip)
        out[h, 1] = t_std(ip)
        out[h, 2] = t_cc(ip, cfg.congestion_threshold_mbps)
    return out


@dataclass
class KpiSeries:
    scenario: int
    seeds: list[int]
    hourly: np.ndarray  # (n_seeds, horizon, 3)

    def per_seed_means(self) -> np.ndarray:
        return self.hourly.mean(axis=1)

    def aggregate(self) -> tuple[np.ndarray, np.ndarray]:
        """(mean, std) of the per-seed KPI means."""
        per_seed = self.per_seed_means()
        return per_seed.mean(axis=0), per_seed.std(axis=0)

    def hourly_mean(self) -> np.ndarray:
        return self.hourly.mean(axis=0)


@dataclass
class KpiReport:
    method: str
    kpi_config: KpiConfig
    series: dict[int, KpiSeries] = field(default_factory=dict)

    def write_timeseries_csv(self, scenario: int, path) -> None:
        """Hourly seed-mean KPIs plus an aggregate summary row."""
        s = self.series[scenario]
        hourly = s.hourly_mean()
        mean, _ = s.aggregate()
        lines = ["hour,t_min,t_std,t_cc"]
        for h, row in enumerate(hourly):
            lines.append(f"{h},{row[0]!r},{row[1]!r},{row[2]!r}")
        lines.append(f"mean,{mean[0]!r},{mean[1]!r},{mean[2]!r}")
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")

    def summary_rows(self) -> list[dict]:
        rows = []
        for sid in sorted(self.series):
            mean, std = self.series[sid].aggregate()
            rows.append({
                "scenario": sid, "method": self.method,
                "t_min_mean": float(mean[0]), "t_min_std": float(std[0]),
                "t_std_mean": float(mean[1]), "t_std_std": float(std[1]),
                "t_cc_mean": float(mean[2]), "t_cc_std": float(std[2]),
            })
        return rows


def evaluate_controller(controller: Controller, env_builder, scenario_ids, seeds,
                        kpi_config: KpiConfig, horizon: int | None = None) -> KpiReport:
    """Roll the controller on each (scenario, seed) and collect sector KPIs.

    `env_builder(scenario_id)` must return a fresh LoadBalanceEnv. KPIs come
    from the same stored states a trajectory would carry.
    """
    report = KpiReport(method=controller.tag, kpi_config=kpi_config)
    for sid in scenario_ids:
        env = env_builder(sid)
        h = horizon or env.horizon
        hourly = np.empty((len(seeds), h, 3))
        for i, seed in enumerate(seeds):
            traj = rollout(env, controller, seed, horizon=h)
            hourly[i] = kpis_from_states(traj.states, kpi_config)
        report.series[sid] = KpiSeries(scenario=sid, seeds=list(seeds), hourly=hourly)
    return report


def report_from_trajectories(method: str, trajs_by_scenario: dict,
                             kpi_config: KpiConfig) -> KpiReport:
    """KPI report computed from stored trajectories (demonstration average)."""
    report = KpiReport(method=method, kpi_config=kpi_config)
    for sid, trajs in trajs_by_scenario.items():
        hourly = np.stack([kpis_from_states(t.states, kpi_config) for t in trajs])
        report.series[sid] = KpiSeries(scenario=sid,
                                       seeds=[t.seed for t in trajs], hourly=hourly)
    return report


def write_learning_curve_csv(curve, path) -> None:
    if not curve:
        cols = ["steps", "mean_reward"]
    else:
        cols = list(curve[0].keys())
    lines = [",".join(cols)]
    for row in curve:
        lines.append(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                              for c in cols))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
