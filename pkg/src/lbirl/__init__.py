"""Load-balancing control workbench for multi-carrier cellular networks.

Simulates a small hexagonal RAN, collects ranked demonstrations, learns a
reward network from sub-trajectory preferences, trains a PPO controller on
the learned reward, and evaluates throughput KPIs against rule baselines.
"""

__version__ = "0.1.0"

from .topology import Topology, TopologyConfig, Cell, build_topology
from .radio import RadioConfig, signal_quality, spectral_efficiency
from .traffic import TrafficScenario, default_diurnal_profile, scenario_preset
from .simnet import SimParams, SimState, CellStats, init_scenario, step_sim, cell_stats
from .lbmech import IulbParams, MlbParams, LbParams, apply_iulb, apply_mlb
from .kpi import KpiConfig, t_min, t_std, t_cc, rank_reward, trajectory_return, rank_demos, pearson
from .env import LoadBalanceEnv, Trajectory, rollout
from .nn import Mlp, AdamState, adam_update
from .reward import (
    DemoSet,
    PreferencePair,
    RewardModel,
    TrainRewardConfig,
    tcs_sample,
    contiguous_sample,
    mislabel_rate,
    pref_prob,
    trex_loss,
    train_reward,
    predict_return,
    extrapolation_report,
)
from .policy import (
    ActorCritic,
    PpoConfig,
    RolloutBuffer,
    RandomController,
    FixedRuleController,
    AdaptiveRuleController,
    PolicyController,
    collect_rollout,
    compute_gae,
    ppo_update,
    train_policy,
    evaluate_controller,
    KpiReport,
)
from .config import RunConfig, ConfigError
