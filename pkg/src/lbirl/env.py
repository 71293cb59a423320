"""Hourly-control MDP wrapper around the simulator.

Observations are 12-vectors ordered [active UEs per cell, throughput per
cell, resource use per cell] for the controlled sector, averaged over the
elapsed control hour. Actions are 16 integers: four reselection weights in
[0, 10] followed by three handover offsets per cell in [-6, 6], grouped per
cell as (source trigger, target admission, quality gate).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lbmech import LbParams
from .radio import RadioConfig
from .simnet import SimParams, advance, cell_stats, init_scenario, reset_window
from .topology import Topology, build_topology
from .traffic import TrafficScenario

IULB_COMPONENTS = 4
MLB_COMPONENTS = 12
ACTION_DIM = IULB_COMPONENTS + MLB_COMPONENTS
STATE_DIM = 12

ACTION_LOW = np.array([0] * IULB_COMPONENTS + [-6] * MLB_COMPONENTS, dtype=np.int64)
ACTION_HIGH = np.array([10] * IULB_COMPONENTS + [6] * MLB_COMPONENTS, dtype=np.int64)

NEUTRAL_ACTION = np.array([5] * IULB_COMPONENTS + [0] * MLB_COMPONENTS, dtype=np.int64)


def clamp_action(action) -> tuple[np.ndarray, int]:
    """Clamp to the action box; returns (clamped, number of clamped components)."""
    a = np.asarray(action, dtype=np.int64).reshape(-1)
    if a.shape[0] != ACTION_DIM:
        raise ValueError(f"action must have {ACTION_DIM} components, got {a.shape[0]}")
    clipped = np.clip(a, ACTION_LOW, ACTION_HIGH)
    return clipped, int(np.sum(clipped != a))


def decode_action(action):
    """Split a clamped action into (weights, source, admit, quality) arrays."""
    a = np.asarray(action, dtype=np.int64)
    weights = a[:IULB_COMPONENTS].astype(np.float64)
    mlb = a[IULB_COMPONENTS:].reshape(IULB_COMPONENTS, 3)
    return weights, mlb[:, 0].astype(float), mlb[:, 1].astype(float), mlb[:, 2].astype(float)


@dataclass
class Trajectory:
    """One episode: action a_t and the hour-averaged state it produced."""
    scenario: int
    seed: int
    controller: str
    states: np.ndarray   # (horizon, 12)
    actions: np.ndarray  # (horizon, 16)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.int64)
        if self.states.shape[0] != self.actions.shape[0]:
            raise ValueError("states and actions must have equal length")

    def __len__(self) -> int:
        return self.states.shape[0]


class LoadBalanceEnv:
    """One controlled sector of the simulated network, stepped hourly."""

    def __init__(self, scenario: TrafficScenario, topology: Topology | None = None,
                 radio: RadioConfig | None = None, sim_params: SimParams | None = None,
                 controlled_sector: int = 0, horizon: int = 168):
        self.scenario = scenario
        self.topology = topology or build_topology()
        self.radio = radio or RadioConfig()
        self.sim_params = sim_params or SimParams()
        self.controlled_sector = controlled_sector
        self.horizon = horizon
        self.clamp_warnings = 0
        self._neutral = LbParams.neutral(self.topology, self.sim_params)
        self._state = None
        self.hour = 0
        self.last_cell_stats = None

    def _observe(self) -> np.ndarray:
        stats = cell_stats(self._state, self.controlled_sector)
        self.last_cell_stats = cell_stats(self._state)
        obs = np.array([st.active_ues for st in stats]
                       + [st.ip_throughput for st in stats]
                       + [st.prb_util for st in stats])
        return obs

    def reset(self, seed: int) -> np.ndarray:
        """Fresh simulation plus one warm-up hour under neutral parameters."""
        self._state = init_scenario(self.topology, self.scenario, seed,
                                    self.radio, self.sim_params)
        self.hour = 0
        advance(self._state, self._neutral, self.sim_params.control_ticks)
        obs = self._observe()
        reset_window(self._state)
        return obs

    def step(self, action) -> np.ndarray:
        """Apply the action to the controlled sector for one control hour."""
        if self._state is None:
            raise RuntimeError("reset() must be called before step()")
        clamped, n_clamped = clamp_action(action)
        self.clamp_warnings += n_clamped
        weights, src, admit, qual = decode_action(clamped)
        lb = self._neutral.replace_sector(self.controlled_sector, weights, src, admit, qual)
        advance(self._state, lb, self.sim_params.control_ticks)
        obs = self._observe()
        reset_window(self._state)
        self.hour += 1
        assert int(self._state.counts_by_cell().sum()) == self._state.ue_count
        return obs

    @property
    def sim_state(self):
        return self._state

    def reselections_in_sector(self) -> int:
        return int(self._state.resel_count[self.controlled_sector])

    def handovers_in_sector(self) -> int:
        return int(self._state.ho_count[self.controlled_sector])


def rollout(env: LoadBalanceEnv, controller, seed: int,
            horizon: int | None = None, stats_sink=None) -> Trajectory:
    """Run a full episode; deterministic given the env seed and controller seed.

    `stats_sink`, when given, receives the full per-cell stats list each hour.
    """
    horizon = env.horizon if horizon is None else horizon
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    controller.reset()
    obs = env.reset(seed)
    states = np.empty((horizon, STATE_DIM))
    actions = np.empty((horizon, ACTION_DIM), dtype=np.int64)
    for t in range(horizon):
        a = controller.act(obs)
        obs = env.step(a)
        actions[t] = np.asarray(a, dtype=np.int64)
        states[t] = obs
        if stats_sink is not None:
            stats_sink(env.last_cell_stats)
    return Trajectory(scenario=env.scenario.id, seed=int(seed),
                      controller=controller.tag, states=states, actions=actions)


def save_trajectory(traj: Trajectory, path) -> None:
    doc = {
        "scenario": int(traj.scenario),
        "seed": int(traj.seed),
        "controller": traj.controller,
        "states": [[float(v) for v in row] for row in traj.states],
        "actions": [[int(v) for v in row] for row in traj.actions],
    }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def load_trajectory(path) -> Trajectory:
    with open(path) as f:
        doc = json.load(f)
    return Trajectory(scenario=doc["scenario"], seed=doc["seed"],
                      controller=doc["controller"],
                      states=np.array(doc["states"], dtype=np.float64),
                      actions=np.array(doc["actions"], dtype=np.int64))


def write_states_csv(traj: Trajectory, path) -> None:
    n_c = STATE_DIM // 3
    cols = ([f"ue_c{i+1}" for i in range(n_c)]
            + [f"ip_c{i+1}" for i in range(n_c)]
            + [f"prb_c{i+1}" for i in range(n_c)])
    lines = ["hour," + ",".join(cols)]
    for h, row in enumerate(traj.states):
        lines.append(str(h) + "," + ",".join(repr(float(v)) for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
