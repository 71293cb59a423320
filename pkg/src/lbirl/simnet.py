"""Simulator state and stepping.

State is kept as flat per-UE / per-cell arrays so the jitted kernels can run
over them directly. Window accumulators collect served bits, busy seconds,
resource usage and UE counts since the last control boundary; `cell_stats`
turns them into per-cell averages and `reset_window` starts a new window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lbmech import LbParams
from .radio import RadioConfig
from .topology import Topology, build_topology
from .traffic import TrafficScenario


@dataclass(frozen=True)
class SimParams:
    dt_s: float = 10.0
    control_ticks: int = 360          # simulation ticks per control interval (1 h)
    reselect_period_ticks: int = 6    # idle camping refresh cadence
    iulb_load_trigger: float = 0.5    # resource-use fraction that arms reselection
    mlb_base_trigger_mbps: float = 2.2
    mlb_offset_unit: float = 0.05     # trigger change per action unit, fraction of base
    mlb_quality_base_db: float = -3.0
    mlb_quality_unit_db: float = 1.0
    mlb_score_quality_weight: float = 0.1  # Mbps credited per dB of signal delta


@dataclass(frozen=True)
class CellStats:
    ip_throughput: float  # Mbps served per UE-active second over the window
    prb_util: float       # fraction of resources in use, in [0, 1]
    active_ues: float     # time-averaged counts over the window
    idle_ues: float


@dataclass
class Ue:
    id: int
    position: np.ndarray
    speed: float
    heading: float
    mode: str  # "idle" | "active"
    serving_cell: int
    backlog: float
    next_request_time: float


class SimState:
    """Mutable network state: UE arrays, per-cell window accumulators, RNG."""

    def __init__(self, topology: Topology, scenario: TrafficScenario,
                 radio: RadioConfig, params: SimParams, seed: int):
        self.topology = topology
        self.scenario = scenario
        self.radio = radio
        self.params = params
        self.seed = int(seed)
        self.rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
        n = scenario.ue_count
        self.pos_x = np.empty(n)
        self.pos_y = np.empty(n)
        self.vel_x = np.empty(n)
        self.vel_y = np.empty(n)
        self.speed = np.empty(n)
        self.active = np.zeros(n, dtype=np.bool_)
        self.serving = np.zeros(n, dtype=np.int64)
        self.backlog = np.zeros(n)
        self.next_req = np.zeros(n)
        self.ue_interval = np.full(n, scenario.request_interval_s)
        k = max(scenario.hotspot_count, 1)
        self.hot_x = np.zeros(k)
        self.hot_y = np.zeros(k)
        self.hot_amp = np.zeros(k)  # zero amplitude = flat demand field
        self.hot_inv2w2 = 1.0 / (2.0 * scenario.hotspot_width_m ** 2)
        c = topology.n_cells
        self.win_bits = np.zeros(c)
        self.win_prb = np.zeros(c)
        self.win_act_sec = np.zeros(c)
        self.win_idle_sec = np.zeros(c)
        self.prb_last = np.zeros(c)
        self.resel_count = np.zeros(topology.n_sectors, dtype=np.int64)
        self.ho_count = np.zeros(topology.n_sectors, dtype=np.int64)
        self._clock_io = np.zeros(2)  # [clock seconds, window seconds]
        self.tick_count = 0

    @property
    def clock(self) -> float:
        return float(self._clock_io[0])

    @property
    def window_seconds(self) -> float:
        return float(self._clock_io[1])

    @property
    def ue_count(self) -> int:
        return self.pos_x.shape[0]

    def ue(self, i: int) -> Ue:
        return Ue(
            id=i,
            position=np.array([self.pos_x[i], self.pos_y[i]]),
            speed=float(self.speed[i]),
            heading=float(math.atan2(self.vel_y[i], self.vel_x[i])),
            mode="active" if self.active[i] else "idle",
            serving_cell=int(self.serving[i]),
            backlog=float(self.backlog[i]),
            next_request_time=float(self.next_req[i]),
        )

    def counts_by_cell(self) -> np.ndarray:
        """Instantaneous (active + idle) UE count per cell."""
        return np.bincount(self.serving, minlength=self.topology.n_cells)

    def fingerprint(self) -> bytes:
        """Byte snapshot of the dynamic state, for determinism checks."""
        parts = [a.tobytes() for a in (
            self.pos_x, self.pos_y, self.vel_x, self.vel_y, self.active.astype(np.uint8),
            self.serving, self.backlog, self.next_req, self.ue_interval, self.win_bits,
            self.win_prb, self.win_act_sec, self.win_idle_sec, self.prb_last,
            self.resel_count, self.ho_count, self._clock_io)]
        return b"".join(parts)


def init_scenario(topology: Topology, scenario: TrafficScenario, seed: int,
                  radio: RadioConfig | None = None,
                  params: SimParams | None = None) -> SimState:
    """Place UEs uniformly on the coverage disc, all idle, and camp them.

    Identical (topology, scenario, seed) arguments produce a bit-identical
    state.
    """
    if scenario.ue_count <= 0:
        raise ValueError("scenario.ue_count must be positive")
    state = SimState(topology, scenario, radio or RadioConfig(), params or SimParams(), seed)
    rng = state.rng
    n = scenario.ue_count
    radius = topology.coverage_radius_m * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    state.pos_x[:] = radius * np.cos(theta)
    state.pos_y[:] = radius * np.sin(theta)
    heading = 2.0 * np.pi * rng.random(n)
    state.speed[:] = rng.uniform(scenario.speed_min_ms, scenario.speed_max_ms, n)
    state.vel_x[:] = state.speed * np.cos(heading)
    state.vel_y[:] = state.speed * np.sin(heading)
    # carrier priorities start uniform; camping then picks the strongest sector
    carriers = rng.integers(0, topology.config.cells_per_sector, n)
    state.serving[:] = topology.sector_cells[0][carriers]
    _kernels._camp_idle(
        state.pos_x, state.pos_y, state.active, state.serving, False,
        topology.site_xy[:, 0].copy(), topology.site_xy[:, 1].copy(),
        topology.sector_site, topology.sector_azimuth_rad, topology.sector_cells,
        topology.cell_carrier,
        *state.radio.kernel_constants()[:6])
    if scenario.user_rate_sigma > 0:
        s = scenario.user_rate_sigma
        rate = np.clip(rng.lognormal(-0.5 * s * s, s, n), 0.1, 10.0)
        state.ue_interval[:] = scenario.request_interval_s / rate
    if scenario.hotspot_count > 0:
        k = scenario.hotspot_count
        hr = 0.8 * topology.coverage_radius_m * np.sqrt(rng.random(k))
        ht = 2.0 * np.pi * rng.random(k)
        state.hot_x[:] = hr * np.cos(ht)
        state.hot_y[:] = hr * np.sin(ht)
        state.hot_amp[:] = scenario.hotspot_amplitude * rng.random(k)
    state.next_req[:] = rng.exponential(state.ue_interval)
    return state


def _topology_kernel_arrays(topo: Topology):
    return (
        np.ascontiguousarray(topo.site_xy[:, 0]),
        np.ascontiguousarray(topo.site_xy[:, 1]),
        topo.sector_site,
        topo.sector_azimuth_rad,
        topo.cell_sector,
        topo.cell_site,
        topo.cell_azimuth_rad,
        topo.cell_carrier,
        topo.sector_cells,
        topo.same_site_cells,
        topo.cell_capacity_mbps * 1e6,  # bits/s
        topo.coverage_radius_m,
    )


def advance(state: SimState, lb: LbParams, n_ticks: int,
            dt: float | None = None) -> SimState:
    """Run n_ticks of the simulation under the given balancing parameters.

    Randomness is drawn up-front from the state's generator in a fixed order
    (request sizes, think times, reselection draws), so the stream position
    after the call depends only on n_ticks and the UE count.
    """
    if dt is None:
        dt = state.params.dt_s
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = state.ue_count
    rnorm = state.rng.standard_normal((n_ticks, n))
    rexp_u = state.rng.random((n_ticks, n))
    rres = state.rng.random((n_ticks, n))
    scen = state.scenario
    _kernels.run_ticks(
        n_ticks, float(dt), state._clock_io, state.tick_count,
        state.params.reselect_period_ticks,
        state.pos_x, state.pos_y, state.vel_x, state.vel_y, state.active,
        state.serving, state.backlog, state.next_req,
        state.win_bits, state.win_prb, state.win_act_sec,
        state.win_idle_sec, state.prb_last,
        state.resel_count, state.ho_count,
        *_topology_kernel_arrays(state.topology),
        *state.radio.kernel_constants(),
        scen.packet_log_mu, scen.packet_sigma, state.ue_interval,
        state.hot_x, state.hot_y, state.hot_amp, state.hot_inv2w2,
        np.asarray(scen.diurnal_profile),
        *lb.kernel_arrays(state.topology, state.params),
        rnorm, rexp_u, rres)
    state.tick_count += n_ticks
    return state


def step_sim(state: SimState, lb_params: LbParams, dt: float | None = None):
    """Advance one tick and return (state, per-cell stats for the open window)."""
    advance(state, lb_params, 1, dt=dt)
    return state, cell_stats(state)


def cell_stats(state: SimState, sector: int | None = None) -> list[CellStats]:
    """Window-averaged stats; all cells, or one sector's cells by carrier.

    An empty window yields all-zero stats.
    """
    topo = state.topology
    if sector is not None:
        if not (0 <= sector < topo.n_sectors):
            raise ValueError(f"sector {sector} does not exist")
        ids = topo.sector_cells[sector]
    else:
        ids = np.arange(topo.n_cells)
    win = state.window_seconds
    out = []
    for c in ids:
        act = state.win_act_sec[c]
        x = (state.win_bits[c] / act) / 1e6 if act > 0 else 0.0
        if win > 0:
            out.append(CellStats(
                ip_throughput=float(x),
                prb_util=float(state.win_prb[c] / win),
                active_ues=float(state.win_act_sec[c] / win),
                idle_ues=float(state.win_idle_sec[c] / win),
            ))
        else:
            out.append(CellStats(0.0, 0.0, 0.0, 0.0))
    return out


def reset_window(state: SimState) -> None:
    """Zero the window accumulators; call at control boundaries only."""
    state.win_bits[:] = 0.0
    state.win_prb[:] = 0.0
    state.win_act_sec[:] = 0.0
    state.win_idle_sec[:] = 0.0
    state._clock_io[1] = 0.0


def write_cell_stats_csv(path, hourly_stats) -> None:
    """CSV export of per-hour CellStats: hour,cell_id,x_i,prb_util,active,idle."""
    lines = ["hour,cell_id,x_i,prb_util,active,idle"]
    for hour, stats in enumerate(hourly_stats):
        for cid, st in enumerate(stats):
            lines.append(f"{hour},{cid},{st.ip_throughput!r},{st.prb_util!r},"
                         f"{st.active_ues!r},{st.idle_ues!r}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def default_network(topology_config=None, radio=None, params=None):
    """Convenience bundle of (topology, radio, params) with defaults filled in."""
    topo = build_topology(topology_config)
    return topo, radio or RadioConfig(), params or SimParams()
